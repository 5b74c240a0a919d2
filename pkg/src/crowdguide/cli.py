"""Command line entry point: ``crowdguide {run,sweep,summarize,validate}``.

Failures exit nonzero after printing a single line to stderr::

    error code=<config|io|diverged|usage> [line=<n>] [key=<k>] msg="<text>"
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, dump_config, dump_experiment, parse_config, parse_experiment
from .domain import InvalidConfigError
from .experiment import run_batch, summarize_dir
from .records import write_metrics
from .simulator import SimulationDiverged, run

EXIT_CODES = {"usage": 2, "config": 3, "io": 4, "diverged": 5}
U64_MAX = (1 << 64) - 1


class CliError(Exception):
    def __init__(self, code: str, message: str, line=None, key=None):
        super().__init__(message)
        self.code = code
        self.line = line
        self.key = key

    def render(self) -> str:
        parts = [f"error code={self.code}"]
        if self.line is not None:
            parts.append(f"line={self.line}")
        if self.key is not None:
            parts.append(f"key={self.key}")
        parts.append(f"msg={json.dumps(str(self))}")
        return " ".join(parts)


def seed_arg(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _read(path) -> str:
    if path is None:
        return ""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from None


def _is_experiment(text: str, overrides) -> bool:
    keys = [ln.split("#", 1)[0].split("=", 1)[0].strip() for ln in text.splitlines()]
    keys += [o.split("=", 1)[0].strip() for o in overrides]
    return any(k.startswith("sweep.") for k in keys)


def cmd_run(args) -> int:
    cfg = parse_config(_read(args.config), args.set)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    hook = None
    if args.snapshots:
        from .snapshot import snapshot_callback

        hook = snapshot_callback(cfg, out / "snapshots", args.snapshots)
    metrics = run(cfg, on_step=hook, keep_robot_trace=False)
    write_metrics(metrics.rows, out / "metrics.csv")
    final = metrics.final
    print(f"t={final['t']:g} evac_rate={final['evac_rate']:g} density_err={final['density_err']:.6g}")
    return 0


def cmd_sweep(args) -> int:
    spec = parse_experiment(_read(args.config), args.set)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.out is not None:
        spec = replace(spec, output=args.out)
    if args.snapshots is not None:
        spec = replace(spec, snapshots=args.snapshots)
    out = Path(spec.output)
    out.mkdir(parents=True, exist_ok=True)
    # the output location is left out so sweeps compare byte-for-byte across directories
    effective = [ln for ln in dump_experiment(spec).splitlines() if not ln.startswith("sweep.output ")]
    (out / "experiment.txt").write_text("\n".join(effective) + "\n", encoding="utf-8")
    rows = run_batch(spec, args.parallelism, out)
    for r in rows:
        print(f"N={r.humans} n={r.robots} regime={r.regime} median={r.rate_median:g} failures={r.failures}")
    return 0


def cmd_summarize(args) -> int:
    rows = summarize_dir(args.out)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'summary.csv'}")
    return 0


def cmd_validate(args) -> int:
    text = _read(args.config)
    if _is_experiment(text, args.set):
        sys.stdout.write(dump_experiment(parse_experiment(text, args.set)))
    else:
        sys.stdout.write(dump_config(parse_config(text, args.set)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdguide", description="Robot-guided crowd evacuation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="key = value configuration file (defaults if omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key (repeatable)")
        p.add_argument("--seed", type=seed_arg, help="base seed, unsigned 64-bit")
        p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("run", help="single simulation, writes metrics.csv")
    common(p, "run-out")
    p.add_argument("--snapshots", type=nonneg_int, default=0, metavar="K", help="PNG frame every K iterations (0 = off)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="batch over an experiment spec")
    common(p, None)
    p.add_argument("--parallelism", type=pos_int, default=1, metavar="K", help="worker processes")
    p.add_argument("--snapshots", type=nonneg_int, default=None, metavar="K")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="rebuild summary.csv from stored run metrics")
    p.add_argument("--out", required=True, help="sweep output directory")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("validate", help="parse a config and print the effective settings")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        print(CliError("usage", "invalid command line").render(), file=sys.stderr)
        return EXIT_CODES["usage"]
    try:
        return args.func(args)
    except CliError as exc:
        err = exc
    except ConfigError as exc:
        err = CliError("config", str(exc), exc.line, exc.key)
    except InvalidConfigError as exc:
        err = CliError("config", str(exc))
    except SimulationDiverged as exc:
        err = CliError("diverged", str(exc))
    except OSError as exc:
        err = CliError("io", f"{exc.filename or ''}: {exc.strerror or exc}")
    print(err.render(), file=sys.stderr)
    return EXIT_CODES[err.code]


if __name__ == "__main__":
    sys.exit(main())
