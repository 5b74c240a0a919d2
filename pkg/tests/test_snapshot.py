import numpy as np
from PIL import Image

from crowdguide.config import SimConfig
from crowdguide.domain import RobotTeamState
from crowdguide.simulator import initial_state, observe, run
from crowdguide.snapshot import SIZE, emit_snapshot, heatmap, render, snapshot_callback, snapshot_name


def test_uniform_density_is_flat():
    pixels = np.asarray(heatmap(np.full((30, 30), 0.7)))
    assert pixels.shape == (SIZE, SIZE, 3)
    assert np.all(pixels == pixels[0, 0])


def test_heatmap_orientation():
    v = np.zeros((30, 30))
    v[-1, -1] = 1.0  # node at (1, 1)
    pixels = np.asarray(heatmap(v))
    assert pixels[0, -1, 0] == 255 and pixels[-1, 0, 0] == 0


def _state(**kw):
    cfg = SimConfig(humans=5, robots=1, **kw)
    s = initial_state(cfg)
    return cfg, s


def test_robot_glyph_points_along_x():
    cfg, s = _state()
    s.robots = RobotTeamState([[0.5, 0.5]], [[0, 0]], [0.0])
    s.humans.positions[:] = 0.05
    s.cache = observe(s, cfg)
    px = np.asarray(render(s)).astype(int)
    red = (px[..., 0] == 220) & (px[..., 1] == 30)
    rows, cols = np.nonzero(red)
    c = (SIZE - 1) / 2
    assert cols.max() - c > 15 and c - cols.min() < 6
    assert rows.max() - rows.min() <= 10


def test_same_state_same_bytes(tmp_path):
    cfg, s = _state(regime="static")
    s.cache = observe(s, cfg)
    a = emit_snapshot(s, tmp_path / "a.png").read_bytes()
    b = emit_snapshot(s, tmp_path / "b.png").read_bytes()
    assert a == b
    assert Image.open(tmp_path / "a.png").size == (SIZE, SIZE)


def test_callback_cadence_and_names(tmp_path):
    cfg = SimConfig(humans=10, robots=2, horizon=0.5, seed=4)
    run(cfg, on_step=snapshot_callback(cfg, tmp_path, 2))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted(snapshot_name(4, k) for k in (0, 2, 4))
    assert snapshot_name(4, 2) == "run-4-t2.png"
