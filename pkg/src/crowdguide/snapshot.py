"""PNG frames of a running simulation.

Each frame is ``SIZE x SIZE`` RGB pixels (480 x 480). Layers, bottom to top:
density heatmap (black to yellow, scaled to the frame's own maximum),
obstacle squares (grey), humans (white dots), robots (red disks with a line
from the center along the heading). The y axis points up.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .domain import Domain

SIZE = 480


def snapshot_name(seed: int, iteration: int) -> str:
    return f"run-{seed}-t{iteration}.png"


def _to_px(points, domain: Domain, size: int) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    s = (p - lo) / (hi - lo)
    return np.column_stack([s[:, 0] * (size - 1), (1.0 - s[:, 1]) * (size - 1)])


def heatmap(values: np.ndarray, size: int = SIZE) -> Image.Image:
    """Nearest-node heatmap of an ``(R, R)`` field indexed ``[ix, iy]``."""
    v = np.asarray(values, dtype=float)
    top, bottom = v.max(), v.min()
    level = (v - bottom) / (top - bottom) if top > bottom else np.zeros_like(v)
    # rows of the image run from high y to low y
    img = level.T[::-1]
    r = v.shape[0]
    idx = np.minimum((np.arange(size) * r) // size, r - 1)
    img = img[np.ix_(idx, idx)]
    rgb = np.stack([img, img, 0.3 * img], axis=-1)
    return Image.fromarray(np.round(255 * rgb).astype(np.uint8), "RGB")


def render(state, size: int = SIZE) -> Image.Image:
    """Draw one frame from a simulation state with an observed field cache."""
    rho = state.cache.rho
    domain = rho.domain
    im = heatmap(rho.values, size)
    draw = ImageDraw.Draw(im)
    scale = (size - 1) / (np.asarray(domain.upper) - np.asarray(domain.lower))

    obstacles = state.obstacles
    if len(obstacles.obstacles):
        centers = _to_px(obstacles.centers(state.t), domain, size)
        half = np.asarray(obstacles.half_extents()) * scale
        for (cx, cy), (hx, hy) in zip(centers, half):
            draw.rectangle([cx - hx, cy - hy, cx + hx, cy + hy], fill=(128, 128, 128))

    for x, y in _to_px(state.humans.positions, domain, size):
        draw.ellipse([x - 1.5, y - 1.5, x + 1.5, y + 1.5], fill=(255, 255, 255))

    glyph = 0.05 * scale[0]
    for (x, y), th in zip(_to_px(state.robots.positions, domain, size), state.robots.directions):
        draw.ellipse([x - 4, y - 4, x + 4, y + 4], fill=(220, 30, 30))
        draw.line([x, y, x + glyph * math.cos(th), y - glyph * math.sin(th)], fill=(220, 30, 30), width=2)
    return im


def emit_snapshot(state, path) -> Path:
    path = Path(path)
    render(state).save(path, format="PNG")
    return path


def snapshot_callback(config, directory, every: int):
    """``on_step`` hook for ``run`` writing a frame every ``every`` iterations."""
    if every < 1:
        raise ValueError("snapshot cadence must be >= 1")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def hook(state):
        if state.iteration % every == 0:
            emit_snapshot(state, directory / snapshot_name(config.seed, state.iteration))

    return hook
