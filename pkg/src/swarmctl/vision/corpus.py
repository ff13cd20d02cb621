"""Synthetic frame sequences with known swarm positions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import ChannelConfig, GridPosition
from .render import Disc, SceneSpec

SWARM_INTENSITY = 9_000
CONTAMINANT_INTENSITY = 14_000
BUBBLE_INTENSITY = 16_000


@dataclass(frozen=True)
class CorpusConfig:
    n_frames: int = 100
    swarm_diameter_um: tuple[float, float] = (50.0, 200.0)
    n_contaminants: tuple[int, int] = (3, 8)
    contaminant_diameter_um: tuple[float, float] = (10.0, 50.0)
    n_bubbles: int = 6
    step_cells: float = 2.5
    noise_sigma: float = 1_500.0


def _clear(p, r, placed, gap=3.0):
    return all(math.hypot(p[0] - q[0], p[1] - q[1]) > r + s + gap for q, s in placed)


def swarm_path(n: int, rng: np.random.Generator, radius: float, step: float, grid_n: int = 300):
    """Smooth wandering path that stays ``radius + 5`` cells inside the frame."""
    lo, hi = radius + 5.0, grid_n - 1.0 - radius - 5.0
    x, y = rng.uniform(lo, hi, size=2)
    heading = rng.uniform(0, 2 * math.pi)
    pts = []
    for _ in range(n):
        pts.append((x, y))
        heading += rng.normal(0.0, 0.3)
        nx, ny = x + step * math.cos(heading), y + step * math.sin(heading)
        if not (lo <= nx <= hi and lo <= ny <= hi):
            heading += math.pi
            nx, ny = x + step * math.cos(heading), y + step * math.sin(heading)
        x, y = min(max(nx, lo), hi), min(max(ny, lo), hi)
    return pts


def make_corpus(seed: int, cfg: CorpusConfig = CorpusConfig(),
                channel: ChannelConfig = ChannelConfig()) -> list[SceneSpec]:
    """Scenes of one swarm moving among static contaminants and stray bubbles.

    Contaminants and bubbles never overlap the swarm's track or each other,
    so every dark blob is a separate object.
    """
    rng = np.random.Generator(np.random.MT19937(seed))
    grid_n = channel.grid_n
    cell = channel.cell_um
    d_swarm = float(rng.uniform(*cfg.swarm_diameter_um))
    r_swarm = 0.5 * d_swarm / cell
    track = swarm_path(cfg.n_frames, rng, r_swarm, cfg.step_cells, grid_n)
    placed = [((x, y), r_swarm) for x, y in track]
    statics = []
    n_cont = int(rng.integers(cfg.n_contaminants[0], cfg.n_contaminants[1] + 1))
    for kind, count in (("contaminant", n_cont), ("bubble", cfg.n_bubbles)):
        made = 0
        for _ in range(200 * max(count, 1)):
            if made == count:
                break
            if kind == "contaminant":
                d = float(rng.uniform(*cfg.contaminant_diameter_um))
            else:
                d = float(rng.uniform(2.0, 10.0))
            r = 0.5 * d / cell
            p = tuple(rng.uniform(r + 2, grid_n - 3 - r, size=2))
            if _clear(p, r, placed):
                placed.append((p, r))
                inten = CONTAMINANT_INTENSITY if kind == "contaminant" else BUBBLE_INTENSITY
                statics.append((kind, Disc(GridPosition(*p), d, inten)))
                made += 1
    conts = tuple(d for k, d in statics if k == "contaminant")
    bubs = tuple(d for k, d in statics if k == "bubble")
    return [SceneSpec(Disc(GridPosition(x, y), d_swarm, SWARM_INTENSITY), conts, bubs,
                      noise_sigma=cfg.noise_sigma, channel=channel)
            for x, y in track]
