"""Synthetic microscope frames.

The camera sees a bright channel with dark discs: the swarm, stray single
bubbles and dust.  Coordinates are grid cells, as everywhere else; the
renderer converts to 2048 x 2048 sensor pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import ChannelConfig, GridPosition

HI_RES = 2048
HI_MAX = 65535


@dataclass(frozen=True)
class Disc:
    position: GridPosition
    diameter_um: float
    intensity: int

    def __post_init__(self):
        if self.diameter_um <= 0:
            raise ValueError("disc diameter must be positive")
        if not 0 <= self.intensity <= HI_MAX:
            raise ValueError("intensity must fit 16 bits")


@dataclass(frozen=True)
class SceneSpec:
    swarm: Disc | None = None
    contaminants: tuple[Disc, ...] = ()
    bubbles: tuple[Disc, ...] = ()
    background: int = 52_000
    noise_sigma: float = 1_500.0
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        if self.swarm is not None and not 50.0 <= self.swarm.diameter_um <= 200.0:
            raise ValueError(f"swarm diameter {self.swarm.diameter_um} um outside [50, 200]")
        for c in self.contaminants:
            if not 10.0 <= c.diameter_um <= 50.0:
                raise ValueError(f"contaminant diameter {c.diameter_um} um outside [10, 50]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def discs(self) -> list[Disc]:
        out = list(self.bubbles) + list(self.contaminants)
        if self.swarm is not None:
            out.append(self.swarm)
        return out


def _paint(img: np.ndarray, disc: Disc, px_um: float, cell_um: float) -> None:
    cx = (disc.position.x + 0.5) * cell_um / px_um
    cy = (disc.position.y + 0.5) * cell_um / px_um
    r = 0.5 * disc.diameter_um / px_um
    n = img.shape[0]
    x0, x1 = max(0, int(cx - r - 1)), min(n, int(math.ceil(cx + r + 1)))
    y0, y1 = max(0, int(cy - r - 1)), min(n, int(math.ceil(cy + r + 1)))
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1) + 0.5 - cx
    ys = np.arange(y0, y1) + 0.5 - cy
    d = np.sqrt(ys[:, None] ** 2 + xs[None, :] ** 2)
    cover = np.clip(r - d + 0.5, 0.0, 1.0)
    patch = img[y0:y1, x0:x1]
    patch += cover * (disc.intensity - patch)


def render_frame(scene: SceneSpec, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Render ``scene`` as a 2048 x 2048 uint16 frame.

    Discs are anti-aliased by pixel coverage; later discs paint over earlier
    ones, the swarm last.  ``rng`` (or an integer seed) drives the sensor
    noise.
    """
    if scene.channel.width_um <= 0:
        raise ValueError("channel width must be positive")
    px_um = scene.channel.width_um / HI_RES
    img = np.full((HI_RES, HI_RES), float(scene.background))
    for disc in scene.discs():
        _paint(img, disc, px_um, scene.channel.cell_um)
    if scene.noise_sigma > 0:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.Generator(np.random.MT19937(0 if rng is None else int(rng)))
        img += rng.standard_normal(img.shape, dtype=np.float32) * scene.noise_sigma
    return np.clip(np.rint(img), 0, HI_MAX).astype(np.uint16)


def truth_mask(scene: SceneSpec, grid_n: int = 300, which: str = "all") -> np.ndarray:
    """Boolean lo-res mask of cells whose centre lies inside a dark disc."""
    ys, xs = np.mgrid[0:grid_n, 0:grid_n].astype(float)
    cell_um = scene.channel.width_um / grid_n
    discs = [scene.swarm] if which == "swarm" else scene.discs()
    mask = np.zeros((grid_n, grid_n), dtype=bool)
    for d in discs:
        if d is None:
            continue
        r = 0.5 * d.diameter_um / cell_um
        mask |= (xs - d.position.x) ** 2 + (ys - d.position.y) ** 2 <= r * r
    return mask
