"""Border following (Suzuki and Abe, 1985) and region moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..geometry import GridPosition

# 8-neighbourhood in counter-clockwise order (as displayed, rows grow down),
# starting east.  Entries are (drow, dcol).
_CCW = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
_INDEX = {d: i for i, d in enumerate(_CCW)}


@dataclass(frozen=True)
class Contour:
    points: np.ndarray      # (N, 2) integer (x, y) pixel coordinates, in border order
    m00: float
    m10: float
    m01: float
    outer: bool = True

    @property
    def area(self) -> float:
        return self.m00

    @property
    def centroid(self) -> tuple[float, float]:
        return self.m10 / self.m00, self.m01 / self.m00

    def equivalent_diameter(self) -> float:
        return 2.0 * math.sqrt(self.m00 / math.pi)


def _follow(f: np.ndarray, i: int, j: int, i2: int, j2: int, nbd: int) -> list[tuple[int, int]]:
    d0 = _INDEX[(i2 - i, j2 - j)]
    # 3.1: clockwise from (i2, j2) for a non-zero pixel
    for s in range(8):
        di, dj = _CCW[(d0 - s) % 8]
        if f[i + di, j + dj] != 0:
            i1, j1 = i + di, j + dj
            break
    else:
        f[i, j] = -nbd
        return [(i, j)]
    i2, j2, i3, j3 = i1, j1, i, j
    pts = []
    while True:
        pts.append((i3, j3))
        # 3.3: counter-clockwise from the element after (i2, j2)
        start = _INDEX[(i2 - i3, j2 - j3)]
        east_zero = False
        for s in range(1, 9):
            d = (start + s) % 8
            di, dj = _CCW[d]
            if f[i3 + di, j3 + dj] != 0:
                i4, j4 = i3 + di, j3 + dj
                break
            if d == 0:
                east_zero = True
        # 3.4
        if east_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        # 3.5
        if (i4, j4) == (i, j) and (i3, j3) == (i1, j1):
            return pts
        i2, j2, i3, j3 = i3, j3, i4, j4


def _region_moments(pts: np.ndarray) -> tuple[float, float, float]:
    """Moments of the pixels on or inside a closed border."""
    r0, c0 = pts.min(axis=0)
    r1, c1 = pts.max(axis=0)
    mask = np.zeros((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
    mask[pts[:, 0] - r0, pts[:, 1] - c0] = True
    mask = ndimage.binary_fill_holes(mask)
    rr, cc = np.nonzero(mask)
    return float(len(rr)), float(np.sum(cc + c0)), float(np.sum(rr + r0))


def find_contours(image: np.ndarray, include_holes: bool = False) -> list[Contour]:
    """Borders of the non-zero regions of ``image`` in raster order of their start pixel.

    Only outer borders are returned unless ``include_holes``.  Moments are
    those of the region enclosed by each border, in pixel-index coordinates.
    """
    b = np.asarray(image) != 0
    h, w = b.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int32)
    f[1:-1, 1:-1] = b
    # Border starts need a zero left or right neighbour; zeros never change.
    nz = f != 0
    cand = nz & (~np.roll(nz, 1, axis=1) | ~np.roll(nz, -1, axis=1))
    nbd = 1
    out = []
    for i, j in zip(*np.nonzero(cand)):
        i, j = int(i), int(j)
        if f[i, j] == 1 and f[i, j - 1] == 0:
            outer, i2, j2 = True, i, j - 1
        elif f[i, j] >= 1 and f[i, j + 1] == 0:
            outer, i2, j2 = False, i, j + 1
        else:
            continue
        nbd += 1
        pts = _follow(f, i, j, i2, j2, nbd)
        if not outer and not include_holes:
            continue
        arr = np.array(pts, dtype=np.int64) - 1
        m00, m10, m01 = _region_moments(arr)
        out.append(Contour(arr[:, ::-1].copy(), m00, m10, m01, outer))
    return out


def select_swarm(contours: list[Contour], scale_um_per_px: float, d_min_um: float = 50.0,
                 d_max_um: float = 200.0, offset: float = 0.0) -> tuple[GridPosition, Contour] | None:
    """Centroid of the largest contour whose equivalent diameter is a plausible swarm.

    ``offset`` is added to both centroid coordinates (blur compensation).
    """
    if scale_um_per_px <= 0:
        raise ValueError("scale must be positive")
    best = None
    for c in contours:
        d = c.equivalent_diameter() * scale_um_per_px
        if d < d_min_um or d > d_max_um:
            continue
        if best is None or c.m00 > best.m00:
            best = c
    if best is None:
        return None
    cx, cy = best.centroid
    return GridPosition(cx + offset, cy + offset), best
