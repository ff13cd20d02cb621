"""Global and local dynamics matrices.

A dynamics matrix holds, for every grid cell and every transducer, the
expected swarm velocity in cells/s.  Values are stored as an array of shape
``(grid_n, grid_n, 2, 4)`` indexed ``[y, x, component, k - 1]``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GridPosition, cell_index

MAGIC = b"QDYN1"
_HEADER = struct.Struct("<5sIII")


@dataclass
class DynamicsMatrix:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = self.values.shape[0]
        if self.values.shape != (n, n, 2, 4):
            raise ValueError(f"dynamics matrix must be (n, n, 2, 4), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dynamics matrix contains non-finite entries")

    @property
    def grid_n(self) -> int:
        return self.values.shape[0]

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "unknown")

    def at(self, p: GridPosition | tuple[float, float], k: int) -> np.ndarray:
        """Velocity vector for transducer ``k`` at the cell nearest ``p``."""
        ix, iy = cell_index(p[0] if isinstance(p, tuple) else p.x,
                            p[1] if isinstance(p, tuple) else p.y, self.grid_n)
        return self.values[iy, ix, :, k - 1]

    def copy(self) -> "DynamicsMatrix":
        return DynamicsMatrix(self.values.copy(), dict(self.meta))


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.05
    beta: float = 0.5
    window_m: int = 5
    bandwidth_cells: float = 15.0
    min_neighbors: int = 8
    footprint_cells: float = 12.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be within [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be within [0, 1]")
        if self.window_m < 1:
            raise ValueError("window_m must be >= 1")
        if self.bandwidth_cells <= 0:
            raise ValueError("bandwidth_cells must be positive")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        if self.footprint_cells < 0:
            raise ValueError("footprint_cells must be >= 0")


@dataclass(frozen=True)
class Observation:
    """One control step: where the action was applied, which transducer, what happened."""
    position: GridPosition
    k: int
    velocity: tuple[float, float]


# ---------------------------------------------------------------------------
# Resonance

def estimate_resonance(records: np.ndarray, k: int, frequencies: Sequence[float] | None = None) -> float:
    """Frequency bin with the largest summed speed for transducer ``k``.

    Summing speeds over a uniform frequency grid is the velocity-weighted
    sample density; ties go to the lower frequency.
    """
    from .gridsearch import FREQUENCIES

    freqs = np.asarray(FREQUENCIES if frequencies is None else frequencies, dtype=float)
    sel = records[records["k"] == k]
    speed = np.hypot(sel["dx_dt"], sel["dy_dt"])
    bins = np.rint((sel["f_mhz"] - freqs[0]) / 0.025).astype(int) if len(sel) else np.array([], int)
    totals = np.zeros(len(freqs))
    counts = np.zeros(len(freqs), dtype=int)
    ok = (bins >= 0) & (bins < len(freqs))
    np.add.at(totals, bins[ok], speed[ok])
    np.add.at(counts, bins[ok], 1)
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        raise ValueError(
            f"transducer k={k} has no records at {len(empty)} of {len(freqs)} frequencies "
            f"(first missing: {freqs[empty[0]]:.3f} MHz)")
    return float(freqs[int(np.argmax(totals))])


def canonical_samples(records: np.ndarray, resonances: Sequence[float],
                      min_relative_speed: float = 0.5) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Positions and velocities rescaled to the canonical 20 V on-resonance action.

    For each transducer, every (f, V) bin whose mean speed is at least
    ``min_relative_speed`` of the canonical bin's is kept and its velocities
    are multiplied by the ratio of the canonical mean speed to the bin's.
    """
    out = {}
    for k, f0 in zip((1, 2, 3, 4), resonances):
        sel = records[records["k"] == k]
        if len(sel) == 0:
            raise ValueError(f"no records for transducer k={k}")
        speed = np.hypot(sel["dx_dt"], sel["dy_dt"])
        fkey = np.rint(sel["f_mhz"] / 0.025).astype(int)
        vkey = np.rint(sel["v_pp"]).astype(int)
        key = fkey * 1000 + vkey
        uniq, inv = np.unique(key, return_inverse=True)
        mean = np.bincount(inv, weights=speed) / np.bincount(inv)
        canon = int(round(f0 / 0.025)) * 1000 + 20
        hit = np.flatnonzero(uniq == canon)
        if len(hit) == 0 or mean[hit[0]] <= 0:
            raise ValueError(f"transducer k={k} has no on-resonance samples at 20 V, {f0:.3f} MHz")
        ref = mean[hit[0]]
        keep_bins = mean >= min_relative_speed * ref
        keep = keep_bins[inv]
        scale = (ref / mean[inv[keep]])[:, None]
        xy = np.column_stack([sel["x"][keep], sel["y"][keep]])
        v = np.column_stack([sel["dx_dt"][keep], sel["dy_dt"][keep]]) * scale
        out[k] = (xy, v)
    return out


# ---------------------------------------------------------------------------
# Global fit

@dataclass
class FitReport:
    fitted_cells: list[int]
    fallback_cells: list[int]


def _kernel(coords: np.ndarray, n: int, h: float) -> np.ndarray:
    grid = np.arange(n, dtype=float)
    return np.exp(-0.5 * ((grid[:, None] - coords[None, :]) / h) ** 2)


def local_linear_field(xy: np.ndarray, v: np.ndarray, grid_n: int, bandwidth: float,
                       min_neighbors: float) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-weighted degree-1 regression of ``v`` at every cell centre.

    The Gaussian weight factorises over x and y, so every weighted moment over
    the grid is a product ``(Gy * f) @ Gx.T``; no approximation is involved.
    Returns the ``(grid_n, grid_n, 2)`` field and a boolean mask of cells that
    fell back to the nearest sample.
    """
    xy = np.asarray(xy, dtype=float)
    v = np.asarray(v, dtype=float)
    c = (grid_n - 1) / 2.0
    x = xy[:, 0] - c
    y = xy[:, 1] - c
    gx = _kernel(xy[:, 0], grid_n, bandwidth)
    gy = _kernel(xy[:, 1], grid_n, bandwidth)

    def moment(f):
        return (gy * f) @ gx.T

    s0 = moment(np.ones_like(x))
    safe = np.where(s0 > 1e-300, s0, 1.0)
    mx, my = moment(x) / safe, moment(y) / safe
    cxx = moment(x * x) / safe - mx * mx
    cxy = moment(x * y) / safe - mx * my
    cyy = moment(y * y) / safe - my * my
    cov = np.stack([np.stack([cxx, cxy], -1), np.stack([cxy, cyy], -1)], -2)
    evals, evecs = np.linalg.eigh(cov)
    # Directions with almost no spread (a single straight trajectory) get no
    # slope; the fit then extends the along-track trend only.
    cutoff = (0.25 * bandwidth) ** 2
    inv_evals = np.where(evals > cutoff, 1.0 / np.where(evals > cutoff, evals, 1.0), 0.0)
    pinv = np.einsum("...ik,...k,...jk->...ij", evecs, inv_evals, evecs)

    gy_idx, gx_idx = np.meshgrid(np.arange(grid_n) - c, np.arange(grid_n) - c, indexing="ij")
    out = np.empty((grid_n, grid_n, 2))
    for comp in range(2):
        vc = v[:, comp]
        mv = moment(vc) / safe
        cxv = moment(x * vc) / safe - mx * mv
        cyv = moment(y * vc) / safe - my * mv
        bx = pinv[..., 0, 0] * cxv + pinv[..., 0, 1] * cyv
        by = pinv[..., 1, 0] * cxv + pinv[..., 1, 1] * cyv
        out[..., comp] = mv + bx * (gx_idx - mx) + by * (gy_idx - my)

    fallback = s0 < min_neighbors
    if np.any(fallback):
        tree = cKDTree(xy)
        iy, ix = np.nonzero(fallback)
        _, nearest = tree.query(np.column_stack([ix, iy]).astype(float))
        out[iy, ix] = v[nearest]
    return out, fallback


def fit_global(samples: Mapping[int, tuple[np.ndarray, np.ndarray]], cfg: LearnerConfig = LearnerConfig(),
               grid_n: int = 300) -> tuple[DynamicsMatrix, FitReport]:
    """Fit the global dynamics matrix from per-transducer (positions, velocities).

    ``samples`` maps each transducer 1..4 to an ``(S, 2)`` position array and
    an ``(S, 2)`` velocity array, normally from :func:`canonical_samples`.
    """
    values = np.zeros((grid_n, grid_n, 2, 4))
    fitted, fallback = [], []
    for k in (1, 2, 3, 4):
        if k not in samples or len(samples[k][0]) == 0:
            raise ValueError(f"transducer k={k} has no on-resonance samples")
        xy, v = samples[k]
        fld, fb = local_linear_field(xy, v, grid_n, cfg.bandwidth_cells, cfg.min_neighbors)
        values[..., k - 1] = fld
        fallback.append(int(fb.sum()))
        fitted.append(int(fb.size - fb.sum()))
    meta = {"kind": "global", "bandwidth_cells": cfg.bandwidth_cells,
            "min_neighbors": cfg.min_neighbors}
    return DynamicsMatrix(values, meta), FitReport(fitted, fallback)


# ---------------------------------------------------------------------------
# Local dynamics and blending

def init_local(cfg: LearnerConfig = LearnerConfig(), grid_n: int = 300, value: float = 0.0) -> DynamicsMatrix:
    return DynamicsMatrix(np.full((grid_n, grid_n, 2, 4), float(value)), {"kind": "local", "init": float(value)})


def _footprint_offsets(radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    d = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(d, d)
    keep = dx * dx + dy * dy <= radius * radius + 1e-9
    return np.column_stack([dx[keep], dy[keep]])


def update_local(q_local: DynamicsMatrix, history: Sequence[Observation], alpha: float,
                 footprint: float = 0.0, inplace: bool = False) -> DynamicsMatrix:
    """Exponential moving average of observed velocities at visited cells.

    Every (cell, transducer) pair seen in ``history`` moves a fraction
    ``alpha`` of the way towards the mean velocity observed there over the
    window.  With ``footprint > 0`` an observation also counts for every cell
    within that many cells of its own.  All other entries are untouched.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be within [0, 1]")
    q = q_local if inplace else q_local.copy()
    if not history:
        return q
    n = q.grid_n
    offsets = _footprint_offsets(footprint) if footprint > 0 else np.zeros((1, 2), dtype=int)
    cells = np.array([cell_index(o.position.x, o.position.y, n) for o in history])
    ks = np.array([o.k - 1 for o in history])
    vel = np.array([o.velocity for o in history], dtype=float)
    cx = (cells[:, None, 0] + offsets[None, :, 0]).ravel()
    cy = (cells[:, None, 1] + offsets[None, :, 1]).ravel()
    kk = np.repeat(ks, len(offsets))
    vx = np.repeat(vel[:, 0], len(offsets))
    vy = np.repeat(vel[:, 1], len(offsets))
    inside = (cx >= 0) & (cx < n) & (cy >= 0) & (cy < n)
    key = ((cy[inside] * n + cx[inside]) * 4 + kk[inside])
    uniq, inv = np.unique(key, return_inverse=True)
    cnt = np.bincount(inv)
    mx = np.bincount(inv, weights=vx[inside]) / cnt
    my = np.bincount(inv, weights=vy[inside]) / cnt
    k_u = uniq % 4
    cell_u = uniq // 4
    ux, uy = cell_u % n, cell_u // n
    vals = q.values
    vals[uy, ux, 0, k_u] = (1.0 - alpha) * vals[uy, ux, 0, k_u] + alpha * mx
    vals[uy, ux, 1, k_u] = (1.0 - alpha) * vals[uy, ux, 1, k_u] + alpha * my
    return q


def combine(q_global: DynamicsMatrix, q_local: DynamicsMatrix, beta: float) -> DynamicsMatrix:
    """Convex blend ``beta * global + (1 - beta) * local``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be within [0, 1]")
    if q_global.values.shape != q_local.values.shape:
        raise ValueError(f"shape mismatch: {q_global.values.shape} vs {q_local.values.shape}")
    if beta == 1.0:
        values = q_global.values.copy()
    elif beta == 0.0:
        values = q_local.values.copy()
    else:
        values = beta * q_global.values + (1.0 - beta) * q_local.values
    return DynamicsMatrix(values, {"kind": "combined", "beta": beta})


def combined_at(q_global: DynamicsMatrix, q_local: DynamicsMatrix, beta: float, ix: int, iy: int) -> np.ndarray:
    """``combine(...)`` evaluated at one cell only, shape ``(2, 4)``."""
    g = q_global.values[iy, ix]
    if beta == 1.0:
        return g.copy()
    loc = q_local.values[iy, ix]
    if beta == 0.0:
        return loc.copy()
    return beta * g + (1.0 - beta) * loc


def prediction_error(q: DynamicsMatrix, position: GridPosition, k: int, velocity: Iterable[float]) -> float:
    """Euclidean norm of predicted minus observed velocity (cells/s)."""
    pred = q.at(position, k)
    vx, vy = velocity
    return math.hypot(pred[0] - vx, pred[1] - vy)


# ---------------------------------------------------------------------------
# Files

def save_qmatrix(q: DynamicsMatrix, path: str | Path) -> None:
    n = q.grid_n
    data = np.ascontiguousarray(q.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, 2, 4))
        fh.write(data.tobytes(order="C"))


def load_qmatrix(path: str | Path) -> DynamicsMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a QDYN1 header")
    magic, n, comps, trans = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if comps != 2 or trans != 4 or n < 2:
        raise ValueError(f"{path}: unsupported dimensions n={n}, components={comps}, transducers={trans}")
    expected = n * n * comps * trans * 4
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} data bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(n, n, comps, trans).astype(np.float64)
    return DynamicsMatrix(values, {"kind": "loaded", "source": str(path)})


def export_qmatrix_csv(q: DynamicsMatrix, path: str | Path) -> None:
    """One row per (cell, transducer): ``x,y,k,vx,vy``."""
    n = q.grid_n
    iy, ix = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,k,vx,vy\n")
        for k in range(4):
            vx = q.values[..., 0, k].ravel()
            vy = q.values[..., 1, k].ravel()
            for x, y, a, b in zip(ix.ravel().tolist(), iy.ravel().tolist(), vx.tolist(), vy.tolist()):
                fh.write(f"{x},{y},{k + 1},{float(a)!r},{float(b)!r}\n")
