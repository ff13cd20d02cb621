"""Action-space sweep: 6 voltages x 41 frequencies x 4 transducers, 99 frames each."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .mt19937 import MT19937
from .plant import (FRAME_DT, CoalescenceError, PlantConfig, clamp_to_channel, coalesce,
                    field, frequency_gain, seed_bubbles)

log = logging.getLogger(__name__)

VOLTAGES = (10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
FREQUENCIES = tuple(round(1.5 + 0.025 * i, 3) for i in range(41))
TRANSDUCERS = (1, 2, 3, 4)
FRAMES_PER_COMBO = 99  # 3 s at 33 fps
HEADER = ("combo_id", "k", "f_mhz", "v_pp", "frame_idx", "t_s", "x", "y", "dx_dt", "dy_dt")
RECORD_DTYPE = np.dtype([
    ("combo_id", "<i4"), ("k", "<i4"), ("f_mhz", "<f8"), ("v_pp", "<f8"), ("frame_idx", "<i4"),
    ("t_s", "<f8"), ("x", "<f8"), ("y", "<f8"), ("dx_dt", "<f8"), ("dy_dt", "<f8"),
])
# Swarms start this far (cells) from the wall opposite their push direction,
# so a full-speed 3 s recording ends before reaching the far wall.
START_BAND = (15.0, 60.0)
BUBBLES_PER_SWARM = 50
SEED_SPREAD_CELLS = 12.0
MAX_RETRIES = 3


class DatasetRecord(NamedTuple):
    combo_id: int
    k: int
    f_mhz: float
    v_pp: float
    frame_idx: int
    t_s: float
    x: float
    y: float
    dx_dt: float
    dy_dt: float


@dataclass(frozen=True)
class SearchGrid:
    voltages: tuple[float, ...] = VOLTAGES
    frequencies: tuple[float, ...] = FREQUENCIES
    transducers: tuple[int, ...] = TRANSDUCERS

    def __len__(self) -> int:
        return len(self.voltages) * len(self.frequencies) * len(self.transducers)

    def combos(self) -> list[tuple[int, float, float]]:
        """``(k, f_mhz, v_pp)`` in k-major, then frequency, then voltage order."""
        return [(k, f, v) for k in self.transducers for f in self.frequencies for v in self.voltages]


def enumerate_grid() -> SearchGrid:
    return SearchGrid()


class CollectError(RuntimeError):
    pass


def _start_position(k: int, u: np.ndarray, grid_n: int) -> tuple[float, float]:
    lo, hi = START_BAND
    along = lo + (hi - lo) * u[0]
    across = 45.0 + (grid_n - 91.0) * u[1]
    far = grid_n - 1.0 - along
    return {1: (along, across), 2: (far, across), 3: (across, along), 4: (across, far)}[k]


def _form_swarm(k: int, cfg: PlantConfig, seed: int, t0: int):
    """Coalesce a fresh swarm near a random start, retrying with new seeds."""
    last = None
    for attempt in range(MAX_RETRIES + 1):
        rng = MT19937((seed + attempt * 0x9E3779B9) & 0xFFFFFFFF)
        center = _start_position(k, rng.random(2), cfg.grid_n)
        bubbles = seed_bubbles(rng, BUBBLES_PER_SWARM, center=center, spread=SEED_SPREAD_CELLS,
                               grid_n=cfg.grid_n)
        try:
            # Switching transducers every frame keeps the compact cloud near
            # its chosen start instead of herding it to a wall.
            swarm = coalesce(bubbles, cfg, rng, max_steps=2_000, t0=t0, dwell_steps=1)
        except CoalescenceError as exc:
            last = exc
            log.warning("coalescence failed (attempt %d): %s", attempt + 1, exc)
            continue
        return swarm, rng
    raise CollectError(f"swarm formation failed after {MAX_RETRIES} retries: {last}")


def collect(grid: SearchGrid, cfg: PlantConfig, seed: int, frames: int = FRAMES_PER_COMBO) -> np.ndarray:
    """Run the plant at every combo and return the per-frame records.

    Combos are simulated together as a batch; each keeps its own generator,
    so results do not depend on batching.  The plant clock runs continuously
    through the sweep (combo ``c`` occupies steps ``c*frames .. c*frames+frames-1``).
    """
    combos = grid.combos()
    master = MT19937(seed)
    combo_seeds = master.uint32(len(combos))
    n = len(combos)
    x = np.empty(n)
    y = np.empty(n)
    resp = np.empty(n)
    noise = np.zeros((n, frames, 2))
    for c, (k, f, v) in enumerate(combos):
        swarm, rng = _form_swarm(k, cfg, int(combo_seeds[c]), c * frames)
        x[c], y[c] = swarm.centroid.x, swarm.centroid.y
        resp[c] = swarm.responsiveness
        if cfg.noise_sigma_cells > 0:
            noise[c] = rng.normal(2 * frames, sigma=cfg.noise_sigma_cells * math.sqrt(FRAME_DT)).reshape(frames, 2)

    ks = np.array([k for k, _, _ in combos])
    gains = np.array([frequency_gain(cfg, k, v, f) for k, f, v in combos])
    xs = np.empty((n, frames + 1))
    ys = np.empty((n, frames + 1))
    xs[:, 0], ys[:, 0] = x, y
    base_t = np.arange(n) * frames
    for j in range(frames):
        vx = np.zeros(n)
        vy = np.zeros(n)
        for k in TRANSDUCERS:
            m = ks == k
            fx, fy = field(cfg, k, xs[m, j], ys[m, j], base_t[m] + j)
            vx[m], vy[m] = fx * gains[m], fy * gains[m]
        nx = xs[:, j] + resp * vx * FRAME_DT + noise[:, j, 0]
        ny = ys[:, j] + resp * vy * FRAME_DT + noise[:, j, 1]
        xs[:, j + 1], ys[:, j + 1] = clamp_to_channel(nx, ny, cfg.grid_n)
        resp *= cfg.responsiveness_decay

    out = np.empty(n * frames, dtype=RECORD_DTYPE)
    out["combo_id"] = np.repeat(np.arange(n), frames)
    out["k"] = np.repeat(ks, frames)
    out["f_mhz"] = np.repeat([f for _, f, _ in combos], frames)
    out["v_pp"] = np.repeat([v for _, _, v in combos], frames)
    out["frame_idx"] = np.tile(np.arange(frames), n)
    out["t_s"] = np.tile(np.arange(frames) * FRAME_DT, n)
    out["x"] = xs[:, :-1].ravel()
    out["y"] = ys[:, :-1].ravel()
    out["dx_dt"] = (np.diff(xs, axis=1) / FRAME_DT).ravel()
    out["dy_dt"] = (np.diff(ys, axis=1) / FRAME_DT).ravel()
    return out


def to_records(data: np.ndarray) -> list[DatasetRecord]:
    return [DatasetRecord(*(row.item() if hasattr(row, "item") else row for row in r)) for r in data.tolist()]


def from_records(records: Sequence[DatasetRecord]) -> np.ndarray:
    return np.array([tuple(r) for r in records], dtype=RECORD_DTYPE)


# ---------------------------------------------------------------------------
# CSV

class DatasetFormatError(ValueError):
    pass


def save_dataset(records: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(HEADER) + "\n")
        for r in records.tolist():
            fh.write(f"{r[0]},{r[1]},{r[2]!r},{r[3]!r},{r[4]},{r[5]!r},{r[6]!r},{r[7]!r},{r[8]!r},{r[9]!r}\n")


def load_dataset(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != HEADER:
            raise DatasetFormatError(f"{path}:1: header mismatch, expected {','.join(HEADER)!r}, got {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(HEADER):
                raise DatasetFormatError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(parts)}")
            try:
                row = (int(parts[0]), int(parts[1]), *map(float, parts[2:4]), int(parts[4]),
                       *map(float, parts[5:]))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in row[5:]):
                raise DatasetFormatError(f"{path}:{lineno}: non-finite value")
            rows.append(row)
    return np.array(rows, dtype=RECORD_DTYPE) if rows else np.empty(0, dtype=RECORD_DTYPE)
