"""Greedy transducer policy and the closed navigation loop."""

from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import DynamicsMatrix, LearnerConfig, Observation, combined_at, init_local, update_local
from .geometry import ActionSpec, GridPosition, TargetPath, cell_index, path_advance
from .mt19937 import MT19937
from .plant import FRAME_DT, PlantConfig, SwarmState, actuate

LOG_HEADER = ("n", "t_s", "x", "y", "tx", "ty", "k", "pred_dx", "pred_dy", "obs_dx", "obs_dy",
              "err_local", "err_global", "cursor")


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    BUDGET_EXCEEDED = "budget_exceeded"
    STUCK = "stuck"


@dataclass(frozen=True)
class NavigatorConfig:
    # One camera frame per decision; see README for why not longer.
    control_dt: float = FRAME_DT
    budget: int = 5_000
    stall_limit: int = 500

    def __post_init__(self):
        if self.control_dt <= 0:
            raise ValueError("control_dt must be positive")
        if self.budget < 0 or self.stall_limit < 1:
            raise ValueError("budget must be >= 0 and stall_limit >= 1")


@dataclass
class NavigatorState:
    n: int
    swarm: SwarmState
    path: TargetPath
    q_local: DynamicsMatrix
    history: deque
    control_dt: float = FRAME_DT
    budget: int = 5_000
    stall_limit: int = 500
    last_progress: int = 0
    # Most recent measured position; differs from the true centroid when
    # observation goes through the vision pipeline.
    observed: GridPosition | None = None

    @classmethod
    def start(cls, swarm: SwarmState, path: TargetPath, learner: LearnerConfig = LearnerConfig(),
              nav: NavigatorConfig = NavigatorConfig(), q_local: DynamicsMatrix | None = None,
              grid_n: int = 300) -> "NavigatorState":
        if q_local is None:
            q_local = init_local(learner, grid_n)
        # The goal condition may already hold at the start position.
        path = _advance_all(path, swarm.centroid)
        return cls(0, swarm, path, q_local, deque(maxlen=learner.window_m), nav.control_dt,
                   nav.budget, nav.stall_limit, 0, swarm.centroid)


@dataclass(frozen=True)
class LogRow:
    n: int
    t_s: float
    x: float
    y: float
    tx: float
    ty: float
    k: int
    pred_dx: float
    pred_dy: float
    obs_dx: float
    obs_dy: float
    err_local: float
    err_global: float
    cursor: int


@dataclass
class EpisodeLog:
    rows: list[LogRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: LogRow) -> None:
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_HEADER)
            for r in self.rows:
                w.writerow([r.n, *(repr(float(v)) for v in (r.t_s, r.x, r.y, r.tx, r.ty)), r.k,
                            *(repr(float(v)) for v in (r.pred_dx, r.pred_dy, r.obs_dx, r.obs_dy,
                                                       r.err_local, r.err_global)), r.cursor])

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeLog":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != LOG_HEADER:
                raise ValueError(f"{path}:1: not an episode log (header {header!r})")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(LOG_HEADER):
                    raise ValueError(f"{path}:{lineno}: expected {len(LOG_HEADER)} fields, got {len(rec)}")
                try:
                    rows.append(LogRow(int(rec[0]), *map(float, rec[1:6]), int(rec[6]),
                                       *map(float, rec[7:13]), int(rec[13])))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        return cls(rows)


def _advance_all(path: TargetPath, p: GridPosition) -> TargetPath:
    # Strictly sequential, but several consecutive waypoints can be inside
    # the tolerance at once.
    while not path.complete:
        nxt = path_advance(path, p)
        if nxt.cursor == path.cursor:
            break
        path = nxt
    return path


def _argmin_from_predictions(pred: np.ndarray, p_s: tuple[float, float], p_t: tuple[float, float],
                             control_dt: float) -> int:
    """``pred`` has shape (2, 4): column k-1 is the velocity for transducer k."""
    best_k, best_d = 1, math.inf
    for j in range(4):
        ex = p_t[0] - (p_s[0] + pred[0, j] * control_dt)
        ey = p_t[1] - (p_s[1] + pred[1, j] * control_dt)
        d = ex * ex + ey * ey
        if d < best_d:
            best_k, best_d = j + 1, d
    return best_k


def choose_pzt(q: DynamicsMatrix, p_s: GridPosition, p_t: GridPosition, control_dt: float) -> int:
    """Transducer whose predicted displacement lands closest to ``p_t`` (lowest k on ties)."""
    ix, iy = cell_index(p_s.x, p_s.y, q.grid_n)
    return _argmin_from_predictions(q.values[iy, ix], (p_s.x, p_s.y), (p_t.x, p_t.y), control_dt)


def control_step(state: NavigatorState, q_global: DynamicsMatrix, plant: PlantConfig,
                 learner: LearnerConfig, rng: MT19937 | None,
                 actions: Sequence[ActionSpec] | None = None,
                 observe=None) -> tuple[NavigatorState, LogRow]:
    """Blend, choose, actuate, observe, learn, advance.

    ``observe`` maps the true post-step swarm state to the measured position;
    by default the centroid is read directly.
    """
    if state.path.complete:
        raise ValueError("path already complete")
    if actions is None:
        actions = [plant.canonical_action(k) for k in (1, 2, 3, 4)]
    grid_n = q_global.grid_n
    p = state.observed if state.observed is not None else state.swarm.centroid
    target = state.path.current
    ix, iy = cell_index(p.x, p.y, grid_n)
    pred_all = combined_at(q_global, state.q_local, learner.beta, ix, iy)
    k = _argmin_from_predictions(pred_all, (p.x, p.y), (target.x, target.y), state.control_dt)

    swarm = actuate(state.swarm, plant, actions[k - 1], state.control_dt, rng)
    seen = observe(swarm) if observe is not None else swarm.centroid
    vel = ((seen.x - p.x) / state.control_dt, (seen.y - p.y) / state.control_dt)

    pred = pred_all[:, k - 1]
    gpred = q_global.values[iy, ix, :, k - 1]
    err_local = math.hypot(pred[0] - vel[0], pred[1] - vel[1])
    err_global = math.hypot(gpred[0] - vel[0], gpred[1] - vel[1])

    history = state.history
    history.append(Observation(p, k, vel))
    update_local(state.q_local, list(history), learner.alpha, learner.footprint_cells, inplace=True)

    path = _advance_all(state.path, seen)
    progressed = path.cursor != state.path.cursor
    n = state.n + 1
    row = LogRow(n - 1, (n - 1) * state.control_dt, p.x, p.y, target.x, target.y, k,
                 float(pred[0]), float(pred[1]), vel[0], vel[1], err_local, err_global, path.cursor)
    new_state = replace(state, n=n, swarm=swarm, path=path, history=history,
                        last_progress=n if progressed else state.last_progress, observed=seen)
    return new_state, row


def run_path(state: NavigatorState, q_global: DynamicsMatrix, plant: PlantConfig,
             learner: LearnerConfig, seed: int, actions: Sequence[ActionSpec] | None = None,
             observe=None) -> tuple[EpisodeLog, Outcome, NavigatorState]:
    """Step until the path is complete, the budget runs out or progress stalls."""
    rng = MT19937(seed)
    log = EpisodeLog()
    while True:
        if state.path.complete:
            return log, Outcome.SUCCESS, state
        if state.n >= state.budget:
            return log, Outcome.BUDGET_EXCEEDED, state
        if state.n - state.last_progress >= state.stall_limit:
            return log, Outcome.STUCK, state
        state, row = control_step(state, q_global, plant, learner, rng, actions, observe)
        log.append(row)
