"""End-to-end pieces shared by the command line and the test harness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .dynamics import DynamicsMatrix, FitReport, LearnerConfig, canonical_samples, estimate_resonance, fit_global
from .geometry import GridPosition, TargetPath, waypoints_array
from .gridsearch import BUBBLES_PER_SWARM, SEED_SPREAD_CELLS
from .mt19937 import MT19937
from .navigator import EpisodeLog, NavigatorState, Outcome, run_path
from .plant import PlantConfig, SwarmState, coalesce, seed_bubbles
from .vision.corpus import CONTAMINANT_INTENSITY, SWARM_INTENSITY
from .vision.filters import compress
from .vision.pipeline import VisionPipeline
from .vision.render import Disc, SceneSpec, render_frame

START_JITTER = 10.0


def fit_records(records: np.ndarray, learner: LearnerConfig = LearnerConfig(),
                grid_n: int = 300) -> tuple[DynamicsMatrix, list[float], FitReport]:
    """Resonances, canonical rescaling and the global fit in one call."""
    res = [estimate_resonance(records, k) for k in (1, 2, 3, 4)]
    q, report = fit_global(canonical_samples(records, res), learner, grid_n)
    q.meta["resonances_mhz"] = res
    return q, res, report


def start_swarm(seed: int, plant: PlantConfig, center: tuple[float, float] | None = None) -> SwarmState:
    """Coalesce a swarm from a bubble cloud near ``center`` (jittered by the seed)."""
    rng = MT19937(seed)
    c = center if center is not None else ((plant.grid_n - 1) / 2.0,) * 2
    u = rng.random(2)
    c = (c[0] + START_JITTER * (2 * u[0] - 1), c[1] + START_JITTER * (2 * u[1] - 1))
    bubbles = seed_bubbles(rng, BUBBLES_PER_SWARM, center=c, spread=SEED_SPREAD_CELLS, grid_n=plant.grid_n)
    return coalesce(bubbles, plant, rng, max_steps=2_000, dwell_steps=1)


class VisionObserver:
    """Measures the swarm by rendering a frame and running the vision pipeline.

    Static contaminants are scattered away from the path so that they never
    touch the swarm's disc.  When the pipeline loses the swarm, the last
    measurement is repeated.
    """

    def __init__(self, seed: int, swarm: SwarmState, path: TargetPath, cfg: ExperimentConfig,
                 n_contaminants: int = 5):
        self.channel = cfg.channel
        self.rng = np.random.Generator(np.random.MT19937(seed))
        self.diameter = swarm.diameter_um
        self.contaminants = self._place(path, swarm.centroid, n_contaminants)
        self.last = swarm.centroid
        frame = compress(self._render(swarm.centroid))
        self.pipeline = VisionPipeline.calibrate([frame], channel=self.channel)
        first = self.pipeline.process_lo(frame)
        if first is not None:
            self.last = GridPosition(first.x, first.y)
        self.detections = [first]

    def _place(self, path: TargetPath, start: GridPosition, count: int) -> tuple[Disc, ...]:
        n = self.channel.grid_n
        cell = self.channel.cell_um
        keep_out = np.vstack([waypoints_array(path), [[start.x, start.y]]])
        clearance = 0.5 * self.diameter / cell + 25.0
        out = []
        for _ in range(200 * count):
            if len(out) == count:
                break
            d = float(self.rng.uniform(10.0, 50.0))
            p = self.rng.uniform(10.0, n - 11.0, size=2)
            if np.min(np.hypot(*(keep_out - p).T)) <= clearance + 0.5 * d / cell:
                continue
            if any(math.hypot(p[0] - o.position.x, p[1] - o.position.y) < 10.0 for o in out):
                continue
            out.append(Disc(GridPosition(float(p[0]), float(p[1])), d, CONTAMINANT_INTENSITY))
        return tuple(out)

    def _render(self, p: GridPosition) -> np.ndarray:
        scene = SceneSpec(Disc(p, self.diameter, SWARM_INTENSITY), self.contaminants, (), channel=self.channel)
        return render_frame(scene, self.rng)

    def __call__(self, swarm: SwarmState) -> GridPosition:
        det = self.pipeline.process(self._render(swarm.centroid))
        self.detections.append(det)
        if det is not None:
            self.last = GridPosition(det.x, det.y)
        return self.last


@dataclass
class EpisodeResult:
    log: EpisodeLog
    outcome: Outcome
    path: TargetPath
    state: NavigatorState
    observer: VisionObserver | None = None


def run_episode(cfg: ExperimentConfig, q_global: DynamicsMatrix) -> EpisodeResult:
    """Start a swarm from ``cfg.seed`` and steer it along the configured path."""
    if q_global.grid_n != cfg.channel.grid_n:
        raise ValueError(f"dynamics matrix is {q_global.grid_n} cells wide, channel is {cfg.channel.grid_n}")
    plant = cfg.effective_plant()
    path = cfg.target_path()
    swarm = start_swarm(cfg.seed, plant)
    observer = None
    if cfg.observe == "vision":
        observer = VisionObserver(cfg.seed, swarm, path, cfg)
    state = NavigatorState.start(swarm, path, cfg.learner, cfg.navigator, grid_n=cfg.channel.grid_n)
    if observer is not None:
        state.observed = observer.last
    log, outcome, state = run_path(state, q_global, plant, cfg.learner, cfg.seed + 1, observe=observer)
    return EpisodeResult(log, outcome, path, state, observer)
