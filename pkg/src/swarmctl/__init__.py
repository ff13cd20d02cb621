"""Learned closed-loop steering of a simulated acoustic microbubble swarm."""

import os as _os

# Must run before numpy loads its BLAS; only effective when swarmctl is
# imported first, as the command-line entry point does.
_threads = _os.environ.get("SWARMCTL_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .dynamics import (DynamicsMatrix, LearnerConfig, combine, estimate_resonance,  # noqa: E402
                       fit_global, init_local, load_qmatrix, save_qmatrix, update_local)
from .geometry import (ActionSpec, ChannelConfig, CircleSpec, GridPosition, LettersSpec,  # noqa: E402
                       PolylineSpec, TargetPath, build_path, goal_reached, path_advance)
from .gridsearch import collect, enumerate_grid, load_dataset, save_dataset  # noqa: E402
from .mt19937 import MT19937  # noqa: E402
from .navigator import EpisodeLog, NavigatorConfig, NavigatorState, Outcome, choose_pzt, run_path  # noqa: E402
from .plant import PlantConfig, SwarmState, actuate, coalesce, inject_disturbance  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ActionSpec", "ChannelConfig", "CircleSpec", "DynamicsMatrix", "EpisodeLog", "GridPosition",
    "LearnerConfig", "LettersSpec", "MT19937", "NavigatorConfig", "NavigatorState", "Outcome",
    "PlantConfig", "PolylineSpec", "SwarmState", "TargetPath", "actuate", "build_path", "choose_pzt",
    "coalesce", "collect", "combine", "enumerate_grid", "estimate_resonance", "fit_global",
    "goal_reached", "init_local", "inject_disturbance", "load_dataset", "load_qmatrix",
    "path_advance", "run_path", "save_dataset", "save_qmatrix", "update_local",
]
