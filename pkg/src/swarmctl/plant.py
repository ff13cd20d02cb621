"""Physics stand-in for the microfluidic chip.

Bubbles coalesce into a swarm under a simplified secondary-Bjerknes
attraction, and the swarm is transported by the radiation field of whichever
transducer is driven.  All magnitudes here are simulation choices, not
measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import ActionSpec, ChannelConfig, DisplacementVector, GridPosition
from .mt19937 import MT19937

FRAME_DT = 1.0 / 33.0
# Virtual point sources sit this far behind each wall, so the pushed field
# fans out slightly instead of being perfectly uniform.
SOURCE_OFFSET_CELLS = 300.0
# Random Fourier modes making up the smooth perturbation field.
PERTURBATION_MODES = 2
PERTURBATION_WAVELENGTHS = (90.0, 260.0)
# Largest turn of the perturbing direction W relative to the base field.
PERTURBATION_TURN = 0.8 * math.pi
# drift_rate is quoted per nominal control period of this many seconds.
DRIFT_PERIOD_S = 0.25


@dataclass(frozen=True)
class PlantConfig:
    resonances_mhz: tuple[float, float, float, float] = (2.0, 2.0, 2.225, 2.0)
    sigma_f_mhz: float = 0.05
    v_max_cells_per_s: float = 75.0
    noise_sigma_cells: float = 1.0
    drift_rate: float = 0.002
    perturbation_amp: float = 0.3
    seed: int = 5489
    responsiveness_decay: float = 0.99995
    grid_n: int = 300

    def __post_init__(self):
        if len(self.resonances_mhz) != 4:
            raise ValueError("need one resonance per transducer")
        for f in self.resonances_mhz:
            if not 1.5 <= f <= 2.5:
                raise ValueError(f"resonance {f} MHz outside [1.5, 2.5]")
        if self.sigma_f_mhz <= 0 or self.v_max_cells_per_s <= 0:
            raise ValueError("sigma_f_mhz and v_max_cells_per_s must be positive")
        if self.noise_sigma_cells < 0 or self.drift_rate < 0:
            raise ValueError("noise and drift must be non-negative")
        if not 0.0 <= self.perturbation_amp <= 1.0:
            raise ValueError("perturbation_amp must be within [0, 1]")
        if not 0.0 < self.responsiveness_decay <= 1.0:
            raise ValueError("responsiveness_decay must be within (0, 1]")
        object.__setattr__(self, "resonances_mhz", tuple(float(f) for f in self.resonances_mhz))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFF)

    def canonical_action(self, k: int) -> ActionSpec:
        return ActionSpec(k, 20.0, self.resonances_mhz[k - 1])


@dataclass(frozen=True)
class Bubble:
    position: GridPosition
    radius_um: float
    alive: bool = True

    def __post_init__(self):
        if self.radius_um <= 0:
            raise ValueError("bubble radius must be positive")


@dataclass(frozen=True)
class SwarmState:
    centroid: GridPosition
    diameter_um: float = 100.0
    responsiveness: float = 1.0
    t: int = 0

    def __post_init__(self):
        if not 50.0 <= self.diameter_um <= 200.0:
            raise ValueError(f"swarm diameter {self.diameter_um:.1f} um outside [50, 200]")
        if not 0.0 < self.responsiveness <= 1.0:
            raise ValueError("responsiveness must be within (0, 1]")


class CoalescenceError(RuntimeError):
    pass


def inject_disturbance(cfg: PlantConfig) -> PlantConfig:
    """Harsher environment: five times the drift, +0.3 perturbation (capped at 0.9)."""
    return replace(cfg, drift_rate=cfg.drift_rate * 5.0,
                   perturbation_amp=min(cfg.perturbation_amp + 0.3, 0.9))


# ---------------------------------------------------------------------------
# Velocity field

@dataclass(frozen=True)
class _Modes:
    kx: np.ndarray
    ky: np.ndarray
    phase: np.ndarray
    weight: np.ndarray


_MODE_CACHE: dict[int, _Modes] = {}


def _modes(seed: int) -> _Modes:
    if seed not in _MODE_CACHE:
        rng = MT19937((seed * 4 + 1) & 0xFFFFFFFF)
        u = rng.random(4 * PERTURBATION_MODES).reshape(4, PERTURBATION_MODES)
        lo, hi = PERTURBATION_WAVELENGTHS
        wavelength = lo + (hi - lo) * u[0]
        heading = 2.0 * np.pi * u[1]
        weight = 0.5 + u[3]
        _MODE_CACHE[seed] = _Modes(
            kx=2.0 * np.pi * np.cos(heading) / wavelength,
            ky=2.0 * np.pi * np.sin(heading) / wavelength,
            phase=2.0 * np.pi * u[2],
            weight=weight / weight.sum(),
        )
    return _MODE_CACHE[seed]


def base_direction(k: int, x, y, grid_n: int = 300):
    """Unit field pointing away from wall ``k`` (fanning from a source behind it)."""
    c = (grid_n - 1) / 2.0
    far = grid_n - 1 + SOURCE_OFFSET_CELLS
    sx, sy = {1: (-SOURCE_OFFSET_CELLS, c), 2: (far, c),
              3: (c, -SOURCE_OFFSET_CELLS), 4: (c, far)}[k]
    dx = np.asarray(x, dtype=float) - sx
    dy = np.asarray(y, dtype=float) - sy
    r = np.hypot(dx, dy)
    return dx / r, dy / r


def perturbation_angle(seed: int, x, y, t, drift_rate: float):
    """Smooth seeded pattern in [-1, 1] whose phase advances with ``drift_rate``.

    The pattern is shared by all transducers: it describes the channel, not
    the actuator.
    """
    m = _modes(seed)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    t = np.asarray(t, dtype=float)[..., None]
    omega = drift_rate * FRAME_DT / DRIFT_PERIOD_S
    return np.sum(m.weight * np.cos(m.kx * x + m.ky * y + m.phase + omega * t), axis=-1)


def rotation(a: float, s):
    """Direction change caused by blending ``(1 - a) U + a W``.

    ``W`` is the base direction turned by ``PERTURBATION_TURN * s``; the
    blend is then renormalised, so only the direction of the push is
    affected.  Below ``a = 0.5`` the turn never exceeds ``asin(a / (1 - a))``
    (25 degrees at the default 0.3); at 0.6 it reaches about 104 degrees.
    """
    th = PERTURBATION_TURN * np.asarray(s, dtype=float)
    return np.arctan2(a * np.sin(th), (1.0 - a) + a * np.cos(th))


def frequency_gain(cfg: PlantConfig, k: int, v_pp: float, f_mhz: float) -> float:
    df = f_mhz - cfg.resonances_mhz[k - 1]
    return (v_pp / 20.0) * math.exp(-df * df / (2.0 * cfg.sigma_f_mhz ** 2))


def field(cfg: PlantConfig, k: int, x, y, t, gain: float = 1.0):
    """Vectorised ground-truth velocity (cells/s) of transducer ``k``.

    The unit base direction is turned by :func:`rotation`; speed is always
    ``gain * v_max``.
    """
    ux, uy = base_direction(k, x, y, cfg.grid_n)
    a = cfg.perturbation_amp
    if a > 0.0:
        psi = rotation(a, perturbation_angle(cfg.seed, x, y, t, cfg.drift_rate))
        c, s = np.cos(psi), np.sin(psi)
        ux, uy = c * ux - s * uy, s * ux + c * uy
    scale = gain * cfg.v_max_cells_per_s
    return scale * ux, scale * uy


def ground_truth_velocity(cfg: PlantConfig, p: GridPosition, a: ActionSpec, t: int) -> DisplacementVector:
    gain = frequency_gain(cfg, a.k, a.v_pp, a.f_mhz)
    if gain == 0.0:
        return DisplacementVector(0.0, 0.0)
    vx, vy = field(cfg, a.k, p.x, p.y, t, gain)
    return DisplacementVector(float(vx), float(vy))


# ---------------------------------------------------------------------------
# Time integration

def clamp_to_channel(x, y, grid_n: int = 300):
    hi = grid_n - 1.0
    return np.clip(x, 0.0, hi), np.clip(y, 0.0, hi)


def transport_step(state: SwarmState, cfg: PlantConfig, a: ActionSpec, dt: float,
                   rng: MT19937 | None) -> SwarmState:
    """One explicit Euler step of the swarm centroid."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = state.centroid
    v = ground_truth_velocity(cfg, p, a, state.t)
    x = p.x + state.responsiveness * v.dx * dt
    y = p.y + state.responsiveness * v.dy * dt
    if cfg.noise_sigma_cells > 0 and rng is not None:
        nx, ny = rng.normal(2, sigma=cfg.noise_sigma_cells * math.sqrt(dt))
        x += nx
        y += ny
    x, y = clamp_to_channel(x, y, cfg.grid_n)
    return replace(state, centroid=GridPosition(float(x), float(y)),
                   responsiveness=state.responsiveness * cfg.responsiveness_decay,
                   t=state.t + 1)


def actuate(state: SwarmState, cfg: PlantConfig, a: ActionSpec, duration: float,
            rng: MT19937 | None, dt: float = FRAME_DT) -> SwarmState:
    """Hold action ``a`` for ``duration`` seconds in whole Euler steps."""
    steps = max(1, int(round(duration / dt)))
    for _ in range(steps):
        state = transport_step(state, cfg, a, duration / steps, rng)
    return state


# ---------------------------------------------------------------------------
# Coalescence

# Attraction speed (cells/s) of two 10 um bubbles one cell apart.
BJERKNES_STRENGTH = 2000.0
REFERENCE_RADIUS_UM = 10.0


def _merge_overlaps(xy: np.ndarray, r_um: np.ndarray, cell_um: float):
    """Merge touching bubbles pairwise (closest first), conserving volume."""
    xy = xy.copy()
    r_um = r_um.copy()
    while len(r_um) > 1:
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        reach = (r_um[:, None] + r_um[None, :]) / cell_um
        gap = d - reach
        np.fill_diagonal(gap, np.inf)
        i, j = np.unravel_index(np.argmin(gap), gap.shape)
        if gap[i, j] >= 0:
            break
        vi, vj = r_um[i] ** 3, r_um[j] ** 3
        xy[i] = (vi * xy[i] + vj * xy[j]) / (vi + vj)
        r_um[i] = (vi + vj) ** (1.0 / 3.0)
        xy = np.delete(xy, j, axis=0)
        r_um = np.delete(r_um, j)
    return xy, r_um


def coalesce(bubbles: list[Bubble], cfg: PlantConfig, rng: MT19937, max_steps: int = 10_000,
             channel: ChannelConfig = ChannelConfig(), dt: float = FRAME_DT, t0: int = 0,
             return_bubbles: bool = False, dwell_steps: int = 33):
    """Drive bubbles with randomly chosen transducers until one swarm forms.

    Every ``dwell_steps`` steps a transducer is picked uniformly from the
    generator and held; each step every
    bubble is advected by that transducer's field, bubbles attract each
    other with a ``r_i^3 r_j^3 / d^2`` central force and touching bubbles merge.
    Stops once one cluster holds at least 90 % of the total volume.
    """
    alive = [b for b in bubbles if b.alive]
    if not alive:
        raise ValueError("need at least one bubble")
    xy = np.array([[b.position.x, b.position.y] for b in alive], dtype=float)
    r_um = np.array([b.radius_um for b in alive], dtype=float)
    total = float(np.sum(r_um ** 3))
    if dwell_steps < 1:
        raise ValueError("dwell_steps must be >= 1")
    cell_um = channel.cell_um
    t = t0
    k = 1
    xy, r_um = _merge_overlaps(xy, r_um, cell_um)
    for step in range(max_steps + 1):
        if np.max(r_um) ** 3 >= 0.9 * total:
            break
        if step == max_steps:
            raise CoalescenceError(
                f"no dominant cluster after {max_steps} steps "
                f"({len(r_um)} clusters, largest holds {np.max(r_um) ** 3 / total:.0%} of volume)")
        if step % dwell_steps == 0:
            k = 1 + rng.randbelow(4)
        vx, vy = field(cfg, k, xy[:, 0], xy[:, 1], t)
        rho = r_um / REFERENCE_RADIUS_UM
        dx = xy[None, :, 0] - xy[:, None, 0]
        dy = xy[None, :, 1] - xy[:, None, 1]
        d = np.hypot(dx, dy)
        np.fill_diagonal(d, np.inf)
        # Overdamped: attraction divided by the Stokes drag of bubble i.
        pull = BJERKNES_STRENGTH * (rho[:, None] ** 2) * (rho[None, :] ** 3) / np.maximum(d, 1.0) ** 3
        ax = np.sum(pull * dx, axis=1)
        ay = np.sum(pull * dy, axis=1)
        xy[:, 0] += (vx + ax) * dt
        xy[:, 1] += (vy + ay) * dt
        if cfg.noise_sigma_cells > 0:
            xy += rng.normal(xy.size, sigma=cfg.noise_sigma_cells * math.sqrt(dt)).reshape(xy.shape)
        xy[:, 0], xy[:, 1] = clamp_to_channel(xy[:, 0], xy[:, 1], channel.grid_n)
        xy, r_um = _merge_overlaps(xy, r_um, cell_um)
        t += 1
    big = int(np.argmax(r_um))
    if return_bubbles:
        return [Bubble(GridPosition(float(x), float(y)), float(r)) for (x, y), r in zip(xy, r_um)]
    diameter = float(np.clip(2.0 * r_um[big], 50.0, 200.0))
    return SwarmState(GridPosition(float(xy[big, 0]), float(xy[big, 1])), diameter, 1.0, t)


def seed_bubbles(rng: MT19937, n: int, center: tuple[float, float] | None = None,
                 spread: float | None = None, radius_range: tuple[float, float] = (7.0, 10.0),
                 grid_n: int = 300) -> list[Bubble]:
    """Random bubble cloud: uniform over the channel, or a disk around ``center``."""
    u = rng.random(3 * n).reshape(n, 3)
    if center is None:
        lo, hi = 5.0, grid_n - 6.0
        xs = lo + (hi - lo) * u[:, 0]
        ys = lo + (hi - lo) * u[:, 1]
    else:
        r = spread * np.sqrt(u[:, 0])
        th = 2.0 * np.pi * u[:, 1]
        xs, ys = clamp_to_channel(center[0] + r * np.cos(th), center[1] + r * np.sin(th), grid_n)
    rad = radius_range[0] + (radius_range[1] - radius_range[0]) * u[:, 2]
    return [Bubble(GridPosition(float(x), float(y)), float(rr)) for x, y, rr in zip(xs, ys, rad)]
