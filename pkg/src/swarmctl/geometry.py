"""Channel geometry, action space, target paths and the goal condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

V_PP_MAX = 20.0
F_MAX_MHZ = 5.0
TRANSDUCERS = (1, 2, 3, 4)
WALL_MARGIN = 10.0

# Unit push direction of each transducer: k=1 left wall, k=2 right wall,
# k=3 bottom wall (y = 0), k=4 top wall.
PUSH_DIRECTION = {1: (1.0, 0.0), 2: (-1.0, 0.0), 3: (0.0, 1.0), 4: (0.0, -1.0)}


@dataclass(frozen=True)
class ChannelConfig:
    width_um: float = 400.0
    height_um: float = 400.0
    grid_n: int = 300

    def __post_init__(self):
        if self.grid_n < 2:
            raise ValueError(f"grid_n must be >= 2, got {self.grid_n}")
        if self.width_um != self.height_um:
            raise ValueError("channel must be square")
        if self.width_um <= 0:
            raise ValueError("channel width must be positive")

    @property
    def cell_um(self) -> float:
        return self.width_um / self.grid_n

    def to_physical(self, p: "GridPosition") -> tuple[float, float]:
        """Cell coordinates to micrometres, measured at cell centres."""
        return ((p.x + 0.5) * self.cell_um, (p.y + 0.5) * self.cell_um)

    def from_physical(self, x_um: float, y_um: float) -> "GridPosition":
        return GridPosition(x_um / self.cell_um - 0.5, y_um / self.cell_um - 0.5)


@dataclass(frozen=True)
class GridPosition:
    x: float
    y: float

    def inside(self, grid_n: int = 300) -> bool:
        return 0 <= self.x < grid_n and 0 <= self.y < grid_n

    def cell(self, grid_n: int = 300) -> tuple[int, int]:
        """Nearest integer cell ``(ix, iy)``, clipped into the grid."""
        return cell_index(self.x, self.y, grid_n)

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class DisplacementVector:
    dx: float
    dy: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError("displacement components must be finite")

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)

    def __iter__(self):
        yield self.dx
        yield self.dy


def cell_index(x: float, y: float, grid_n: int = 300) -> tuple[int, int]:
    # floor(v + 0.5) rather than round(): Python rounds halves to even.
    ix = min(max(int(math.floor(x + 0.5)), 0), grid_n - 1)
    iy = min(max(int(math.floor(y + 0.5)), 0), grid_n - 1)
    return ix, iy


@dataclass(frozen=True)
class ActionSpec:
    k: int
    v_pp: float
    f_mhz: float

    def __post_init__(self):
        if self.k not in TRANSDUCERS:
            raise ValueError(f"transducer index must be in 1..4, got {self.k}")
        if not 0.0 <= self.v_pp <= V_PP_MAX:
            raise ValueError(f"v_pp must be within [0, 20] V, got {self.v_pp}")
        if not 0.0 <= self.f_mhz <= F_MAX_MHZ:
            raise ValueError(f"frequency must be within [0, 5] MHz, got {self.f_mhz}")

    def voltages(self) -> tuple[float, float, float, float]:
        """Per-transducer drive voltages; every other transducer is off."""
        return tuple(self.v_pp if k == self.k else 0.0 for k in TRANSDUCERS)


@dataclass(frozen=True)
class TargetPath:
    waypoints: tuple[GridPosition, ...]
    delta: float = 5.0
    cursor: int = 0

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a target path needs at least one waypoint")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if not 0 <= self.cursor <= len(self.waypoints):
            raise ValueError("cursor out of range")

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def complete(self) -> bool:
        return self.cursor == len(self.waypoints)

    @property
    def current(self) -> GridPosition | None:
        return None if self.complete else self.waypoints[self.cursor]


def goal_reached(p_t: GridPosition, p_s: GridPosition, delta: float) -> bool:
    """True when the squared distance between target and swarm is within ``delta``.

    ``delta`` is a squared distance in cell^2, so the default of 5 accepts a
    swarm about 2.24 cells from the waypoint.
    """
    dx = p_t.x - p_s.x
    dy = p_t.y - p_s.y
    return dx * dx + dy * dy <= delta


def path_advance(path: TargetPath, p_s: GridPosition) -> TargetPath:
    """Move the cursor past the current waypoint if the swarm satisfies it.

    Only the current waypoint is tested; reaching a later one does not count.
    """
    if path.complete:
        return path
    if goal_reached(path.waypoints[path.cursor], p_s, path.delta):
        return replace(path, cursor=path.cursor + 1)
    return path


def canonical_actions(resonances: Sequence[float]) -> list[ActionSpec]:
    """The four pruned actions: one transducer at 20 V on its resonance."""
    if len(resonances) != 4:
        raise ValueError(f"need 4 resonance frequencies, got {len(resonances)}")
    for k, f in zip(TRANSDUCERS, resonances):
        if not 0.0 <= f <= F_MAX_MHZ:
            raise ValueError(f"resonance of transducer {k} outside [0, 5] MHz: {f}")
    return [ActionSpec(k, V_PP_MAX, float(f)) for k, f in zip(TRANSDUCERS, resonances)]


# ---------------------------------------------------------------------------
# Path construction

@dataclass(frozen=True)
class CircleSpec:
    center: tuple[float, float] = (150.0, 150.0)
    radius: float = 60.0
    n_points: int = 36
    laps: int = 3


@dataclass(frozen=True)
class PolylineSpec:
    points: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class LettersSpec:
    text: str = "ETH"
    height: float = 120.0
    spacing: float = 8.0


# Glyphs live in a unit box with y pointing up.  Each glyph is one pen-down
# polyline, retracing where a stroke branches, since the swarm cannot jump.
LETTER_STROKES: dict[str, tuple[tuple[float, float], ...]] = {
    "A": ((0.0, 0.0), (0.5, 1.0), (1.0, 0.0), (0.75, 0.5), (0.25, 0.5)),
    "C": ((1.0, 1.0), (0.0, 1.0), (0.0, 0.0), (1.0, 0.0)),
    "E": ((1.0, 1.0), (0.0, 1.0), (0.0, 0.5), (0.7, 0.5), (0.0, 0.5), (0.0, 0.0), (1.0, 0.0)),
    "H": ((0.0, 1.0), (0.0, 0.0), (0.0, 0.5), (1.0, 0.5), (1.0, 1.0), (1.0, 0.0)),
    "I": ((0.5, 1.0), (0.5, 0.0)),
    "L": ((0.0, 1.0), (0.0, 0.0), (1.0, 0.0)),
    "N": ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)),
    "O": ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)),
    "R": ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.5), (0.0, 0.5), (1.0, 0.0)),
    "S": ((1.0, 1.0), (0.0, 1.0), (0.0, 0.5), (1.0, 0.5), (1.0, 0.0), (0.0, 0.0)),
    "T": ((0.0, 1.0), (1.0, 1.0), (0.5, 1.0), (0.5, 0.0)),
    "U": ((0.0, 1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0)),
}
LETTER_ASPECT = 0.6
LETTER_GAP = 0.25


def _check_inside(points: Iterable[tuple[float, float]], grid_n: int) -> None:
    lo, hi = WALL_MARGIN, grid_n - 1 - WALL_MARGIN
    for x, y in points:
        if not (lo <= x <= hi and lo <= y <= hi):
            raise ValueError(
                f"waypoint ({x:.2f}, {y:.2f}) is closer than {WALL_MARGIN:g} cells "
                f"to a wall of the {grid_n}x{grid_n} grid")


def _densify(points: Sequence[tuple[float, float]], spacing: float) -> list[tuple[float, float]]:
    out = [tuple(points[0])]
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        steps = max(1, int(math.ceil(seg / spacing)))
        for i in range(1, steps + 1):
            s = i / steps
            out.append((x0 + s * (x1 - x0), y0 + s * (y1 - y0)))
    return out


def circle_points(spec: CircleSpec) -> list[tuple[float, float]]:
    cx, cy = spec.center
    pts = []
    for _ in range(spec.laps):
        for i in range(spec.n_points):
            theta = 2.0 * math.pi * i / spec.n_points
            pts.append((cx + spec.radius * math.cos(theta), cy + spec.radius * math.sin(theta)))
    return pts


def letter_points(spec: LettersSpec, grid_n: int = 300) -> list[tuple[float, float]]:
    text = spec.text.upper().replace(" ", "")
    if not text:
        raise ValueError("letters path needs at least one character")
    missing = sorted(set(text) - set(LETTER_STROKES))
    if missing:
        raise ValueError(f"no stroke table for: {''.join(missing)}")
    height = spec.height
    width = height * LETTER_ASPECT
    gap = height * LETTER_GAP
    total = len(text) * width + (len(text) - 1) * gap
    usable = grid_n - 1 - 2 * WALL_MARGIN
    if total > usable:
        # Shrink the whole word rather than fail when it is a little too long.
        scale = usable / total
        height, width, gap, total = height * scale, width * scale, gap * scale, usable
    x0 = (grid_n - 1 - total) / 2.0
    y0 = (grid_n - 1 - height) / 2.0
    corners = []
    for i, ch in enumerate(text):
        left = x0 + i * (width + gap)
        corners.extend((left + u * width, y0 + v * height) for u, v in LETTER_STROKES[ch])
    return _densify(corners, spec.spacing)


def build_path(shape, delta: float = 5.0, grid_n: int = 300) -> TargetPath:
    """Build a :class:`TargetPath` from a circle, polyline or letters spec."""
    if isinstance(shape, CircleSpec):
        if shape.n_points < 1 or shape.laps < 1 or shape.radius < 0:
            raise ValueError("circle needs n_points >= 1, laps >= 1 and radius >= 0")
        pts = circle_points(shape)
    elif isinstance(shape, PolylineSpec):
        pts = [tuple(map(float, p)) for p in shape.points]
        if not pts:
            raise ValueError("polyline needs at least one point")
    elif isinstance(shape, LettersSpec):
        pts = letter_points(shape, grid_n)
    else:
        raise TypeError(f"unknown path shape: {shape!r}")
    _check_inside(pts, grid_n)
    return TargetPath(tuple(GridPosition(x, y) for x, y in pts), delta=delta)


def parse_path(text: str, **overrides) -> object:
    """Parse a command-line path shorthand.

    ``circle``, ``letters:ETH`` and ``polyline:10,10;40,10`` are accepted.
    Keyword overrides (center, radius, n_points, laps) apply to circles.
    """
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "circle":
        fields_ = {k: v for k, v in overrides.items() if v is not None
                   and k in ("center", "radius", "n_points", "laps")}
        if "center" in fields_:
            fields_["center"] = tuple(map(float, fields_["center"]))
        return CircleSpec(**fields_)
    if kind == "letters":
        return LettersSpec(text=arg or overrides.get("text") or "ETH")
    if kind == "polyline":
        pts = tuple(tuple(float(v) for v in pair.split(",")) for pair in arg.split(";") if pair)
        return PolylineSpec(points=pts)
    raise ValueError(f"unknown path kind {kind!r}; expected circle, letters or polyline")


def path_spec_from_mapping(cfg: dict) -> object:
    """Path spec from a config table with keys shape/center/radius/n_points/laps/text/points."""
    shape = str(cfg.get("shape", "circle")).lower()
    if shape == "circle":
        base = CircleSpec()
        return CircleSpec(
            center=tuple(map(float, cfg.get("center", base.center))),
            radius=float(cfg.get("radius", base.radius)),
            n_points=int(cfg.get("n_points", base.n_points)),
            laps=int(cfg.get("laps", base.laps)),
        )
    if shape == "letters":
        return LettersSpec(text=str(cfg.get("text", "ETH")))
    if shape == "polyline":
        return PolylineSpec(points=tuple(tuple(map(float, p)) for p in cfg.get("points", ())))
    raise ValueError(f"unknown path shape {shape!r}")


def waypoints_array(path: TargetPath) -> np.ndarray:
    return np.array([(p.x, p.y) for p in path.waypoints], dtype=float)
