"""Normalised cross-correlation template tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from ..geometry import GridPosition

REACQUIRE_BELOW = 0.3


@dataclass(frozen=True)
class TrackerState:
    template: np.ndarray
    position: GridPosition
    search_radius: int = 10
    template_blend: float = 0.1
    confidence: float = 1.0
    # Integer frame coordinates of the template centre and the sub-pixel
    # offset from there to the tracked position.
    anchor: tuple[int, int] = (0, 0)
    offset: tuple[float, float] = (0.0, 0.0)

    @property
    def needs_detection(self) -> bool:
        return self.confidence < REACQUIRE_BELOW


def _patch(frame: np.ndarray, cx: int, cy: int, half: int) -> np.ndarray:
    """Square patch centred on (cx, cy); zero outside the frame."""
    h, w = frame.shape
    out = np.zeros((2 * half + 1, 2 * half + 1), dtype=np.float64)
    x0, y0 = cx - half, cy - half
    sx0, sy0 = max(0, x0), max(0, y0)
    sx1, sy1 = min(w, cx + half + 1), min(h, cy + half + 1)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = frame[sy0:sy1, sx0:sx1]
    return out


def init_tracker(frame: np.ndarray, position: GridPosition, half_size: int,
                 search_radius: int = 10, template_blend: float = 0.1) -> TrackerState:
    if half_size < 1:
        raise ValueError("template half size must be >= 1")
    if 2 * half_size + 1 >= min(frame.shape):
        raise ValueError("template must be smaller than the frame")
    if not 0.0 <= template_blend <= 1.0:
        raise ValueError("template_blend must be within [0, 1]")
    cx, cy = int(round(position.x)), int(round(position.y))
    return TrackerState(_patch(frame, cx, cy, half_size), position, int(search_radius),
                        float(template_blend), 1.0, (cx, cy), (position.x - cx, position.y - cy))


def ncc_map(window: np.ndarray, template: np.ndarray) -> np.ndarray:
    """NCC of ``template`` at every valid placement inside ``window``.

    Placements where either patch has zero variance score 0.
    """
    th, tw = template.shape
    n = th * tw
    t0 = template - template.mean()
    tnorm = math.sqrt(float(np.sum(t0 * t0)))
    num = fftconvolve(window, t0[::-1, ::-1], mode="valid")
    ii = np.pad(np.cumsum(np.cumsum(window, 0), 1), ((1, 0), (1, 0)))
    ii2 = np.pad(np.cumsum(np.cumsum(window * window, 0), 1), ((1, 0), (1, 0)))

    def box(a):
        return a[th:, tw:] - a[:-th, tw:] - a[th:, :-tw] + a[:-th, :-tw]

    s1, s2 = box(ii), box(ii2)
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    den = np.sqrt(var) * tnorm
    # Relative floor: FFT round-off leaves tiny non-zero values on flat areas.
    ok = den > 1e-6 * max(1.0, float(np.max(den)))
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def _subpixel(a: float, b: float, c: float) -> float:
    d = a - 2.0 * b + c
    if d >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / d, -0.5, 0.5))


def track(ts: TrackerState, frame: np.ndarray) -> TrackerState:
    """Move to the best NCC match within ``search_radius`` and blend the template."""
    frame = np.asarray(frame, dtype=np.float64)
    half = ts.template.shape[0] // 2
    r = ts.search_radius
    cx, cy = ts.anchor
    window = _patch(frame, cx, cy, half + r)
    score = ncc_map(window, ts.template)
    k = int(np.argmax(score))
    dy, dx = divmod(k, score.shape[1])
    best = float(score[dy, dx])
    fx = _subpixel(score[dy, dx - 1], best, score[dy, dx + 1]) if 0 < dx < 2 * r else 0.0
    fy = _subpixel(score[dy - 1, dx], best, score[dy + 1, dx]) if 0 < dy < 2 * r else 0.0
    nx, ny = cx + dx - r, cy + dy - r
    pos = GridPosition(nx + fx + ts.offset[0], ny + fy + ts.offset[1])
    if best >= REACQUIRE_BELOW and ts.template_blend > 0:
        new = _patch(frame, nx, ny, half)
        template = (1.0 - ts.template_blend) * ts.template + ts.template_blend * new
    else:
        template = ts.template
    return replace(ts, template=template, position=pos, confidence=best, anchor=(nx, ny))
