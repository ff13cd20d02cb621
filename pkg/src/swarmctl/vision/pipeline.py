"""Detection on the first frame, tracking afterwards, detection again when lost."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import ChannelConfig, GridPosition
from .contours import find_contours, select_swarm
from .filters import BLUR_SHIFT, blur, canny, compress, otsu_threshold, threshold
from .io import Detection
from .tracker import TrackerState, init_tracker, track

TEMPLATE_MARGIN = 4


@dataclass(frozen=True)
class VisionConfig:
    blur_kernel: str = "2x2"
    canny_low: float = 50.0
    canny_high: float = 150.0
    search_radius: int = 10
    template_blend: float = 0.1
    swarm_min_um: float = 50.0
    swarm_max_um: float = 200.0

    def __post_init__(self):
        if self.blur_kernel not in BLUR_SHIFT:
            raise ValueError(f"blur_kernel must be one of {sorted(BLUR_SHIFT)}")
        if not self.canny_low < self.canny_high:
            raise ValueError("canny_low must be below canny_high")
        if self.search_radius < 1:
            raise ValueError("search_radius must be >= 1")


def detect(smooth: np.ndarray, cfg: VisionConfig, scale_um: float):
    """Canny, border following and the size/largest-moment rule on a blurred mask."""
    edges = canny(smooth, cfg.canny_low, cfg.canny_high)
    found = select_swarm(find_contours(edges), scale_um, cfg.swarm_min_um, cfg.swarm_max_um,
                         offset=BLUR_SHIFT[cfg.blur_kernel])
    return found


@dataclass
class VisionPipeline:
    """Stateful per-session pipeline; call :meth:`process` once per frame."""
    threshold: int
    config: VisionConfig = field(default_factory=VisionConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    tracker: TrackerState | None = None
    frame_idx: int = 0
    last: GridPosition | None = None

    @classmethod
    def calibrate(cls, sample_frames_lo, config: VisionConfig = VisionConfig(),
                  channel: ChannelConfig = ChannelConfig()) -> "VisionPipeline":
        return cls(otsu_threshold(list(sample_frames_lo)), config, channel)

    def prepare(self, frame_lo: np.ndarray) -> np.ndarray:
        return blur(threshold(frame_lo, self.threshold), self.config.blur_kernel)

    def _detect(self, smooth: np.ndarray) -> Detection | None:
        found = detect(smooth, self.config, self.channel.cell_um)
        if found is None:
            self.tracker = None
            return None
        pos, contour = found
        half = int(math.ceil(0.5 * contour.equivalent_diameter())) + TEMPLATE_MARGIN
        half = min(half, (min(smooth.shape) - 2) // 2 - 1)
        # The tracker works on the blurred image, so it gets the uncompensated
        # position and reports positions with the same compensation.
        shift = BLUR_SHIFT[self.config.blur_kernel]
        ts = init_tracker(smooth, GridPosition(pos.x - shift, pos.y - shift), half,
                          self.config.search_radius, self.config.template_blend)
        self.tracker = ts
        return Detection(self.frame_idx, pos.x, pos.y, 1.0, "detect")

    def process_lo(self, frame_lo: np.ndarray) -> Detection | None:
        smooth = self.prepare(frame_lo)
        det = None
        if self.tracker is not None:
            ts = track(self.tracker, smooth)
            if not ts.needs_detection:
                self.tracker = ts
                shift = BLUR_SHIFT[self.config.blur_kernel]
                det = Detection(self.frame_idx, ts.position.x + shift, ts.position.y + shift,
                                ts.confidence, "track")
        if det is None:
            det = self._detect(smooth)
        self.frame_idx += 1
        if det is not None:
            self.last = GridPosition(det.x, det.y)
        return det

    def process(self, frame_hi: np.ndarray) -> Detection | None:
        return self.process_lo(compress(frame_hi))
