"""Observation channel: synthetic frames, detection and tracking."""

from .contours import Contour, find_contours, select_swarm
from .filters import blur, canny, compress, otsu_threshold, threshold
from .io import Detection, load_detections, read_pgm, save_detections, write_pgm
from .pipeline import VisionConfig, VisionPipeline, detect
from .render import Disc, SceneSpec, render_frame, truth_mask
from .tracker import TrackerState, init_tracker, track

__all__ = [
    "Contour", "Detection", "Disc", "SceneSpec", "TrackerState", "VisionConfig", "VisionPipeline",
    "blur", "canny", "compress", "detect", "find_contours", "init_tracker", "load_detections",
    "otsu_threshold", "read_pgm", "render_frame", "save_detections", "select_swarm", "threshold",
    "track", "truth_mask", "write_pgm",
]
