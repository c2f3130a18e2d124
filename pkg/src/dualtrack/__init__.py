"""Single-target tracking by dominant-point KLT combined with multiswarm PSO."""
from .bbox import BoundingBox, bounding_box
from .contour import STATIC, VARIABLE, detect_dominant_points, dominant_points_of, trace_contour
from .evaluation import MetricReport, evaluate, overlap_score
from .frames import GrayFrame, Rect, binarize, load_frame_sequence, load_ground_truth
from .klt import KLTConfig, track_dominant_points, track_point
from .pso import MultiSwarm, PsoParams, build_polygon, fitness
from .synth import SceneSpec, generate
from .tracker import TrackerConfig, TrackResult, run

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "bounding_box", "STATIC", "VARIABLE", "detect_dominant_points",
    "dominant_points_of", "trace_contour", "MetricReport", "evaluate", "overlap_score",
    "GrayFrame", "Rect", "binarize", "load_frame_sequence", "load_ground_truth",
    "KLTConfig", "track_dominant_points", "track_point", "MultiSwarm", "PsoParams",
    "build_polygon", "fitness", "SceneSpec", "generate", "TrackerConfig", "TrackResult", "run",
]
