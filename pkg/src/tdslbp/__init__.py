"""Small floating target detection in sea clutter from time-Doppler texture.

Pipeline: complex I/Q range cells -> time-Doppler spectra images -> uniform
LBP histograms -> Gaussian-kernel ball (SVDD) trained on all cells -> the cell
farthest outside the ball is the target.
"""

from .errors import TdsLbpError
from .ingest import DatasetManifest, RangeCellSeries, load_dataset, validate_for_detection, write_dataset
from .synth import SynthConfig, generate
from .tds import TdsImage, TdsParams, build_tds, export_image
from .lbp import LbpHistogram, LbpParams, lbp_code, lbp_histogram, mean_and_std, tcr
from .ocsvm import BallModel, KernelSpec, QpSettings, decide, distance_sq, gram, rank_by_margin, train
from .detect import CorpusResult, DetectionConfig, DetectionReport, detect_dataset, evaluate_corpus

__version__ = "0.1.0"

__all__ = [
    "TdsLbpError",
    "DatasetManifest", "RangeCellSeries", "load_dataset", "validate_for_detection", "write_dataset",
    "SynthConfig", "generate",
    "TdsImage", "TdsParams", "build_tds", "export_image",
    "LbpHistogram", "LbpParams", "lbp_code", "lbp_histogram", "mean_and_std", "tcr",
    "BallModel", "KernelSpec", "QpSettings", "decide", "distance_sq", "gram", "rank_by_margin", "train",
    "CorpusResult", "DetectionConfig", "DetectionReport", "detect_dataset", "evaluate_corpus",
]
