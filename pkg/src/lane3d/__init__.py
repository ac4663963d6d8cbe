"""3D lane geometry, uncertainty, losses, and evaluation protocols.

The package models road lanes as 3D polylines in a ground frame, fits a
shared-parameter front-view curve family to their image projections,
attaches 3D Gaussian uncertainty to polyline segments, scores predictions
against ground truth under four complementary protocols (IoU-gated
Chamfer, bidirectional Chamfer with greedy matching, anchor-pointwise,
and worst-case boundary distance), and provides the reference training
losses.  A CLI (``python -m lane3d.cli`` or the ``lane3d`` entry point)
exposes synthetic scenario generation, evaluation, threshold sweeps,
loss computation, and curve fitting on JSON/JSONL files.

Numerical kernels run either as compiled numba functions or as pure
numpy; set ``LANE3D_NUMBA=0`` to force the numpy path.  Both produce
bit-identical results.
"""

from .chamfer import (
    MBD_VARIANTS,
    EvalConfig,
    bcd_report,
    bcd_select_tp_fp,
    bev_iou,
    bidirectional_cd,
    mbd_report,
    once_report,
    threshold_sweep,
    unilateral_cd,
)
from .cli import main
from .errors import (
    AnchorMismatch,
    BehindCamera,
    ConfigError,
    DegenerateLane,
    IoError,
    Lane3DError,
    MissingField,
    MissingFrame,
    NoFeasibleAssignment,
    NoGroundIntersection,
    NumericallySingular,
    ParseError,
    SchemaVersionMismatch,
    SingularRow,
    Underdetermined,
    ZeroLengthSegment,
)
from .gaussians import (
    SegmentGaussian,
    covariance,
    kld,
    kld_components,
    paired_segment_gaussians,
    rotation_matrix,
    segment_gaussian,
    segment_params,
    symmetric_kld,
)
from .geometry import (
    DEFAULT_CAMERA,
    CameraModel,
    Curve2D,
    FitResult,
    Lane3D,
    SampleGrid,
    curve_eval,
    fit_curves,
    interpolate_lane,
    project_ground_to_image,
    resample_at_y,
    sample_curve,
    unproject_to_ground,
)
from .kernels import (
    active_backend,
    directed_point_stats,
    pair_mean_matrices,
    point_to_polyline_stats,
    resample_polyline,
)
from .losses import (
    FrameGroundTruth,
    FramePrediction,
    LossBreakdown,
    LossConfig,
    curve_match_cost,
    loss_curve,
    loss_loc,
    loss_total,
    loss_unc,
    loss_vis,
)
from .matching import MatchResult, hungarian
from .pointwise import (
    PointwiseConfig,
    openlane_report,
    pointwise_match,
    pointwise_sweep,
    pointwise_tp,
    xz_errors,
)
from .report import FrameStats, MetricReport, ordering_hash, prf
from .scenario_io import (
    FORMAT_VERSION,
    FrameRecord,
    NoiseModel,
    align,
    apply_noise,
    generate_frames,
    generate_scenario,
    read_frames,
    write_frames,
    write_report,
)

__version__ = "1.0.0"

__all__ = [
    "AnchorMismatch",
    "BehindCamera",
    "CameraModel",
    "ConfigError",
    "Curve2D",
    "DEFAULT_CAMERA",
    "DegenerateLane",
    "EvalConfig",
    "FORMAT_VERSION",
    "FitResult",
    "FrameGroundTruth",
    "FramePrediction",
    "FrameRecord",
    "FrameStats",
    "IoError",
    "Lane3D",
    "Lane3DError",
    "LossBreakdown",
    "LossConfig",
    "MBD_VARIANTS",
    "MatchResult",
    "MetricReport",
    "MissingField",
    "MissingFrame",
    "NoFeasibleAssignment",
    "NoGroundIntersection",
    "NoiseModel",
    "NumericallySingular",
    "ParseError",
    "PointwiseConfig",
    "SampleGrid",
    "SchemaVersionMismatch",
    "SegmentGaussian",
    "SingularRow",
    "Underdetermined",
    "ZeroLengthSegment",
    "active_backend",
    "align",
    "apply_noise",
    "bcd_report",
    "bcd_select_tp_fp",
    "bev_iou",
    "bidirectional_cd",
    "covariance",
    "curve_eval",
    "curve_match_cost",
    "directed_point_stats",
    "fit_curves",
    "generate_frames",
    "generate_scenario",
    "hungarian",
    "interpolate_lane",
    "kld",
    "kld_components",
    "loss_curve",
    "loss_loc",
    "loss_total",
    "loss_unc",
    "loss_vis",
    "main",
    "mbd_report",
    "once_report",
    "openlane_report",
    "ordering_hash",
    "paired_segment_gaussians",
    "pair_mean_matrices",
    "pointwise_match",
    "pointwise_sweep",
    "pointwise_tp",
    "point_to_polyline_stats",
    "prf",
    "project_ground_to_image",
    "read_frames",
    "resample_polyline",
    "resample_at_y",
    "rotation_matrix",
    "sample_curve",
    "segment_gaussian",
    "segment_params",
    "symmetric_kld",
    "threshold_sweep",
    "unilateral_cd",
    "unproject_to_ground",
    "write_frames",
    "write_report",
    "xz_errors",
]
