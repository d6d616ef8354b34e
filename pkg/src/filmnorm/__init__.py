"""Color normalization toolkit for two-class (cell/plasma) microscopy images."""

from .errors import (
    DecodeError,
    DegenerateChannel,
    DegenerateHistogram,
    DimensionMismatch,
    EmptySelection,
    FilmNormError,
    NoBlobsFound,
    SceneInfeasible,
    ZeroMean,
    ZeroVector,
)
from .image import (
    IDENTITY_TRANSFORM,
    REGION_ALL,
    REGION_BACKGROUND,
    REGION_FOREGROUND,
    BinaryMask,
    ChannelMeans,
    DiagonalTransform,
    Image,
    apply_diagonal,
    channel_means,
    encode_quantize,
    requantize,
)
from .io import read_image, read_mask, write_image, write_mask
from .binarize import (
    BinarizeConfig,
    DoubleThresholds,
    binarize,
    double_threshold_mask,
    estimate_cell_area,
    estimate_double_thresholds,
    otsu_from_histogram,
    otsu_threshold,
    working_channel,
)
from .normalize import (
    DEFAULT_REFERENCE_PROFILE,
    GrayTarget,
    NormalizationResult,
    ReferenceProfile,
    build_reference_profile,
    database_gray_world,
    fg_bg_gray_world,
    gray_world,
)
from .retinex import RetinexConfig, pre_normalize, retinex
from .evaluate import (
    AngularErrorReport,
    ConvergenceStep,
    ConvergenceTrace,
    angular_error,
    convergence_trace,
    pairwise_comparison,
    report_to_csv,
    report_to_json,
    rms_angular_error,
    trace_to_csv,
)
from .synth import IlluminantCast, SceneSpec, apply_cast, render_scene

__version__ = "0.1.0"

__all__ = [
    "AngularErrorReport",
    "BinarizeConfig",
    "BinaryMask",
    "ChannelMeans",
    "ConvergenceStep",
    "ConvergenceTrace",
    "DEFAULT_REFERENCE_PROFILE",
    "DecodeError",
    "DegenerateChannel",
    "DegenerateHistogram",
    "DiagonalTransform",
    "DimensionMismatch",
    "DoubleThresholds",
    "EmptySelection",
    "FilmNormError",
    "GrayTarget",
    "IDENTITY_TRANSFORM",
    "IlluminantCast",
    "Image",
    "NoBlobsFound",
    "NormalizationResult",
    "REGION_ALL",
    "REGION_BACKGROUND",
    "REGION_FOREGROUND",
    "ReferenceProfile",
    "RetinexConfig",
    "SceneInfeasible",
    "SceneSpec",
    "ZeroMean",
    "ZeroVector",
    "angular_error",
    "apply_cast",
    "apply_diagonal",
    "binarize",
    "build_reference_profile",
    "channel_means",
    "convergence_trace",
    "database_gray_world",
    "double_threshold_mask",
    "encode_quantize",
    "estimate_cell_area",
    "estimate_double_thresholds",
    "fg_bg_gray_world",
    "gray_world",
    "otsu_from_histogram",
    "otsu_threshold",
    "pairwise_comparison",
    "pre_normalize",
    "read_image",
    "read_mask",
    "render_scene",
    "report_to_csv",
    "report_to_json",
    "requantize",
    "retinex",
    "rms_angular_error",
    "trace_to_csv",
    "working_channel",
    "write_image",
    "write_mask",
]
