"""Spectral segmentation toolkit.

Calibrated hyperspectral cubes and their masks; context-manipulating batch
augmentations; out-of-context dataset synthesis; overlap and boundary
metrics with hierarchical aggregation and bootstrap ranking.
"""

from .analysis import (
    AggregationResult,
    MethodRanking,
    NeighborhoodMatrix,
    RankingResult,
    aggregate_hierarchical,
    aggregate_removal,
    bootstrap_ranking,
    neighborhood_matrix,
)
from .augment import (
    KINDS,
    P_GRID,
    AugmentationEvent,
    AugmentationSpec,
    Batch,
    apply_spec,
    compose,
    cutmix,
    elastic,
    geometric_baseline,
    hide_and_seek,
    jigsaw,
    organ_transplantation,
    random_erasing,
    warp_affine_pair,
)
from .cube import (
    INVALID_LABEL,
    HsiCube,
    LabelClass,
    LabelMap,
    SegmentationMask,
    default_wavelengths,
)
from .errors import (
    ConfigurationError,
    HsisegError,
    ParseError,
    StructuralError,
    SynthesisError,
    ValidationError,
)
from .io import (
    load_cube,
    load_labelmap,
    load_manifest,
    load_mask,
    load_pipeline,
    load_records_csv,
    save_cube,
    save_labelmap,
    save_manifest,
    save_mask,
    save_pipeline,
    save_records_csv,
    save_records_json,
)
from .manifest import (
    SCENARIOS,
    SPLITS,
    DatasetManifest,
    ImageRecord,
    SubsetCount,
    ValidationReport,
    filter_occlusion,
    validate_manifest,
)
from .metrics import MetricRecord, class_boundary, dsc, evaluate_image, nsd
from .ood import (
    ManipulationJob,
    isolate,
    parse_synthesized_id,
    remove,
    synthesize_dataset,
    synthesized_image_id,
)
from .preprocess import (
    CALIBRATION_EPSILON,
    DEFAULT_RGB_BANDS,
    CalibrationResult,
    NormalizationResult,
    RgbBands,
    calibrate,
    l1_normalize,
    rgb_reconstruct,
)
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "AggregationResult",
    "AugmentationEvent",
    "AugmentationSpec",
    "Batch",
    "CALIBRATION_EPSILON",
    "CalibrationResult",
    "ConfigurationError",
    "DEFAULT_RGB_BANDS",
    "DatasetManifest",
    "HsiCube",
    "HsisegError",
    "INVALID_LABEL",
    "ImageRecord",
    "KINDS",
    "LabelClass",
    "LabelMap",
    "ManipulationJob",
    "MethodRanking",
    "MetricRecord",
    "NeighborhoodMatrix",
    "NormalizationResult",
    "P_GRID",
    "ParseError",
    "RankingResult",
    "RgbBands",
    "RngStream",
    "SCENARIOS",
    "SPLITS",
    "SegmentationMask",
    "SubsetCount",
    "StructuralError",
    "SynthesisError",
    "ValidationError",
    "ValidationReport",
    "aggregate_hierarchical",
    "aggregate_removal",
    "apply_spec",
    "bootstrap_ranking",
    "calibrate",
    "class_boundary",
    "compose",
    "cutmix",
    "default_wavelengths",
    "dsc",
    "elastic",
    "evaluate_image",
    "filter_occlusion",
    "geometric_baseline",
    "hide_and_seek",
    "isolate",
    "jigsaw",
    "l1_normalize",
    "load_cube",
    "load_labelmap",
    "load_manifest",
    "load_mask",
    "load_pipeline",
    "load_records_csv",
    "neighborhood_matrix",
    "nsd",
    "organ_transplantation",
    "parse_synthesized_id",
    "random_erasing",
    "remove",
    "rgb_reconstruct",
    "save_cube",
    "save_labelmap",
    "save_manifest",
    "save_mask",
    "save_pipeline",
    "save_records_csv",
    "save_records_json",
    "synthesize_dataset",
    "synthesized_image_id",
    "validate_manifest",
    "warp_affine_pair",
]
