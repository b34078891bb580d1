from .io import (
    load_case,
    load_manifest_cases,
    load_report,
    read_manifest,
    save_case,
    save_report,
    write_manifest,
)
from .preprocess import (
    CT_SOFT_TISSUE_WINDOW,
    SYNTHETIC_WINDOW,
    crop_roi,
    largest_component_centroid,
    normalize_intensity,
)
from .split import split_dataset
from .synthetic import (
    FAMILIES,
    FamilySpec,
    generate_corpus,
    generate_synthetic_case,
    infer_report_from_voxels,
)
from .types import (
    ATTRIBUTE_GROUPS,
    ATTRIBUTE_NAMES,
    GROUP_SIZES,
    GROUP_SLICES,
    NUM_CATEGORIES,
    Case,
    DatasetSplit,
    LesionMask,
    StructuredReport,
    Volume,
    all_reports,
    decode_report,
    encode_report,
)

__all__ = [
    "ATTRIBUTE_GROUPS",
    "ATTRIBUTE_NAMES",
    "CT_SOFT_TISSUE_WINDOW",
    "Case",
    "DatasetSplit",
    "FAMILIES",
    "FamilySpec",
    "GROUP_SIZES",
    "GROUP_SLICES",
    "LesionMask",
    "NUM_CATEGORIES",
    "StructuredReport",
    "SYNTHETIC_WINDOW",
    "Volume",
    "all_reports",
    "crop_roi",
    "decode_report",
    "encode_report",
    "generate_corpus",
    "generate_synthetic_case",
    "infer_report_from_voxels",
    "largest_component_centroid",
    "load_case",
    "load_manifest_cases",
    "load_report",
    "normalize_intensity",
    "read_manifest",
    "save_case",
    "save_report",
    "split_dataset",
    "write_manifest",
]
