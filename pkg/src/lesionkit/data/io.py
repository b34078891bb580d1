"""Case-level I/O: volume+mask+report triplets and dataset manifests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import AlignmentError, EmptyAnnotationError, NotFoundError, SchemaError
from .nifti import read_volume, write_volume
from .types import Case, LesionMask, StructuredReport, Volume


def load_report(path: str | Path) -> StructuredReport:
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"report file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: report must be a JSON object")
    return StructuredReport.from_dict(payload)


def save_report(path: str | Path, report: StructuredReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.as_dict(), indent=2))
    return path


def load_case(
    volume_path: str | Path,
    mask_path: str | Path,
    report_path: str | Path,
    case_id: str | None = None,
    lesion_type: str = "",
) -> Case:
    """Load one triplet. Intensities are kept un-normalized; spacing is preserved.

    Raises AlignmentError when the mask grid does not match the volume grid,
    SchemaError for unknown report categories, EmptyAnnotationError when the
    mask has no foreground.
    """
    for p in (volume_path, mask_path):
        if not Path(p).exists():
            raise NotFoundError(f"file not found: {p}")
    vol_data, vol_spacing = read_volume(volume_path)
    mask_data, _ = read_volume(mask_path)
    if tuple(mask_data.shape) != tuple(vol_data.shape):
        raise AlignmentError(
            f"mask shape {tuple(mask_data.shape)} != volume shape {tuple(vol_data.shape)}"
        )
    mask_data = (np.asarray(mask_data) > 0).astype(np.uint8)
    if not mask_data.any():
        raise EmptyAnnotationError(f"mask {mask_path} has no foreground voxels")
    report = load_report(report_path)
    cid = case_id if case_id is not None else Path(volume_path).name.split(".")[0]
    return Case(
        id=cid,
        volume=Volume(vol_data, vol_spacing),
        mask=LesionMask(mask_data),
        report=report,
        lesion_type=lesion_type,
    )


def save_case(case: Case, out_dir: str | Path, fmt: str = "nii.gz") -> dict[str, str]:
    """Write a case triplet under `out_dir`; returns a manifest entry (paths relative)."""
    if fmt not in ("nii.gz", "nii", "raw"):
        raise SchemaError(f"unknown case format {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vol_name = f"{case.id}_volume.{fmt}"
    mask_name = f"{case.id}_mask.{fmt}"
    report_name = f"{case.id}_report.json"
    write_volume(out_dir / vol_name, case.volume.data.astype(np.float32), case.volume.spacing)
    write_volume(out_dir / mask_name, case.mask.data.astype(np.uint8), case.volume.spacing)
    save_report(out_dir / report_name, case.report)
    return {
        "id": case.id,
        "volume": vol_name,
        "mask": mask_name,
        "report": report_name,
        "lesion_type": case.lesion_type,
    }


def write_manifest(path: str | Path, entries: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries, indent=2))
    return path


def read_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"manifest not found: {path}")
    entries = json.loads(path.read_text())
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: manifest must be a JSON list")
    required = {"id", "volume", "mask", "report"}
    for e in entries:
        if not isinstance(e, dict) or not required.issubset(e):
            raise SchemaError(f"{path}: manifest entries need keys {sorted(required)}")
    return entries


def load_manifest_cases(path: str | Path) -> list[Case]:
    """Load every case listed in a manifest; paths resolve relative to the manifest."""
    path = Path(path)
    base = path.parent
    cases = []
    for e in read_manifest(path):
        cases.append(
            load_case(
                base / e["volume"],
                base / e["mask"],
                base / e["report"],
                case_id=e["id"],
                lesion_type=e.get("lesion_type", ""),
            )
        )
    return cases
