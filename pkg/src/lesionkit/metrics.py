"""Evaluation metrics: DSC, HD95 (mm), per-attribute report accuracy."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .data.types import ATTRIBUTE_NAMES, StructuredReport
from .errors import AlignmentError

# Fixed serialization column order for metric tables.
COLUMNS = (
    "id",
    "dsc",
    "hd95_mm",
    "shape_acc",
    "invasion_acc",
    "density_acc",
    "heterogeneity_acc",
    "surface_acc",
)


def dsc(pred_binary, gt) -> float:
    """Dice coefficient 2|A∩B|/(|A|+|B|); 1.0 when both masks are empty."""
    a = np.asarray(pred_binary) > 0
    b = np.asarray(gt) > 0
    if a.shape != b.shape:
        raise AlignmentError(f"shape mismatch {a.shape} vs {b.shape}")
    na, nb = int(a.sum()), int(b.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (na + nb)


def _boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Foreground voxels with at least one face-neighbour outside the mask."""
    eroded = ndimage.binary_erosion(
        mask, structure=ndimage.generate_binary_structure(3, 1), border_value=0
    )
    return np.argwhere(mask & ~eroded)


def hd95(pred_binary, gt, spacing=(1.0, 1.0, 1.0)) -> float:
    """Symmetric 95th-percentile surface distance in millimetres.

    Boundary voxel coordinates are scaled by the physical spacing; each
    directed distance set takes its 95th percentile (linear interpolation) and
    the result is the max of the two directions. Returns NaN when either mask
    is empty (undefined; excluded from aggregates).
    """
    a = np.asarray(pred_binary) > 0
    b = np.asarray(gt) > 0
    if a.shape != b.shape:
        raise AlignmentError(f"shape mismatch {a.shape} vs {b.shape}")
    if not a.any() or not b.any():
        return float("nan")
    spacing = np.asarray(spacing, dtype=np.float64)
    pa = _boundary_voxels(a) * spacing
    pb = _boundary_voxels(b) * spacing
    d_ab = cKDTree(pb).query(pa, k=1)[0]
    d_ba = cKDTree(pa).query(pb, k=1)[0]
    return float(max(np.percentile(d_ab, 95), np.percentile(d_ba, 95)))


def attribute_accuracy(
    predicted: list[StructuredReport], ground_truth: list[StructuredReport]
) -> dict[str, float]:
    """Per-attribute exact-match fraction plus their unweighted average."""
    if len(predicted) != len(ground_truth) or len(predicted) == 0:
        raise AlignmentError(
            f"need equal nonempty report lists, got {len(predicted)} vs {len(ground_truth)}"
        )
    accs = {}
    for name in ATTRIBUTE_NAMES:
        hits = sum(
            1 for p, g in zip(predicted, ground_truth) if getattr(p, name) == getattr(g, name)
        )
        accs[name] = hits / len(predicted)
    accs["average"] = sum(accs[n] for n in ATTRIBUTE_NAMES) / len(ATTRIBUTE_NAMES)
    return accs


@dataclass
class MetricsTable:
    """Per-case rows plus aggregate statistics, serializable to CSV/JSON."""

    rows: list[dict] = field(default_factory=list)
    per_click_dsc: list[float] = field(default_factory=list)  # mean DSC after click i+1

    def add_case(
        self,
        case_id: str,
        dsc_value: float,
        hd95_value: float,
        predicted: StructuredReport,
        ground_truth: StructuredReport,
    ) -> None:
        row = {"id": case_id, "dsc": dsc_value, "hd95_mm": hd95_value}
        for name in ATTRIBUTE_NAMES:
            row[f"{name}_acc"] = float(getattr(predicted, name) == getattr(ground_truth, name))
        self.rows.append(row)

    def aggregate(self) -> dict[str, float]:
        if not self.rows:
            return {}
        agg: dict[str, float] = {"n_cases": float(len(self.rows))}
        agg["dsc"] = float(np.mean([r["dsc"] for r in self.rows]))
        hd_values = [r["hd95_mm"] for r in self.rows if not math.isnan(r["hd95_mm"])]
        agg["hd95_mm"] = float(np.mean(hd_values)) if hd_values else float("nan")
        agg["hd95_undefined"] = float(len(self.rows) - len(hd_values))
        for name in ATTRIBUTE_NAMES:
            agg[f"{name}_acc"] = float(np.mean([r[f"{name}_acc"] for r in self.rows]))
        agg["attr_acc_avg"] = float(
            np.mean([agg[f"{name}_acc"] for name in ATTRIBUTE_NAMES])
        )
        return agg

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row[k] for k in COLUMNS})
        return path

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "columns": list(COLUMNS),
            "rows": self.rows,
            "aggregate": self.aggregate(),
            "per_click_dsc": self.per_click_dsc,
        }
        path.write_text(json.dumps(payload, indent=2, allow_nan=True))
        return path
