"""Simulated expert clicks: error maps, corrective sampling, interactive rollouts.

A prediction's false negatives (missed lesion) attract positive clicks and its
false positives (spurious prediction) attract negative clicks; a corrective
click is drawn uniformly over the union of both error regions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .data.types import Case, StructuredReport, decode_report
from .errors import AlignmentError, EmptyAnnotationError
from .metrics import dsc
from .refine import NEGATIVE, POSITIVE, PointPrompt

PREDICTION_THRESHOLD = 0.5


@dataclass
class ErrorMaps:
    fn_map: np.ndarray  # missed lesion voxels: gt & ~pred
    fp_map: np.ndarray  # spurious prediction voxels: ~gt & pred

    def is_empty(self) -> bool:
        return not (self.fn_map.any() or self.fp_map.any())


def compute_error_maps(pred_binary, gt) -> ErrorMaps:
    pred = np.asarray(pred_binary) > 0
    target = np.asarray(gt) > 0
    if pred.shape != target.shape:
        raise AlignmentError(f"shape mismatch {pred.shape} vs {target.shape}")
    return ErrorMaps(fn_map=target & ~pred, fp_map=~target & pred)


def sample_click(error_maps: ErrorMaps, seed: int) -> PointPrompt | None:
    """Uniform draw over all error voxels; positive iff the voxel was missed.

    Returns None when both maps are empty (the prediction has converged).
    """
    fn_coords = np.argwhere(error_maps.fn_map)
    fp_coords = np.argwhere(error_maps.fp_map)
    n_fn, n_fp = fn_coords.shape[0], fp_coords.shape[0]
    if n_fn + n_fp == 0:
        return None
    rng = np.random.default_rng(seed)
    idx = int(rng.integers(n_fn + n_fp))
    if idx < n_fn:
        return PointPrompt(coord=tuple(fn_coords[idx]), label=POSITIVE, source="simulated")
    return PointPrompt(coord=tuple(fp_coords[idx - n_fn]), label=NEGATIVE, source="simulated")


def initial_click(gt, seed: int) -> PointPrompt:
    """First click: uniform positive draw from the ground-truth foreground.

    Before any prediction exists the error maps reduce to fn = gt, so this is
    sample_click against an empty prediction, sourced as the user's click.
    """
    target = np.asarray(gt) > 0
    if not target.any():
        raise EmptyAnnotationError("cannot place an initial click on an empty mask")
    maps = compute_error_maps(np.zeros_like(target), target)
    click = sample_click(maps, seed)
    assert click is not None and click.label == POSITIVE
    return PointPrompt(coord=click.coord, label=POSITIVE, source="user")


class Predictor(Protocol):
    """Anything that maps (volume, clicks, previous mask) to model outputs."""

    def predict(
        self,
        volume: np.ndarray,
        clicks: list[PointPrompt],
        prev_mask: np.ndarray | None = None,
        seed: int = 0,
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Returns (mask probabilities, 13 report probabilities, predicted IoU)."""
        ...


@dataclass
class TrajectoryStep:
    dsc: float
    attr_acc: float
    iou_pred: float

    def as_dict(self) -> dict:
        return {"dsc": self.dsc, "attr_acc": self.attr_acc, "iou_pred": self.iou_pred}


@dataclass
class Trajectory:
    clicks: list[PointPrompt] = field(default_factory=list)
    per_step: list[TrajectoryStep] = field(default_factory=list)
    converged: bool = False
    final_mask_prob: np.ndarray | None = None
    final_report: StructuredReport | None = None

    def dump_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            for click, step in zip(self.clicks, self.per_step):
                f.write(json.dumps({"click": click.as_dict(), **step.as_dict()}) + "\n")
        return path


def _report_accuracy(pred: StructuredReport, gt: StructuredReport) -> float:
    names = ("shape", "invasion", "density", "heterogeneity", "surface")
    return sum(getattr(pred, n) == getattr(gt, n) for n in names) / len(names)


def run_trajectory(model: Predictor, case: Case, n_clicks: int, seed: int) -> Trajectory:
    """Interactive loop: click -> predict -> sample a corrective click -> repeat.

    The first click is a foreground (user) click; later clicks are simulated
    corrections drawn from the current error maps. Stops early once the
    thresholded prediction matches the ground truth exactly.
    """
    if n_clicks < 1:
        raise AlignmentError(f"n_clicks must be >= 1, got {n_clicks}")
    gt = case.mask.data > 0
    volume = case.volume.data

    traj = Trajectory()
    click = initial_click(gt, seed)
    prev_mask: np.ndarray | None = None
    for step in range(n_clicks):
        traj.clicks.append(click)
        mask_prob, report_probs, iou_pred = model.predict(
            volume, list(traj.clicks), prev_mask=prev_mask, seed=seed + step
        )
        pred_binary = mask_prob >= PREDICTION_THRESHOLD
        report = decode_report(report_probs)
        traj.per_step.append(
            TrajectoryStep(
                dsc=dsc(pred_binary, gt),
                attr_acc=_report_accuracy(report, case.report),
                iou_pred=float(iou_pred),
            )
        )
        traj.final_mask_prob = mask_prob
        traj.final_report = report
        if step + 1 >= n_clicks:
            break
        maps = compute_error_maps(pred_binary, gt)
        nxt = sample_click(maps, seed + 1000 * (step + 1))
        if nxt is None:
            traj.converged = True
            break
        prev_mask = mask_prob
        click = nxt
    return traj
