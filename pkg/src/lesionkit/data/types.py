"""Core value types: volumes, masks, structured reports, cases, splits.

A structured report is five categorical attributes describing one lesion.
The category vocabulary is fixed; every attribute takes exactly one value
from its group. Reports round-trip to a 13-dimensional concatenated
one-hot vector (group sizes 4, 2, 3, 2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from itertools import product
from typing import Iterator

import numpy as np

from ..errors import AlignmentError, EmptyAnnotationError, NumericError, SchemaError

# Attribute groups in canonical order. Order and group sizes are part of the
# wire/label contract (13 = 4 + 2 + 3 + 2 + 2).
ATTRIBUTE_GROUPS: dict[str, tuple[str, ...]] = {
    "shape": ("round-like", "irregular", "wall-thickening", "punctate-nodular"),
    "invasion": ("no-close-relationship", "close-relationship"),
    "density": ("hypodense", "isodense", "hyperdense"),
    "heterogeneity": ("homogeneous", "heterogeneous"),
    "surface": ("well-defined", "ill-defined"),
}

ATTRIBUTE_NAMES: tuple[str, ...] = tuple(ATTRIBUTE_GROUPS)
GROUP_SIZES: tuple[int, ...] = tuple(len(v) for v in ATTRIBUTE_GROUPS.values())
NUM_CATEGORIES: int = sum(GROUP_SIZES)  # 13

# Slice of each group inside the concatenated 13-vector.
GROUP_SLICES: dict[str, slice] = {}
_off = 0
for _name, _cats in ATTRIBUTE_GROUPS.items():
    GROUP_SLICES[_name] = slice(_off, _off + len(_cats))
    _off += len(_cats)
del _off, _name, _cats


@dataclass(frozen=True)
class StructuredReport:
    """Five-attribute categorical description of a single lesion."""

    shape: str
    invasion: str
    density: str
    heterogeneity: str
    surface: str

    def __post_init__(self) -> None:
        for name in ATTRIBUTE_NAMES:
            value = getattr(self, name)
            legal = ATTRIBUTE_GROUPS[name]
            if value not in legal:
                raise SchemaError(
                    f"unknown {name} category {value!r}; legal values: {list(legal)}"
                )

    def as_dict(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in ATTRIBUTE_NAMES}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "StructuredReport":
        missing = [n for n in ATTRIBUTE_NAMES if n not in d]
        if missing:
            raise SchemaError(f"report is missing attributes: {missing}")
        extra = [k for k in d if k not in ATTRIBUTE_NAMES]
        if extra:
            raise SchemaError(f"report has unknown keys: {extra}")
        return cls(**{n: d[n] for n in ATTRIBUTE_NAMES})


def all_reports() -> Iterator[StructuredReport]:
    """Enumerate all 96 valid reports (4 * 2 * 3 * 2 * 2)."""
    for combo in product(*ATTRIBUTE_GROUPS.values()):
        yield StructuredReport(*combo)


def encode_report(report: StructuredReport) -> np.ndarray:
    """Concatenated one-hot encoding: 13-vector with exactly one 1 per group."""
    vec = np.zeros(NUM_CATEGORIES, dtype=np.float64)
    for name in ATTRIBUTE_NAMES:
        cats = ATTRIBUTE_GROUPS[name]
        idx = cats.index(getattr(report, name))
        vec[GROUP_SLICES[name].start + idx] = 1.0
    return vec


def decode_report(probs: np.ndarray) -> StructuredReport:
    """Per-group argmax over a 13-vector; ties resolve to the lowest index."""
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if probs.shape[0] != NUM_CATEGORIES:
        raise SchemaError(f"expected {NUM_CATEGORIES} entries, got {probs.shape[0]}")
    if not np.isfinite(probs).all():
        raise NumericError("report probabilities contain non-finite values")
    values = {}
    for name in ATTRIBUTE_NAMES:
        group = probs[GROUP_SLICES[name]]
        values[name] = ATTRIBUTE_GROUPS[name][int(np.argmax(group))]
    return StructuredReport(**values)


@dataclass
class Volume:
    """3D scalar intensity grid with physical voxel spacing (mm, (sz,sy,sx))."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise AlignmentError(f"volume must be 3D, got ndim={self.data.ndim}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise SchemaError(f"spacing must be 3 positive floats, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)


@dataclass
class LesionMask:
    """Binary (ground truth) or probabilistic (prediction) grid paired to a Volume."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise AlignmentError(f"mask must be 3D, got ndim={self.data.ndim}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)

    def is_binary(self) -> bool:
        return bool(np.isin(self.data, (0, 1)).all())

    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))


@dataclass
class Case:
    """One study: volume + binary lesion mask + structured report + family tag."""

    id: str
    volume: Volume
    mask: LesionMask
    report: StructuredReport
    lesion_type: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.volume.shape != self.mask.shape:
            raise AlignmentError(
                f"case {self.id}: mask shape {self.mask.shape} != volume shape {self.volume.shape}"
            )
        if self.mask.foreground_count() == 0:
            raise EmptyAnnotationError(f"case {self.id}: mask has no foreground voxels")


@dataclass
class DatasetSplit:
    """Disjoint id lists; zero_shot families never appear in train/val/test."""

    train: list[str] = field(default_factory=list)
    val: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    zero_shot: list[str] = field(default_factory=list)

    def all_ids(self) -> list[str]:
        return self.train + self.val + self.test + self.zero_shot

    def as_dict(self) -> dict[str, list[str]]:
        return {f.name: list(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSplit":
        return cls(
            train=list(d.get("train", [])),
            val=list(d.get("val", [])),
            test=list(d.get("test", [])),
            zero_shot=list(d.get("zero_shot", [])),
        )
