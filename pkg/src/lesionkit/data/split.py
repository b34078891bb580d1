"""Deterministic stratified train/val/test splitting with zero-shot hold-out."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ParameterError
from .types import Case, DatasetSplit


def _partition_counts(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder apportionment of n items over the three partitions."""
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    remainder = n - sum(counts)
    order = np.argsort([c - x for c, x in zip(counts, raw)])  # most-deprived first
    for i in range(remainder):
        counts[order[i]] += 1
    return counts


def split_dataset(
    cases: list[Case],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    zero_shot_types: set[str] | None = None,
    seed: int = 0,
) -> DatasetSplit:
    """Partition cases into train/val/test stratified by lesion_type.

    Cases whose lesion_type is in `zero_shot_types` are all routed to the
    zero_shot list and never appear elsewhere. Types with fewer cases than
    partitions fall back to a pooled unstratified pass (with a warning).
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError(f"ratios must sum to 1, got {ratios}")
    zero_shot_types = set(zero_shot_types or ())
    observed = {c.lesion_type for c in cases}
    unknown = zero_shot_types - observed
    if unknown:
        raise ParameterError(f"zero_shot_types not present in the corpus: {sorted(unknown)}")

    split = DatasetSplit()
    split.zero_shot = sorted(c.id for c in cases if c.lesion_type in zero_shot_types)

    remaining = [c for c in cases if c.lesion_type not in zero_shot_types]
    by_type: dict[str, list[str]] = {}
    for c in remaining:
        by_type.setdefault(c.lesion_type, []).append(c.id)

    rng = np.random.default_rng(seed)
    pooled: list[str] = []
    for lesion_type in sorted(by_type):
        ids = sorted(by_type[lesion_type])
        if len(ids) < 3:
            warnings.warn(
                f"lesion_type {lesion_type!r} has only {len(ids)} case(s); "
                "falling back to unstratified assignment for it",
                stacklevel=2,
            )
            pooled.extend(ids)
            continue
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        n_train, n_val, n_test = _partition_counts(len(ids), tuple(ratios))
        split.train.extend(shuffled[:n_train])
        split.val.extend(shuffled[n_train : n_train + n_val])
        split.test.extend(shuffled[n_train + n_val :])

    if pooled:
        perm = rng.permutation(len(pooled))
        shuffled = [pooled[i] for i in perm]
        n_train, n_val, n_test = _partition_counts(len(pooled), tuple(ratios))
        split.train.extend(shuffled[:n_train])
        split.val.extend(shuffled[n_train : n_train + n_val])
        split.test.extend(shuffled[n_train + n_val :])

    return split
