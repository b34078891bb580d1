"""Binary run-length encoding for masks on the wire.

Runs alternate background/foreground over the C-order (z-major) flattened
array, always starting with the background run (possibly length 0). Works for
any dimensionality; the original shape travels with the counts.
"""

from __future__ import annotations

import numpy as np

from ..errors import SchemaError


def encode_mask(mask: np.ndarray) -> dict:
    mask = np.asarray(mask)
    flat = (mask.ravel(order="C") > 0).astype(np.uint8)
    n = flat.size
    if n == 0:
        return {"shape": list(mask.shape), "counts": []}
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [n]])
    runs = np.diff(bounds).tolist()
    counts = runs if flat[0] == 0 else [0] + runs
    return {"shape": list(mask.shape), "counts": [int(c) for c in counts]}


def decode_mask(payload: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in payload["shape"])
        counts = [int(c) for c in payload["counts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed RLE payload: {exc}") from exc
    total = int(np.prod(shape)) if shape else 0
    if sum(counts) != total:
        raise SchemaError(f"RLE counts sum {sum(counts)} != {total} voxels for shape {shape}")
    if any(c < 0 for c in counts):
        raise SchemaError("RLE counts must be nonnegative")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in counts:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(shape)
