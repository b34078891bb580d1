"""Preprocessing: intensity windowing and lesion-centered ROI cropping."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import EmptyAnnotationError, ParameterError
from .types import Case, LesionMask, Volume

# 26-connectivity in 3D: all voxels sharing a face, edge, or corner.
_STRUCT_26 = np.ones((3, 3, 3), dtype=bool)


def largest_component_centroid(mask: np.ndarray) -> tuple[int, int, int]:
    """Centroid voxel (rounded) of the largest 26-connected foreground component."""
    mask = np.asarray(mask) > 0
    if not mask.any():
        raise EmptyAnnotationError("mask has no foreground voxels")
    labels, n = ndimage.label(mask, structure=_STRUCT_26)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    largest = int(np.argmax(counts))
    coords = np.argwhere(labels == largest)
    centroid = coords.mean(axis=0)
    return tuple(int(round(c)) for c in centroid)


def _crop_window(center: int, size: int, extent: int) -> tuple[int, int, int]:
    """1D window [start, start+size) around center, shifted inward; returns
    (start, stop, pad_before). Symmetric padding only when extent < size."""
    if extent >= size:
        start = center - size // 2
        start = max(0, min(start, extent - size))
        return start, start + size, 0
    pad_before = (size - extent) // 2
    return 0, extent, pad_before


def crop_roi(case: Case, roi_size: int | tuple[int, int, int]) -> Case:
    """Crop a case to `roi_size` centered on the largest lesion component.

    Windows that would cross the volume boundary are shifted inward so real
    intensities are kept; axes smaller than the ROI are padded symmetrically
    with the volume's minimum intensity (mask padded with 0).
    """
    if isinstance(roi_size, int):
        roi_size = (roi_size, roi_size, roi_size)
    roi_size = tuple(int(r) for r in roi_size)
    if any(r < 1 for r in roi_size):
        raise ParameterError(f"roi_size must be positive, got {roi_size}")

    center = largest_component_centroid(case.mask.data)
    vol = case.volume.data
    mask = case.mask.data

    windows = [
        _crop_window(center[ax], roi_size[ax], vol.shape[ax]) for ax in range(3)
    ]
    slices = tuple(slice(w[0], w[1]) for w in windows)
    vol_crop = vol[slices]
    mask_crop = mask[slices]

    if vol_crop.shape != roi_size:
        pads = []
        for ax in range(3):
            before = windows[ax][2]
            after = roi_size[ax] - vol_crop.shape[ax] - before
            pads.append((before, after))
        fill = float(vol.min())
        vol_crop = np.pad(vol_crop, pads, mode="constant", constant_values=fill)
        mask_crop = np.pad(mask_crop, pads, mode="constant", constant_values=0)

    return Case(
        id=case.id,
        volume=Volume(vol_crop.copy(), case.volume.spacing),
        mask=LesionMask(mask_crop.copy()),
        report=case.report,
        lesion_type=case.lesion_type,
        meta={**case.meta, "roi_origin": tuple(w[0] - w[2] for w in windows)},
    )


def normalize_intensity(volume: Volume, window_lo: float, window_hi: float) -> Volume:
    """Clip to [window_lo, window_hi], then map linearly onto [0, 1]."""
    if not window_lo < window_hi:
        raise ParameterError(f"degenerate window ({window_lo}, {window_hi})")
    data = np.asarray(volume.data, dtype=np.float32)
    clipped = np.clip(data, window_lo, window_hi)
    scaled = (clipped - window_lo) / (window_hi - window_lo)
    return Volume(scaled, volume.spacing)


# Default windows: synthetic phantoms are already in [0,1]; soft-tissue window
# for Hounsfield-unit CT.
SYNTHETIC_WINDOW = (0.0, 1.0)
CT_SOFT_TISSUE_WINDOW = (-200.0, 300.0)
