"""Synthetic phantom corpus: procedurally generated lesions with known reports.

Each case is a smooth-noise background, one bright "organ" ellipsoid, and one
lesion drawn from a shape family. Every report attribute is forced by
construction:

  shape          family primitive (sphere / fused blob / shell / scattered dots)
  density        sign and magnitude of the lesion-background intensity offset
  heterogeneity  amplitude of intra-lesion texture noise
  surface        Gaussian blur of the lesion alpha (boundary softness)
  invasion       whether the lesion is placed touching the organ or far away

`infer_report_from_voxels` re-derives all five attributes purely from the
emitted volume + mask, with no access to generator parameters; tests assert it
agrees with the constructed labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from ..errors import ParameterError
from .types import Case, LesionMask, StructuredReport, Volume

FAMILIES = ("sphere", "blob", "shell", "dots")

_FAMILY_SHAPE = {
    "sphere": "round-like",
    "blob": "irregular",
    "shell": "wall-thickening",
    "dots": "punctate-nodular",
}

# Intensity palette (normalized units).
BACKGROUND_LEVEL = 0.35
ORGAN_LEVEL = 0.82
LESION_FIELD_MAX = 0.64

# Density rule: offset < -tau -> hypodense, |offset| <= tau -> isodense, > tau -> hyperdense.
DENSITY_TAU = 0.1

# "close-relationship" means lesion and organ overlap by >= 1 voxel; "no close"
# keeps a chessboard gap wide enough that a 3-step dilation can never bridge
# it (and the blurred alpha tail cannot reach the organ).
_FAR_GAP_VOXELS = 6
_INVASION_DILATION_ITERS = 3

MIN_VOLUME_DIM = 40

_STRUCT_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class FamilySpec:
    """Generative recipe for one lesion family.

    Attribute fields left as None are sampled per case; setting them pins the
    corresponding generative factor (and therefore the report label).
    """

    family: str
    volume_shape: tuple[int, int, int] = (48, 48, 48)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    density: str | None = None
    heterogeneity: str | None = None
    surface: str | None = None
    invasion: str | None = None
    intensity_offset: float | None = None  # overrides `density`
    texture_amp: float | None = None  # overrides `heterogeneity`
    blur_sigma: float | None = None  # overrides `surface`

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown lesion family {self.family!r}; known: {list(FAMILIES)}")


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    if n < 1e-9:
        return np.array([1.0, 0.0, 0.0])
    return v / n


def _ellipsoid(shape, center, radii) -> np.ndarray:
    grids = np.ogrid[tuple(slice(0, s) for s in shape)]
    acc = np.zeros(shape, dtype=np.float64)
    for g, c, r in zip(grids, center, radii):
        acc = acc + ((g - c) / r) ** 2
    return acc <= 1.0


def _sphere(shape, center, radius) -> np.ndarray:
    return _ellipsoid(shape, center, (radius, radius, radius))


def _draw_lesion_primitive(
    family: str, shape, center: np.ndarray, rng: np.random.Generator, scale: float = 1.0
) -> tuple[np.ndarray, float]:
    """Binary lesion primitive and its effective bounding radius.

    `scale` shrinks radii on small volumes (clamped so structures keep their
    defining morphology, e.g. shell walls stay hollow-detectable).
    """
    if family == "sphere":
        r = rng.uniform(5.5, 8.0) * scale
        radii = r * (1.0 + rng.uniform(-0.06, 0.06, size=3))
        return _ellipsoid(shape, center, radii), float(radii.max())

    if family == "blob":
        # redraw until the union is clearly non-spherical yet still connected
        for _ in range(30):
            r0 = rng.uniform(4.5, 6.0) * scale
            mask = _sphere(shape, center, r0)
            n_lumps = int(rng.integers(3, 6))
            r_eff = r0
            for _ in range(n_lumps):
                u = _unit_vector(rng)
                dist = rng.uniform(0.95, 1.25) * r0
                rj = rng.uniform(0.5, 0.75) * r0
                c = center + u * dist
                mask |= _sphere(shape, c, rj)
                r_eff = max(r_eff, dist + rj)
            _, n_comp = ndimage.label(mask, structure=_STRUCT_26)
            if n_comp == 1 and _equal_volume_sphere_iou(mask) <= 0.62:
                return mask, float(r_eff)
        raise ParameterError("could not draw a connected, clearly irregular blob")

    if family == "shell":
        r = rng.uniform(6.5, 8.5) * scale
        t = rng.uniform(2.0, 2.4)
        outer = _sphere(shape, center, r)
        inner = _sphere(shape, center, r - t)
        return outer & ~inner, float(r)

    if family == "dots":
        n_dots = int(rng.integers(5, 8))
        region = 9.0 * scale
        placed: list[tuple[np.ndarray, float]] = []
        attempts = 0
        while len(placed) < n_dots and attempts < 300:
            attempts += 1
            u = _unit_vector(rng)
            c = center + u * rng.uniform(0.0, region)
            if all(np.linalg.norm(c - pc) >= 6.5 for pc, _ in placed):
                placed.append((c, rng.uniform(2.0, 2.5)))
        if len(placed) < 4:
            raise ParameterError("could not place at least 4 separated dots")
        mask = np.zeros(shape, dtype=bool)
        r_eff = 0.0
        for c, r in placed:
            mask |= _sphere(shape, c, r)
            r_eff = max(r_eff, float(np.linalg.norm(c - center) + r))
        return mask, r_eff

    raise ParameterError(f"unknown lesion family {family!r}")


def _equal_volume_sphere_iou(mask: np.ndarray) -> float:
    """Overlap between a mask and the equal-volume sphere at its centroid."""
    coords = np.argwhere(mask)
    centroid = coords.mean(axis=0)
    radius = (3.0 * int(mask.sum()) / (4.0 * math.pi)) ** (1.0 / 3.0)
    ball = _sphere(mask.shape, centroid, radius)
    return float((mask & ball).sum() / max(int((mask | ball).sum()), 1))


def _organ_chebyshev_gap(lesion: np.ndarray, organ: np.ndarray) -> int:
    """Min chessboard distance from any lesion voxel to the organ (0 = overlap)."""
    if (lesion & organ).any():
        return 0
    dist = ndimage.distance_transform_cdt(~organ, metric="chessboard")
    return int(dist[lesion].min())


def _place_organ(
    shape,
    lesion_mask: np.ndarray,
    lesion_center: np.ndarray,
    lesion_radius: float,
    close: bool,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> np.ndarray:
    """Place the organ ellipsoid overlapping the lesion (close) or well away.

    Far placements need the most room, so half the direction candidates aim at
    the corner farthest from the lesion (where the diagonal offers it).
    """
    dims = np.array(shape, dtype=float)
    far_corner = np.where(lesion_center < dims / 2, dims - 4.0, 4.0)
    corner_dir = far_corner - lesion_center
    corner_dir = corner_dir / np.linalg.norm(corner_dir)
    for shrink in range(3):
        radii_lo = (7.0 - 1.5 * shrink) * scale
        radii_hi = (10.0 - 1.5 * shrink) * scale
        for attempt in range(60):
            radii = rng.uniform(radii_lo, radii_hi, size=3)
            u = _unit_vector(rng)
            if not close and attempt % 2 == 0:
                u = corner_dir + 0.4 * u
                u = u / np.linalg.norm(u)
            r_along = 1.0 / math.sqrt(float(np.sum((u / radii) ** 2)))
            gap0 = -1.5 if close else _FAR_GAP_VOXELS + 1.0
            d = lesion_radius + r_along + gap0
            for _adjust in range(6):
                center = lesion_center + u * d
                if np.any(center < radii + 1.5) or np.any(center > dims - radii - 2.5):
                    break  # out of bounds, try a new direction
                organ = _ellipsoid(shape, center, radii)
                if not organ.any():
                    break
                gap = _organ_chebyshev_gap(lesion_mask, organ)
                if close:
                    overlap = int((lesion_mask & organ).sum())
                    outside = int((lesion_mask & ~organ).sum())
                    if overlap >= 1 and outside >= 0.6 * lesion_mask.sum():
                        return organ
                    if overlap == 0:
                        d -= max(gap, 1)
                    else:
                        d += 2.0  # swallowed too deep, back off
                else:
                    if gap >= _FAR_GAP_VOXELS:
                        return organ
                    d += (_FAR_GAP_VOXELS - gap) + 1.0
    raise ParameterError("could not place organ satisfying the invasion condition")


def _smooth_noise(shape, rng: np.random.Generator, sigma: float, amp: float) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.normal(size=shape), sigma)
    std = noise.std()
    if std > 1e-9:
        noise = noise / std
    return (amp * noise).astype(np.float64)


def generate_synthetic_case(seed: int, spec: FamilySpec, case_id: str | None = None) -> Case:
    """Deterministically synthesize one case; same (seed, spec) -> identical bits."""
    rng = np.random.default_rng(seed)
    shape = tuple(int(s) for s in spec.volume_shape)
    if any(s < MIN_VOLUME_DIM for s in shape):
        raise ParameterError(
            f"volume_shape {shape} too small; need >= {MIN_VOLUME_DIM} per axis"
        )
    geom_scale = float(np.clip(min(shape) / 48.0, 0.85, 1.0))

    # --- sample or pin the generative factors -------------------------------
    if spec.intensity_offset is not None:
        offset = float(spec.intensity_offset)
    else:
        density = spec.density or rng.choice(["hypodense", "isodense", "hyperdense"])
        if density == "hypodense":
            offset = -0.19 + rng.uniform(-0.015, 0.015)
        elif density == "hyperdense":
            offset = 0.21 + rng.uniform(-0.015, 0.015)
        else:
            offset = float(rng.choice([-1.0, 1.0])) * rng.uniform(0.035, 0.055)
    if offset < -DENSITY_TAU:
        density_label = "hypodense"
    elif offset > DENSITY_TAU:
        density_label = "hyperdense"
    else:
        density_label = "isodense"

    if spec.texture_amp is not None:
        texture_amp = float(spec.texture_amp)
    else:
        hetero = spec.heterogeneity or rng.choice(["homogeneous", "heterogeneous"])
        texture_amp = rng.uniform(0.13, 0.16) if hetero == "heterogeneous" else rng.uniform(0.0, 0.01)
    heterogeneity_label = "heterogeneous" if texture_amp > 0.05 else "homogeneous"

    if spec.blur_sigma is not None:
        blur_sigma = float(spec.blur_sigma)
    else:
        if density_label == "isodense" and heterogeneity_label == "homogeneous":
            # an isodense homogeneous lesion has no measurable edge to blur;
            # its boundary is only ever well-defined
            surface = spec.surface or "well-defined"
        else:
            surface = spec.surface or rng.choice(["well-defined", "ill-defined"])
        if surface == "ill-defined":
            # thin structures (shell walls, small dots) take a gentler blur so
            # their interior contrast survives
            blur_sigma = (
                rng.uniform(0.9, 1.2) if spec.family in ("shell", "dots") else rng.uniform(1.4, 1.9)
            )
        else:
            blur_sigma = 0.0
    surface_label = "ill-defined" if blur_sigma >= 0.5 else "well-defined"

    invasion_label = spec.invasion or str(rng.choice(["no-close-relationship", "close-relationship"]))
    close = invasion_label == "close-relationship"

    # --- geometry ------------------------------------------------------------
    # lesion sits off-centre toward a random side per axis, leaving the
    # opposite side free for a non-adjacent organ
    dims = np.array(shape, dtype=float)
    frac = rng.uniform(0.30, 0.42, size=3)
    side = rng.integers(0, 2, size=3)
    lesion_center = np.where(side == 1, dims * (1.0 - frac), dims * frac)
    margin = 12.0 * geom_scale
    lesion_center = np.clip(lesion_center, margin, dims - margin)
    lesion_mask, lesion_radius = _draw_lesion_primitive(
        spec.family, shape, lesion_center, rng, scale=geom_scale
    )
    if not lesion_mask.any():
        raise ParameterError("lesion primitive produced no voxels")
    organ_mask = _place_organ(
        shape, lesion_mask, lesion_center, lesion_radius, close, rng, scale=geom_scale
    )

    # --- intensities ----------------------------------------------------------
    vol = BACKGROUND_LEVEL + _smooth_noise(shape, rng, sigma=4.0, amp=0.015)
    vol += rng.normal(0.0, 0.005, size=shape)
    organ_tex = rng.normal(0.0, 0.01, size=shape)
    vol = np.where(organ_mask, ORGAN_LEVEL + organ_tex, vol)

    lesion_field = BACKGROUND_LEVEL + offset + _smooth_noise(shape, rng, sigma=0.45, amp=texture_amp)
    lesion_field = np.clip(lesion_field, 0.02, LESION_FIELD_MAX)

    alpha = lesion_mask.astype(np.float64)
    if blur_sigma >= 0.5:
        # blur and renormalize per connected component so small dots keep
        # their interior contrast instead of being washed out
        labels, n_comp = ndimage.label(lesion_mask, structure=_STRUCT_26)
        alpha = np.zeros(shape, dtype=np.float64)
        for comp in range(1, n_comp + 1):
            blurred = ndimage.gaussian_filter((labels == comp).astype(np.float64), blur_sigma)
            peak = blurred.max()
            if peak > 1e-9:
                blurred = blurred / peak
            alpha = np.maximum(alpha, blurred)
        alpha = np.clip(alpha, 0.0, 1.0)
    vol = vol * (1.0 - alpha) + lesion_field * alpha
    vol = np.clip(vol, 0.0, 1.0).astype(np.float32)

    report = StructuredReport(
        shape=_FAMILY_SHAPE[spec.family],
        invasion=invasion_label,
        density=density_label,
        heterogeneity=heterogeneity_label,
        surface=surface_label,
    )
    return Case(
        id=case_id or f"{spec.family}-{seed:06d}",
        volume=Volume(vol, spec.spacing),
        mask=LesionMask(lesion_mask.astype(np.uint8)),
        report=report,
        lesion_type=spec.family,
    )


def generate_corpus(
    n: int,
    seed: int,
    families: tuple[str, ...] = FAMILIES,
    volume_shape: tuple[int, int, int] = (48, 48, 48),
) -> list[Case]:
    """Round-robin `n` cases over `families`, each from an independent seed."""
    specs = {fam: FamilySpec(family=fam, volume_shape=volume_shape) for fam in families}
    seeds = np.random.SeedSequence(seed).generate_state(n)
    cases = []
    for i in range(n):
        fam = families[i % len(families)]
        cases.append(
            generate_synthetic_case(int(seeds[i]), specs[fam], case_id=f"{fam}-{i:04d}")
        )
    return cases


# ---------------------------------------------------------------------------
# Independent rule checker: re-derives the report from volume + mask alone.
# ---------------------------------------------------------------------------

ORGAN_INTENSITY_THRESHOLD = 0.70
_HET_STD_THRESHOLD = 0.045
_SURFACE_RING_THRESHOLD = 0.15
_SURFACE_CONTRAST_FLOOR = 0.045
_SURFACE_STD_RATIO_THRESHOLD = 1.8
_HOLLOW_FRACTION_THRESHOLD = 0.15
_ROUNDNESS_IOU_THRESHOLD = 0.72
_STRUCT_6 = ndimage.generate_binary_structure(3, 1)


def _mask_core(mask: np.ndarray, organ_est: np.ndarray | None = None) -> np.ndarray:
    """Interior voxels for intensity statistics: one face-erosion layer off,
    organ-adjacent voxels excluded (alpha bleed would contaminate them).

    Tiny cores give noisy means (texture sampling), so below 40 voxels the
    statistics fall back to the whole mask, which is acceptable because
    per-component alpha normalization keeps mask voxels near full contrast.
    """
    skirt = None
    if organ_est is not None:
        skirt = ndimage.binary_dilation(organ_est, structure=_STRUCT_26, iterations=2)
    candidates = [ndimage.binary_erosion(mask, structure=_STRUCT_6), mask]
    if skirt is not None:
        candidates = [candidates[0] & ~skirt, mask & ~skirt] + candidates
    for cand in candidates:
        if cand.sum() >= 40:
            return cand
    for cand in candidates:
        if cand.any():
            return cand
    return mask


def _infer_shape(mask: np.ndarray) -> str:
    labels, n_comp = ndimage.label(mask, structure=_STRUCT_26)
    if n_comp >= 4:
        return "punctate-nodular"
    filled = ndimage.binary_fill_holes(mask)
    hollow = (filled & ~mask).sum() / max(int(filled.sum()), 1)
    if hollow > _HOLLOW_FRACTION_THRESHOLD:
        return "wall-thickening"
    iou = _equal_volume_sphere_iou(mask)
    return "round-like" if iou >= _ROUNDNESS_IOU_THRESHOLD else "irregular"


def infer_report_from_voxels(volume: np.ndarray, mask: np.ndarray) -> StructuredReport:
    """Recompute the five attributes from voxel data only (no generator state)."""
    volume = np.asarray(volume, dtype=np.float64)
    mask = np.asarray(mask) > 0

    dil3 = ndimage.binary_dilation(mask, structure=_STRUCT_26, iterations=_INVASION_DILATION_ITERS)
    dil5 = ndimage.binary_dilation(dil3, structure=_STRUCT_26, iterations=2)
    organ_est = (volume >= ORGAN_INTENSITY_THRESHOLD) & ~mask
    far_bg = ~dil5 & ~ndimage.binary_dilation(organ_est, structure=_STRUCT_26, iterations=2)
    bg_mean = float(volume[far_bg].mean())

    core = _mask_core(mask, organ_est)
    diff = float(volume[core].mean()) - bg_mean
    if diff < -DENSITY_TAU:
        density = "hypodense"
    elif diff > DENSITY_TAU:
        density = "hyperdense"
    else:
        density = "isodense"

    heterogeneity = (
        "heterogeneous" if float(volume[core].std()) > _HET_STD_THRESHOLD else "homogeneous"
    )

    # Surface: compare the first face-neighbour ring outside the mask against
    # a reference ring 2-3 voxels out. A sharp boundary leaves both at the
    # local background level; a blurred one leaks residual lesion intensity
    # into the inner ring. When the lesion has too little mean contrast for
    # that to be measurable, blur still betrays itself by texture bleeding
    # into the inner ring (elevated ring variance). Organ-adjacent voxels are
    # excluded throughout (alpha bleed would corrupt them).
    organ_skirt = ndimage.binary_dilation(organ_est, structure=_STRUCT_26, iterations=2)
    dil1 = ndimage.binary_dilation(mask, structure=_STRUCT_6)
    ring_inner = dil1 & ~mask & ~organ_skirt
    ring_outer = dil3 & ~ndimage.binary_dilation(mask, structure=_STRUCT_26) & ~organ_skirt
    if not ring_inner.any() or not ring_outer.any():
        ring_inner = dil1 & ~mask
        ring_outer = dil3 & ~ndimage.binary_dilation(mask, structure=_STRUCT_26)
    std_ratio = float(volume[ring_inner].std()) / max(float(volume[ring_outer].std()), 1e-6)
    blurred = std_ratio > _SURFACE_STD_RATIO_THRESHOLD
    if not blurred and abs(diff) >= _SURFACE_CONTRAST_FLOOR:
        ring_excess = (float(volume[ring_inner].mean()) - float(volume[ring_outer].mean())) / diff
        blurred = ring_excess > _SURFACE_RING_THRESHOLD
    surface = "ill-defined" if blurred else "well-defined"

    invasion = (
        "close-relationship" if (dil3 & organ_est).any() else "no-close-relationship"
    )

    return StructuredReport(
        shape=_infer_shape(mask),
        invasion=invasion,
        density=density,
        heterogeneity=heterogeneity,
        surface=surface,
    )
