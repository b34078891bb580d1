"""Click refinement: expand one user click into k feature-space representatives.

Around the clicked position (mapped onto the encoder feature grid) a local
window of feature vectors is clustered with k-means; the member closest to
each centroid becomes an extra prompt point. This spreads a single click's
influence across semantically similar neighbours instead of one voxel.

Everything here is deterministic given an explicit seed. The seeding protocol
is frozen so an independent re-implementation can reproduce it exactly:

  1. rng = numpy.random.default_rng(seed)
  2. first centre index: rng.integers(n)
  3. each next centre: r = rng.random(); pick the first index whose cumulative
     share of min-squared-distance mass exceeds r (inverse CDF); if all
     distances are zero, rng.integers(n)
  4. Lloyd iterations assign by squared Euclidean distance with ties going to
     the lowest cluster index; empty clusters re-seed to the point farthest
     from their stale centroid; stop when the largest centroid shift < tol.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, ParameterError

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class PointPrompt:
    """A labeled voxel coordinate; the unit of interaction."""

    coord: tuple[int, int, int]  # (z, y, x) voxel indices
    label: str  # "positive" | "negative"
    source: str = "user"  # "user" | "simulated" | "refined"

    def __post_init__(self) -> None:
        if self.label not in (POSITIVE, NEGATIVE):
            raise ParameterError(f"point label must be positive/negative, got {self.label!r}")
        object.__setattr__(self, "coord", tuple(int(c) for c in self.coord))

    def as_dict(self) -> dict:
        return {"coord": list(self.coord), "label": self.label, "source": self.source}


@dataclass
class FeatureWindow:
    """In-bounds feature vectors within Chebyshev radius r of a grid centre."""

    center: tuple[int, int, int]
    radius: int
    positions: np.ndarray  # (M, 3) feature-grid coords, row-major order
    features: np.ndarray  # (M, C)


@dataclass
class RefinedPoints:
    points: list[PointPrompt] = field(default_factory=list)
    cluster_sizes: list[int] = field(default_factory=list)
    centroids: np.ndarray | None = None


@dataclass(frozen=True)
class RefinementConfig:
    enabled: bool = True
    k: int = 3
    radius: int = 2
    replace_click: bool = False


def map_to_grid(coord, stride: int) -> tuple[int, int, int]:
    """Volume voxel coord -> feature-grid coord (floor division by the stride)."""
    return tuple(int(c) // int(stride) for c in coord)


def grid_to_volume(grid_coord, stride: int, volume_shape=None) -> tuple[int, int, int]:
    """Feature-grid coord -> volume voxel at the patch centre, clamped in-bounds."""
    coord = [int(g) * stride + stride // 2 for g in grid_coord]
    if volume_shape is not None:
        coord = [min(c, int(s) - 1) for c, s in zip(coord, volume_shape)]
    return tuple(coord)


def extract_window(
    features: np.ndarray,
    click: PointPrompt,
    radius: int,
    stride: int = 1,
    volume_shape=None,
) -> FeatureWindow:
    """Collect all in-bounds feature vectors within Chebyshev distance <= radius.

    `features` is the (D', H', W', C) encoder feature grid. Positions are
    enumerated row-major over (z, y, x), so "first occurrence" tie-breaking
    downstream is lexicographic.
    """
    features = np.asarray(features)
    if features.ndim != 4:
        raise ParameterError(f"feature grid must be (D,H,W,C), got ndim={features.ndim}")
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    grid_shape = features.shape[:3]
    bound_shape = volume_shape if volume_shape is not None else [g * stride for g in grid_shape]
    if any(c < 0 or c >= s for c, s in zip(click.coord, bound_shape)):
        raise BoundsError(f"click {click.coord} outside volume bounds {tuple(bound_shape)}")
    center = map_to_grid(click.coord, stride)
    if any(c < 0 or c >= g for c, g in zip(center, grid_shape)):
        raise BoundsError(f"click {click.coord} maps to {center}, outside grid {grid_shape}")

    ranges = [
        range(max(0, c - radius), min(g, c + radius + 1))
        for c, g in zip(center, grid_shape)
    ]
    positions = np.array(
        [(z, y, x) for z in ranges[0] for y in ranges[1] for x in ranges[2]], dtype=np.int64
    )
    vectors = features[positions[:, 0], positions[:, 1], positions[:, 2], :]
    return FeatureWindow(
        center=center,
        radius=int(radius),
        positions=positions,
        features=np.asarray(vectors, dtype=np.float64),
    )


def _plus_plus_seed(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    idx = int(rng.integers(n))
    centers[0] = x[idx]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = float(rng.random())
            idx = int(np.searchsorted(np.cumsum(d2 / total), r, side="right"))
            idx = min(idx, n - 1)
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def kmeans(
    features: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Lloyd's algorithm with k-means++ seeding.

    Returns (centroids (k, C), assignments (n,)). If fewer points than k, k is
    reduced to n with a warning.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError(f"features must be (n, C), got ndim={x.ndim}")
    n = x.shape[0]
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if n == 0:
        raise ParameterError("cannot cluster an empty feature set")
    if n < k:
        warnings.warn(f"only {n} features for k={k}; reducing k to {n}", stacklevel=2)
        k = n

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_seed(x, k, rng)

    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)  # ties -> lowest cluster index
        new_centroids = centroids.copy()
        for j in range(k):
            members = x[assign == j]
            if members.shape[0] > 0:
                new_centroids[j] = members.mean(axis=0)
            else:
                far = ((x - centroids[j]) ** 2).sum(axis=1)
                new_centroids[j] = x[int(np.argmax(far))]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)
    return centroids, assign


def refine_click(
    features: np.ndarray,
    click: PointPrompt,
    k: int = 3,
    radius: int = 2,
    seed: int = 0,
    stride: int = 1,
    volume_shape=None,
) -> RefinedPoints:
    """Window -> k-means -> per-cluster representative closest to its centroid.

    Representatives are mapped back to volume coordinates (patch centres) and
    inherit the click's label with source="refined". Ties on the distance to a
    centroid resolve to the lexicographically smallest window position.
    """
    window = extract_window(features, click, radius, stride=stride, volume_shape=volume_shape)
    centroids, assign = kmeans(window.features, k, seed=seed)

    points: list[PointPrompt] = []
    sizes: list[int] = []
    for j in range(centroids.shape[0]):
        member_idx = np.flatnonzero(assign == j)
        if member_idx.size == 0:
            continue
        dists = ((window.features[member_idx] - centroids[j]) ** 2).sum(axis=1)
        best = member_idx[int(np.argmin(dists))]  # first occurrence = lexicographic
        grid_pos = tuple(int(v) for v in window.positions[best])
        coord = grid_to_volume(grid_pos, stride, volume_shape)
        points.append(PointPrompt(coord=coord, label=click.label, source="refined"))
        sizes.append(int(member_idx.size))
    return RefinedPoints(points=points, cluster_sizes=sizes, centroids=centroids)


def expand_prompts(
    features: np.ndarray,
    clicks: list[PointPrompt],
    config: RefinementConfig,
    seed: int = 0,
    stride: int = 1,
    volume_shape=None,
) -> list[PointPrompt]:
    """Apply refinement to every click; optionally keep the original clicks.

    Each click gets an independent sub-seed so adding a click never changes
    the refinement of earlier ones.
    """
    if not config.enabled:
        return list(clicks)
    out: list[PointPrompt] = []
    for i, click in enumerate(clicks):
        if not config.replace_click:
            out.append(click)
        refined = refine_click(
            features,
            click,
            k=config.k,
            radius=config.radius,
            seed=seed * 100003 + i,
            stride=stride,
            volume_shape=volume_shape,
        )
        out.extend(refined.points)
    return out
