"""Sinusoidal 3D positional encoding shared by image and prompt tokens.

Coordinates are normalized to [0, 1] over the (padded) volume so a prompt
voxel and the patch containing it encode to nearby vectors. Per axis the
channel budget is embed_dim // 6 (sin, cos) pairs at octave frequencies;
leftover channels stay zero.
"""

from __future__ import annotations

import math

import torch


_MAX_FREQ_CYCLES = 32.0  # highest frequency: 32 cycles over the volume, below
# voxel Nyquist for volumes >= 64 and close to it at 40-48


def encode_normalized_coords(coords: torch.Tensor, embed_dim: int) -> torch.Tensor:
    """coords: (N, 3) in [0, 1] -> (N, embed_dim).

    Frequencies are geometrically spaced between half a cycle and
    _MAX_FREQ_CYCLES cycles per volume so the dot product of two encodings
    forms a sharp distance kernel without aliasing at voxel pitch.
    """
    n_pairs = embed_dim // 6
    if n_pairs < 1:
        raise ValueError(f"embed_dim {embed_dim} too small for 3-axis sinusoidal encoding")
    if n_pairs == 1:
        cycles = [1.0]
    else:
        ratio = _MAX_FREQ_CYCLES ** (1.0 / (n_pairs - 1))
        cycles = [ratio**i for i in range(n_pairs)]
    freqs = torch.tensor(
        [math.pi * c for c in cycles],
        dtype=coords.dtype,
        device=coords.device,
    )
    angles = coords[:, :, None] * freqs[None, None, :]  # (N, 3, n_pairs)
    enc = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)  # (N, 3, 2*n_pairs)
    enc = enc.reshape(coords.shape[0], 3 * 2 * n_pairs)
    pad = embed_dim - enc.shape[1]
    if pad:
        enc = torch.cat([enc, enc.new_zeros(coords.shape[0], pad)], dim=1)
    return enc


def grid_positional_encoding(
    grid_shape: tuple[int, int, int],
    embed_dim: int,
    dtype=torch.float32,
    device=None,
) -> torch.Tensor:
    """Encoding for every feature-grid cell centre: (d*h*w, embed_dim), row-major."""
    d, h, w = grid_shape
    zz, yy, xx = torch.meshgrid(
        torch.arange(d, dtype=dtype, device=device),
        torch.arange(h, dtype=dtype, device=device),
        torch.arange(w, dtype=dtype, device=device),
        indexing="ij",
    )
    coords = torch.stack(
        [(zz + 0.5) / d, (yy + 0.5) / h, (xx + 0.5) / w], dim=-1
    ).reshape(-1, 3)
    return encode_normalized_coords(coords, embed_dim)


def point_positional_encoding(
    coords_voxels: torch.Tensor,
    volume_shape: tuple[int, int, int],
    embed_dim: int,
) -> torch.Tensor:
    """Encoding for voxel coordinates (N, 3) against a (padded) volume shape."""
    dims = torch.tensor(volume_shape, dtype=coords_voxels.dtype, device=coords_voxels.device)
    normalized = (coords_voxels + 0.5) / dims
    return encode_normalized_coords(normalized, embed_dim)
