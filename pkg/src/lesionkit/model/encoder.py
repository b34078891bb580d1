"""Volumetric image encoder: patch embedding + windowed/global attention stack.

The input volume (plus the previous-mask feedback channel) is embedded with a
non-overlapping Conv3d of stride s; most layers attend inside non-overlapping
3D token windows, with designated layers attending globally. Channel width is
constant through the stack (isotropic feature maps).
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import NumericError
from .blocks import SelfAttentionBlock
from .config import ModelConfig
from .posenc import grid_positional_encoding

IN_CHANNELS = 3  # intensity + previous-mask feedback + rasterized clicks


def pad_to_multiple(volume: torch.Tensor, stride: int) -> tuple[torch.Tensor, tuple[int, int, int]]:
    """Zero-pad (C, D, H, W) on the high side so spatial dims divide the stride."""
    _, d, h, w = volume.shape
    pd, ph, pw = (-d) % stride, (-h) % stride, (-w) % stride
    if pd or ph or pw:
        volume = nn.functional.pad(volume, (0, pw, 0, ph, 0, pd))
    return volume, tuple(volume.shape[1:])


def _window_partition(x: torch.Tensor, grid: tuple[int, int, int], w: int):
    """(N, C) row-major tokens -> (nWin, w^3, C) plus a True-for-pad mask."""
    d, h, w_dim = grid
    c = x.shape[-1]
    pd, ph, pw = (-d) % w, (-h) % w, (-w_dim) % w
    x = x.view(d, h, w_dim, c)
    pad_mask = torch.zeros(d, h, w_dim, dtype=torch.bool, device=x.device)
    if pd or ph or pw:
        x = nn.functional.pad(x, (0, 0, 0, pw, 0, ph, 0, pd))
        pad_mask = nn.functional.pad(pad_mask, (0, pw, 0, ph, 0, pd), value=True)
    dd, hh, ww = d + pd, h + ph, w_dim + pw
    x = x.view(dd // w, w, hh // w, w, ww // w, w, c)
    x = x.permute(0, 2, 4, 1, 3, 5, 6).reshape(-1, w * w * w, c)
    pad_mask = pad_mask.view(dd // w, w, hh // w, w, ww // w, w)
    pad_mask = pad_mask.permute(0, 2, 4, 1, 3, 5).reshape(-1, w * w * w)
    return x, pad_mask, (dd, hh, ww)


def _window_merge(x: torch.Tensor, padded: tuple[int, int, int], grid: tuple[int, int, int], w: int):
    dd, hh, ww = padded
    c = x.shape[-1]
    x = x.view(dd // w, hh // w, ww // w, w, w, w, c)
    x = x.permute(0, 3, 1, 4, 2, 5, 6).reshape(dd, hh, ww, c)
    d, h, w_dim = grid
    return x[:d, :h, :w_dim].reshape(-1, c)


class ImageEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.embed_dim
        self.patch_embed = nn.Conv3d(
            IN_CHANNELS, c, kernel_size=config.patch_stride, stride=config.patch_stride
        )
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(c, config.num_heads, config.mlp_ratio)
            for _ in range(config.depth)
        )
        self.global_set = {g - 1 for g in config.global_layers}
        self.norm = nn.LayerNorm(c)

    def forward(self, volume: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int, int]]:
        """volume: (C_in, D, H, W), already padded to stride multiples.

        Returns row-major tokens (N, embed_dim) and the feature-grid shape.
        """
        if not torch.isfinite(volume).all():
            raise NumericError("image encoder received non-finite input")
        x = self.patch_embed(volume.unsqueeze(0))  # (1, C, d, h, w)
        _, c, d, h, w = x.shape
        grid = (d, h, w)
        x = x.permute(0, 2, 3, 4, 1).reshape(-1, c)  # row-major tokens
        x = x + grid_positional_encoding(grid, c, dtype=x.dtype, device=x.device)

        ws = self.config.window_size
        for i, block in enumerate(self.blocks):
            if i in self.global_set or ws >= max(grid):
                x = block(x)
            else:
                wins, pad_mask, padded = _window_partition(x, grid, ws)
                wins = block(wins, key_padding=pad_mask)
                x = _window_merge(wins, padded, grid, ws)
        return self.norm(x), grid
