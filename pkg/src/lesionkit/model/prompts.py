"""Prompt encoder: labeled point coordinates -> prompt tokens."""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import BoundsError
from ..refine import POSITIVE, PointPrompt
from .posenc import point_positional_encoding


class PromptEncoder(nn.Module):
    """Sinusoidal position encoding plus a learned per-label embedding.

    With no points at all, emits a single learned "no prompt" token so the
    downstream fusion always has at least one prompt row.
    """

    def __init__(self, embed_dim: int):
        super().__init__()
        self.embed_dim = embed_dim
        self.label_embed = nn.Embedding(2, embed_dim)  # 0: negative, 1: positive
        self.no_prompt = nn.Parameter(torch.zeros(1, embed_dim))
        nn.init.normal_(self.label_embed.weight, std=0.02)
        nn.init.normal_(self.no_prompt, std=0.02)

    def forward(
        self, points: list[PointPrompt], volume_shape: tuple[int, int, int]
    ) -> torch.Tensor:
        if not points:
            return self.no_prompt
        for p in points:
            if any(c < 0 or c >= s for c, s in zip(p.coord, volume_shape)):
                raise BoundsError(f"prompt {p.coord} outside volume {volume_shape}")
        device = self.no_prompt.device
        dtype = self.no_prompt.dtype
        coords = torch.tensor([p.coord for p in points], dtype=dtype, device=device)
        pe = point_positional_encoding(coords, volume_shape, self.embed_dim)
        labels = torch.tensor(
            [1 if p.label == POSITIVE else 0 for p in points], dtype=torch.long, device=device
        )
        return pe + self.label_embed(labels)
