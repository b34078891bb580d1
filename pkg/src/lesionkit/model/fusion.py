"""Hybrid token encoder: two-way fusion of query tokens with the image grid.

The query sequence is [IOU token; mask token; prompt tokens]. Each fusion
layer runs query self-attention, query->image cross-attention, a feedforward,
and image->query cross-attention so both streams update.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import NumericError
from .blocks import Attention, Mlp
from .config import ModelConfig


class TwoWayLayer(nn.Module):
    def __init__(self, dim: int, num_heads: int, mlp_ratio: float):
        super().__init__()
        self.self_norm = nn.LayerNorm(dim)
        self.self_attn = Attention(dim, num_heads)
        self.q2i_norm_q = nn.LayerNorm(dim)
        self.q2i_norm_kv = nn.LayerNorm(dim)
        self.q2i_attn = Attention(dim, num_heads)
        self.mlp_norm = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))
        self.i2q_norm_q = nn.LayerNorm(dim)
        self.i2q_norm_kv = nn.LayerNorm(dim)
        self.i2q_attn = Attention(dim, num_heads)

    def forward(self, queries: torch.Tensor, image: torch.Tensor):
        queries = queries + self.self_attn(self.self_norm(queries))
        queries = queries + self.q2i_attn(self.q2i_norm_q(queries), self.q2i_norm_kv(image))
        queries = queries + self.mlp(self.mlp_norm(queries))
        image = image + self.i2q_attn(self.i2q_norm_q(image), self.i2q_norm_kv(queries))
        return queries, image


class HybridTokenEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.embed_dim
        self.iou_token = nn.Parameter(torch.zeros(1, c))
        self.mask_token = nn.Parameter(torch.zeros(1, c))
        nn.init.normal_(self.iou_token, std=0.02)
        nn.init.normal_(self.mask_token, std=0.02)
        self.layers = nn.ModuleList(
            TwoWayLayer(c, config.num_heads, config.mlp_ratio)
            for _ in range(config.fusion_depth)
        )
        self.final_norm = nn.LayerNorm(c)

    def forward(
        self, image_tokens: torch.Tensor, prompt_tokens: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (query tokens (2+P, C), updated image tokens (N, C)).

        Query row 0 is the IOU token, row 1 the mask token, rows 2.. prompts.
        """
        queries = torch.cat([self.iou_token, self.mask_token, prompt_tokens], dim=0)
        image = image_tokens
        for layer in self.layers:
            queries, image = layer(queries, image)
        queries = self.final_norm(queries)
        if not torch.isfinite(queries).all():
            raise NumericError("hybrid token fusion produced non-finite values")
        return queries, image
