"""Output heads: mask decoding, attribute classification, inter-task synergy."""

from __future__ import annotations

import torch
import torch.nn as nn

from .blocks import Attention, CrossAttentionBlock, LayerNorm3d, Mlp
from .config import ModelConfig


class MaskHead(nn.Module):
    """Refines the mask token against the image grid and decodes voxel logits.

    The image grid is upsampled 4x by two transposed-conv stages (stride s ->
    s/4); the final logit at each voxel is the dot product between the
    projected mask token and the upsampled per-voxel features, followed by a
    trilinear upsample back to full resolution.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.embed_dim
        self.refine_blocks = nn.ModuleList(
            CrossAttentionBlock(c, config.num_heads, mlp_ratio=config.mlp_ratio)
            for _ in range(config.mask_head_depth)
        )
        self.upsample = nn.Sequential(
            nn.ConvTranspose3d(c, c // 2, kernel_size=2, stride=2),
            LayerNorm3d(c // 2),
            nn.GELU(),
            nn.ConvTranspose3d(c // 2, c // 4, kernel_size=2, stride=2),
            nn.GELU(),
        )
        self.token_proj = nn.Sequential(
            nn.Linear(c, c), nn.GELU(), nn.Linear(c, c // 4)
        )
        # negative starting bias keeps initial probabilities low (background
        # prior) without saturating the sigmoid, which stabilizes Dice-only
        # training on heavily imbalanced volumes
        self.logit_bias = nn.Parameter(torch.tensor(-2.0))

    def refine(self, mask_token: torch.Tensor, image_tokens: torch.Tensor) -> torch.Tensor:
        m = mask_token
        for block in self.refine_blocks:
            m = block(m, image_tokens)
        return m  # (1, C)

    def upsampled_features(
        self, image_tokens: torch.Tensor, grid: tuple[int, int, int]
    ) -> torch.Tensor:
        d, h, w = grid
        c = image_tokens.shape[-1]
        vol = image_tokens.view(d, h, w, c).permute(3, 0, 1, 2).unsqueeze(0)
        return self.upsample(vol)  # (1, C/4, 4d, 4h, 4w)

    def logits(
        self,
        mask_token: torch.Tensor,
        upsampled: torch.Tensor,
        padded_shape: tuple[int, int, int],
        out_shape: tuple[int, int, int],
    ) -> torch.Tensor:
        emb = self.token_proj(mask_token)  # (1, C/4)
        scale = emb.shape[-1] ** -0.5
        low = torch.einsum("oc,bcdhw->bodhw", emb, upsampled) * scale + self.logit_bias
        full = nn.functional.interpolate(
            low, size=padded_shape, mode="trilinear", align_corners=False
        )
        return full[0, 0, : out_shape[0], : out_shape[1], : out_shape[2]]


class AttributeHead(nn.Module):
    """Residual MLP + one self-attention pass over the hybrid token stream
    (query tokens and updated image tokens together), then a linear layer on
    the pooled query rows emitting the 13 grouped attribute logits.

    Including the image stream lets the attention gather lesion appearance
    evidence directly; the query rows act as the readout."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.embed_dim
        self.res_norm = nn.LayerNorm(c)
        self.res_mlp = Mlp(c, int(c * config.mlp_ratio))
        self.attn_norm = nn.LayerNorm(c)
        self.attn = Attention(c, config.num_heads)
        self.out_norm = nn.LayerNorm(c)
        self.classifier = nn.Linear(c, sum(config.attr_group_sizes))
        self._n_readout = 0  # query-token count, set by features()

    def features(
        self, hybrid_tokens: torch.Tensor, image_tokens: torch.Tensor | None = None
    ) -> torch.Tensor:
        tokens = hybrid_tokens
        self._n_readout = hybrid_tokens.shape[0]
        if image_tokens is not None:
            tokens = torch.cat([hybrid_tokens, image_tokens], dim=0)
        a = tokens + self.res_mlp(self.res_norm(tokens))
        a = a + self.attn(self.attn_norm(a))
        return a  # (T + N, C)

    def logits(self, attr_features: torch.Tensor) -> torch.Tensor:
        readout = attr_features[: self._n_readout]
        pooled = self.out_norm(readout).mean(dim=0)
        return self.classifier(pooled)  # (13,)


class FeatureSynergy(nn.Module):
    """Bidirectional cross-attention between mask and attribute features.

    Both streams are projected into a shared latent space; each stream then
    attends over the other's projection and the result is added residually.
    Disabled -> exact identity passthrough.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.embed_dim
        s = config.synergy_dim
        self.proj_mask = nn.Linear(c, s)
        self.proj_attr = nn.Linear(c, s)
        self.seg_attn = Attention(c, config.num_heads, kv_dim=s)
        self.attr_attn = Attention(c, config.num_heads, kv_dim=s)
        self.seg_norm = nn.LayerNorm(c)
        self.attr_norm = nn.LayerNorm(c)

    def forward(
        self, mask_features: torch.Tensor, attr_features: torch.Tensor, enabled: bool = True
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if not enabled:
            return mask_features, attr_features
        z_seg = mask_features + self.seg_attn(
            self.seg_norm(mask_features), self.proj_attr(attr_features)
        )
        z_attr = attr_features + self.attr_attn(
            self.attr_norm(attr_features), self.proj_mask(mask_features)
        )
        return z_seg, z_attr


class IouHead(nn.Module):
    """Predicted mask quality in [0, 1] from the IOU token."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.embed_dim
        self.mlp = nn.Sequential(nn.Linear(c, c), nn.GELU(), nn.Linear(c, 1))

    def forward(self, iou_token: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.mlp(iou_token)).reshape(())
