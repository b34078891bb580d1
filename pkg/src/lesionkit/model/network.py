"""The full interactive network: encoders, fusion, heads, synergy, checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import NotFoundError, VersionError
from ..losses import grouped_softmax
from ..refine import PointPrompt, RefinementConfig, expand_prompts
from .config import ModelConfig
from .encoder import IN_CHANNELS, ImageEncoder, pad_to_multiple
from .fusion import HybridTokenEncoder
from .heads import AttributeHead, FeatureSynergy, IouHead, MaskHead
from .prompts import PromptEncoder

CHECKPOINT_SCHEMA_VERSION = 1

CLICK_BLOB_SIGMA = 2.0
CLICK_BLOB_RADIUS = 6


def rasterize_clicks(
    shape: tuple[int, int, int],
    clicks: list[PointPrompt],
    dtype=torch.float32,
) -> torch.Tensor:
    """Signed Gaussian blobs at click positions (+ lesion, - background).

    A dense counterpart to the prompt tokens: gives the convolutional stem
    direct spatial grounding for each interaction.
    """
    grid = torch.zeros(shape, dtype=dtype)
    r = CLICK_BLOB_RADIUS
    for click in clicks:
        sign = 1.0 if click.label == "positive" else -1.0
        z0, y0, x0 = click.coord
        zlo, zhi = max(0, z0 - r), min(shape[0], z0 + r + 1)
        ylo, yhi = max(0, y0 - r), min(shape[1], y0 + r + 1)
        xlo, xhi = max(0, x0 - r), min(shape[2], x0 + r + 1)
        zz = torch.arange(zlo, zhi, dtype=dtype) - z0
        yy = torch.arange(ylo, yhi, dtype=dtype) - y0
        xx = torch.arange(xlo, xhi, dtype=dtype) - x0
        d2 = (
            zz[:, None, None] ** 2 + yy[None, :, None] ** 2 + xx[None, None, :] ** 2
        )
        blob = torch.exp(-d2 / (2.0 * CLICK_BLOB_SIGMA**2))
        grid[zlo:zhi, ylo:yhi, xlo:xhi] += sign * blob
    return grid.clamp_(-1.0, 1.0)


@dataclass
class ModelOutput:
    mask_logits: torch.Tensor  # (D, H, W), full input resolution
    attr_logits: torch.Tensor  # (13,), grouped (4, 2, 3, 2, 2)
    iou_pred: torch.Tensor  # scalar in [0, 1]
    prompts_used: list[PointPrompt] | None = None


class InteractiveLesionNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.image_encoder = ImageEncoder(config)
        self.prompt_encoder = PromptEncoder(config.embed_dim)
        self.fusion = HybridTokenEncoder(config)
        self.mask_head = MaskHead(config)
        self.attr_head = AttributeHead(config)
        self.synergy = FeatureSynergy(config)
        self.iou_head = IouHead(config)

    @property
    def dtype(self) -> torch.dtype:
        return self.prompt_encoder.no_prompt.dtype

    def _prepare_input(
        self,
        volume: torch.Tensor,
        prev_mask: torch.Tensor | None,
        clicks: list[PointPrompt] | None = None,
    ) -> tuple[torch.Tensor, tuple[int, int, int], tuple[int, int, int]]:
        if prev_mask is None:
            prev_mask = torch.zeros_like(volume)
        click_map = rasterize_clicks(tuple(volume.shape), clicks or [], dtype=volume.dtype)
        stacked = torch.stack(
            [volume, prev_mask.to(volume.dtype), click_map.to(volume.device)], dim=0
        )
        assert stacked.shape[0] == IN_CHANNELS
        out_shape = tuple(volume.shape)
        padded, padded_shape = pad_to_multiple(stacked, self.config.patch_stride)
        return padded, padded_shape, out_shape

    def forward(
        self,
        volume: torch.Tensor,
        clicks: list[PointPrompt],
        prev_mask: torch.Tensor | None = None,
        seed: int = 0,
    ) -> ModelOutput:
        """One prediction pass for a single (D, H, W) volume.

        Click refinement (when enabled) runs on the detached feature grid; the
        representative positions join the prompt set but carry no gradient.
        """
        cfg = self.config
        stacked, padded_shape, out_shape = self._prepare_input(volume, prev_mask, clicks)
        image_tokens, grid = self.image_encoder(stacked)

        prompts = list(clicks)
        if cfg.use_refinement and clicks:
            feats = (
                image_tokens.detach()
                .to(torch.float64)
                .reshape(*grid, cfg.embed_dim)
                .cpu()
                .numpy()
            )
            prompts = expand_prompts(
                feats,
                clicks,
                RefinementConfig(
                    enabled=True,
                    k=cfg.refine_k,
                    radius=cfg.refine_radius,
                    replace_click=cfg.refine_replace_click,
                ),
                seed=seed,
                stride=cfg.patch_stride,
                volume_shape=out_shape,
            )

        prompt_tokens = self.prompt_encoder(prompts, padded_shape)
        hybrid, image_updated = self.fusion(image_tokens, prompt_tokens)

        iou_token = hybrid[0:1]
        mask_token = hybrid[1:2]
        mask_features = self.mask_head.refine(mask_token, image_updated)
        attr_features = self.attr_head.features(hybrid, image_updated)
        mask_final, attr_final = self.synergy(
            mask_features, attr_features, enabled=cfg.use_synergy
        )

        upsampled = self.mask_head.upsampled_features(image_updated, grid)
        mask_logits = self.mask_head.logits(mask_final, upsampled, padded_shape, out_shape)
        attr_logits = self.attr_head.logits(attr_final)
        iou_pred = self.iou_head(iou_token)
        return ModelOutput(
            mask_logits=mask_logits,
            attr_logits=attr_logits,
            iou_pred=iou_pred,
            prompts_used=prompts,
        )

    @torch.no_grad()
    def predict(
        self,
        volume: np.ndarray,
        clicks: list[PointPrompt],
        prev_mask: np.ndarray | None = None,
        seed: int = 0,
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Numpy-facing eval wrapper: (mask probs, 13 report probs, iou_pred)."""
        was_training = self.training
        self.eval()
        try:
            vol_t = torch.as_tensor(np.ascontiguousarray(volume), dtype=self.dtype)
            prev_t = (
                torch.as_tensor(np.ascontiguousarray(prev_mask), dtype=self.dtype)
                if prev_mask is not None
                else None
            )
            out = self.forward(vol_t, clicks, prev_mask=prev_t, seed=seed)
            mask_prob = torch.sigmoid(out.mask_logits).cpu().numpy()
            report_probs = grouped_softmax(out.attr_logits.to(torch.float64)).cpu().numpy()
            return mask_prob, report_probs, float(out.iou_pred)
        finally:
            self.train(was_training)


def save_checkpoint(path: str | Path, model: InteractiveLesionNet) -> Path:
    """Single-file archive: schema version + config JSON + named parameters."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "config_json": json.dumps(model.config.as_dict()),
            "state_dict": model.state_dict(),
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> InteractiveLesionNet:
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise VersionError(
            f"checkpoint schema {version} != supported {CHECKPOINT_SCHEMA_VERSION}"
        )
    config = ModelConfig.from_dict(json.loads(payload["config_json"]))
    model = InteractiveLesionNet(config)
    model.load_state_dict(payload["state_dict"], strict=True)
    model.eval()
    return model
