"""Network hyperparameters and their (de)serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..data.types import GROUP_SIZES
from ..errors import SchemaError


@dataclass
class ModelConfig:
    patch_stride: int = 8
    embed_dim: int = 48
    depth: int = 4
    global_layers: tuple[int, ...] = (2, 4)  # 1-indexed layers using global attention
    window_size: int = 3  # local attention window, in feature-grid tokens
    num_heads: int = 4
    mlp_ratio: float = 4.0
    fusion_depth: int = 2
    mask_head_depth: int = 2
    n_mask_tokens: int = 1
    n_iou_tokens: int = 1
    attr_group_sizes: tuple[int, ...] = tuple(GROUP_SIZES)
    synergy_dim: int = 32
    use_refinement: bool = True
    use_synergy: bool = True
    refine_k: int = 3
    refine_radius: int = 2
    refine_replace_click: bool = False

    def __post_init__(self) -> None:
        self.global_layers = tuple(int(g) for g in self.global_layers)
        self.attr_group_sizes = tuple(int(g) for g in self.attr_group_sizes)
        if self.patch_stride < 1 or self.embed_dim < 1 or self.depth < 1:
            raise SchemaError("patch_stride, embed_dim and depth must be positive")
        if any(g < 1 or g > self.depth for g in self.global_layers):
            raise SchemaError(
                f"global_layers {self.global_layers} must be 1..depth={self.depth}"
            )
        if self.embed_dim % self.num_heads != 0:
            raise SchemaError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}"
            )
        if tuple(self.attr_group_sizes) != tuple(GROUP_SIZES):
            raise SchemaError(
                f"attr_group_sizes must be {tuple(GROUP_SIZES)}, got {self.attr_group_sizes}"
            )
        if self.n_mask_tokens != 1 or self.n_iou_tokens != 1:
            raise SchemaError("this build uses exactly one mask token and one IOU token")
        if self.window_size < 1:
            raise SchemaError("window_size must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["global_layers"] = list(self.global_layers)
        d["attr_group_sizes"] = list(self.attr_group_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2))
        return path

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def tiny_config(**overrides) -> ModelConfig:
    """Smallest config that exercises every code path; used by gradient checks."""
    base = dict(
        patch_stride=4,
        embed_dim=8,
        depth=2,
        global_layers=(2,),
        window_size=2,
        num_heads=2,
        mlp_ratio=2.0,
        fusion_depth=1,
        mask_head_depth=1,
        synergy_dim=8,
    )
    base.update(overrides)
    return ModelConfig(**base)
