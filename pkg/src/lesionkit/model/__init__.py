from .config import ModelConfig, tiny_config
from .network import (
    CHECKPOINT_SCHEMA_VERSION,
    InteractiveLesionNet,
    ModelOutput,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "CHECKPOINT_SCHEMA_VERSION",
    "InteractiveLesionNet",
    "ModelConfig",
    "ModelOutput",
    "load_checkpoint",
    "save_checkpoint",
    "tiny_config",
]
