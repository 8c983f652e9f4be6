"""Export configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

MAX_TOKENS = 32  # fixed sequence length: headlines are padded/truncated to this
TOP_LAYER_OFFSETS = (0, 1, 2)  # the last layer and the two below it


@dataclass(frozen=True)
class ExportConfig:
    """Settings for one fine-tune/export run.

    `layers` holds offsets from the top encoder layer (0 = last). The grid
    the defaults come from is batch size 32/64/128 with learning rate
    2e-6/5e-6/1e-5; both stay configurable for small checkpoints.
    """

    checkpoint: Path
    max_tokens: int = MAX_TOKENS
    batch_size: int = 32
    learning_rate: float = 2e-6
    epochs: int = 3
    layers: tuple = TOP_LAYER_OFFSETS
    seed: int = 0

    def __post_init__(self):
        if self.max_tokens != MAX_TOKENS:
            raise ValueError(f"max_tokens is fixed at {MAX_TOKENS}, got {self.max_tokens}")
        layers = tuple(int(v) for v in self.layers)
        if not layers:
            raise ValueError("at least one layer offset is required")
        bad = [v for v in layers if v not in TOP_LAYER_OFFSETS]
        if bad:
            raise ValueError(f"layer offsets must be within {TOP_LAYER_OFFSETS}, got {bad}")
        if len(set(layers)) != len(layers):
            raise ValueError(f"duplicate layer offsets: {layers}")
        object.__setattr__(self, "layers", layers)
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
