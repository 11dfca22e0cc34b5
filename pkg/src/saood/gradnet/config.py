from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TrainConfig:
    hidden: list = field(default_factory=lambda: [64, 64])
    lr0: float = 0.1
    lr_decay_epochs: list = field(default_factory=lambda: [50, 75])
    lr_decay_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_size: int = 128

    def __post_init__(self):
        if any(int(h) <= 0 for h in self.hidden):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden}")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.lr_decay_factor <= 0:
            raise ValueError("lr_decay_factor must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        decays = list(self.lr_decay_epochs)
        if any(b <= a for a, b in zip(decays, decays[1:])):
            raise ValueError(f"lr_decay_epochs must be strictly increasing, got {decays}")
        if self.epochs and decays and decays[-1] >= self.epochs:
            raise ValueError(f"decay epoch {decays[-1]} is not before epochs={self.epochs}")

    def layer_sizes(self, d, k):
        return [d, *self.hidden, k]
