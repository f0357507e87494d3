"""Shared bits of the supervised pre-training loops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class LossTrace:
    """Per-step losses; ``normalized`` is relative to the first recorded loss."""

    divergence_factor: float = 10.0
    steps: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    extra: dict[str, list[float]] = field(default_factory=dict)

    def record(self, step: int, loss: float, **extra: float) -> None:
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        if self.losses and self.losses[0] > 0 and loss > self.divergence_factor * self.losses[0]:
            raise TrainingDiverged(
                f"loss {loss:.4g} at step {step} exceeds {self.divergence_factor}x the initial "
                f"{self.losses[0]:.4g}")
        self.steps.append(step)
        self.losses.append(float(loss))
        for key, value in extra.items():
            self.extra.setdefault(key, []).append(float(value))

    @property
    def normalized(self) -> list[float]:
        if not self.losses:
            return []
        first = self.losses[0]
        return [v / first if first > 0 else 0.0 for v in self.losses]

    def rows(self) -> list[tuple]:
        cols = [self.steps, self.losses, self.normalized, *self.extra.values()]
        return list(zip(*cols))

    @property
    def header(self) -> list[str]:
        return ["step", "loss", "normalized_loss", *self.extra.keys()]

    def smoothed_normalized(self, window: int = 20) -> list[float]:
        """Trailing moving average of the normalized loss."""
        norm = self.normalized
        out, acc = [], 0.0
        for i, v in enumerate(norm):
            acc += v
            if i >= window:
                acc -= norm[i - window]
            out.append(acc / min(i + 1, window))
        return out
