"""Flat parameter vectors with a named block layout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor


@dataclass(frozen=True)
class Segment:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=int))


class LayoutMismatch(ValueError):
    pass


def make_layout(blocks: list[tuple[str, tuple[int, ...]]]) -> tuple[Segment, ...]:
    out, offset = [], 0
    for name, shape in blocks:
        seg = Segment(name, tuple(int(s) for s in shape), offset)
        out.append(seg)
        offset += seg.size
    return tuple(out)


class ParamVector:
    """All weights of one network as a single float64 vector.

    ``layout`` maps named segments (``W0``, ``b0``, ...) onto slices of
    ``values``; ``unflatten`` returns reshaped views of those slices.
    """

    __slots__ = ("values", "layout")

    def __init__(self, values, layout: tuple[Segment, ...]):
        values = np.asarray(values, dtype=np.float64)
        total = sum(s.size for s in layout)
        if values.shape != (total,):
            raise LayoutMismatch(f"expected {total} values, got shape {values.shape}")
        self.values = values
        self.layout = tuple(layout)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"ParamVector({len(self.values)} values, {len(self.layout)} blocks)"

    @classmethod
    def zeros(cls, layout) -> "ParamVector":
        return cls(np.zeros(sum(s.size for s in layout)), layout)

    @classmethod
    def flatten(cls, blocks: dict[str, np.ndarray], layout) -> "ParamVector":
        values = np.concatenate([np.asarray(blocks[s.name], dtype=np.float64).reshape(-1)
                                 for s in layout]) if layout else np.zeros(0)
        return cls(values, layout)

    def unflatten(self) -> dict[str, np.ndarray]:
        return {s.name: self.values[s.offset:s.offset + s.size].reshape(s.shape)
                for s in self.layout}

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def like(self, values) -> "ParamVector":
        return ParamVector(values, self.layout)

    def check_layout(self, other: "ParamVector") -> None:
        if self.layout != other.layout:
            raise LayoutMismatch("parameter layouts differ")

    def leaves(self) -> dict[str, Tensor]:
        """Fresh gradient-tracking tensors for each block."""
        return {name: Tensor(v.copy(), requires_grad=True) for name, v in self.unflatten().items()}

    def constants(self) -> dict[str, Tensor]:
        return {name: Tensor(v) for name, v in self.unflatten().items()}

    def gradient(self, leaves: dict[str, Tensor]) -> "ParamVector":
        """Collect the accumulated gradients of ``leaves`` in this layout."""
        blocks = {}
        for s in self.layout:
            g = leaves[s.name].grad
            blocks[s.name] = np.zeros(s.shape) if g is None else g
        return ParamVector.flatten(blocks, self.layout)


def sgd_step(params: ParamVector, grads: ParamVector, lr: float) -> ParamVector:
    params.check_layout(grads)
    return params.like(params.values - lr * grads.values)


def gaussian_sample(mean: ParamVector, log_var: ParamVector, rng: np.random.Generator) -> ParamVector:
    """One draw from the diagonal Gaussian with the given mean and log-variance."""
    mean.check_layout(log_var)
    noise = rng.standard_normal(len(mean))
    return mean.like(mean.values + np.exp(0.5 * log_var.values) * noise)
