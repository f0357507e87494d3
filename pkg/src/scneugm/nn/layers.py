"""Dense stacks and multi-layer LSTMs on top of the autodiff tape.

Forward functions take either a :class:`ParamVector` (treated as constants) or
the dict returned by ``ParamVector.leaves()`` (gradients tracked).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .params import ParamVector, make_layout

ACTIVATIONS = {
    "gelu": ag.gelu,
    "relu": ag.relu,
    "sigmoid": ag.sigmoid,
    "tanh": ag.tanh,
    "none": lambda x: x,
}
HIDDEN_ACTIVATIONS = ("gelu", "relu")


@dataclass(frozen=True)
class DenseSpec:
    layer_dims: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ValueError("a dense spec needs at least two positive widths")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def layout(self):
        blocks = []
        for n, (a, b) in enumerate(zip(self.layer_dims, self.layer_dims[1:])):
            blocks += [(f"W{n}", (a, b)), (f"b{n}", (b,))]
        return make_layout(blocks)

    def describe(self) -> dict:
        return {"kind": "dense", "layer_dims": list(self.layer_dims),
                "hidden_activation": self.hidden_activation,
                "output_activation": self.output_activation}


@dataclass(frozen=True)
class LstmSpec:
    input_dim: int
    hidden_dim: int
    layers: int = 2

    def __post_init__(self):
        if self.layers < 1 or self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("LSTM widths and depth must be >= 1")

    @property
    def layout(self):
        h = self.hidden_dim
        blocks = []
        for n in range(self.layers):
            d = self.input_dim if n == 0 else h
            # gate blocks along the last axis in the order i, f, g, o
            blocks += [(f"Wx{n}", (d, 4 * h)), (f"Wh{n}", (h, 4 * h)), (f"b{n}", (4 * h,))]
        return make_layout(blocks)

    def describe(self) -> dict:
        return {"kind": "lstm", "input_dim": self.input_dim, "hidden_dim": self.hidden_dim,
                "layers": self.layers}


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_dense(spec: DenseSpec, rng: np.random.Generator) -> ParamVector:
    blocks = {}
    for n, (a, b) in enumerate(zip(spec.layer_dims, spec.layer_dims[1:])):
        blocks[f"W{n}"] = _glorot(rng, a, b, (a, b))
        blocks[f"b{n}"] = np.zeros(b)
    return ParamVector.flatten(blocks, spec.layout)


def init_lstm(spec: LstmSpec, rng: np.random.Generator) -> ParamVector:
    h = spec.hidden_dim
    blocks = {}
    for n in range(spec.layers):
        d = spec.input_dim if n == 0 else h
        # each gate block is initialized as its own d x h (or h x h) matrix
        blocks[f"Wx{n}"] = np.concatenate([_glorot(rng, d, h, (d, h)) for _ in range(4)], axis=1)
        blocks[f"Wh{n}"] = np.concatenate([_glorot(rng, h, h, (h, h)) for _ in range(4)], axis=1)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        blocks[f"b{n}"] = b
    return ParamVector.flatten(blocks, spec.layout)


def _blocks(params) -> dict[str, Tensor]:
    return params.constants() if isinstance(params, ParamVector) else params


def dense_forward(spec: DenseSpec, params, x, logits: bool = False) -> Tensor:
    """Affine map then activation per layer.

    With ``logits=True`` the output activation is left off, which lets a
    caller fold a sigmoid into a numerically stable loss.
    """
    p = _blocks(params)
    x = ag.as_tensor(x)
    if x.shape[-1] != spec.layer_dims[0]:
        raise ValueError(f"input width {x.shape[-1]} != {spec.layer_dims[0]}")
    last = len(spec.layer_dims) - 2
    for n in range(last + 1):
        x = ag.add(ag.matmul(x, p[f"W{n}"]), p[f"b{n}"])
        if n < last:
            x = ACTIVATIONS[spec.hidden_activation](x)
        elif not logits:
            x = ACTIVATIONS[spec.output_activation](x)
    return x


def lstm_forward(spec: LstmSpec, params, inputs, lengths=None) -> tuple[list[Tensor], Tensor]:
    """Run a batch of padded sequences through the stacked LSTM.

    ``inputs`` is either a tensor of shape (batch, T, input_dim) or a list of T
    tensors of shape (batch, input_dim). Rows shorter than T (``lengths``) hold
    their state past their last position, so the returned final hidden state is
    the one at each row's own last element. Returns the last layer's hidden
    state per position and the final hidden state.
    """
    p = _blocks(params)
    if isinstance(inputs, (list, tuple)):
        steps = [ag.as_tensor(x) for x in inputs]
    else:
        inputs = ag.as_tensor(inputs)
        steps = [inputs[:, t, :] for t in range(inputs.shape[1])]
    if not steps:
        raise ValueError("LSTM needs a nonempty sequence")
    batch = steps[0].shape[0]
    if steps[0].shape[-1] != spec.input_dim:
        raise ValueError(f"input width {steps[0].shape[-1]} != {spec.input_dim}")
    h_dim = spec.hidden_dim
    masks = None
    if lengths is not None:
        lengths = np.asarray(lengths)
        masks = [(t < lengths).astype(float)[:, None] for t in range(len(steps))]

    seq = steps
    for n in range(spec.layers):
        h = Tensor(np.zeros((batch, h_dim)))
        c = Tensor(np.zeros((batch, h_dim)))
        wx, wh, b = p[f"Wx{n}"], p[f"Wh{n}"], p[f"b{n}"]
        out = []
        for t, x in enumerate(seq):
            z = ag.add(ag.add(ag.matmul(x, wx), ag.matmul(h, wh)), b)
            i = ag.sigmoid(z[:, :h_dim])
            f = ag.sigmoid(z[:, h_dim:2 * h_dim])
            g = ag.tanh(z[:, 2 * h_dim:3 * h_dim])
            o = ag.sigmoid(z[:, 3 * h_dim:])
            c_new = ag.add(ag.mul(f, c), ag.mul(i, g))
            h_new = ag.mul(o, ag.tanh(c_new))
            if masks is not None and not masks[t].all():
                m = masks[t]
                c_new = ag.add(ag.mul(c_new, m), ag.mul(c, 1.0 - m))
                h_new = ag.add(ag.mul(h_new, m), ag.mul(h, 1.0 - m))
            h, c = h_new, c_new
            out.append(h)
        seq = out
    return seq, seq[-1]
