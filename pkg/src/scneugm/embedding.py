"""State-embedding autoencoder (SENN).

The encoder maps a STA's sorted (path loss, AP x, AP y) sequence to a 5-dim
vector: a dense input stack per triple, a two-layer LSTM over the sequence, and
a dense output head on the final hidden state. The decoder is a two-layer
LSTM that receives the embedding itself at every position, followed by a
dense head mapping each hidden state back to a triple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RadioConfig, TrainConfig
from .nn import autograd as ag
from .nn.layers import DenseSpec, LstmSpec, dense_forward, init_dense, init_lstm, lstm_forward
from .nn.params import sgd_step
from .rng import stream, topology_seed
from .training import LossTrace
from .wifi.network import StationState, generate_network, measure_states

EMBED_DIM = 5
HIDDEN = 15
LOSS_SCALE = 100.0

SPECS = {
    "SENNI": DenseSpec((3, HIDDEN, HIDDEN, HIDDEN), "gelu", "gelu"),
    "LSTM-enc": LstmSpec(HIDDEN, HIDDEN, 2),
    "SENNO": DenseSpec((HIDDEN, EMBED_DIM), "gelu", "none"),
    "LSTM-dec": LstmSpec(EMBED_DIM, HIDDEN, 2),
    "DECO": DenseSpec((HIDDEN, 3), "gelu", "none"),
}
ENCODER = ("SENNI", "LSTM-enc", "SENNO")


@dataclass(frozen=True, eq=False)
class SennParams:
    nets: dict  # name -> ParamVector, keys as in SPECS

    def networks(self) -> dict:
        return {name: (SPECS[name], self.nets[name]) for name in SPECS}

    def flat(self) -> np.ndarray:
        return np.concatenate([self.nets[n].values for n in SPECS])


def init_senn(rng: np.random.Generator) -> SennParams:
    nets = {}
    for name, spec in SPECS.items():
        nets[name] = init_lstm(spec, rng) if isinstance(spec, LstmSpec) else init_dense(spec, rng)
    return SennParams(nets)


def standardize(entries: np.ndarray, config: RadioConfig) -> np.ndarray:
    entries = np.asarray(entries, dtype=float)
    scale = np.array([LOSS_SCALE, config.area_side, config.area_side])
    return entries / scale


def unstandardize(values: np.ndarray, config: RadioConfig) -> np.ndarray:
    scale = np.array([LOSS_SCALE, config.area_side, config.area_side])
    return np.asarray(values) * scale


def pack_states(states: list[StationState], config: RadioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Zero-padded (K, T, 3) standardized sequences and their lengths."""
    lengths = np.array([len(s) for s in states], dtype=int)
    out = np.zeros((len(states), int(lengths.max()), 3))
    for k, s in enumerate(states):
        out[k, :len(s)] = standardize(s.entries, config)
    return out, lengths


def encode_packed(nets: dict, seqs: np.ndarray, lengths: np.ndarray) -> ag.Tensor:
    """(K, 5) embeddings; ``nets`` maps names to ParamVectors or leaf dicts."""
    x = dense_forward(SPECS["SENNI"], nets["SENNI"], seqs)
    _, h = lstm_forward(SPECS["LSTM-enc"], nets["LSTM-enc"], x, lengths)
    return dense_forward(SPECS["SENNO"], nets["SENNO"], h)


def decode_packed(nets: dict, embeddings, steps: int) -> ag.Tensor:
    """(K, steps, 3) standardized reconstructions."""
    x = ag.as_tensor(embeddings)
    hs, _ = lstm_forward(SPECS["LSTM-dec"], nets["LSTM-dec"], [x] * steps)
    stacked = ag.concat([ag.reshape(h, (h.shape[0], 1, h.shape[1])) for h in hs], axis=1)
    return dense_forward(SPECS["DECO"], nets["DECO"], stacked)


def embed_states(states: list[StationState], params: SennParams, config: RadioConfig) -> np.ndarray:
    seqs, lengths = pack_states(states, config)
    with ag.no_grad():
        return encode_packed(params.nets, seqs, lengths).value


def embed(state: StationState, params: SennParams, config: RadioConfig) -> np.ndarray:
    return embed_states([state], params, config)[0]


def decode(embedding, length: int, params: SennParams, config: RadioConfig) -> np.ndarray:
    """Reconstructed (path loss dB, x m, y m) rows for one embedding."""
    if length < 1:
        raise ValueError("length must be >= 1")
    with ag.no_grad():
        out = decode_packed(params.nets, np.asarray(embedding, dtype=float)[None, :], length).value
    return unstandardize(out[0], config)


def reconstruction_loss(nets: dict, seqs: np.ndarray, lengths: np.ndarray) -> ag.Tensor:
    """Sum of squared reconstruction errors over each sequence, averaged over STAs."""
    emb = encode_packed(nets, seqs, lengths)
    recon = decode_packed(nets, emb, seqs.shape[1])
    mask = (np.arange(seqs.shape[1])[None, :] < lengths[:, None]).astype(float)[..., None]
    err = ag.mul(ag.square(ag.sub(recon, seqs)), mask)
    return ag.mul(ag.sum(err), 1.0 / len(lengths))


def autoencoder_step(params: SennParams, seqs, lengths, lr: float) -> tuple[SennParams, float]:
    leaves = {name: params.nets[name].leaves() for name in SPECS}
    loss = reconstruction_loss(leaves, seqs, lengths)
    loss.backward()
    nets = {name: sgd_step(params.nets[name], params.nets[name].gradient(leaves[name]), lr)
            for name in SPECS}
    return SennParams(nets), float(loss.value)


def pretrain_autoencoder(train: TrainConfig, radio: RadioConfig, seed: int,
                         init: SennParams | None = None) -> tuple[SennParams, LossTrace]:
    """SGD on encoder and decoder jointly, one fresh network per step."""
    params = init or init_senn(stream(seed, "init", 0))
    trace = LossTrace(train.divergence_factor)
    for step in range(train.steps):
        net = generate_network(radio, topology_seed(seed, "embed", step), train.num_stas)
        seqs, lengths = pack_states(measure_states(net, radio), radio)
        params, loss = autoencoder_step(params, seqs, lengths, train.lr)
        trace.record(step, loss)
    return params, trace
