"""Edge generator (EGNN) and graph construction from STA-pair features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import RadioConfig
from ..embedding import SennParams, embed_states
from ..hashing import batch_select, hash_codes
from ..nn import autograd as ag
from ..nn.layers import DenseSpec, dense_forward
from ..nn.params import ParamVector
from ..predictors import PredictorParams, predict_pairs
from ..rng import child_seed, stream
from ..wifi.network import Network, StationState, generate_network, measure_states

SPEC = DenseSpec((5, 50, 50, 1), "relu", "sigmoid")
FEATURES = ("s_i_own", "s_i_cross", "s_j_own", "pred_c", "pred_h")


@dataclass(frozen=True, eq=False)
class PretrainedModels:
    senn: SennParams
    predictors: PredictorParams
    dhf: ParamVector
    scaler: "FeatureScaler"


@dataclass(frozen=True, eq=False)
class MeasuredNetwork:
    """What the NGM sees of a network: states, embeddings, codes and path losses."""

    states: list[StationState]
    embeddings: np.ndarray  # (K, 5)
    codes: np.ndarray  # (K, Λ) ±1
    own_loss: np.ndarray  # (K,) s_{k, a_k}
    cross_loss: np.ndarray  # (K, K) [i, j] = s_{i, a_j}, clamped to s_max
    s_max: float


def measure_network(network: Network, states: list[StationState], models: PretrainedModels,
                    config: RadioConfig) -> MeasuredNetwork:
    return _measure(network, states, models.senn, models.dhf, config)


def _measure(network: Network, states: list[StationState], senn: SennParams, dhf: ParamVector,
             config: RadioConfig) -> MeasuredNetwork:
    emb = embed_states(states, senn, config)
    codes = hash_codes(emb, dhf)
    cross = np.minimum(network.pathloss[:, network.assoc_ap], config.s_max)
    return MeasuredNetwork(states, emb, codes, network.assoc_loss.copy(), cross, config.s_max)


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-column affine map of raw pair features to zero mean and unit spread."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureScaler":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


def raw_pair_features(measured: MeasuredNetwork, rows, cols,
                      predictors: PredictorParams) -> np.ndarray:
    """(P, 5) unscaled EGNN inputs for the ordered pairs (rows[p], cols[p])."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    pc, ph = predict_pairs(measured.embeddings, rows, cols, predictors)
    return np.column_stack([measured.own_loss[rows], measured.cross_loss[rows, cols],
                            measured.own_loss[cols], pc, ph])


def fit_feature_scaler(radio: RadioConfig, senn: SennParams, predictors: PredictorParams,
                       dhf: ParamVector, seed: int, networks: int = 20, batch_size: int = 20,
                       query_bits: int = 4) -> FeatureScaler:
    """Column statistics of pair features over DHF-selected batches of fresh networks.

    The batches mirror what the edge generator sees at the start of training,
    so a randomly initialized EGNN already produces graphs of varied density.
    """
    blocks = []
    for n in range(networks):
        net = generate_network(radio, child_seed(seed, "scaler", n), radio.num_stas)
        states = measure_states(net, radio)
        measured = _measure(net, states, senn, dhf, radio)
        batch = batch_select(measured.codes, query_bits, min(batch_size, len(states)),
                             stream(seed, "scaler", n))
        rows, cols = np.nonzero(all_pairs(len(batch)))
        blocks.append(raw_pair_features(measured, batch[rows], batch[cols], predictors))
    raw = np.vstack(blocks)
    std = raw.std(axis=0)
    return FeatureScaler(raw.mean(axis=0), np.where(std > 1e-9, std, 1.0))


def edge_features(measured: MeasuredNetwork, rows, cols, models: PretrainedModels) -> np.ndarray:
    """(P, 5) scaled EGNN inputs for the ordered pairs (rows[p], cols[p])."""
    return models.scaler.apply(raw_pair_features(measured, rows, cols, models.predictors))


def edge_logits(features: np.ndarray, params: ParamVector) -> np.ndarray:
    with ag.no_grad():
        return dense_forward(SPEC, params, features, logits=True).value[:, 0]


def egnn_edges(features: np.ndarray, params: ParamVector) -> np.ndarray:
    """Binary edges: sigmoid output rounded half-up, i.e. logit >= 0."""
    return edge_logits(features, params) >= 0.0


def build_graph(pairs: np.ndarray, features: np.ndarray, params: ParamVector) -> np.ndarray:
    """K x K adjacency with EGNN edges on the masked pairs and zeros elsewhere.

    ``features`` holds one row per True entry of ``pairs`` in row-major order.
    """
    pairs = np.asarray(pairs, dtype=bool)
    adj = np.zeros_like(pairs)
    if pairs.any():
        adj[pairs] = egnn_edges(features, params)
    np.fill_diagonal(adj, False)
    return adj


def all_pairs(k: int) -> np.ndarray:
    return ~np.eye(k, dtype=bool)
