"""Pair predictors: contending (PCNN) and hidden (PHNN) heads on embedding pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .config import RadioConfig, TrainConfig
from .embedding import SennParams, embed_states
from .nn import autograd as ag
from .nn.layers import DenseSpec, dense_forward, init_dense
from .nn.params import ParamVector, sgd_step
from .rng import stream, topology_seed
from .training import LossTrace
from .wifi.network import generate_network, measure_states, pair_indicators

SPECS = {
    "PCNN": DenseSpec((10, 50, 50, 1), "relu", "sigmoid"),
    "PHNN": DenseSpec((10, 50, 50, 1), "relu", "sigmoid"),
}
_LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class PredictorParams:
    pcnn: ParamVector
    phnn: ParamVector

    def networks(self) -> dict:
        return {"PCNN": (SPECS["PCNN"], self.pcnn), "PHNN": (SPECS["PHNN"], self.phnn)}


def init_predictors(rng: np.random.Generator) -> PredictorParams:
    return PredictorParams(init_dense(SPECS["PCNN"], rng), init_dense(SPECS["PHNN"], rng))


def pair_inputs(emb: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """(P, 10) inputs: the two embeddings of each ordered pair, source first."""
    return np.concatenate([emb[rows], emb[cols]], axis=1)


def predict_pairs(emb: np.ndarray, rows, cols, params: PredictorParams) -> tuple[np.ndarray, np.ndarray]:
    x = pair_inputs(emb, np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))
    with ag.no_grad():
        pc = dense_forward(SPECS["PCNN"], params.pcnn, x).value[:, 0]
        ph = dense_forward(SPECS["PHNN"], params.phnn, x).value[:, 0]
    return pc, ph


def predict_pair(v_i, v_j, params: PredictorParams) -> tuple[float, float]:
    emb = np.stack([np.asarray(v_i, dtype=float), np.asarray(v_j, dtype=float)])
    pc, ph = predict_pairs(emb, [0], [1], params)
    return float(pc[0]), float(ph[0])


def bce_bits(logits: ag.Tensor, labels: np.ndarray) -> ag.Tensor:
    """Mean binary cross-entropy in bits per pair, computed from pre-sigmoid logits."""
    labels = np.asarray(labels, dtype=float).reshape(logits.shape)
    # log sigmoid(-z) = log(1 - sigmoid(z))
    ll = ag.add(ag.mul(ag.log_sigmoid(logits), labels),
                ag.mul(ag.log_sigmoid(ag.mul(logits, -1.0)), 1.0 - labels))
    return ag.mul(ag.sum(ll), -1.0 / (_LN2 * max(ll.value.size, 1)))


def balanced_pairs(labels: np.ndarray, neg_ratio: float | None,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Every positive off-diagonal pair plus ``neg_ratio`` negatives per positive."""
    k = len(labels)
    off = ~np.eye(k, dtype=bool)
    pos = np.flatnonzero((labels & off).ravel())
    neg = np.flatnonzero((~labels & off).ravel())
    if neg_ratio is not None:
        want = min(len(neg), int(round(neg_ratio * max(len(pos), 1))))
        neg = rng.choice(neg, size=want, replace=False)
    flat = np.sort(np.concatenate([pos, neg]))
    return flat // k, flat % k


def head_loss(spec: DenseSpec, leaves, emb, rows, cols, labels) -> ag.Tensor:
    logits = dense_forward(spec, leaves, pair_inputs(emb, rows, cols), logits=True)
    return bce_bits(logits, labels[rows, cols])


def pretrain_predictors(train: TrainConfig, radio: RadioConfig, senn: SennParams, seed: int,
                        init: PredictorParams | None = None) -> tuple[PredictorParams, LossTrace]:
    """SGD on both heads with the embedding network frozen.

    The recorded loss is the sum of the two heads' losses; each head's own
    loss goes into the trace as an extra column.
    """
    params = init or init_predictors(stream(seed, "init", 1))
    trace = LossTrace(train.divergence_factor)
    for step in range(train.steps):
        net = generate_network(radio, topology_seed(seed, "predictors", step), train.num_stas)
        emb = embed_states(measure_states(net, radio), senn, radio)
        ind = pair_indicators(net, radio)
        rng = stream(seed, "sample", 1, step)
        new, parts = {}, {}
        for name, pv, labels in (("PCNN", params.pcnn, ind.contending),
                                 ("PHNN", params.phnn, ind.hidden)):
            rows, cols = balanced_pairs(labels, train.neg_ratio, rng)
            leaves = pv.leaves()
            loss = head_loss(SPECS[name], leaves, emb, rows, cols, labels)
            loss.backward()
            new[name] = sgd_step(pv, pv.gradient(leaves), train.lr)
            parts[name] = float(loss.value)
        trace.record(step, parts["PCNN"] + parts["PHNN"], pcnn_loss=parts["PCNN"],
                     phnn_loss=parts["PHNN"])
        params = PredictorParams(new["PCNN"], new["PHNN"])
    return params, trace


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties get mid-ranks)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
