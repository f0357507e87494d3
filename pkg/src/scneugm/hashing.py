"""Deep hashing function (DHF): learned ±1 codes that put interacting STAs close.

Two uses at run time:

* batching - pick a training subset of STAs whose codes agree with random
  partial queries, so the subset is rich in contending/hidden pairs;
* bucketing - multi-table hashing on random bit subsets; only STA pairs that
  share a bucket in some table are handed to the edge generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RadioConfig, TrainConfig
from .embedding import SennParams, embed_states
from .nn import autograd as ag
from .nn.layers import DenseSpec, dense_forward, init_dense
from .nn.params import ParamVector, sgd_step
from .rng import stream, topology_seed
from .training import LossTrace
from .wifi.network import PairIndicators, generate_network, measure_states, pair_indicators

CODE_BITS = 30
SPEC = DenseSpec((5, CODE_BITS, CODE_BITS, CODE_BITS, CODE_BITS, CODE_BITS), "gelu", "tanh")
MAX_EMPTY_ROUNDS = 100


def init_dhf(rng: np.random.Generator) -> ParamVector:
    return init_dense(SPEC, rng)


def hash_codes(emb: np.ndarray, params: ParamVector, binarize: bool = True) -> np.ndarray:
    """(K, Λ) codes: tanh relaxation, or its sign with sign(0) = +1."""
    with ag.no_grad():
        relaxed = dense_forward(SPEC, params, np.atleast_2d(emb)).value
    if not binarize:
        return relaxed
    return np.where(relaxed >= 0, 1, -1).astype(np.int8)


def hash_code(v, params: ParamVector, binarize: bool = True) -> np.ndarray:
    return hash_codes(np.asarray(v, dtype=float)[None, :], params, binarize)[0]


def similarity_loss(codes, labels: np.ndarray) -> ag.Tensor:
    """Mean over ordered pairs i != j of (normalized code agreement - label)^2.

    ``labels`` is the K x K 0/1 matrix O^C + O^H (clipped to 1).
    """
    codes = ag.as_tensor(codes)
    k, bits = codes.shape
    if k < 2:
        raise ValueError("similarity loss needs at least two STAs")
    agree = ag.mul(ag.add(ag.matmul(codes, ag.transpose(codes)), float(bits)), 1.0 / (2 * bits))
    off = 1.0 - np.eye(k)
    diff = ag.mul(ag.sub(agree, np.minimum(np.asarray(labels, dtype=float), 1.0)), off)
    return ag.mul(ag.sum(ag.square(diff)), 1.0 / (k * (k - 1)))


def correlation_loss(codes) -> ag.Tensor:
    """(1/K^2) * ||C C^T - I||_F^2 with C the Λ x K matrix of codes as columns."""
    codes = ag.as_tensor(codes)
    k, bits = codes.shape
    gram = ag.matmul(ag.transpose(codes), codes)  # (Λ, Λ)
    return ag.mul(ag.sum(ag.square(ag.sub(gram, np.eye(bits)))), 1.0 / (k * k))


def dhf_loss(leaves, emb: np.ndarray, labels: np.ndarray, corr_weight: float):
    codes = dense_forward(SPEC, leaves, emb)
    sim = similarity_loss(codes, labels)
    corr = correlation_loss(codes)
    total = ag.add(sim, ag.mul(corr, corr_weight)) if corr_weight else sim
    return total, float(sim.value), float(corr.value)


def train_dhf(train: TrainConfig, radio: RadioConfig, senn: SennParams, seed: int,
              init: ParamVector | None = None) -> tuple[ParamVector, LossTrace]:
    params = init if init is not None else init_dhf(stream(seed, "init", 2))
    trace = LossTrace(train.divergence_factor)
    for step in range(train.steps):
        net = generate_network(radio, topology_seed(seed, "dhf", step), train.num_stas)
        emb = embed_states(measure_states(net, radio), senn, radio)
        labels = pair_indicators(net, radio).either
        leaves = params.leaves()
        total, sim, corr = dhf_loss(leaves, emb, labels, train.corr_weight)
        total.backward()
        params = sgd_step(params, params.gradient(leaves), train.lr)
        trace.record(step, float(total.value), similarity=sim, correlation=corr)
    return params, trace


@dataclass(frozen=True)
class BatchRound:
    positions: tuple[int, ...]
    query: tuple[int, ...]
    added: tuple[int, ...]


def batch_select(codes: np.ndarray, query_bits: int, target: int, rng: np.random.Generator,
                 audit: list | None = None) -> np.ndarray:
    """Grow a STA subset by random partial-code queries until it holds ``target`` STAs.

    Each round draws ``query_bits`` distinct positions and a random ±1 query and
    adds, in random order, every not-yet-selected STA matching it there. After
    ``MAX_EMPTY_ROUNDS`` consecutive rounds that add nobody, the query length
    drops to zero (uniform selection). ``audit`` receives one
    :class:`BatchRound` per round when given.
    """
    codes = np.asarray(codes)
    k, bits = codes.shape
    if not 0 <= query_bits <= bits:
        raise ValueError("query_bits must lie in 0..code length")
    if not 0 <= target <= k:
        raise ValueError("target must lie in 0..K")
    chosen: list[int] = []
    taken = np.zeros(k, dtype=bool)
    empty = 0
    psi = query_bits
    while len(chosen) < target:
        if empty >= MAX_EMPTY_ROUNDS:
            psi = 0
        pos = rng.choice(bits, size=psi, replace=False)
        query = rng.choice(np.array([-1, 1], dtype=np.int8), size=psi)
        match = np.all(codes[:, pos] == query, axis=1) & ~taken
        new = rng.permutation(np.flatnonzero(match))
        if audit is not None:
            audit.append(BatchRound(tuple(int(p) for p in pos), tuple(int(q) for q in query),
                                    tuple(int(i) for i in new)))
        empty = 0 if len(new) else empty + 1
        taken[new] = True
        chosen.extend(int(i) for i in new)
    return np.array(chosen[:target], dtype=int)


def bucket_tables(codes: np.ndarray, query_bits: int, tables: int,
                  rng: np.random.Generator) -> list[list[np.ndarray]]:
    """Per table, the buckets (STA index arrays) of STAs sharing a sub-code."""
    codes = np.asarray(codes)
    k, bits = codes.shape
    if not 1 <= query_bits <= bits:
        raise ValueError("query_bits must lie in 1..code length")
    if tables < 1:
        raise ValueError("need at least one table")
    weights = 1 << np.arange(query_bits, dtype=np.int64)
    out = []
    for _ in range(tables):
        pos = rng.choice(bits, size=query_bits, replace=False)
        key = ((codes[:, pos] > 0).astype(np.int64) * weights).sum(axis=1)
        order = np.argsort(key, kind="stable")
        cuts = np.flatnonzero(np.diff(key[order])) + 1
        out.append(np.split(order, cuts))
    return out


def bucket_pairs(codes: np.ndarray, query_bits: int, tables: int,
                 rng: np.random.Generator) -> np.ndarray:
    """K x K boolean pair set: (i, j) present iff i != j share a bucket in some table."""
    k = len(codes)
    pairs = np.zeros((k, k), dtype=bool)
    for buckets in bucket_tables(codes, query_bits, tables, rng):
        for b in buckets:
            if len(b) > 1:
                pairs[np.ix_(b, b)] = True
    np.fill_diagonal(pairs, False)
    return pairs


@dataclass(frozen=True)
class GridCell:
    query_bits: int
    tables: int
    pair_fraction: float
    recall: float

    @property
    def efficiency(self) -> float:
        return self.recall - self.pair_fraction


def bucket_quality(pairs: np.ndarray, indicators: PairIndicators) -> tuple[float, float]:
    """(fraction of ordered pairs kept, recall of contending/hidden pairs)."""
    k = len(pairs)
    total = k * (k - 1)
    truth = indicators.either
    positives = int(truth.sum())
    recall = float((pairs & truth).sum() / positives) if positives else 1.0
    return float(pairs.sum() / total), recall
