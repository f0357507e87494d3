"""Policy-gradient baseline: EGNN outputs read as independent Bernoulli edge probabilities."""

from __future__ import annotations

import time

import numpy as np

from ..config import EsConfig, RadioConfig
from ..nn import autograd as ag
from ..nn.layers import dense_forward
from ..nn.params import ParamVector, sgd_step
from ..rng import stream, topology_seed
from .egnn import SPEC, PretrainedModels, edge_logits
from .es import TrainResult, evaluate_batch, init_pg_params


def log_prob_gradient(params: ParamVector, features: np.ndarray, edges: np.ndarray) -> ParamVector:
    """Gradient of sum log p(edges) under Bernoulli(sigmoid(EGNN logits))."""
    leaves = params.leaves()
    z = dense_forward(SPEC, leaves, features, logits=True)
    e = np.asarray(edges, dtype=float).reshape(z.shape)
    ll = ag.add(ag.mul(ag.log_sigmoid(z), e), ag.mul(ag.log_sigmoid(ag.mul(z, -1.0)), 1.0 - e))
    ag.sum(ll).backward()
    return params.gradient(leaves)


def train_pg(config: EsConfig, radio: RadioConfig, models: PretrainedModels, seed: int,
             max_steps: int | None = None) -> TrainResult:
    """REINFORCE with a moving-average baseline at a fixed batch size."""
    budget = config.max_steps if max_steps is None else max_steps
    params = init_pg_params(seed)
    baseline = None
    hit_rate = 0.0
    result = TrainResult(params)
    start = time.perf_counter()
    k = config.k_start
    for step in range(budget):
        rng = stream(seed, "pg", step)
        sampled_edges = {}

        def sampler(features, params=params, rng=rng, store=sampled_edges):
            p = 1.0 / (1.0 + np.exp(-edge_logits(features, params)))
            edges = rng.random(len(p)) < p
            store["edges"] = edges
            return edges

        rec, info = evaluate_batch(params, topology_seed(seed, "es", step), config.k_total, k,
                                   config.query_bits, config.periods, radio, models, seed,
                                   "pg", step, edge_sampler=sampler)
        if baseline is None:
            baseline = rec.reward
        adv = rec.reward - baseline
        if adv != 0.0:
            grad = log_prob_gradient(params, info["features"], sampled_edges["edges"])
            # ascent on adv * log p
            params = sgd_step(params, grad, -config.pg_lr * adv)
        baseline = config.baseline_decay * baseline + (1 - config.baseline_decay) * rec.reward
        hit_rate = config.hit_smoothing * hit_rate + (1 - config.hit_smoothing) * (rec.reward >= 0)
        result.rows.append((step, k, rec.reward, hit_rate, rec.z_used, rec.z_star, rec.violations,
                            time.perf_counter() - start))
    result.params = params
    result.wall_time = time.perf_counter() - start
    return result
