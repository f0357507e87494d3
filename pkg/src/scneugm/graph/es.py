"""Gaussian evolution strategy for the edge generator, with curriculum batching.

Every EGNN weight is an independent Gaussian (mean m, log-variance ν). One
step samples a parameter vector, builds and colors a graph over a DHF-selected
batch of STAs, simulates it, and moves (m, ν) along the reward advantage times
the score function of the sample. A smoothed hit rate Ω of non-negative
rewards drives the batch size.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import EsConfig, RadioConfig
from ..hashing import batch_select
from ..nn.layers import init_dense
from ..nn.params import ParamVector, gaussian_sample
from ..rng import child_seed, stream, topology_seed
from ..wifi.csma import simulate_periods
from ..wifi.network import generate_network, measure_states, pair_indicators
from .coloring import approx_optimal_slots, greedy_color
from .egnn import SPEC, PretrainedModels, all_pairs, build_graph, edge_features, measure_network
from .reward import RewardRecord, reward

SCHEDULES = ("adaptive", "linear", "fixed")
TRACE_HEADER = ("step", "batch_size", "reward", "hit_rate", "z_used", "z_star", "violations",
                "wall_time")


@dataclass(frozen=True, eq=False)
class EsState:
    mean: ParamVector
    log_var: ParamVector
    baseline: float | None = None  # None until the first reward arrives
    hit_rate: float = 0.0
    batch_size: int = 20


def init_es_state(config: EsConfig) -> EsState:
    layout = SPEC.layout
    mean = ParamVector.zeros(layout)
    log_var = mean.like(np.full(len(mean), math.log(config.init_var)))
    return EsState(mean, log_var, None, 0.0, config.k_start)


def es_step(state: EsState, reward_value: float, sampled: ParamVector, lr: float,
            baseline_decay: float = 0.99, hit_smoothing: float = 0.9) -> EsState:
    """One score-function update of (m, ν), then the baseline and hit-rate updates."""
    state.mean.check_layout(sampled)
    baseline = reward_value if state.baseline is None else state.baseline
    adv = reward_value - baseline
    m, nu = state.mean.values, state.log_var.values
    var = np.exp(nu)
    delta = sampled.values - m
    new_m = m + lr * adv * delta / var
    new_nu = nu + lr * adv * (delta ** 2 / (2.0 * var) - 0.5)
    new_baseline = baseline_decay * baseline + (1.0 - baseline_decay) * reward_value
    hit = 1.0 if reward_value >= 0 else 0.0
    new_hit = hit_smoothing * state.hit_rate + (1.0 - hit_smoothing) * hit
    return replace(state, mean=state.mean.like(new_m), log_var=state.log_var.like(new_nu),
                   baseline=new_baseline, hit_rate=new_hit)


@dataclass
class TrainResult:
    params: ParamVector
    rows: list[tuple] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    state: EsState | None = None

    @property
    def final_hit_rate(self) -> float:
        return self.rows[-1][3] if self.rows else 0.0

    def reached(self, k_total: int, threshold: float) -> int | None:
        """Index of the first step at full size with Ω >= threshold."""
        for i, row in enumerate(self.rows):
            if row[1] >= k_total and row[3] >= threshold:
                return i
        return None


def evaluate_batch(params: ParamVector, step_seed: int, k_total: int, batch_size: int,
                   query_bits: int, periods: int, radio: RadioConfig,
                   models: PretrainedModels, seed: int, stage: str, step: int,
                   edge_sampler=None) -> tuple[RewardRecord, dict]:
    """Fresh network, DHF batch, EGNN graph, coloring, simulation, reward.

    ``edge_sampler(features) -> adjacency mask`` replaces the deterministic
    rounding when given (used by the policy-gradient baseline).
    """
    net = generate_network(radio, step_seed, k_total)
    states = measure_states(net, radio)
    measured = measure_network(net, states, models, radio)
    batch = batch_select(measured.codes, query_bits, batch_size, stream(seed, "batch", step))
    sub = net.subset(batch)
    pairs = all_pairs(len(batch))
    rows, cols = np.nonzero(pairs)
    feats = edge_features(measured, batch[rows], batch[cols], models)
    if edge_sampler is None:
        adj = build_graph(pairs, feats, params)
    else:
        adj = np.zeros_like(pairs)
        adj[pairs] = edge_sampler(feats)
    assignment = greedy_color(adj)
    report = simulate_periods(sub, assignment, periods, child_seed(seed, stage + "-sim", step), radio)
    z_star = approx_optimal_slots(pair_indicators(sub, radio))
    rec = reward(report, assignment.num_slots, z_star, radio.reliability_target)
    return rec, {"features": feats, "adjacency": adj, "pairs": pairs}


def next_batch_size(schedule: str, state: EsState, config: EsConfig) -> tuple[int, bool]:
    """(next K', finished) after a step, following the configured schedule."""
    k = state.batch_size
    if schedule == "fixed":
        return k, False
    if schedule == "linear":
        if k < config.k_total:
            return min(k + 1, config.k_total), False
        return k, state.hit_rate >= config.hit_threshold
    if state.hit_rate >= config.hit_threshold:
        if k >= config.k_total:
            return k, True
        return min(k + config.batch_increment, config.k_total), False
    return k, False


def train_es(config: EsConfig, radio: RadioConfig, models: PretrainedModels, seed: int,
             schedule: str | None = None, max_steps: int | None = None) -> TrainResult:
    schedule = schedule or config.schedule
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    budget = config.max_steps if max_steps is None else max_steps
    state = init_es_state(config)
    result = TrainResult(state.mean)
    start = time.perf_counter()
    for step in range(budget):
        sampled = gaussian_sample(state.mean, state.log_var, stream(seed, "es", step))
        rec, _ = evaluate_batch(sampled, topology_seed(seed, "es", step), config.k_total,
                                state.batch_size, config.query_bits, config.periods, radio,
                                models, seed, "es", step)
        state = es_step(state, rec.reward, sampled, config.lr, config.baseline_decay,
                        config.hit_smoothing)
        result.rows.append((step, state.batch_size, rec.reward, state.hit_rate, rec.z_used,
                            rec.z_star, rec.violations, time.perf_counter() - start))
        k_next, done = next_batch_size(schedule, state, config)
        state = replace(state, batch_size=k_next)
        if done:
            result.converged = True
            break
    result.params = state.mean
    result.state = state
    result.wall_time = time.perf_counter() - start
    return result


def init_pg_params(seed: int) -> ParamVector:
    return init_dense(SPEC, stream(seed, "init", 4))
