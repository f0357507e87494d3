"""Deployment loop: repeated measure, hash, bucket, augment, build, color rounds.

Each round processes the pairs found by hash bucketing plus every pair that
carried an edge during the previous ``history`` rounds. The network transmits
with the assignment computed in the previous round, so the first round makes
no transmissions. Under mobility the STAs move between rounds for the virtual
duration charged to the round.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import OnlineConfig, RadioConfig
from .embedding import embed_states
from .graph.coloring import greedy_color
from .graph.egnn import MeasuredNetwork, PretrainedModels, egnn_edges, raw_pair_features
from .hashing import bucket_pairs, hash_codes
from .nn.params import ParamVector
from .rng import child_seed, stream
from .wifi.csma import ReliabilityReport, simulate_periods
from .wifi.network import Network, SlotAssignment, measure_states, move_stations

PHASES = ("Emb", "Hsh", "Buc", "Pre", "EG", "Col")
PAIR_MODES = ("bucketed", "all")
TIME_MODELS = ("measured", "fixed", "pairs")
ROUND_HEADER = ("round", "pair_count", "edge_count", "z_used", "transmitted", "violations",
                "loss_rate", "virtual_ms")
TIMING_HEADER = ("round", "tau_ms") + tuple(f"{p}_ms" for p in PHASES)


@dataclass
class RoundRecord:
    round: int
    pair_count: int
    edge_count: int
    z_used: int
    transmitted: bool
    violations: int
    loss_rate: float  # 1 - mean reliability of the transmissions during this round
    virtual_ms: float  # time charged to the round for mobility
    tau_ms: float  # wall time of the whole NGM pipeline
    phase_ms: dict = field(default_factory=dict)

    def row(self) -> tuple:
        return (self.round, self.pair_count, self.edge_count, self.z_used, int(self.transmitted),
                self.violations, self.loss_rate, self.virtual_ms)

    def timing_row(self) -> tuple:
        return (self.round, self.tau_ms) + tuple(self.phase_ms[p] for p in PHASES)


@dataclass
class OnlineResult:
    records: list[RoundRecord]
    assignment: SlotAssignment
    network: Network
    last_report: ReliabilityReport | None

    def transmitting(self) -> list[RoundRecord]:
        return [r for r in self.records if r.transmitted]

    def summary(self) -> dict:
        tx = self.transmitting()
        return {
            "rounds": len(self.records),
            "mean_slots": float(np.mean([r.z_used for r in self.records])),
            "mean_pairs": float(np.mean([r.pair_count for r in self.records])),
            "loss_rate": float(np.mean([r.loss_rate for r in tx])) if tx else 0.0,
            "mean_violations": float(np.mean([r.violations for r in tx])) if tx else 0.0,
        }

    def timing_summary(self) -> dict:
        out = {"mean_tau_ms": float(np.mean([r.tau_ms for r in self.records]))}
        for p in PHASES:
            out[f"mean_{p}_ms"] = float(np.mean([r.phase_ms[p] for r in self.records]))
        return out


def candidate_pairs(codes: np.ndarray, mode: str, query_bits: int, tables: int,
                    rng: np.random.Generator) -> np.ndarray:
    k = len(codes)
    if mode == "all":
        return ~np.eye(k, dtype=bool)
    if mode == "bucketed":
        return bucket_pairs(codes, query_bits, tables, rng)
    raise ValueError(f"unknown pair mode {mode!r}")


def augment_pairs(pairs: np.ndarray, history) -> np.ndarray:
    """Union of this round's candidate pairs with every edge kept in the history."""
    out = pairs.copy()
    for edges in history:
        out |= edges
    return out


def run_round(network: Network, history: deque, models: PretrainedModels, egnn: ParamVector,
              config: OnlineConfig, radio: RadioConfig, rng: np.random.Generator) -> tuple[SlotAssignment, dict]:
    """One NGM pass over the current network; appends this round's edges to ``history``."""
    times = {}
    t0 = time.perf_counter()
    states = measure_states(network, radio)
    emb = embed_states(states, models.senn, radio)
    t1 = time.perf_counter()
    codes = hash_codes(emb, models.dhf)
    t2 = time.perf_counter()
    pairs = augment_pairs(candidate_pairs(codes, config.pairs, config.query_bits, config.tables,
                                          rng), history)
    rows, cols = np.nonzero(pairs)
    t3 = time.perf_counter()
    cross = np.minimum(network.pathloss[:, network.assoc_ap], radio.s_max)
    measured = MeasuredNetwork(states, emb, codes, network.assoc_loss.copy(), cross, radio.s_max)
    raw = raw_pair_features(measured, rows, cols, models.predictors)
    t4 = time.perf_counter()
    adj = np.zeros_like(pairs)
    if len(rows):
        adj[rows, cols] = egnn_edges(models.scaler.apply(raw), egnn)
    t5 = time.perf_counter()
    assignment = greedy_color(adj)
    t6 = time.perf_counter()
    for name, (a, b) in zip(PHASES, ((t0, t1), (t1, t2), (t2, t3), (t3, t4), (t4, t5), (t5, t6))):
        times[name] = (b - a) * 1e3
    if config.history > 0:
        history.append(adj)
    return assignment, {"pair_count": int(pairs.sum()), "edge_count": int(adj.sum()),
                        "phase_ms": times, "tau_ms": (t6 - t0) * 1e3}


def virtual_round_ms(config: OnlineConfig, tau_ms: float, pair_count: int) -> float:
    if config.time_model == "measured":
        return tau_ms
    if config.time_model == "fixed":
        return config.fixed_dt_ms
    if config.time_model == "pairs":
        return config.ms_base + config.ms_per_pair * pair_count
    raise ValueError(f"unknown time model {config.time_model!r}")


def run_online(network: Network, models: PretrainedModels, egnn: ParamVector, config: OnlineConfig,
               radio: RadioConfig, seed: int, speed: float = 0.0) -> OnlineResult:
    """Iterate rounds on ``network``; STAs move at ``speed`` m/s when mobility is on."""
    if config.pairs not in PAIR_MODES:
        raise ValueError(f"unknown pair mode {config.pairs!r}")
    if config.time_model not in TIME_MODELS:
        raise ValueError(f"unknown time model {config.time_model!r}")
    if config.history < 0:
        raise ValueError("history must be >= 0")
    history: deque = deque(maxlen=max(config.history, 1))
    k = network.num_stas
    moving = config.mobility and speed > 0
    speeds = np.full(k, float(speed))
    headings = stream(seed, "mobility", 0).uniform(0.0, 2 * np.pi, size=k)
    records = []
    assignment = None
    report = None
    for m in range(1, config.rounds + 1):
        new_assignment, info = run_round(network, history, models, egnn, config, radio,
                                         stream(seed, "bucket", m))
        virtual_ms = virtual_round_ms(config, info["tau_ms"], info["pair_count"])
        # the network transmits with the previous assignment while this round runs
        transmitted = assignment is not None
        violations, loss = 0, 0.0
        if moving:
            network, headings = move_stations(network, virtual_ms * 1e-3, speeds, headings,
                                              child_seed(seed, "mobility", m), radio)
        if transmitted:
            report = simulate_periods(network, assignment, config.periods_per_round,
                                      child_seed(seed, "online-sim", m), radio)
            violations = report.violations(radio.reliability_target)
            loss = float(1.0 - report.reliability.mean())
        records.append(RoundRecord(m, info["pair_count"], info["edge_count"],
                                   new_assignment.num_slots, transmitted, violations, loss,
                                   virtual_ms, info["tau_ms"], info["phase_ms"]))
        assignment = new_assignment
    return OnlineResult(records, assignment, network, report)


def per_slot_histogram(assignment: SlotAssignment, report: ReliabilityReport,
                       target: float) -> list[tuple[int, int, int]]:
    """(slot, STA count, QoS violations) for every slot index 1..Z."""
    z = np.asarray(assignment.slot_of)
    bad = report.reliability < target
    counts = np.bincount(z, minlength=assignment.num_slots + 1)
    viol = np.bincount(z, weights=bad, minlength=assignment.num_slots + 1).astype(int)
    return [(s, int(counts[s]), int(viol[s])) for s in range(1, assignment.num_slots + 1)]
