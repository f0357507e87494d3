"""Monte-Carlo CSMA/CA inside restricted TWT slots.

All periods and all slots are simulated at once. STAs sharing a slot are laid
out as a padded ``(group, member)`` grid and the simulation advances each
``(period, group)`` pair from one event (backoff expiry or transmission end) to
the next, so the loop runs for the largest per-group event count rather than
for every microsecond.

Per-STA random draws are made up front with shape ``(periods, K, attempts)``;
period ``n`` only ever reads row ``n``, which keeps results independent of how
periods are chunked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import RadioConfig
from ..rng import stream
from .network import Network, SlotAssignment
from .radio import decode_error, detect_range

BACKOFF, TX, DONE = 0, 1, 2


@dataclass(frozen=True, eq=False)
class ReliabilityReport:
    successes: np.ndarray  # (K,)
    periods: int

    @property
    def reliability(self) -> np.ndarray:
        return self.successes / self.periods

    def violations(self, target: float) -> int:
        return int(np.sum(self.reliability < target))


@dataclass(frozen=True, eq=False)
class LinkTables:
    """Pairwise radio quantities the simulator needs, in linear units."""

    signal: np.ndarray  # (K,) mW at own AP
    noise: float  # mW
    interference: np.ndarray  # (K, K) [i, j]: mW of i at j's AP
    senses: np.ndarray  # (K, K) bool, symmetric
    duration_us: np.ndarray  # (K,) data symbols only
    airtime_us: np.ndarray  # (K,) channel occupancy of one attempt


def link_tables(network: Network, config: RadioConfig) -> LinkTables:
    signal = 10.0 ** ((config.tx_power - network.assoc_loss) / 10.0)
    cross = network.pathloss[:, network.assoc_ap]  # [i, j] = s_{i, a_j}
    # signals below receiver sensitivity are treated as absent
    interference = np.where(cross <= config.s_max, 10.0 ** ((config.tx_power - cross) / 10.0), 0.0)
    np.fill_diagonal(interference, 0.0)
    senses = network.sta_distances() <= detect_range(config)
    np.fill_diagonal(senses, False)
    duration = network.packet_duration * 1e6
    return LinkTables(signal, 10.0 ** (config.noise_floor / 10.0), interference, senses,
                      duration, duration + config.exchange_overhead)


def _group_layout(slot_of: np.ndarray) -> np.ndarray:
    """(G, M) member table of non-empty slots, padded with -1."""
    slots = np.unique(slot_of)
    members = [np.flatnonzero(slot_of == z) for z in slots]
    width = max(len(m) for m in members)
    table = np.full((len(members), width), -1, dtype=int)
    for g, m in enumerate(members):
        table[g, :len(m)] = m
    return table


def simulate_periods(network: Network, assignment: SlotAssignment, periods: int, seed: int,
                     config: RadioConfig, links: LinkTables | None = None) -> ReliabilityReport:
    """Per-STA packet success counts over ``periods`` RTWT periods."""
    k = network.num_stas
    if len(assignment.slot_of) != k:
        raise ValueError("assignment must cover every STA")
    if periods < 1:
        raise ValueError("periods must be >= 1")
    if k == 0:
        return ReliabilityReport(np.zeros(0, dtype=int), periods)
    links = links or link_tables(network, config)
    attempts = config.max_retries + 1
    backoff_draw = stream(seed, "backoff").integers(0, config.cw, size=(periods, k, attempts))
    decode_draw = stream(seed, "decode").random(size=(periods, k, attempts))

    table = _group_layout(np.asarray(assignment.slot_of))
    valid = table >= 0
    idx = np.where(valid, table, 0)
    g_count, width = table.shape
    pair_ok = valid[:, :, None] & valid[:, None, :]
    senses = (links.senses[idx[:, :, None], idx[:, None, :]] & pair_ok).astype(float)
    interf = np.where(pair_ok, links.interference[idx[:, :, None], idx[:, None, :]], 0.0)
    signal = links.signal[idx]
    duration = np.where(valid, links.duration_us[idx], 0.0)
    airtime = np.where(valid, links.airtime_us[idx], 0.0)
    bo = backoff_draw[:, idx, :] * config.backoff_slot  # (N, G, M, R)
    ud = decode_draw[:, idx, :]

    shape = (periods, g_count, width)
    phase = np.where(valid, BACKOFF, DONE) * np.ones(shape, dtype=np.int8)
    rem = bo[..., 0].copy()
    attempt = np.zeros(shape, dtype=int)
    success = np.zeros(shape, dtype=bool)
    worst_interf = np.zeros(shape)
    clock = np.zeros((periods, g_count))
    n_i, g_i, m_i = np.indices(shape)
    slot_len = config.slot_len

    def _busy(tx: np.ndarray) -> np.ndarray:
        return np.einsum("ngk,gmk->ngm", tx.astype(float), senses) > 0

    while True:
        tx = phase == TX
        counting = (phase == BACKOFF) & ~_busy(tx)
        cand = np.where(counting | tx, rem, np.inf)
        dt = cand.min(axis=2)
        live = np.isfinite(dt)
        if not live.any():
            break
        dt = np.where(live, dt, 0.0)
        clock += dt
        rem = np.where(counting | tx, rem - dt[..., None], rem)

        # transmissions ending now
        ending = tx & (rem <= 0)
        if ending.any():
            sinr = signal / (links.noise + worst_interf)
            eps = decode_error(sinr, duration * 1e-6, config)
            a = np.minimum(attempt, attempts - 1)
            ok = ending & (ud[n_i, g_i, m_i, a] >= eps)
            success |= ok
            phase = np.where(ok, DONE, phase)
            failed = ending & ~ok
            attempt = np.where(failed, attempt + 1, attempt)
            retry = failed & (attempt < attempts)
            phase = np.where(failed, np.where(retry, BACKOFF, DONE), phase)
            nxt = bo[n_i, g_i, m_i, np.minimum(attempt, attempts - 1)]
            rem = np.where(retry, nxt, rem)

        # expired backoffs start transmitting if the channel is idle
        tx = phase == TX
        ready = (phase == BACKOFF) & (rem <= 0) & ~_busy(tx)
        if ready.any():
            fits = clock[..., None] + airtime <= slot_len + 1e-9
            # a packet that would cross the slot boundary is skipped for this period
            phase = np.where(ready & ~fits, DONE, phase)
            start = ready & fits
            phase = np.where(start, TX, phase)
            rem = np.where(start, airtime, rem)
            worst_interf = np.where(start, 0.0, worst_interf)
        tx = phase == TX
        if tx.any():
            current = np.einsum("ngk,gkm->ngm", tx.astype(float), interf)
            worst_interf = np.where(tx, np.maximum(worst_interf, current), worst_interf)

    successes = np.zeros(k, dtype=int)
    np.add.at(successes, idx[valid], success.sum(axis=0)[valid])
    return ReliabilityReport(successes, periods)
