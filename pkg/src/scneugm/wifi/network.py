"""Random IIoT Wi-Fi topologies and the quantities measured on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..config import RadioConfig
from ..rng import stream
from .radio import NoFeasibleMcs, decode_error, detect_range, path_loss_db, snr_linear

MAX_REDRAWS = 1000


class TopologyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Network:
    ap_positions: np.ndarray  # (A, 2) m
    sta_positions: np.ndarray  # (K, 2) m
    pathloss: np.ndarray  # (K, A) dB
    assoc_ap: np.ndarray  # (K,)
    packet_duration: np.ndarray  # (K,) s
    marginal: np.ndarray  # (K,) no MCS met eps_max

    @property
    def num_stas(self) -> int:
        return len(self.sta_positions)

    @property
    def assoc_loss(self) -> np.ndarray:
        return self.pathloss[np.arange(self.num_stas), self.assoc_ap]

    def subset(self, stas) -> "Network":
        """Network restricted to the given STAs (APs unchanged)."""
        idx = np.asarray(stas, dtype=int)
        return Network(self.ap_positions, self.sta_positions[idx], self.pathloss[idx],
                       self.assoc_ap[idx], self.packet_duration[idx], self.marginal[idx])

    def sta_distances(self) -> np.ndarray:
        diff = self.sta_positions[:, None, :] - self.sta_positions[None, :, :]
        return np.sqrt((diff ** 2).sum(-1))


@dataclass(frozen=True, eq=False)
class StationState:
    """One STA's detectable APs as (path loss dB, ap x, ap y) rows, loss ascending."""

    entries: np.ndarray  # (n, 3)
    ap_index: np.ndarray  # (n,)

    def __post_init__(self):
        if len(self.entries) == 0:
            raise ValueError("a station state needs at least one detectable AP")
        if np.any(np.diff(self.entries[:, 0]) < 0):
            raise ValueError("station state must be sorted by ascending path loss")

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class PairIndicators:
    contending: np.ndarray  # (K, K) bool
    hidden: np.ndarray  # (K, K) bool

    @property
    def either(self) -> np.ndarray:
        return self.contending | self.hidden


@dataclass(frozen=True, eq=False)
class SlotAssignment:
    slot_of: np.ndarray  # (K,) values in 1..num_slots
    num_slots: int

    def __post_init__(self):
        if len(self.slot_of) and (self.slot_of.min() < 1 or self.slot_of.max() > self.num_slots):
            raise ValueError("slot indices must lie in 1..num_slots")


def ap_grid(config: RadioConfig) -> np.ndarray:
    """AP coordinates on a square grid; AP (x, y) sits at index x * side + y."""
    side = math.isqrt(config.num_aps)
    spacing = config.area_side / side
    ticks = spacing / 2 + spacing * np.arange(side)
    xs, ys = np.meshgrid(ticks, ticks, indexing="ij")
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def packet_durations(assoc_loss: np.ndarray, config: RadioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised MCS choice: (durations in s, marginal flags) per STA."""
    ses = np.asarray(config.mcs_se_grid)
    durations = config.packet_bits / (config.bandwidth * ses)  # (S,) slowest first
    slot = config.slot_len * 1e-6
    phi = snr_linear(assoc_loss, config)[:, None]
    ok = (decode_error(phi, durations[None, :], config) <= config.eps_max) & (durations <= slot)
    any_ok = ok.any(axis=1)
    # highest qualifying SE = last True column
    best = len(ses) - 1 - np.argmax(ok[:, ::-1], axis=1)
    chosen = np.where(any_ok, durations[best], durations[0])
    return chosen, ~any_ok


def from_positions(sta_positions: np.ndarray, config: RadioConfig) -> Network:
    aps = ap_grid(config)
    sta_positions = np.asarray(sta_positions, dtype=float).reshape(-1, 2)
    dist = np.sqrt(((sta_positions[:, None, :] - aps[None, :, :]) ** 2).sum(-1))
    loss = path_loss_db(dist, config.carrier).reshape(len(sta_positions), len(aps))
    assoc = np.argmin(loss, axis=1)
    assoc_loss = loss[np.arange(len(sta_positions)), assoc]
    if np.any(assoc_loss > config.s_max):
        raise TopologyError("a STA has no AP within receiver sensitivity")
    if config.packet_bits / (config.bandwidth * config.mcs_se_grid[0]) > config.slot_len * 1e-6:
        raise NoFeasibleMcs("the most robust MCS cannot fit a packet into one slot")
    durations, marginal = packet_durations(assoc_loss, config)
    return Network(aps, sta_positions, loss, assoc, durations, marginal)


def _detectable(points: np.ndarray, aps: np.ndarray, config: RadioConfig) -> np.ndarray:
    dist = np.sqrt(((points[:, None, :] - aps[None, :, :]) ** 2).sum(-1))
    return path_loss_db(dist, config.carrier).reshape(len(points), -1).min(axis=1) <= config.s_max


def generate_network(config: RadioConfig, seed: int, num_stas: int | None = None) -> Network:
    """Uniformly placed STAs; positions no AP can hear are re-drawn."""
    rng = stream(seed, "topology")
    k = config.num_stas if num_stas is None else num_stas
    aps = ap_grid(config)
    pos = rng.uniform(0.0, config.area_side, size=(k, 2))
    bad = ~_detectable(pos, aps, config)
    for _ in range(MAX_REDRAWS):
        if not bad.any():
            break
        pos[bad] = rng.uniform(0.0, config.area_side, size=(int(bad.sum()), 2))
        bad = ~_detectable(pos, aps, config)
    else:
        raise TopologyError(f"{int(bad.sum())} STAs still undetectable after {MAX_REDRAWS} re-draws")
    return from_positions(pos, config)


def measure_states(network: Network, config: RadioConfig) -> list[StationState]:
    states = []
    for k in range(network.num_stas):
        row = network.pathloss[k]
        idx = np.flatnonzero(row <= config.s_max)
        idx = idx[np.argsort(row[idx], kind="stable")]
        entries = np.column_stack([row[idx], network.ap_positions[idx]])
        states.append(StationState(entries, idx))
    return states


def pair_indicators(network: Network, config: RadioConfig) -> PairIndicators:
    """Contending (within detect range) and hidden (out of range, audible at the AP) pairs.

    Entry ``[i, j]`` describes the effect of STA i on STA j.
    """
    dist = network.sta_distances()
    reach = detect_range(config)
    off_diag = ~np.eye(network.num_stas, dtype=bool)
    contending = (dist <= reach) & off_diag
    # s_{i, a_j}: loss from STA i to the AP STA j is associated with
    cross = network.pathloss[:, network.assoc_ap]
    hidden = (dist > reach) & (cross <= config.s_max) & off_diag
    return PairIndicators(contending, hidden)


def move_stations(network: Network, dt: float, speeds: np.ndarray, headings: np.ndarray,
                  seed: int, config: RadioConfig) -> tuple[Network, np.ndarray]:
    """Advance STAs along their headings for ``dt`` seconds.

    A STA leaving the area is put on the boundary and given a fresh heading that
    points back inside. Returns the moved network and the updated headings.
    """
    speeds = np.asarray(speeds, dtype=float)
    if np.any((speeds < 0) | (speeds > 5.0 + 1e-12)):
        raise ValueError("speeds must lie in [0, 5] m/s")
    headings = np.array(headings, dtype=float)
    if dt == 0 or not np.any(speeds > 0):
        return from_positions(network.sta_positions.copy(), config), headings
    rng = stream(seed, "mobility")
    step = speeds[:, None] * dt * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    pos = network.sta_positions + step
    side = config.area_side
    out = np.any((pos < 0) | (pos > side), axis=1)
    pos = np.clip(pos, 0.0, side)
    for k in np.flatnonzero(out):
        headings[k] = _inward_heading(pos[k], side, rng)
    return from_positions(pos, config), headings


def _inward_heading(p: np.ndarray, side: float, rng: np.random.Generator) -> float:
    # rejection: a direction whose small step stays inside the square
    for _ in range(1000):
        h = rng.uniform(0.0, 2 * math.pi)
        probe = p + 1e-6 * side * np.array([math.cos(h), math.sin(h)])
        if np.all((probe > 0) & (probe < side)):
            return h
    return math.atan2(side / 2 - p[1], side / 2 - p[0])
