"""Link-level radio model: path loss, short-packet decoding error, MCS choice."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from ..config import RadioConfig


class NoFeasibleMcs(ValueError):
    """Even the most robust MCS cannot fit the packet into one slot."""


def path_loss_db(distance, carrier: float = 5800.0):
    """Positive log-distance path loss in dB; ``carrier`` in MHz."""
    distance = np.asarray(distance, dtype=float)
    loss = 28.0 * np.log10(distance + 1.0) + 20.0 * math.log10(carrier) - 12.0
    return float(loss) if loss.ndim == 0 else loss


def detect_range(config: RadioConfig) -> float:
    """Distance at which inter-device path loss reaches ``s_max``."""
    excess = config.s_max - path_loss_db(0.0, config.carrier)
    if excess <= 0:
        return 0.0
    return 10.0 ** (excess / 28.0) - 1.0


def snr_linear(loss_db, config: RadioConfig):
    """Interference-free SNR for a link with the given path loss."""
    return 10.0 ** ((config.tx_power - np.asarray(loss_db, dtype=float) - config.noise_floor) / 10.0)


def decode_error(snr, duration, config: RadioConfig):
    """Normal-approximation block error probability of an L-bit packet.

    ``snr`` is linear, ``duration`` in seconds; both broadcast.
    """
    snr = np.asarray(snr, dtype=float)
    symbols = np.asarray(duration, dtype=float) * config.bandwidth
    dispersion = 1.0 - 1.0 / (1.0 + snr) ** 2
    num = -config.packet_bits * math.log(2.0) + symbols * np.log1p(snr)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = num / np.sqrt(symbols * dispersion)
    # dispersion -> 0 only as snr -> 0, where decoding surely fails
    arg = np.where(np.isnan(arg), -np.inf, arg)
    eps = ndtr(-arg)
    return float(eps) if eps.ndim == 0 else eps


def select_mcs(assoc_loss: float, config: RadioConfig) -> tuple[float, bool]:
    """Packet duration (s) of the fastest MCS meeting ``eps_max``.

    Returns ``(duration, marginal)``; ``marginal`` is set when no MCS meets the
    target and the most robust one is used anyway.
    """
    phi = float(snr_linear(assoc_loss, config))
    if phi <= 0:
        raise NoFeasibleMcs(f"no SNR margin at path loss {assoc_loss:.2f} dB")
    slot = config.slot_len * 1e-6
    durations = [config.packet_bits / (config.bandwidth * se) for se in config.mcs_se_grid]
    if durations[0] > slot:
        raise NoFeasibleMcs(f"slowest MCS needs {durations[0] * 1e6:.1f} us > slot {config.slot_len} us")
    for d in reversed(durations):
        if d <= slot and decode_error(phi, d, config) <= config.eps_max:
            return d, False
    return durations[0], True

