"""Log-scale reward combining slot count and per-STA reliability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..wifi.csma import ReliabilityReport

REWARD_FLOOR = 1e-12


@dataclass(frozen=True)
class RewardRecord:
    reward: float
    z_star: int
    z_used: int
    min_reliability: float
    violations: int


def reward_value(reliability, z_used: int, z_star: int, target: float,
                 floor: float = REWARD_FLOOR) -> float:
    if z_used < 1 or z_star < 1:
        raise ValueError("slot counts must be >= 1")
    r = np.asarray(reliability, dtype=float)
    ratio = z_star / z_used
    if np.all(r >= target):
        return math.log(ratio)
    inner = min(ratio, 1.0) * float(np.mean(np.minimum(r / target, 1.0)))
    return math.log(max(inner, floor))


def reward(report: ReliabilityReport, z_used: int, z_star: int, target: float,
           floor: float = REWARD_FLOOR) -> RewardRecord:
    r = report.reliability
    return RewardRecord(reward_value(r, z_used, z_star, target, floor), int(z_star), int(z_used),
                        float(r.min()) if len(r) else 1.0, report.violations(target))
