"""Weighted-product scalarization of (accuracy, latency).

reward = ACC * (LAT/T)^w with w = alpha when LAT <= T, beta otherwise.
Hard mode (alpha, beta) = (0, -1) keeps the reward equal to ACC inside the
target and penalizes sharply beyond it; soft mode alpha = beta = -0.07
trades both sides smoothly so a single search covers a latency range.
The w = 0 case returns ACC through an explicit branch, never pow(x, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonPositiveLatency

DEFAULT_SOFT_EXPONENT = -0.07


@dataclass(frozen=True)
class RewardConfig:
    target_latency_ms: float
    alpha: float
    beta: float
    mode: str  # "hard" | "soft" | "custom"

    def __post_init__(self):
        if not self.target_latency_ms > 0:
            raise ValueError("target latency must be > 0")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("exponents must be finite")
        if self.alpha > 0 or self.beta > 0:
            raise ValueError("exponents must be <= 0")
        if self.mode == "hard" and (self.alpha, self.beta) != (0.0, -1.0):
            raise ValueError("hard mode requires (alpha, beta) = (0, -1)")
        if self.mode == "soft" and self.alpha != self.beta:
            raise ValueError("soft mode requires alpha == beta")
        if self.mode not in ("hard", "soft", "custom"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def hard(cls, target_latency_ms: float) -> "RewardConfig":
        return cls(target_latency_ms, 0.0, -1.0, "hard")

    @classmethod
    def soft(cls, target_latency_ms: float,
             exponent: float = DEFAULT_SOFT_EXPONENT) -> "RewardConfig":
        return cls(target_latency_ms, exponent, exponent, "soft")

    @classmethod
    def custom(cls, target_latency_ms: float, alpha: float, beta: float) -> "RewardConfig":
        return cls(target_latency_ms, alpha, beta, "custom")


@dataclass(frozen=True)
class Measurement:
    accuracy: float
    latency_ms: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if not self.latency_ms > 0:
            raise NonPositiveLatency(f"latency {self.latency_ms} must be > 0")


def reward(meas: Measurement, cfg: RewardConfig) -> float:
    w = cfg.alpha if meas.latency_ms <= cfg.target_latency_ms else cfg.beta
    if w == 0.0:
        return meas.accuracy
    return meas.accuracy * (meas.latency_ms / cfg.target_latency_ms) ** w


def calibrate_exponent(accuracy_gain_per_doubling: float) -> float:
    """Exponent such that doubling latency divides the reward by
    (1 + gain): the inverse of the rule of thumb that doubling/halving
    latency is worth about that much accuracy. gain=0.05 gives ~ -0.0704."""
    g = accuracy_gain_per_doubling
    if not 0.0 < g < 1.0:
        raise ValueError("gain must be in (0, 1)")
    return -math.log2(1.0 + g)


def reward_sweep(accuracy: float, cfg: RewardConfig,
                 latencies_ms: list[float]) -> list[tuple[float, float]]:
    """(latency, reward) rows for plotting the objective shape."""
    return [(lat, reward(Measurement(accuracy, lat), cfg)) for lat in latencies_ms]
