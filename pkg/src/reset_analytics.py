"""
Closed-form model of repeated active resets.

One reset = readout + conditional X. Tracking only whether the qubit is excited,
a reset is a two-state Markov chain:

    from |1>: stays |1> with p11 = e10 + (1 - e10) * ecx   (misread as 0, or the X fails)
    from |0>: goes to |1> with p01 = e01 * (1 - ecx)       (misread as 1 and the X fires)

The second branch re-excites grounded qubits and is why extra resets stop helping.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from config import config
from errors import AnalyticsError


@dataclass(frozen=True)
class ResetChannel:
    eps_read_1to0: float
    eps_read_0to1: float
    eps_condx: float
    k: int = 1

    def __post_init__(self):
        for name in ("eps_read_1to0", "eps_read_0to1", "eps_condx"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise AnalyticsError(f"{name}={p} outside [0, 1]")
        if self.k < 0:
            raise AnalyticsError(f"reset count must be >= 0, got {self.k}")

    @classmethod
    def defaults(cls, k: int = 1) -> "ResetChannel":
        return cls(config.eps_read, config.eps_read, config.eps_condx, k)

    @classmethod
    def from_noise(cls, noise, k: int = 1, qubit: int = 0) -> "ResetChannel":
        """Channel seen by one qubit of a sim_engine NoiseModel."""
        def pick(name: str) -> float:
            return float(noise.per_qubit(name, qubit + 1)[qubit])
        return cls(pick("eps_read_1to0"), pick("eps_read_0to1"), pick("eps_condx"), k)

    def with_k(self, k: int) -> "ResetChannel":
        return replace(self, k=k)


def transition_probabilities(ch: ResetChannel) -> Tuple[float, float]:
    """(p11, p01) of one reset."""
    p11 = ch.eps_read_1to0 + (1.0 - ch.eps_read_1to0) * ch.eps_condx
    p01 = ch.eps_read_0to1 * (1.0 - ch.eps_condx)
    return p11, p01


def effective_reset_fidelity(ch: ResetChannel) -> float:
    """P(|0> after one reset | |1> before) = (1 - e10)(1 - ecx)."""
    if ch.k != 1:
        raise AnalyticsError(f"effective_reset_fidelity is defined for k=1, got k={ch.k}; use residual_after_k")
    return 1.0 - residual_after_k(ch)


def _step(p1: float, p11: float, p01: float) -> float:
    return p1 * p11 + (1.0 - p1) * p01


def residual_after_k(ch: ResetChannel) -> float:
    """P(|1>) after ch.k resets of a qubit that started in |1>."""
    if ch.k < 1:
        raise AnalyticsError(f"residual_after_k needs k >= 1, got {ch.k}")
    p11, p01 = transition_probabilities(ch)
    p1 = 1.0
    for _ in range(ch.k):
        p1 = _step(p1, p11, p01)
    return p1


def reset_curve(ch: ResetChannel, k_max: int) -> List[float]:
    """Residual excitation after 1..k_max resets."""
    if k_max < 1:
        raise AnalyticsError("k_max must be >= 1")
    p11, p01 = transition_probabilities(ch)
    curve, p1 = [], 1.0
    for _ in range(k_max):
        p1 = _step(p1, p11, p01)
        curve.append(p1)
    return curve


def stationary_excitation(ch: ResetChannel) -> float:
    """Fixed point of the chain: the excitation no number of resets gets below."""
    p11, p01 = transition_probabilities(ch)
    leave = (1.0 - p11) + p01
    if leave == 0.0:
        return 1.0  # p11 = 1 and p01 = 0: the qubit never leaves |1>
    return p01 / leave


def resets_for_target(ch: ResetChannel, target: float, k_max: int = 64) -> Optional[int]:
    """Smallest k whose residual is <= target, or None within k_max resets."""
    for k, p1 in enumerate(reset_curve(ch, k_max), start=1):
        if p1 <= target:
            return k
    return None


def readout_curve(ch: ResetChannel, k: int) -> List[float]:
    """Expected P(bit i == 1) for the reset-test circuit (X, then k readout + CondX rounds).

    Bit i is read inside reset i, before its conditional X, so it sees the residual
    after i resets through the readout channel.
    """
    if k < 1:
        raise AnalyticsError("k must be >= 1")
    p11, p01 = transition_probabilities(ch)
    bits, p1 = [], 1.0
    for _ in range(k):
        bits.append(p1 * (1.0 - ch.eps_read_1to0) + (1.0 - p1) * ch.eps_read_0to1)
        p1 = _step(p1, p11, p01)
    return bits
