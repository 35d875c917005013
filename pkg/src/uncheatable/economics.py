"""Deterrence economics for rational cheaters and the supervisor's budget.

Symbols follow common usage for this model:

* ``B`` net benefit of doing a task honestly (assumed positive)
* ``U`` net utility of an undetected cheat
* ``C`` cost of being caught
* ``P`` probability a cheat is caught
* ``L`` loss when a task is not done, ``S`` cost to ship one copy of a task
* ``G`` bound on the fraction of non-colluding participants
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence


class Undeterrable(ValueError):
    """``U + C = 0`` with ``B < U``: no catch probability deters the cheat."""


@dataclass(frozen=True)
class EconParams:
    B: float
    U: float
    C: float = 0.0
    P: float = 0.0
    L: float = 0.0
    S: float = 0.0
    G: float = 1.0

    def __post_init__(self) -> None:
        if not self.B > 0:
            raise ValueError("B must be positive")
        if self.C < 0:
            raise ValueError("C must be non-negative")
        if not 0 <= self.P <= 1:
            raise ValueError("P must lie in [0, 1]")
        if not 0 < self.G <= 1:
            raise ValueError("G must lie in (0, 1]")


def cooperation_preferred(B: float, U: float, C: float, P: float) -> bool:
    """True iff ``B > U(1-P) - CP``; a tie counts as cheating."""
    return B > U * (1 - P) - C * P


def deterrence_threshold(B: float, U: float, C: float) -> float:
    """Catch probability that must be exceeded to make cheating irrational.

    ``max(0, (U - B) / (U + C))``.  Raises :class:`Undeterrable` when
    ``B < U`` and ``U + C = 0``.
    """
    zero = abs(U - B) * 0  # keeps Fraction inputs exact
    if B >= U:
        return zero
    if U + C <= 0:
        raise Undeterrable(f"B={B} < U={U} but U + C = {U + C}")
    return max(zero, (U - B) / (U + C))


@dataclass(frozen=True)
class UtilityDistribution:
    """Empirical step CDF for U, as sorted ``(value, cumulative probability)`` points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pts = tuple((float(v), float(c)) for v, c in self.points)
        if not pts:
            raise ValueError("need at least one CDF point")
        values = [v for v, _ in pts]
        cums = [c for _, c in pts]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("CDF values must be strictly increasing")
        if any(b < a for a, b in zip(cums, cums[1:])) or cums[0] < 0:
            raise ValueError("cumulative probabilities must be non-decreasing from 0")
        if not math.isclose(cums[-1], 1.0, abs_tol=1e-9):
            raise ValueError("cumulative probabilities must end at 1")
        pts = pts[:-1] + ((pts[-1][0], 1.0),)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_samples(cls, masses: Sequence[tuple[float, float]]) -> UtilityDistribution:
        """Build from ``(value, point mass)`` pairs."""
        acc, pts = 0.0, []
        for v, m in sorted(masses):
            acc += m
            pts.append((v, acc))
        return cls(tuple(pts))

    def cdf(self, x: float) -> float:
        """``Pr[U <= x]``."""
        i = bisect.bisect_right([v for v, _ in self.points], x)
        return self.points[i - 1][1] if i else 0.0

    def prob_at_least(self, x: float) -> float:
        """``Pr[U >= x] = 1 - CDF(x-)``."""
        i = bisect.bisect_left([v for v, _ in self.points], x)
        below = self.points[i - 1][1] if i else 0.0
        return max(0.0, 1.0 - below)


ReplicationFn = Callable[[float], float]


def default_replication(G: float = 1.0) -> ReplicationFn:
    """Expected duplicates per task needed to reach catch rate P: ``P / G``."""
    return lambda P: P / G


def balance_residual(P: float, L: float, S: float, B: float, C: float,
                     dist: UtilityDistribution, r: ReplicationFn) -> float:
    """``L * Pr[U >= (B + CP)/(1 - P)] - (1 + r(P)) * S``."""
    if not 0 <= P < 1:
        raise ValueError("P must lie in [0, 1)")
    threshold = (B + C * P) / (1 - P)
    return L * dist.prob_at_least(threshold) - (1 + r(P)) * S


@dataclass(frozen=True)
class BalancePoint:
    P: float
    residual: float
    step_boundary: bool


def solve_balance(L: float, S: float, B: float, C: float, dist: UtilityDistribution,
                  r: ReplicationFn, tolerance: float = 1e-9, eps: float = 1e-9) -> BalancePoint | None:
    """Bisect ``[0, 1 - eps]`` for a sign change of :func:`balance_residual`.

    Returns ``None`` when the residual has the same sign at both ends.  When
    the residual jumps across zero at a CDF step rather than passing through
    it, the bracket midpoint is returned with ``step_boundary=True``.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")

    def f(p: float) -> float:
        return balance_residual(p, L, S, B, C, dist, r)

    lo, hi = 0.0, 1.0 - eps
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return BalancePoint(lo, 0.0, False)
    if f_hi == 0:
        return BalancePoint(hi, 0.0, False)
    if (f_lo > 0) == (f_hi > 0):
        return None
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        f_mid = f(mid)
        if f_mid == 0:
            return BalancePoint(mid, 0.0, False)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    mid = (lo + hi) / 2
    f_mid = f(mid)
    # a continuous crossing leaves both bracket ends near zero; a CDF step does not
    scale = 1e-6 * (abs(L) + abs(S) + 1)
    return BalancePoint(mid, f_mid, min(abs(f_lo), abs(f_hi)) > scale)


def sybil_replication_prob(t: int, P: float, G: float, ramp: int = 20) -> float:
    """Duplication probability for a user with ``t`` completed tasks: ``max(1 - t/ramp, P/G)``."""
    if not G > 0:
        raise ValueError("G must be positive")
    if P > G:
        raise ValueError(f"P ({P}) must not exceed G ({G})")
    if ramp < 1:
        raise ValueError("ramp must be a positive integer")
    if t < 0:
        raise ValueError("completed task count must be non-negative")
    floor = P / G
    fresh = 1 - (Fraction(t, ramp) if isinstance(floor, Fraction) else t / ramp)
    return max(fresh, floor)


def repeated_catch_probability(P: float, k: int) -> float:
    """Chance that at least one of ``k`` independent cheats is caught."""
    if not 0 <= P <= 1:
        raise ValueError("P must lie in [0, 1]")
    if k < 0:
        raise ValueError("k must be non-negative")
    return 1 - (1 - P) ** k
