"""Threshold parameterizations and limiting probabilities (natural logarithms)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

P_MAX = 0.5


class ClampWarning(UserWarning):
    """A threshold formula left [0, 1/2] and was clamped."""


@dataclass(frozen=True)
class ThresholdPoint:
    n: int
    c: float
    regime: str  # "weak" or "strong"
    p: float
    clamped: bool = False


def threshold_point(n: int, c: float, regime: str) -> ThresholdPoint:
    """Density at offset ``c`` of the weak or strong reconstructibility threshold.

    weak:   p = (ln n + ln ln n + c) / (2n)
    strong: p = (ln n + c) / n
    """
    if n < 3:
        raise ValueError(f"threshold formulas need n >= 3, got {n}")
    if regime == "weak":
        raw = (math.log(n) + math.log(math.log(n)) + c) / (2 * n)
    elif regime == "strong":
        raw = (math.log(n) + c) / n
    else:
        raise ValueError(f"unknown regime {regime!r}")
    p = min(max(raw, 0.0), P_MAX)
    clamped = p != raw
    if clamped:
        warnings.warn(f"{regime} threshold p={raw:.6g} at n={n}, c={c} clamped to {p}", ClampWarning, stacklevel=3)
    return ThresholdPoint(n, c, regime, p, clamped)


def p_weak(n: int, c: float) -> float:
    return threshold_point(n, c, "weak").p


def p_strong(n: int, c: float) -> float:
    return threshold_point(n, c, "strong").p


def limit_weak_reconstructible(c: float) -> float:
    """Limiting probability of reconstructibility at ``p = p_weak(n, c)``.

    Complement of the limiting probability of two or more isolated ones,
    whose count is asymptotically Poisson with mean ``e^{-c} / 2``.
    """
    lam = math.exp(-c) / 2
    return (1 + lam) * math.exp(-lam)


def limit_strong_reconstructible(c: float) -> float:
    """Limiting probability of no two equal rows and no two equal columns at ``p = p_strong(n, c)``."""
    lam = math.exp(-c)
    return ((1 + lam) * math.exp(-lam)) ** 2
