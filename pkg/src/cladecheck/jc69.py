"""Jukes-Cantor substitution model: closed-form transition probabilities and
the paired mismatch/distance helpers used as optimization oracles.

States are A=0, C=1, G=2, T=3 with uniform equilibrium frequencies 1/4.
Branch lengths are expected substitutions per site.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NUCLEOTIDES",
    "transition_prob",
    "transition_matrix",
    "expected_mismatch",
    "jc_distance",
]

NUCLEOTIDES = "ACGT"


def _check_length(v: float, name: str = "branch length") -> float:
    v = float(v)
    if not math.isfinite(v) or v < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
    return v


def transition_prob(i: int, j: int, v: float) -> float:
    """P(state j at the far end | state i, branch length v)."""
    v = _check_length(v)
    if not (0 <= i < 4 and 0 <= j < 4):
        raise ValueError("nucleotide states are 0..3")
    x = math.exp(-4.0 * v / 3.0)
    if i == j:
        return 0.25 + 0.75 * x
    return 0.25 - 0.25 * x


def transition_matrix(v: float) -> np.ndarray:
    """4x4 transition probability matrix for branch length v."""
    v = _check_length(v)
    x = math.exp(-4.0 * v / 3.0)
    off = 0.25 - 0.25 * x
    mat = np.full((4, 4), off)
    np.fill_diagonal(mat, 0.25 + 0.75 * x)
    return mat


def expected_mismatch(d: float) -> float:
    """Probability that the two ends of a path of length d hold different
    states: 3/4 * (1 - exp(-4d/3))."""
    d = _check_length(d, "distance")
    return 0.75 * (1.0 - math.exp(-4.0 * d / 3.0))


def jc_distance(p: float) -> float:
    """Inverse of expected_mismatch: the distance whose expected mismatch
    fraction is p.  Undefined at saturation (p >= 3/4)."""
    p = float(p)
    if p < 0:
        raise ValueError(f"mismatch fraction must be >= 0, got {p!r}")
    if p >= 0.75:
        raise ValueError(f"mismatch fraction {p!r} is saturated; distance undefined")
    return -0.75 * math.log1p(-4.0 * p / 3.0)
