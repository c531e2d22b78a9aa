"""Small statistical helpers shared by the Monte Carlo modules."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def wilson_interval(successes: int, n: int, z: float = 3.0) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, centre - half), min(1.0, centre + half))


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return (float(x.mean()) if len(x) else 0.0, 0.0)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def within_sigma(estimate: float, target: float, se: float, k: float = 3.0) -> bool:
    return abs(estimate - target) <= k * se + 1e-15


def chisquare_two_sample(a, b) -> float:
    """p-value of the chi-square homogeneity test on two histograms.

    Bins that are empty in both histograms are dropped.
    """
    table = np.vstack([np.asarray(a, float), np.asarray(b, float)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False)[1])


def chisquare_gof(observed, expected_probs) -> float:
    observed = np.asarray(observed, float)
    p = np.asarray(expected_probs, float)
    expected = p / p.sum() * observed.sum()
    keep = expected > 0
    return float(stats.chisquare(observed[keep], expected[keep])[1])
