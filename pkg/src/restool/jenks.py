"""Fisher-Jenks natural breaks by exact dynamic programming.

Minimizes the total within-class sum of squared deviations over all
partitions of the sorted data into k contiguous classes. The DP runs on
the distinct values with multiplicity weights, which keeps tied values in
a single class (boundary ties fall into the lower class) and guarantees
every class is nonempty. Exact, O(k * m^2) for m distinct values.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateError


def natural_breaks(values, k: int) -> np.ndarray:
    """Return the k class upper bounds of the optimal partition.

    ``breaks[i]`` is the largest value of class i; ``breaks[k-1]`` equals
    ``max(values)``. Raises DegenerateError when the data has fewer than k
    distinct values.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DegenerateError("natural_breaks needs a nonempty 1-d array")
    distinct, counts = np.unique(x, return_counts=True)
    m = distinct.size
    if k < 1:
        raise DegenerateError(f"class count must be >= 1, got {k}")
    if m < k:
        raise DegenerateError(f"{m} distinct values cannot fill {k} classes")

    # Weighted prefix sums over distinct values.
    c = counts.astype(float)
    cw = np.concatenate(([0.0], np.cumsum(c)))
    sw = np.concatenate(([0.0], np.cumsum(c * distinct)))
    ssw = np.concatenate(([0.0], np.cumsum(c * distinct**2)))

    def block_cost(lo: int, hi: int) -> float:
        # Within-class SSD of distinct indices lo..hi-1 (half-open).
        n = cw[hi] - cw[lo]
        s = sw[hi] - sw[lo]
        return (ssw[hi] - ssw[lo]) - s * s / n

    best = np.full((k + 1, m + 1), np.inf)
    cut = np.zeros((k + 1, m + 1), dtype=int)
    best[0, 0] = 0.0
    for j in range(1, k + 1):
        for i in range(j, m - (k - j) + 1):
            for p in range(j - 1, i):
                cand = best[j - 1, p] + block_cost(p, i)
                if cand < best[j, i]:
                    best[j, i] = cand
                    cut[j, i] = p

    bounds = np.empty(k, dtype=float)
    i = m
    for j in range(k, 0, -1):
        bounds[j - 1] = distinct[i - 1]
        i = cut[j, i]
    return bounds


def assign_classes(values, breaks) -> np.ndarray:
    """Map values to 0-based class indices given class upper bounds.

    A value equal to a class's upper bound belongs to that class, so
    boundary ties break toward the lower class.
    """
    x = np.asarray(values, dtype=float)
    cuts = np.asarray(breaks, dtype=float)[:-1]
    return np.searchsorted(cuts, x, side="left")


def within_class_ssd(values, labels) -> float:
    """Total within-class sum of squared deviations of a labeled partition."""
    x = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    total = 0.0
    for lab in np.unique(labels):
        grp = x[labels == lab]
        total += float(np.sum((grp - grp.mean()) ** 2))
    return total
