"""Geographical-detector statistics for stratified spatial heterogeneity.

The q-statistic of a stratification is one minus the ratio of pooled
within-stratum variance to total variance (population variances):

    q = 1 - sum_h N_h sigma_h^2 / (N sigma^2) = 1 - SSW / SST,  q in [0, 1].

Significance comes from a seeded permutation test on the stratum labels.
Interaction detection computes q on the cross-partition of two factors and
classifies it against the single-factor values; refining a partition never
lowers q, so crossing real partitions can only weaken via the classifier
when q values come from elsewhere. Continuous drivers are discretized by a
q-maximizing search over classification methods and stratum counts. Risk
and ecological detectors compare stratum means (Welch t) and within-stratum
variance sums (F ratio).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, DegenerateError
from .jenks import assign_classes, natural_breaks

#: Equality tolerance when classifying interaction q values.
INTERACTION_TOL = 1e-9

#: Discretization methods in default search order.
DISCRETIZE_METHODS = ("equal_interval", "quantile", "natural_breaks",
                      "geometric", "std_dev")

INTERACTION_TYPES = ("nonlinear_weaken", "single_weaken", "bi_enhance",
                     "independent", "nonlinear_enhance")


@dataclass
class StrataPartition:
    """A labelled stratification of the regions for one factor."""

    factor_id: str
    labels: np.ndarray  # per-region stratum codes 0..L-1
    n_strata: int
    method: str  # equal_interval | quantile | natural_breaks | geometric | std_dev | supplied
    breaks: list[float] | None = None


@dataclass
class PermutationTest:
    """Permutation significance of an observed q value."""

    p_value: float
    observed_q: float
    n_greater_equal: int
    permutations: int
    seed: int


@dataclass
class InteractionResult:
    """Crossed-factor q and its class relative to the single-factor values."""

    q_a: float
    q_b: float
    q_ab: float
    interaction_type: str
    boundary: bool = False  # q_ab equals max(q_a, q_b) within tolerance


@dataclass
class RiskResult:
    """Per-stratum means plus pairwise Welch-t difference flags at alpha."""

    strata: list[int]
    counts: list[int]
    means: list[float]
    pairs: list[dict] = field(default_factory=list)


@dataclass
class EcologicalResult:
    """F-ratio comparison of two factors' within-stratum variance sums."""

    f_stat: float
    p_value: float
    significant: bool


def _codes(strata) -> np.ndarray:
    labels = np.asarray(strata)
    _, codes = np.unique(labels, return_inverse=True)
    return codes


def factor_q(y, strata) -> float:
    """q-statistic of a stratification: 1 - SSW/SST with population variances.

    A single all-encompassing stratum gives exactly 0; strata that each hold
    constant values give exactly 1. Zero total variance is an error.
    """
    y = np.asarray(y, dtype=float)
    codes = _codes(strata)
    if y.size != codes.size:
        raise DataError("outcome and strata lengths differ")
    if y.size < 2:
        raise DataError(f"q needs >= 2 observations, got {y.size}")
    centered = y - y.mean()  # centring cancels nothing but kills rounding blowup
    sst = float(np.sum(centered * centered))
    if sst <= 0:
        raise DegenerateError("outcome has zero total variance; q undefined")
    n_strata = int(codes.max()) + 1
    counts = np.bincount(codes, minlength=n_strata).astype(float)
    sums = np.bincount(codes, weights=centered, minlength=n_strata)
    ssw = sst - float(np.sum(sums * sums / counts))
    return 1.0 - ssw / sst


def significance(y, strata, permutations: int = 999, seed: int = 0) -> PermutationTest:
    """Permutation p-value for q: labels shuffled, outcome fixed.

    p = (1 + #{q_perm >= q_obs}) / (permutations + 1). Each replicate draws
    from its own RNG stream spawned from (seed, replicate), so the result
    does not depend on evaluation order.
    """
    if permutations < 99:
        raise DataError(f"need >= 99 permutations, got {permutations}")
    if seed < 0:
        raise DataError("seed must be non-negative")
    y = np.asarray(y, dtype=float)
    codes = _codes(strata)
    observed = factor_q(y, codes)
    exceed = 0
    for rep in range(permutations):
        rng = np.random.default_rng([seed, rep])
        if factor_q(y, codes[rng.permutation(codes.size)]) >= observed:
            exceed += 1
    p = (1 + exceed) / (permutations + 1)
    return PermutationTest(p_value=p, observed_q=observed, n_greater_equal=exceed,
                           permutations=permutations, seed=seed)


def cross_strata(strata_a, strata_b) -> np.ndarray:
    """Labels of the cross-partition; only occupied (a, b) combinations count."""
    codes_a = _codes(strata_a)
    codes_b = _codes(strata_b)
    if codes_a.size != codes_b.size:
        raise DataError("partitions cover different numbers of observations")
    combined = codes_a * (int(codes_b.max()) + 1) + codes_b
    return _codes(combined)


def classify_interaction(q_a: float, q_b: float, q_ab: float,
                         tol: float = INTERACTION_TOL) -> tuple[str, bool]:
    """Interaction class of a (q_a, q_b, q_ab) triple.

    Returns (type, boundary). Checked in order: independence against
    q_a + q_b, nonlinear enhancement above the sum, equality with
    max(q_a, q_b) (classified bi_enhance with the boundary flag set),
    weakening below min or between min and max, two-factor enhancement
    otherwise.
    """
    q_min, q_max = min(q_a, q_b), max(q_a, q_b)
    if abs(q_ab - (q_a + q_b)) <= tol:
        return "independent", False
    if q_ab > q_a + q_b:
        return "nonlinear_enhance", False
    if abs(q_ab - q_max) <= tol:
        return "bi_enhance", True
    if q_ab < q_min:
        return "nonlinear_weaken", False
    if q_ab < q_max:
        return "single_weaken", False
    return "bi_enhance", False


def interaction(y, strata_a, strata_b) -> InteractionResult:
    """Crossed q of two stratifications plus its enhancement class."""
    q_a = factor_q(y, strata_a)
    q_b = factor_q(y, strata_b)
    crossed = cross_strata(strata_a, strata_b)
    if int(crossed.max()) + 1 < 2:
        raise DataError("cross-partition has fewer than 2 occupied strata")
    q_ab = factor_q(y, crossed)
    kind, boundary = classify_interaction(q_a, q_b, q_ab)
    return InteractionResult(q_a=q_a, q_b=q_b, q_ab=q_ab,
                             interaction_type=kind, boundary=boundary)


def _method_cuts(x: np.ndarray, method: str, levels: int) -> np.ndarray | None:
    """Interior cut points for one (method, L) candidate; None if inapplicable."""
    lo, hi = float(x.min()), float(x.max())
    if method == "equal_interval":
        return np.linspace(lo, hi, levels + 1)[1:-1]
    if method == "quantile":
        return np.quantile(x, np.arange(1, levels) / levels)
    if method == "natural_breaks":
        if np.unique(x).size < levels:
            return None
        return natural_breaks(x, levels)[:-1]
    if method == "geometric":
        if lo <= 0:
            return None  # geometric progression needs positive data
        ratio = (hi / lo) ** (1.0 / levels)
        return lo * ratio ** np.arange(1, levels)
    if method == "std_dev":
        mean, sd = float(x.mean()), float(x.std())
        if sd <= 0:
            return None
        offsets = np.arange(levels - 1) - (levels - 2) / 2.0
        return mean + offsets * sd
    raise DataError(f"unknown discretization method {method!r}")


def _labels_from_cuts(x: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Class codes from interior cut points, empty classes compacted away."""
    raw = np.searchsorted(np.unique(cuts), x, side="left")
    return _codes(raw)


def discretize_optimal(x, y, factor_id: str = "x",
                       methods=DISCRETIZE_METHODS,
                       l_range=range(3, 9)) -> tuple[StrataPartition, float]:
    """Search (method, stratum count) candidates and keep the q-maximizing one.

    Candidates whose binning collapses below two occupied strata are
    skipped. Ties break toward fewer strata, then toward the earlier method
    in ``methods``. Requires at least max(l_range) distinct driver values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    levels_list = sorted(set(int(l) for l in l_range))
    if not levels_list or levels_list[0] < 2:
        raise DataError("stratum counts must be >= 2")
    if np.unique(x).size < levels_list[-1]:
        raise DataError(
            f"driver has {np.unique(x).size} distinct values; "
            f"need >= {levels_list[-1]} for the requested search"
        )

    best: tuple[StrataPartition, float] | None = None
    for levels in levels_list:
        for method in methods:
            cuts = _method_cuts(x, method, levels)
            if cuts is None:
                continue
            labels = _labels_from_cuts(x, cuts)
            occupied = int(labels.max()) + 1
            if occupied < 2:
                continue
            q = factor_q(y, labels)
            if best is None or q > best[1]:
                partition = StrataPartition(factor_id=factor_id, labels=labels,
                                            n_strata=occupied, method=method,
                                            breaks=[float(c) for c in cuts])
                best = (partition, q)
    if best is None:
        raise DegenerateError("no discretization candidate produced >= 2 strata")
    return best


def risk_detector(y, strata, alpha: float = 0.05) -> RiskResult:
    """Stratum means with pairwise Welch two-sample t-tests.

    Pairs involving a singleton stratum are flagged untestable rather than
    failing. Two zero-variance strata differ significantly iff their means
    differ.
    """
    y = np.asarray(y, dtype=float)
    codes = _codes(strata)
    n_strata = int(codes.max()) + 1
    groups = [y[codes == h] for h in range(n_strata)]
    result = RiskResult(strata=list(range(n_strata)),
                        counts=[int(g.size) for g in groups],
                        means=[float(g.mean()) for g in groups])
    for a, b in itertools.combinations(range(n_strata), 2):
        ga, gb = groups[a], groups[b]
        entry = {"pair": (a, b), "testable": ga.size >= 2 and gb.size >= 2}
        if entry["testable"]:
            va = float(ga.var(ddof=1))
            vb = float(gb.var(ddof=1))
            diff = float(ga.mean() - gb.mean())
            denom_sq = va / ga.size + vb / gb.size
            if denom_sq == 0.0:
                t_stat = 0.0 if diff == 0.0 else np.inf * np.sign(diff)
                df = float(ga.size + gb.size - 2)
                p = 1.0 if diff == 0.0 else 0.0
            else:
                t_stat = diff / np.sqrt(denom_sq)
                df = denom_sq**2 / (
                    (va / ga.size) ** 2 / (ga.size - 1)
                    + (vb / gb.size) ** 2 / (gb.size - 1)
                )
                p = 2.0 * float(stats.t.sf(abs(t_stat), df))
            entry.update(t_stat=float(t_stat), df=float(df), p_value=p,
                         significant=p < alpha)
        result.pairs.append(entry)
    return result


def ecological_detector(y, strata_a, strata_b, alpha: float = 0.05) -> EcologicalResult:
    """Do two factors differ significantly in their within-stratum variance sums?

    F = SSW_A / SSW_B with (N-1, N-1) degrees of freedom, tested two-sided
    at alpha. Identical partitions give F = 1 and a false flag.
    """
    y = np.asarray(y, dtype=float)

    centered = y - y.mean()

    def ssw(strata) -> float:
        codes = _codes(strata)
        counts = np.bincount(codes).astype(float)
        sums = np.bincount(codes, weights=centered)
        return float(np.sum(centered * centered) - np.sum(sums * sums / counts))

    ssw_a, ssw_b = ssw(strata_a), ssw(strata_b)
    if ssw_b == 0.0 and ssw_a == 0.0:
        return EcologicalResult(f_stat=1.0, p_value=1.0, significant=False)
    if ssw_b == 0.0 or ssw_a == 0.0:
        return EcologicalResult(f_stat=float(np.inf if ssw_b == 0 else 0.0),
                                p_value=0.0, significant=True)
    f_stat = ssw_a / ssw_b
    df = y.size - 1
    cdf = float(stats.f.cdf(f_stat, df, df))
    p = 2.0 * min(cdf, 1.0 - cdf)
    return EcologicalResult(f_stat=f_stat, p_value=p, significant=p < alpha)
