"""Goodness-of-fit statistics, intervals and fits shared by the labs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

# asymptotic 5% two-sided Kolmogorov critical constant
KS_CRITICAL_5PCT = 1.36


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n: int

    @property
    def scaled(self) -> float:
        """sqrt(n) * D, the quantity with the Kolmogorov limit law."""
        return math.sqrt(self.n) * self.statistic


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    pvalue: float
    dof: int
    observed: np.ndarray
    expected: np.ndarray


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def ks_statistic(samples, cdf) -> KSResult:
    """One-sample Kolmogorov-Smirnov distance against a model ``cdf``.

    ``cdf`` must accept a numpy array. The p-value is the Kolmogorov
    asymptotic tail ``P(K > sqrt(n) D)``.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if np.isnan(x).any():
        raise ValueError("samples contain NaN")
    n = x.size
    if n < 8:
        raise ValueError(f"need at least 8 samples, got {n}")
    f = np.asarray(cdf(x), dtype=np.float64)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    d = float(max(upper.max(), lower.max()))
    return KSResult(d, float(_sps.kstwobign.sf(math.sqrt(n) * d)), n)


def ks_distance_between(cdf_a, cdf_b, grid) -> float:
    """Sup distance between two distribution functions on ``grid``."""
    grid = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.abs(np.asarray(cdf_a(grid)) - np.asarray(cdf_b(grid)))))


def _merge_small(observed, expected, minimum):
    obs = list(observed)
    exp = list(expected)
    while len(exp) > 1 and exp[-1] < minimum:
        e, o = exp.pop(), obs.pop()
        exp[-1] += e
        obs[-1] += o
    while len(exp) > 1 and exp[0] < minimum:
        e, o = exp.pop(0), obs.pop(0)
        exp[0] += e
        obs[0] += o
    return np.asarray(obs, dtype=np.float64), np.asarray(exp, dtype=np.float64)


def chi2_gof(counts, pmf, min_expected: float = 5.0) -> Chi2Result:
    """Pearson chi-square test of category ``counts`` against ``pmf``.

    ``pmf`` gives the model probability of each category; any mass missing
    from ``sum(pmf)`` is added to the last category. Sparse categories are
    merged from both tails until every expected count reaches
    ``min_expected``. Categories with zero model probability are dropped
    when empty and give ``p = 0`` otherwise.
    """
    counts = np.asarray(counts, dtype=np.float64)
    pmf = np.asarray(pmf, dtype=np.float64).copy()
    if counts.shape != pmf.shape:
        raise ValueError("counts and pmf must have the same length")
    total = counts.sum()
    if total <= 0:
        raise ValueError("all counts are zero")
    pmf[-1] += max(0.0, 1.0 - pmf.sum())
    if np.any(counts[pmf == 0.0] > 0):
        return Chi2Result(math.inf, 0.0, int(np.sum(pmf > 0)) - 1, counts, total * pmf)
    keep = pmf > 0.0  # impossible categories with no observations carry no information
    obs, exp = _merge_small(counts[keep], total * pmf[keep], min_expected)
    if obs.size < 2:
        return Chi2Result(0.0, 1.0, 0, obs, exp)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return Chi2Result(stat, float(_sps.chi2.sf(stat, dof)), dof, obs, exp)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return centre - half, centre + half


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares ``y = slope * x + intercept`` with r^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def empirical_cdf(samples):
    """Right-continuous empirical d.f. as a callable."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size

    def cdf(t):
        return np.searchsorted(x, np.asarray(t, dtype=np.float64), side="right") / n

    return cdf


def empirical_quantile(samples, p):
    """Smallest sample value whose empirical d.f. is at least ``p``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    k = np.clip(np.ceil(np.asarray(p) * n).astype(int) - 1, 0, n - 1)
    return x[k]


def exponential_cdf(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t > 0, -np.expm1(-np.maximum(t, 0.0)), 0.0)


def poisson_pmf(k_max: int, rate: float = 1.0) -> np.ndarray:
    """Poisson probabilities of 0..k_max-1 with the upper tail folded into the last bin."""
    pmf = _sps.poisson.pmf(np.arange(k_max), rate)
    pmf[-1] += _sps.poisson.sf(k_max - 1, rate)
    return pmf


def block_bootstrap_se(block_sums, block_weights, n_boot: int, rng) -> float:
    """Standard error of ``sum(block_sums) / sum(block_weights)`` by resampling blocks.

    ``rng`` is a :class:`numpy.random.Generator`.
    """
    s = np.asarray(block_sums, dtype=np.float64)
    w = np.asarray(block_weights, dtype=np.float64)
    idx = rng.integers(0, s.size, size=(n_boot, s.size))
    boot = s[idx].sum(axis=1) / w[idx].sum(axis=1)
    return float(boot.std(ddof=1))
