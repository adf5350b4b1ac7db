"""Rare event point process: exceedance counts on the rescaled time axis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from ._core import kernels
from .dynamics import MapSpec
from .evl import INIT_DRAWS, LevelEntry, _cells, sample_initial
from .grid import GridKernel, StationaryDensity, _mask
from .noise import NoiseSpec, pack_model
from .stats import chi2_gof, exponential_cdf, ks_statistic, poisson_pmf
from .stream import derive_stream_id, trial_stream_ids

ALPHA = 0.01
MIN_WINDOWS = 200
MIN_GAPS = 500


@dataclass(frozen=True)
class ExceedanceSeries:
    """Exceedance times of one trajectory of ``horizon`` steps (times 0..horizon-1)."""

    event_times: np.ndarray
    v_n: float
    horizon: int

    def __post_init__(self):
        t = np.asarray(self.event_times, dtype=np.int64)
        object.__setattr__(self, "event_times", t)
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > self.horizon):
            raise ValueError("event times must be strictly increasing inside [0, horizon]")
        if not self.v_n > 1.0:
            raise ValueError("v_n must exceed 1")

    @property
    def windows(self) -> int:
        return int(math.floor(self.horizon / self.v_n))

    def count_between(self, start: int, stop: int) -> int:
        """Number of exceedances at integer times in ``[start, stop)``."""
        t = self.event_times
        return int(np.searchsorted(t, stop, side="left") - np.searchsorted(t, start, side="left"))


def exceedance_series(spec: MapSpec, noise: NoiseSpec, K: GridKernel, density: StationaryDensity,
                      entry: LevelEntry, horizon: int, seed: int, trajectory: int = 0,
                      label: str = "repp") -> ExceedanceSeries:
    """Simulate one stationary trajectory and record the times with ``X_j > u_n``."""
    streams = trial_stream_ids(derive_stream_id(label, entry.n, entry.tau, entry.zeta), trajectory + 1)
    streams = streams[trajectory:]
    x0 = sample_initial(K, density, seed, streams)
    _, times = kernels.exceedance_times(pack_model(spec, noise), x0, seed, streams, INIT_DRAWS,
                                        horizon, entry.zeta, entry.radius)
    return ExceedanceSeries(times, 1.0 / entry.mass, horizon)


def build_repp(series: ExceedanceSeries) -> np.ndarray:
    """Counts in the consecutive unit windows ``[a v_n, (a+1) v_n)`` fully inside the horizon."""
    W = series.windows
    if W < MIN_WINDOWS:
        raise ValueError(f"horizon covers {W} windows, need at least {MIN_WINDOWS}")
    # j lies in window a iff a v <= j < (a+1) v; edges are ceil(a v)
    edges = np.ceil(np.arange(W + 1) * series.v_n).astype(np.int64)
    pos = np.searchsorted(series.event_times, edges, side="left")
    return np.diff(pos)


def interarrival_gaps(series: ExceedanceSeries) -> np.ndarray:
    """Gaps between consecutive exceedances inside the covered windows, in units of ``v_n``."""
    end = int(math.ceil(series.windows * series.v_n))
    t = series.event_times[series.event_times < end]
    return np.diff(t) / series.v_n


@dataclass(frozen=True)
class REPPReport:
    windows: int
    gaps: int
    mean: float
    dispersion: float
    dispersion_p: float
    chi2: float
    chi2_p: float
    ks: float
    ks_p: float
    alpha: float

    @property
    def dispersion_pass(self) -> bool:
        return self.dispersion_p >= self.alpha

    @property
    def chi2_pass(self) -> bool:
        return self.chi2_p >= self.alpha

    @property
    def ks_pass(self) -> bool:
        return self.ks_p >= self.alpha

    @property
    def passed(self) -> bool:
        return self.dispersion_pass and self.chi2_pass and self.ks_pass

    def to_json(self) -> dict:
        return {"dispersion": self.dispersion, "chi2_p": self.chi2_p, "ks": self.ks,
                "pass": self.passed}


def dispersion_test(counts) -> tuple[float, float]:
    """Index ``var / mean`` and its two-sided p-value.

    Under a Poisson null ``(W - 1) * var / mean`` is approximately chi-square
    with ``W - 1`` degrees of freedom.
    """
    c = np.asarray(counts, dtype=np.float64)
    mean = c.mean()
    if mean == 0.0:
        return math.nan, 0.0
    index = c.var(ddof=1) / mean
    stat = (c.size - 1) * index
    p = 2.0 * min(sps.chi2.cdf(stat, c.size - 1), sps.chi2.sf(stat, c.size - 1))
    return float(index), float(min(p, 1.0))


def count_gof(counts):
    """Chi-square goodness of fit of window counts to Poisson(1)."""
    c = np.asarray(counts, dtype=np.int64)
    bins = int(c.max()) + 2  # last bin holds the tail beyond the largest count
    observed = np.bincount(c, minlength=bins)
    return chi2_gof(observed, poisson_pmf(bins, 1.0))


def poisson_tests(counts, gaps, alpha: float = ALPHA) -> REPPReport:
    counts = np.asarray(counts)
    gaps = np.asarray(gaps, dtype=np.float64)
    if counts.size < MIN_WINDOWS:
        raise ValueError(f"need at least {MIN_WINDOWS} windows")
    if gaps.size < MIN_GAPS:
        raise ValueError(f"need at least {MIN_GAPS} gaps")
    index, p_disp = dispersion_test(counts)
    chi = count_gof(counts)
    ks = ks_statistic(gaps, exponential_cdf)
    return REPPReport(int(counts.size), int(gaps.size), float(counts.mean()), index, p_disp,
                      chi.statistic, chi.pvalue, ks.statistic, ks.pvalue, alpha)


def d3_gap(K: GridKernel, pi, entry_or_cells, A, t: int) -> float:
    """Exact ``|P(X_0 > u, N(A + t) = 0) - P(X_0 > u) P(N(A) = 0)|``.

    ``A`` is a list of half-open integer intervals ``(a, b)`` with ``a >= 0``.
    Both probabilities come from propagating a row vector through the kernel
    and zeroing the exceedance cells at every time in the pattern.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    times = set()
    for a, b in A:
        if a < 0 or b < a:
            raise ValueError(f"bad interval {(a, b)}")
        times.update(range(int(a), int(b)))
    U = _mask(K, _cells(K, entry_or_cells))
    pi = np.asarray(pi, dtype=np.float64)
    joint = _avoid_times(K, np.where(U, pi, 0.0), U, {s + t for s in times})
    marginal = _avoid_times(K, pi.copy(), U, times)
    return abs(joint - pi[U].sum() * marginal)


def _avoid_times(K: GridKernel, v, U, times) -> float:
    if not times:
        return float(v.sum())
    if 0 in times:
        v[U] = 0.0
    for s in range(1, max(times) + 1):
        v = v @ K.P
        if s in times:
            v[U] = 0.0
    return float(v.sum())


def write_counts_csv(counts, path) -> str:
    with open(path, "w", newline="\n") as fh:
        fh.write("window,count\n")
        for a, c in enumerate(np.asarray(counts).tolist()):
            fh.write(f"{a},{c}\n")
    return str(path)


def write_gaps_csv(gaps, path) -> str:
    with open(path, "w", newline="\n") as fh:
        fh.write("index,gap\n")
        for k, g in enumerate(np.asarray(gaps).tolist()):
            fh.write(f"{k},{g!r}\n")
    return str(path)
