"""Hitting and return times to small balls, Kac scaling and the HTS/RTS relation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._core import kernels
from .dynamics import MapSpec
from .evl import (INIT_DRAWS, LevelEntry, first_entry_times, sample_initial,
                  sample_initial_in_ball)
from .grid import GridKernel, StationaryDensity
from .noise import NoiseSpec, pack_model
from .stats import KS_CRITICAL_5PCT, empirical_cdf, exponential_cdf, ks_statistic
from .stream import RandomStream, derive_stream_id, trial_stream_ids

KS_SLACK = 1.5
MAX_CENSORED = 1e-3


@dataclass(frozen=True)
class TargetBall:
    zeta: float
    radius: float
    mass: float

    @classmethod
    def from_entry(cls, entry: LevelEntry) -> "TargetBall":
        return cls(entry.zeta, entry.radius, entry.mass)

    def default_cap(self) -> int:
        return int(math.ceil(1e3 / self.mass))


@dataclass(frozen=True)
class HittingSample:
    raw_time: int  # -1 when censored
    normalized_time: float
    kind: str

    @property
    def censored(self) -> bool:
        return self.raw_time < 0


@dataclass(frozen=True)
class HittingSamples:
    raw_times: np.ndarray  # -1 marks censored trials
    mass: float
    kind: str
    cap: int

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.raw_times < 0))

    @property
    def valid(self) -> np.ndarray:
        return self.raw_times[self.raw_times > 0]

    @property
    def normalized(self) -> np.ndarray:
        return self.valid * self.mass


def hitting_sample(spec: MapSpec, noise: NoiseSpec, ball: TargetBall, start: float,
                   stream: RandomStream, kind: str = "hit", cap: int | None = None) -> HittingSample:
    """First ``j >= 1`` with the random orbit of ``start`` inside ``ball``.

    The stream advances by the number of steps taken (``cap`` when censored).
    """
    cap = ball.default_cap() if cap is None else cap
    model = pack_model(spec, noise)
    r = int(kernels.first_entry(model, np.array([float(start)]), stream.seed,
                                np.array([stream.stream_id], dtype=np.uint64), stream.counter,
                                ball.zeta, ball.radius, cap)[0])
    stream.counter += r if r > 0 else cap
    return HittingSample(r, r * ball.mass if r > 0 else math.inf, kind)


def sample_hitting_times(spec: MapSpec, noise: NoiseSpec, K: GridKernel, density: StationaryDensity,
                         ball: TargetBall, count: int, seed: int, kind: str = "hit",
                         cap: int | None = None, threads: int = 1, label: str = "hts") -> HittingSamples:
    """``count`` independent hitting (start ~ mu) or return (start ~ mu restricted to the ball) times."""
    cap = ball.default_cap() if cap is None else cap
    streams = trial_stream_ids(derive_stream_id(label, kind, ball.zeta, ball.radius), count)
    if kind == "hit":
        x0 = sample_initial(K, density, seed, streams)
    elif kind == "return":
        x0 = sample_initial_in_ball(K, density, ball.zeta, ball.radius, seed, streams)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    r = first_entry_times(spec, noise, x0, seed, streams, ball.zeta, ball.radius, cap,
                          threads, INIT_DRAWS)
    return HittingSamples(r, ball.mass, kind, cap)


@dataclass(frozen=True)
class HTSResult:
    ks: float
    scaled: float
    pvalue: float
    n: int
    censored_fraction: float
    critical: float

    @property
    def passed(self) -> bool:
        return self.ks < self.critical and self.censored_fraction < MAX_CENSORED


def hts_test(samples, censored_fraction: float = 0.0) -> HTSResult:
    """KS distance of normalized times to ``1 - exp(-t)``.

    The pass threshold is the asymptotic 5% value ``1.36 / sqrt(N)`` times a
    finite-size slack of 1.5.
    """
    if isinstance(samples, HittingSamples):
        censored_fraction = samples.censored_fraction
        samples = samples.normalized
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 500:
        raise ValueError(f"need at least 500 samples, got {samples.size}")
    res = ks_statistic(samples, exponential_cdf)
    critical = KS_SLACK * KS_CRITICAL_5PCT / math.sqrt(samples.size)
    return HTSResult(res.statistic, res.scaled, res.pvalue, res.n, censored_fraction, critical)


def kac_check(return_samples, mass: float) -> tuple[float, float]:
    """Mean return time times ``mass`` with its standard error (expected 1)."""
    if isinstance(return_samples, HittingSamples):
        return_samples = return_samples.valid
    r = np.asarray(return_samples, dtype=np.float64)
    if r.size < 500:
        raise ValueError("need at least 500 return samples")
    return float(r.mean() * mass), float(r.std(ddof=1) / math.sqrt(r.size) * mass)


def hts_from_rts(rts_samples):
    """Reconstruct ``G(t) = int_0^t (1 - G~(s)) ds`` from an empirical RTS d.f.

    For the empirical step function the integral is exactly
    ``t - mean(max(0, t - s_i))``.
    """
    s = np.sort(np.asarray(rts_samples, dtype=np.float64))
    n = s.size
    tail = np.concatenate([[0.0], np.cumsum(s)])

    def G(t):
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(s, t, side="right")
        # sum over s_i <= t of (t - s_i)
        excess = k * t - tail[k]
        return t - excess / n

    return G


def sup_distance_to_empirical(G, samples) -> float:
    """Sup over t of ``|G(t) - F_N(t)|`` for a continuous non-decreasing ``G``.

    The supremum is attained at a jump of ``F_N``, on one side or the other.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    g = np.asarray(G(x))
    after = np.searchsorted(x, x, side="right") / n
    before = np.searchsorted(x, x, side="left") / n
    return float(max(np.max(np.abs(g - after)), np.max(np.abs(g - before))))


def rts_hts_gap(rts_samples, hts_samples) -> float:
    return sup_distance_to_empirical(hts_from_rts(rts_samples), hts_samples)


__all__ = [
    "TargetBall", "HittingSample", "HittingSamples", "HTSResult", "hitting_sample",
    "sample_hitting_times", "hts_test", "kac_check", "hts_from_rts",
    "sup_distance_to_empirical", "rts_hts_gap", "empirical_cdf",
]
