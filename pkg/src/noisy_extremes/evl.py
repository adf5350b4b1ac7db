"""Extreme values of ``X_n = phi(x_n)`` along random orbits.

``phi(x) = g(mu(B(zeta, dist(x, zeta))))`` with ``g`` decreasing, so an
exceedance ``X_j > u_n`` is the event that ``x_j`` falls in the ball of
radius ``delta_n`` around ``zeta`` with ``mu(ball) = tau / n``. Simulations
therefore test ball membership directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._core import _fallback, kernels
from .dynamics import MapSpec
from .grid import GridKernel, StationaryDensity, _mask, taboo_survival
from .noise import NoiseSpec, pack_model, verify_perturbation_conditions
from .stats import block_bootstrap_se, wilson_interval
from .stream import derive_stream_id, trial_stream_ids

TRIAL_CHUNK = 2048
BURN_IN = 5000
# counters 0 and 1 of every trial stream place the initial point
INIT_DRAWS = 2


class RadialCDF:
    """``r -> mu(B(zeta, r))`` for a cellwise-constant density.

    The map is piecewise linear with breakpoints at the distances from
    ``zeta`` to the cell edges, so tabulating it there and interpolating
    linearly is exact.
    """

    def __init__(self, K: GridKernel, density: StationaryDensity, zeta: float):
        dom = K.domain
        self.zeta = float(zeta)
        edges = K.edges
        h = density.h
        if dom.is_circle:
            r_max = 0.5
        else:
            r_max = max(self.zeta - dom.lower, dom.upper - self.zeta)
        radii = np.unique(np.concatenate([[0.0, r_max], np.asarray(dom.distance(edges, self.zeta))]))
        radii = radii[radii <= r_max]
        lo, hi = self.zeta - radii[:, None], self.zeta + radii[:, None]
        left, right = edges[None, :-1], edges[None, 1:]
        covered = np.zeros((radii.size, K.m))
        shifts = (-1.0, 0.0, 1.0) if dom.is_circle else (0.0,)
        for s in shifts:
            covered += np.clip(np.minimum(hi + s, right) - np.maximum(lo + s, left), 0.0, None)
        self.radii = radii
        self.masses = covered @ h
        self.total = float(self.masses[-1])

    def __call__(self, r):
        return np.interp(r, self.radii, self.masses)

    def inverse(self, mass):
        return np.interp(mass, self.masses, self.radii)


def _g(variant: str, alpha: float, D: float):
    if variant == "g1":
        return lambda t: -np.log(t)
    if variant == "g2":
        return lambda t: np.power(t, -1.0 / alpha)
    if variant == "g3":
        return lambda t: D - np.power(t, 1.0 / alpha)
    raise ValueError(f"unknown observable type {variant!r}")


@dataclass(frozen=True, eq=False)
class ObservableSpec:
    zeta: float
    g_variant: str
    radial_cdf: RadialCDF = field(repr=False)
    alpha: float = 1.0
    D: float = 0.0
    domain: object = field(default=None, repr=False)

    def g(self, t):
        with np.errstate(divide="ignore"):
            return _g(self.g_variant, self.alpha, self.D)(np.asarray(t, dtype=np.float64))

    def __call__(self, x):
        """phi(x); +inf at ``zeta`` for g1 and g2."""
        d = self.domain.distance(x, self.zeta)
        return self.g(self.radial_cdf(d))


def build_observable(K: GridKernel, density: StationaryDensity, zeta: float,
                     g_variant: str = "g1", alpha: float = 1.0, D: float = 0.0) -> ObservableSpec:
    if not K.domain.contains(zeta):
        raise ValueError("zeta outside the phase space")
    if density.h_lower <= 0.0:
        raise ValueError("stationary density vanishes somewhere")
    _g(g_variant, alpha, D)
    return ObservableSpec(float(zeta), g_variant, RadialCDF(K, density, zeta), alpha, D, K.domain)


@dataclass(frozen=True)
class LevelEntry:
    n: int
    tau: float
    u_n: float
    radius: float
    mass: float
    zeta: float


def calibrate_levels(obs: ObservableSpec, n: int, tau: float) -> LevelEntry:
    """Level ``u_n = g(tau / n)`` and ball radius ``delta_n`` with ``mu(ball) = tau / n``."""
    if tau <= 0 or n < 10:
        raise ValueError("need tau > 0 and n >= 10")
    target = tau / n
    if target >= obs.radial_cdf.total:
        raise ValueError("tau / n exceeds the total mass")
    radius = float(obs.radial_cdf.inverse(target))
    mass = float(obs.radial_cdf(radius))
    return LevelEntry(n, float(tau), float(obs.g(target)), radius, mass, obs.zeta)


def level_schedule(obs: ObservableSpec, ns, taus) -> list[LevelEntry]:
    return [calibrate_levels(obs, n, tau) for tau in taus for n in ns]


def exceedance_cells(K: GridKernel, obs: ObservableSpec, entry: LevelEntry) -> np.ndarray:
    """Cells whose midpoint satisfies ``phi > u_n``."""
    return np.flatnonzero(obs(K.midpoints) > entry.u_n)


def sample_initial(K: GridKernel, density: StationaryDensity, seed: int, streams) -> np.ndarray:
    """Inverse-CDF draw from the grid stationary law using counters 0 and 1."""
    streams = np.asarray(streams, dtype=np.uint64)
    u = _fallback.random_raw(seed, streams[:, None], np.arange(INIT_DRAWS, dtype=np.uint64)[None, :])
    u = (u >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    cdf = np.cumsum(density.pi)
    cell = np.minimum(np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right"), K.m - 1)
    return K.edges[cell] + u[:, 1] * K.cell_measure


def sample_initial_in_ball(K: GridKernel, density: StationaryDensity, zeta: float,
                           radius: float, seed: int, streams) -> np.ndarray:
    """Draw from the stationary law restricted to the ball ``B(zeta, radius)``."""
    streams = np.asarray(streams, dtype=np.uint64)
    u = _fallback.random_raw(seed, streams[:, None], np.arange(INIT_DRAWS, dtype=np.uint64)[None, :])
    u = (u >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    dom = K.domain
    shifts = (-1.0, 0.0, 1.0) if dom.is_circle else (0.0,)
    pieces = []  # (left, right, weight)
    for s in shifts:
        lo = np.maximum(K.edges[:-1], zeta - radius + s)
        hi = np.minimum(K.edges[1:], zeta + radius + s)
        ok = hi > lo
        for a, b, w in zip(lo[ok], hi[ok], (density.h[ok] * (hi[ok] - lo[ok]))):
            pieces.append((a - s, b - s, w))
    if not pieces:
        raise ValueError("empty ball")
    pieces.sort()
    left = np.array([p[0] for p in pieces])
    width = np.array([p[1] - p[0] for p in pieces])
    cdf = np.cumsum([p[2] for p in pieces])
    k = np.minimum(np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right"), len(pieces) - 1)
    x = left[k] + u[:, 1] * width[k]
    if dom.is_circle:
        x = np.mod(x, 1.0)
        x = np.where(x >= 1.0, 0.0, x)
    return x


def _chunks(total: int, size: int):
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def run_chunked(fn, total: int, threads: int = 1, size: int = TRIAL_CHUNK):
    """Apply ``fn(start, stop)`` over trial chunks; results come back in chunk order."""
    spans = _chunks(total, size)
    if threads <= 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def first_entry_times(spec: MapSpec, noise: NoiseSpec, x0, seed: int, streams,
                      zeta: float, radius: float, cap: int, threads: int = 1,
                      counter0: int = INIT_DRAWS) -> np.ndarray:
    model = pack_model(spec, noise)
    x0 = np.asarray(x0, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)

    def work(a, b):
        return kernels.first_entry(model, x0[a:b], seed, streams[a:b], counter0,
                                   zeta, radius, cap)

    return np.concatenate(run_chunked(work, x0.size, threads))


@dataclass(frozen=True)
class EVLEstimate:
    tau: float
    n: int
    trials: int
    survived: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    target: float

    @property
    def sigma(self) -> float:
        """Binomial standard deviation of p_hat under the limit law."""
        return math.sqrt(self.target * (1 - self.target) / self.trials)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_hi - self.ci_lo)


def evl_estimate(spec: MapSpec, noise: NoiseSpec, K: GridKernel, density: StationaryDensity,
                 entry: LevelEntry, trials: int, seed: int, threads: int = 1,
                 start: str = "stationary", target: float | None = None,
                 label: str = "evl") -> EVLEstimate:
    """Monte Carlo ``P(M_n <= u_n)`` under the annealed stationary law.

    ``start="burn-in"`` replaces the grid initial law by ``BURN_IN`` steps
    from uniformly drawn points.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    streams = trial_stream_ids(derive_stream_id(label, entry.n, entry.tau, entry.zeta), trials)
    counter0 = INIT_DRAWS
    if start == "stationary":
        x0 = sample_initial(K, density, seed, streams)
    elif start == "burn-in":
        flat = StationaryDensity(np.full(K.m, 1.0 / K.m), K.cell_measure)
        x0 = sample_initial(K, flat, seed, streams)
        model = pack_model(spec, noise)
        x0 = np.concatenate(run_chunked(
            lambda a, b: kernels.advance(model, x0[a:b], seed, streams[a:b], counter0, BURN_IN),
            trials, threads))
        counter0 += BURN_IN
    else:
        raise ValueError(f"unknown start {start!r}")
    inside = spec.domain.distance(x0, entry.zeta) < entry.radius
    if entry.n > 1:
        hits = first_entry_times(spec, noise, x0, seed, streams, entry.zeta, entry.radius,
                                 entry.n - 1, threads, counter0)
    else:
        hits = np.full(trials, -1)
    survived = int(np.sum(~inside & (hits < 0)))
    lo, hi = wilson_interval(survived, trials)
    tgt = math.exp(-entry.tau) if target is None else target
    return EVLEstimate(entry.tau, entry.n, trials, survived, survived / trials, lo, hi, tgt)


def block_maxima_probability(values, u: float) -> float:
    """Fraction of rows of ``values`` whose maximum does not exceed ``u``."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    return float(np.mean(values.max(axis=1) <= u))


def grid_survival(K: GridKernel, density: StationaryDensity, entry: LevelEntry) -> float:
    """Grid-exact ``P(M_n <= u_n)`` with ``U_n`` the cells whose midpoints lie in the ball."""
    U = K.cells_within(entry.zeta, entry.radius)
    return float(taboo_survival(K, density.pi, U, entry.n).survival[entry.n])


def k_rule(n: int) -> int:
    return math.ceil(math.sqrt(n))


def t_rule(n: int) -> int:
    return math.ceil(math.log(n))


@dataclass(frozen=True)
class DPrimeResult:
    n: int
    k_n: int
    window: int
    s_hat: float
    se: float
    bound: float
    pairs: int
    exceedances: int
    steps: int


def pair_statistic(chain, times, chain_length: int, n_chains: int, n: int, window: int,
                   blocks: int = 100, seed: int = 0):
    """``n * sum_{j=1..window} P(X_0 in U, X_j in U)`` from exceedance times.

    Only start times with a full look-ahead window (``t < chain_length -
    window``) are counted. Returns ``(s_hat, se, pairs)`` with the standard
    error from a bootstrap over ``blocks`` contiguous groups of chains.
    """
    chain = np.asarray(chain, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    starts_per_chain = chain_length - window
    if starts_per_chain <= 0:
        raise ValueError("chains shorter than the look-ahead window")
    per_chain = np.zeros(n_chains)
    for c in np.unique(chain):
        t = times[chain == c]
        ahead = np.searchsorted(t, t + window, side="right") - np.arange(1, t.size + 1)
        per_chain[c] = ahead[t < starts_per_chain].sum()
    pairs = int(per_chain.sum())
    s_hat = n * pairs / (n_chains * starts_per_chain)
    groups = np.array_split(np.arange(n_chains), min(blocks, n_chains))
    sums = np.array([per_chain[g].sum() for g in groups])
    weights = np.array([g.size * starts_per_chain for g in groups], dtype=np.float64)
    rng = np.random.default_rng(derive_stream_id("block-bootstrap", seed))
    se = n * block_bootstrap_se(sums, weights, 1000, rng) if len(groups) > 1 else math.nan
    return s_hat, se, pairs


def dprime_statistic(spec: MapSpec, noise: NoiseSpec, K: GridKernel, density: StationaryDensity,
                     entry: LevelEntry, trials: int, seed: int, chains: int = 400,
                     threads: int = 1, label: str = "dprime") -> DPrimeResult:
    """Estimate the anti-clustering sum with ``k_n = ceil(sqrt n)``.

    ``n * trials`` stationary steps are split over ``chains`` independent
    chains started from the grid stationary law. The comparison bound is
    ``(upper_q / h_lower) (n mu(U_n))^2 / k_n``.
    """
    n = entry.n
    k_n = k_rule(n)
    window = n // k_n
    length = n * trials // chains
    streams = trial_stream_ids(derive_stream_id(label, n, entry.tau, entry.zeta), chains)
    x0 = sample_initial(K, density, seed, streams)
    model = pack_model(spec, noise)

    def work(a, b):
        c, t = kernels.exceedance_times(model, x0[a:b], seed, streams[a:b], INIT_DRAWS,
                                        length, entry.zeta, entry.radius)
        return c + a, t

    parts = run_chunked(work, chains, threads, size=max(1, chains // 16))
    chain = np.concatenate([p[0] for p in parts])
    times = np.concatenate([p[1] for p in parts])
    s_hat, se, pairs = pair_statistic(chain, times, length, chains, n, window, seed=seed)
    report = verify_perturbation_conditions(K.map, K.noise, K.m)
    bound = report.upper_q / density.h_lower * (n * entry.mass) ** 2 / k_n
    return DPrimeResult(n, k_n, window, s_hat, se, bound, pairs, int(times.size), length * chains)


def _avoid(K: GridKernel, v, U, steps: int):
    """Propagate ``v`` for ``steps`` transitions, killing mass in ``U`` at each arrival."""
    for _ in range(steps):
        v = v @ K.P
        v[U] = 0.0
    return v


def d2_gap(K: GridKernel, pi, entry_or_cells, t: int, ell: int) -> float:
    """Exact ``|P(X_0 > u, max(X_t..X_{t+ell-1}) <= u) - P(X_0 > u) P(M_ell <= u)|``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    if ell <= 0:
        return 0.0
    U = _mask(K, _cells(K, entry_or_cells))
    pi = np.asarray(pi)
    v = np.where(U, pi, 0.0)
    for _ in range(t):
        v = v @ K.P
    v = np.where(U, 0.0, v)
    joint = _avoid(K, v, U, ell - 1).sum()
    w = np.where(U, 0.0, pi)
    marginal = _avoid(K, w, U, ell - 1).sum()
    return abs(float(joint - pi[U].sum() * marginal))


def _cells(K: GridKernel, entry_or_cells):
    if isinstance(entry_or_cells, LevelEntry):
        return K.cells_within(entry_or_cells.zeta, entry_or_cells.radius)
    return entry_or_cells
