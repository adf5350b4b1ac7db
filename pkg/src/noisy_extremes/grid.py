"""Ulam discretization of the perturbed transition kernel and its diagnostics.

The grid chain starts each row at the cell midpoint and integrates the
uniform noise density over target cells in closed form, so every quantity
below is exact for the discretized chain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MapSpec, apply_map
from .noise import NoiseSpec, check_compatible, verify_perturbation_conditions

CONVERGED_FLOOR = 1e-14


class StationaryConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"power iteration stalled after {iterations} steps "
                         f"(last L1 change {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class GridKernel:
    map: MapSpec
    noise: NoiseSpec | None
    m: int
    P: np.ndarray = field(repr=False)

    @property
    def domain(self):
        return self.map.domain

    @property
    def cell_measure(self) -> float:
        return self.domain.length / self.m

    @property
    def edges(self) -> np.ndarray:
        return self.domain.cell_edges(self.m)

    @property
    def midpoints(self) -> np.ndarray:
        return self.domain.cell_midpoints(self.m)

    def cells_within(self, centre: float, radius: float) -> np.ndarray:
        """Indices of cells whose midpoint lies within ``radius`` of ``centre``."""
        return np.flatnonzero(self.domain.distance(self.midpoints, centre) < radius)


@dataclass(frozen=True, eq=False)
class StationaryDensity:
    pi: np.ndarray
    cell_measure: float
    iterations: int = 0

    @property
    def h(self) -> np.ndarray:
        return self.pi / self.cell_measure

    @property
    def h_lower(self) -> float:
        return float(self.h.min())


@dataclass(frozen=True)
class RateFit:
    C: float
    lam: float
    r_squared: float
    n_points: int
    converged: bool = False


@dataclass(frozen=True)
class TabooResult:
    survival: np.ndarray  # survival[l] = P(X_0..X_{l-1} avoid U), l = 0..L
    hitting: np.ndarray  # hitting[j] = P(first visit at time j), j = 0..L; hitting[0] = 0


def _overlap(a, b, lo, hi):
    return np.clip(np.minimum(b, hi) - np.maximum(a, lo), 0.0, None)


def discretize(spec: MapSpec, noise: NoiseSpec, m: int) -> GridKernel:
    """Row ``i``: law of one randomized step from the midpoint of cell ``i``."""
    if m < 16:
        raise ValueError("use at least 16 cells")
    check_compatible(spec, noise)
    if noise.disabled:
        raise ValueError("the noise-free map has no transition density")
    return GridKernel(spec, noise, m, _ulam_matrix(spec, noise, m))


def _ulam_matrix(spec: MapSpec, noise: NoiseSpec, m: int) -> np.ndarray:
    # closed-form overlap of each cell with the folded noise interval
    eps = noise.epsilon
    dom = spec.domain
    edges = dom.cell_edges(m)
    left, right = edges[:-1][None, :], edges[1:][None, :]
    c = np.asarray(apply_map(spec, dom.cell_midpoints(m)))[:, None]
    if dom.is_circle:
        images = [c + shift for shift in (-1.0, 0.0, 1.0)]
    else:
        images = [c, 2.0 * dom.lower - c, 2.0 * dom.upper - c]
    mass = np.zeros((m, m))
    for centre in images:
        mass += _overlap(centre - eps, centre + eps, left, right)
    return mass / (2.0 * eps)


def from_matrix(spec: MapSpec, P) -> GridKernel:
    """Wrap an arbitrary row-stochastic matrix over the cells of ``spec.domain``."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("P must be row-stochastic")
    return GridKernel(spec, None, P.shape[0], P)


def stationary(K: GridKernel, tol: float = 1e-12, max_iter: int = 200_000) -> StationaryDensity:
    """Left fixed vector by power iteration from the uniform vector."""
    pi = np.full(K.m, 1.0 / K.m)
    change = math.inf
    for it in range(1, max_iter + 1):
        nxt = pi @ K.P
        nxt /= nxt.sum()
        change = float(np.abs(nxt - pi).sum())
        pi = nxt
        if change < tol:
            return StationaryDensity(pi, K.cell_measure, it)
    raise StationaryConvergenceError(change, max_iter)


def tv_profile(K: GridKernel, pi, n_max: int = 40) -> np.ndarray:
    """``d(n) = max_i 1/2 sum_j |P^n[i, j] - pi_j|`` for n = 1..n_max."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    pi = np.asarray(pi)
    out = np.empty(n_max)
    Pn = K.P.copy()
    for n in range(n_max):
        out[n] = 0.5 * np.abs(Pn - pi[None, :]).sum(axis=1).max()
        Pn = Pn @ K.P
    return out


def fit_geometric_rate(d, floor: float = CONVERGED_FLOOR) -> RateFit:
    """Fit ``log d(n) = log C - n log(lambda)`` over the entries above ``floor``.

    ``d[0]`` is taken as ``d(1)``. With fewer than five usable points the
    profile is reported as already converged.
    """
    from .stats import linear_fit

    d = np.asarray(d, dtype=np.float64)
    n = np.arange(1, d.size + 1)
    keep = d > floor
    if keep.sum() < 5:
        return RateFit(math.nan, math.nan, math.nan, int(keep.sum()), converged=True)
    fit = linear_fit(n[keep], np.log(d[keep]))
    return RateFit(math.exp(fit.intercept), math.exp(-fit.slope), fit.r_squared, int(keep.sum()))


def doeblin_margin(K: GridKernel, gamma: float, k: int = 1) -> float:
    """Worst k-step mass over cell unions of measure at least ``gamma``.

    For a row, the cheapest such union consists of its ``ceil(gamma m)``
    smallest entries.
    """
    if not 0.0 < gamma < 1.0 or k < 1:
        raise ValueError("need 0 < gamma < 1 and k >= 1")
    Pk = np.linalg.matrix_power(K.P, k)
    s = math.ceil(gamma * K.m - 1e-9)
    smallest = np.partition(Pk, s - 1, axis=1)[:, :s]
    return float(smallest.sum(axis=1).min())


def doeblin_constructive_bound(lower_q: float, rho0: float, gamma: float) -> float:
    """Constructive one-step Doeblin constant ``lower_q * g / 2``.

    The construction uses ``g = 2 (1 - gamma)``: every set of measure at
    least ``1 - g/2 = gamma`` meets each covering ball (measure at least
    ``g``) in measure ``g/2``. Requires ``g <= 2 rho0`` (ball measure on the
    circle / interval interior).
    """
    g = 2.0 * (1.0 - gamma)
    if g > 2.0 * rho0 + 1e-12:
        raise ValueError("threshold too small for the covering radius")
    return lower_q * g / 2.0


def harris_minorization(K: GridKernel, A_cells, B_cells) -> float:
    """Smallest transition density from cells ``A`` into cells ``B``."""
    A = np.atleast_1d(np.asarray(A_cells, dtype=np.int64))
    B = np.atleast_1d(np.asarray(B_cells, dtype=np.int64))
    if A.size == 0 or B.size == 0:
        raise ValueError("A and B must be non-empty")
    return float(K.P[np.ix_(A, B)].min() / K.cell_measure)


def aperiodicity_index(K: GridKernel, k_max: int = 64) -> int | None:
    """Smallest ``k`` with ``P^k`` entrywise positive, or None up to ``k_max``."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    B = (K.P > 0).astype(np.float64)
    Bk = B.copy()
    for k in range(1, k_max + 1):
        if Bk.all():
            return k
        Bk = ((Bk @ B) > 0).astype(np.float64)
    return None


def correlation(K: GridKernel, pi, phi, psi, n: int) -> float:
    """Normalized annealed correlation of cell functions ``phi`` and ``psi`` at lag ``n``."""
    pi = np.asarray(pi)
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    l1 = float(np.sum(pi * np.abs(phi)))
    sup = float(np.max(np.abs(psi)))
    if l1 == 0.0 or sup == 0.0:
        raise ValueError("phi and psi must be non-zero")
    v = psi
    for _ in range(n):
        v = K.P @ v
    cov = float(np.sum(pi * phi * v) - np.sum(pi * phi) * np.sum(pi * psi))
    return abs(cov) / (l1 * sup)


def correlation_profile(K: GridKernel, pi, phi, psi, n_max: int) -> np.ndarray:
    """``correlation`` for n = 0..n_max, sharing the matrix-vector products."""
    pi = np.asarray(pi)
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    l1 = float(np.sum(pi * np.abs(phi)))
    sup = float(np.max(np.abs(psi)))
    if l1 == 0.0 or sup == 0.0:
        raise ValueError("phi and psi must be non-zero")
    mean = np.sum(pi * phi) * np.sum(pi * psi)
    out = np.empty(n_max + 1)
    v = psi
    for n in range(n_max + 1):
        out[n] = abs(float(np.sum(pi * phi * v) - mean)) / (l1 * sup)
        v = K.P @ v
    return out


def _mask(K: GridKernel, U_cells) -> np.ndarray:
    U = np.zeros(K.m, dtype=bool)
    U[np.asarray(U_cells, dtype=np.int64)] = True
    if not U.any():
        raise ValueError("target set must be non-empty")
    return U


def taboo_survival(K: GridKernel, pi, U_cells, horizon: int) -> TabooResult:
    """Exact ``P(M_l <= u)`` and hitting-time law of ``U`` for the stationary chain.

    ``survival[l] = pi_{U^c} Q^{l-1} 1`` with ``Q`` the kernel restricted to
    the complement of ``U``; by stationarity the first hitting time ``r``
    (``j >= 1``) satisfies ``P(r > j) = survival[j]``.
    """
    U = _mask(K, U_cells)
    pi = np.asarray(pi)
    survival = np.empty(horizon + 1)
    survival[0] = 1.0
    v = np.where(U, 0.0, pi)
    Q = K.P[np.ix_(~U, ~U)]
    w = v[~U]
    for ell in range(1, horizon + 1):
        survival[ell] = w.sum()
        w = w @ Q
    hitting = np.zeros(horizon + 1)
    hitting[1:] = survival[:-1] - survival[1:]
    return TabooResult(survival, hitting)


def return_time_distribution(K: GridKernel, pi, U_cells, horizon: int) -> np.ndarray:
    """``p[j] = P(first return to U at time j | X_0 ~ pi restricted to U)``."""
    U = _mask(K, U_cells)
    pi = np.asarray(pi)
    start = np.where(U, pi, 0.0)
    start /= start.sum()
    p = np.zeros(horizon + 1)
    step = start @ K.P
    p[1] = step[U].sum()
    w = step[~U]
    Q = K.P[np.ix_(~U, ~U)]
    R = K.P[np.ix_(~U, U)].sum(axis=1)
    for j in range(2, horizon + 1):
        p[j] = w @ R
        w = w @ Q
    return p


def mean_return_time(K: GridKernel, pi, U_cells) -> float:
    """Exact expected return time to ``U`` by one linear solve."""
    U = _mask(K, U_cells)
    pi = np.asarray(pi)
    if U.all():
        return 1.0
    start = np.where(U, pi, 0.0)
    start /= start.sum()
    b = (start @ K.P)[~U]
    Q = K.P[np.ix_(~U, ~U)]
    expected_after = np.linalg.solve(np.eye(Q.shape[0]) - Q, np.ones(Q.shape[0]))
    return 1.0 + float(b @ expected_after)


@dataclass(frozen=True)
class DensityBound:
    h_lower_hat: float
    covering_bound: float
    covering_bound_upper_q: float


def density_lower_bound(K: GridKernel, density: StationaryDensity) -> DensityBound:
    """Covering bound on the stationary density beside the computed minimum.

    From ``h(y) = int q_x(y) dmu(x)`` and ``q_x >= lower_q`` on the covering
    ball, ``h(y) >= lower_q * mu{x : dist(f x, y) < rho0}``. The same
    preimage mass times ``upper_q`` is reported alongside.
    """
    report = verify_perturbation_conditions(K.map, K.noise, K.m)
    fx = np.asarray(apply_map(K.map, K.midpoints))
    y = K.midpoints
    near = K.domain.distance(fx[:, None], y[None, :]) < report.rho0 - report.resolution
    pre_mass = density.pi @ near
    m = float(pre_mass.min())
    return DensityBound(density.h_lower, report.lower_q * m, report.upper_q * m)


def export_kernel(K: GridKernel, stem) -> tuple[str, str]:
    """Write ``<stem>.csv`` (i,j,value triplets of non-zeros) and ``<stem>.json`` header."""
    stem = str(stem)
    i, j = np.nonzero(K.P)
    with open(stem + ".csv", "w", newline="") as fh:
        fh.write("i,j,value\n")
        for a, b, v in zip(i.tolist(), j.tolist(), K.P[i, j].tolist()):
            fh.write(f"{a},{b},{v!r}\n")
    header = {"m": K.m, "map": K.map.id, "noise": K.noise.id, "seed": None,
              "domain": [K.domain.lower, K.domain.upper], "kind": K.domain.kind,
              "entries": int(i.size)}
    with open(stem + ".json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stem + ".csv", stem + ".json"


def load_kernel_triplets(path, m: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    P = np.zeros((m, m))
    P[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    return P


def export_density(K: GridKernel, density: StationaryDensity, path) -> str:
    with open(path, "w", newline="") as fh:
        fh.write("cell_midpoint,h\n")
        for x, h in zip(K.midpoints.tolist(), density.h.tolist()):
            fh.write(f"{x!r},{h!r}\n")
    return str(path)
