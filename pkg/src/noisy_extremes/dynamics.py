"""Phase spaces and the deterministic one-dimensional maps to be perturbed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._core import _fallback, kernels


class DomainError(ValueError):
    """A point lies outside the phase space of a map."""


@dataclass(frozen=True)
class PhaseSpace:
    """Circle of period 1 on ``[0, 1)`` or a closed interval ``[lower, upper]``."""

    kind: str
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in ("circle", "interval"):
            raise ValueError(f"unknown phase space kind {self.kind!r}")
        if self.kind == "circle" and (self.lower, self.upper) != (0.0, 1.0):
            raise ValueError("circles are realized on [0, 1)")
        if not self.upper > self.lower:
            raise ValueError("empty phase space")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def is_circle(self) -> bool:
        return self.kind == "circle"

    def distance(self, x, y):
        d = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
        if self.is_circle:
            d = np.mod(d, 1.0)
            d = np.minimum(d, 1.0 - d)
        return d if d.ndim else float(d)

    def contains(self, x) -> bool | np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.is_circle:
            ok = (x >= 0.0) & (x < 1.0)
        else:
            ok = (x >= self.lower) & (x <= self.upper)
        return ok if ok.ndim else bool(ok)

    def cell_edges(self, m: int) -> np.ndarray:
        return np.linspace(self.lower, self.upper, m + 1)

    def cell_midpoints(self, m: int) -> np.ndarray:
        e = self.cell_edges(m)
        return 0.5 * (e[:-1] + e[1:])

    def cell_index(self, x, m: int):
        i = np.floor((np.asarray(x, dtype=np.float64) - self.lower) / self.length * m)
        return np.clip(i.astype(np.int64), 0, m - 1)


CIRCLE = PhaseSpace("circle")


@dataclass(frozen=True)
class MapSpec:
    """A deterministic map and its phase space.

    Variants: ``doubling`` (x -> kx mod 1), ``lorenz``
    (x -> sign(x)(c|x|^beta - 1) on [-1, 1]), ``quadratic`` (x -> a - x^2)
    and ``gauss`` (x -> 1/x mod 1 on (0, 1]).
    """

    variant: str
    params: tuple
    domain: PhaseSpace

    @property
    def code(self) -> int:
        return _CODES[self.variant]

    @property
    def kernel_params(self) -> tuple[float, float]:
        p = tuple(float(v) for v in self.params) + (0.0, 0.0)
        return p[0], p[1]

    @property
    def id(self) -> str:
        if self.variant == "gauss":
            return "gauss"
        if self.variant == "lorenz":
            beta, c = self.params
            if c == 2.0:
                return f"lorenz:{_fmt(beta)}"
            return f"lorenz:{_fmt(beta)}:{_fmt(c)}"
        return f"{self.variant}:{_fmt(self.params[0])}"


_CODES = {
    "doubling": _fallback.MAP_DOUBLING,
    "lorenz": _fallback.MAP_LORENZ,
    "quadratic": _fallback.MAP_QUADRATIC,
    "gauss": _fallback.MAP_GAUSS,
}


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def doubling(k: int = 2) -> MapSpec:
    if int(k) != k or k < 2:
        raise ValueError("doubling factor must be an integer >= 2")
    return MapSpec("doubling", (int(k),), CIRCLE)


def lorenz(beta: float = 0.75, c: float = 2.0) -> MapSpec:
    """Lorenz-like map on [-1, 1].

    With the default ``c = 2`` both branches map onto [-1, 1] and
    ``|f'(x)| = 2 beta |x|^(beta - 1) >= 2 beta``, which exceeds sqrt(2)
    for ``beta > sqrt(2) / 2``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("lorenz exponent must lie in (0, 1)")
    c = float(c)
    if not 0.0 < c <= 2.0:
        # c > 2 sends points near +-1 outside [-1, 1]
        raise ValueError("lorenz slope must lie in (0, 2]")
    return MapSpec("lorenz", (float(beta), c), PhaseSpace("interval", -1.0, 1.0))


def quadratic(a: float = 2.0) -> MapSpec:
    """x -> a - x^2 on its invariant interval [-b, b], b = (1 + sqrt(1 + 4a)) / 2."""
    if not -0.25 <= a <= 2.0:
        raise ValueError("quadratic parameter must lie in [-1/4, 2]")
    b = (1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0
    return MapSpec("quadratic", (float(a),), PhaseSpace("interval", -b, b))


def gauss() -> MapSpec:
    return MapSpec("gauss", (), PhaseSpace("interval", 0.0, 1.0))


def parse_map(text: str) -> MapSpec:
    """Build a map from ids like ``doubling:2``, ``lorenz:0.75``, ``quadratic:2``, ``gauss``."""
    parts = text.strip().split(":")
    name, args = parts[0].lower(), parts[1:]
    try:
        if name == "doubling":
            return doubling(int(args[0]) if args else 2)
        if name == "lorenz":
            return lorenz(*(float(a) for a in args)) if args else lorenz()
        if name == "quadratic":
            return quadratic(float(args[0]) if args else 2.0)
        if name == "gauss" and not args:
            return gauss()
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad map id {text!r}: {exc}") from None
    raise ValueError(f"unknown map id {text!r}")


CATALOG = {
    "doubling:k": "x -> k x mod 1 on the circle (k integer >= 2)",
    "lorenz:beta[:c]": "x -> sign(x)(c|x|^beta - 1) on [-1, 1], c defaults to 2",
    "quadratic:a": "x -> a - x^2 on its invariant interval ([-2, 2] for a = 2)",
    "gauss": "x -> 1/x mod 1 on (0, 1]",
}


def _check_domain(spec: MapSpec, x):
    x = np.asarray(x, dtype=np.float64)
    ok = spec.domain.contains(x)
    if spec.variant == "gauss":
        ok = ok & (x > 0.0)
    if not np.all(ok):
        raise DomainError(f"point outside the domain of {spec.id}")
    return x


def apply_map(spec: MapSpec, x):
    """Apply the unperturbed map to a point or an array of points.

    At the Lorenz discontinuity the right limit -1 is returned; Gauss-map
    arguments below 1e-12 are raised to 1e-12.
    """
    x = _check_domain(spec, x)
    model = (spec.code, *spec.kernel_params, 0.0, 0, spec.domain.lower, spec.domain.upper)
    y = _fallback.apply_map_array(model, x)
    return y if y.ndim else float(y)


def dense_orbit_probe(spec: MapSpec, x0, n_steps: int, resolution: float) -> float:
    """Fraction of ``resolution``-cells visited by ``x0, f(x0), ..., f^(N-1)(x0)``.

    Doubling orbits are iterated in exact rational arithmetic (a float
    orbit of k x mod 1 collapses onto 0 within 53 steps); ``x0`` given as a
    float is read through its shortest decimal representation.
    """
    if n_steps < 1 or resolution <= 0:
        raise ValueError("need n_steps >= 1 and resolution > 0")
    n_cells = math.ceil(spec.domain.length / resolution - 1e-9)
    if spec.variant == "doubling":
        frac = Fraction(x0) if isinstance(x0, (int, Fraction)) else Fraction(str(x0))
        _check_domain(spec, float(frac))
        k, p, q = spec.params[0], frac.numerator, frac.denominator
        cells = np.empty(n_steps, dtype=np.int64)
        for i in range(n_steps):
            cells[i] = p * n_cells // q
            p = (k * p) % q
    else:
        _check_domain(spec, x0)
        model = (spec.code, *spec.kernel_params, 0.0, 1, spec.domain.lower, spec.domain.upper)
        orbit = kernels.trajectory(model, float(x0), 0, 0, 0, n_steps - 1)
        cells = np.floor((orbit - spec.domain.lower) / resolution).astype(np.int64)
        cells = np.clip(cells, 0, n_cells - 1)
    return np.unique(cells).size / n_cells
