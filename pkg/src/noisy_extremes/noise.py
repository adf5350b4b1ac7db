"""Uniform additive perturbations: sampling, transition density and certification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._core import _fallback, kernels
from .dynamics import MapSpec, _check_domain, apply_map
from .stream import RandomStream


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise uniform on (-epsilon, epsilon).

    ``boundary`` is ``"wrap"`` on circles and ``"reflect"`` on intervals.
    ``epsilon = 0`` switches the noise off (the draws are still consumed).
    """

    epsilon: float
    boundary: str = "wrap"

    def __post_init__(self):
        if self.boundary not in ("wrap", "reflect"):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be non-negative")

    @property
    def disabled(self) -> bool:
        return self.epsilon == 0.0

    @property
    def id(self) -> str:
        return f"uniform:epsilon={self.epsilon:g}:boundary={self.boundary}"


def parse_noise(text: str) -> NoiseSpec:
    """Parse ``uniform:epsilon=E:boundary=wrap|reflect``."""
    parts = text.strip().split(":")
    if parts[0].lower() != "uniform":
        raise ValueError(f"unsupported noise law in {text!r}")
    fields = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad noise field {part!r} in {text!r}")
        fields[key.strip().lower()] = value.strip()
    unknown = set(fields) - {"epsilon", "boundary"}
    if unknown or "epsilon" not in fields:
        raise ValueError(f"noise id {text!r} needs epsilon= and optional boundary=")
    return NoiseSpec(float(fields["epsilon"]), fields.get("boundary", "wrap"))


def check_compatible(spec: MapSpec, noise: NoiseSpec) -> None:
    if spec.domain.is_circle != (noise.boundary == "wrap"):
        raise ValueError("wrap noise needs a circle domain and reflect noise an interval")
    if noise.epsilon > spec.domain.length / 2:
        raise ValueError("epsilon may not exceed half the domain length")


def pack_model(spec: MapSpec, noise: NoiseSpec) -> tuple:
    """Flat parameter tuple consumed by the simulation kernels."""
    check_compatible(spec, noise)
    boundary = _fallback.BOUNDARY_WRAP if noise.boundary == "wrap" else _fallback.BOUNDARY_REFLECT
    p0, p1 = spec.kernel_params
    return (spec.code, p0, p1, float(noise.epsilon), boundary,
            float(spec.domain.lower), float(spec.domain.upper))


def sample_step(spec: MapSpec, noise: NoiseSpec, x: float, stream: RandomStream) -> float:
    """``f(x) + omega`` folded back into the domain; consumes one draw."""
    model = pack_model(spec, noise)
    _check_domain(spec, x)
    return _fallback.step_scalar(model, float(x), stream.uniform())


def simulate_trajectory(spec: MapSpec, noise: NoiseSpec, x0: float, n: int,
                        stream: RandomStream) -> np.ndarray:
    """Random orbit ``x0, x1, ..., xn``; consumes exactly ``n`` draws."""
    if n < 0:
        raise ValueError("n must be non-negative")
    model = pack_model(spec, noise)
    _check_domain(spec, x0)
    out = kernels.trajectory(model, float(x0), stream.seed, stream.stream_id,
                             stream.counter, n)
    stream.counter += n
    return out


def fold_count(spec: MapSpec, noise: NoiseSpec, centre, y):
    """Number of mirror images of ``y`` within epsilon of ``centre``."""
    eps = noise.epsilon
    centre = np.asarray(centre, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if eps == 0.0:
        return np.zeros(np.broadcast(centre, y).shape, dtype=np.int64)
    if noise.boundary == "wrap":
        return (np.asarray(spec.domain.distance(y, centre)) < eps).astype(np.int64)
    lo, hi = spec.domain.lower, spec.domain.upper
    count = np.zeros(np.broadcast(centre, y).shape, dtype=np.int64)
    for image in (y, 2.0 * lo - y, 2.0 * hi - y):
        count += np.abs(image - centre) < eps
    return count


def density(spec: MapSpec, noise: NoiseSpec, x, y):
    """Transition density q_x(y) with respect to Lebesgue measure."""
    check_compatible(spec, noise)
    _check_domain(spec, y)
    if noise.disabled:
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return out if out.ndim else 0.0
    q = fold_count(spec, noise, apply_map(spec, x), y) / (2.0 * noise.epsilon)
    return q if np.ndim(q) else float(q)


@dataclass(frozen=True)
class PerturbationReport:
    rho0: float
    lower_q: float
    upper_q: float
    holds: bool
    resolution: float
    probes: int


def verify_perturbation_conditions(spec: MapSpec, noise: NoiseSpec,
                                   m: int = 256) -> PerturbationReport:
    """Grid certificate of the covering radius and density bounds.

    Probes are the ``m`` cell midpoints. For each probe the density is read at
    offsets ``k * L / m`` on both sides of ``f(x)``; the covering radius of the
    probe is the smallest offset with zero density, so ``rho0`` is exact only
    up to the reported ``resolution``.
    """
    if m < 64:
        raise ValueError("use at least 64 probes")
    check_compatible(spec, noise)
    h = spec.domain.length / m
    x = spec.domain.cell_midpoints(m)
    centre = apply_map(spec, x)
    half = spec.domain.length / 2 if spec.domain.is_circle else spec.domain.length
    offsets = h * np.arange(0, int(np.floor(half / h + 1e-9)) + 1)
    signed = np.concatenate([-offsets[:0:-1], offsets])
    y = centre[:, None] + signed[None, :]
    if spec.domain.is_circle:
        inside = np.ones(y.shape, dtype=bool)
        y = np.mod(y, 1.0)
        y = np.where(y >= 1.0, 0.0, y)
    else:
        inside = (y >= spec.domain.lower) & (y <= spec.domain.upper)
        y = np.clip(y, spec.domain.lower, spec.domain.upper)
    if noise.disabled:
        q = np.zeros(y.shape)
    else:
        q = fold_count(spec, noise, centre[:, None], y) / (2.0 * noise.epsilon)
    zero = inside & (q <= 0.0)
    dist = np.broadcast_to(np.abs(signed)[None, :], y.shape)
    radius = np.where(zero, dist, np.inf).min(axis=1)
    radius = np.where(np.isinf(radius), half, radius)
    rho0 = float(radius.min())
    positive = q[inside & (q > 0.0)]
    lower_q = float(positive.min()) if positive.size else 0.0
    upper_q = float(positive.max()) if positive.size else 0.0
    return PerturbationReport(rho0, lower_q, upper_q, rho0 > 0.0 and lower_q > 0.0, h, m)
