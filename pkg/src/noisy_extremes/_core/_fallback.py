"""Pure numpy implementation of the simulation kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and the same floating-point operation order, so both backends produce
bit-identical output for every map (the extension is built without
floating-point contraction).

A *model* is the flat tuple ``(map_code, p0, p1, eps, boundary, lo, hi)``
built by :func:`noisy_extremes.noise.pack_model`.
"""

import itertools
import math

import numpy as np

MAP_DOUBLING = 0
MAP_LORENZ = 1
MAP_QUADRATIC = 2
MAP_GAUSS = 3

BOUNDARY_WRAP = 0
BOUNDARY_REFLECT = 1

GAUSS_FLOOR = 1e-12

_ROT = (16, 42, 12, 31, 16, 32, 24, 21)
_PARITY = np.uint64(0x1BD11BDAA9FC1A22)
_U64 = np.uint64
_TO_UNIT = 2.0 ** -53
# time steps generated per vectorized slab
_SLAB = 256


def _rotl(x, r):
    return (x << _U64(r)) | (x >> _U64(64 - r))


def threefry2x64(c0, c1, k0, k1):
    """Threefry-2x64 with 20 rounds; broadcasting over all four inputs."""
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    ks = (k0, k1, _PARITY ^ k0 ^ k1)
    with np.errstate(over="ignore"):
        x0 = c0 + k0
        x1 = c1 + k1
        for r in range(20):
            x0 = x0 + x1
            x1 = _rotl(x1, _ROT[r % 8])
            x1 = x1 ^ x0
            if r % 4 == 3:
                s = (r + 1) // 4
                x0 = x0 + ks[s % 3]
                x1 = x1 + ks[(s + 1) % 3] + _U64(s)
    return x0, x1


def random_raw(seed, streams, counters):
    """64-bit draw number ``counters`` of stream ``(seed, streams)``.

    Draw ``c`` is word ``c & 1`` of the block with counter ``(c >> 1, 0)``.
    """
    counters = np.asarray(counters, dtype=np.uint64)
    streams = np.asarray(streams, dtype=np.uint64)
    block = counters >> _U64(1)
    w0, w1 = threefry2x64(block, _U64(0), _U64(seed), streams)
    return np.where((counters & _U64(1)) == 0, w0, w1)


def uniforms(seed, stream, counter, n):
    """``n`` consecutive doubles in [0, 1) starting at draw ``counter``."""
    c = np.uint64(counter) + np.arange(n, dtype=np.uint64)
    raw = random_raw(seed, np.uint64(stream), c)
    return (raw >> _U64(11)).astype(np.float64) * _TO_UNIT


def _uniform_slab(seed, streams, counter0, width):
    c = np.uint64(counter0) + np.arange(width, dtype=np.uint64)
    raw = random_raw(seed, streams[:, None], c[None, :])
    return (raw >> _U64(11)).astype(np.float64) * _TO_UNIT


def apply_map_array(model, x):
    code, p0, p1 = model[0], model[1], model[2]
    x = np.asarray(x, dtype=np.float64)
    if code == MAP_DOUBLING:
        y = p0 * x
        return y - np.floor(y)
    if code == MAP_LORENZ:
        # math.pow is the C library pow used by the compiled twin; numpy's
        # vectorized power may differ from it in the last bit
        ax = np.abs(x).ravel().tolist()
        powed = np.fromiter(map(math.pow, ax, itertools.repeat(p0)), np.float64, len(ax))
        branch = p1 * powed.reshape(x.shape) - 1.0
        return np.where(x > 0.0, branch, np.where(x < 0.0, -branch, -1.0))
    if code == MAP_QUADRATIC:
        return p0 - x * x
    if code == MAP_GAUSS:
        y = 1.0 / np.maximum(x, GAUSS_FLOOR)
        return y - np.floor(y)
    raise ValueError(f"unknown map code {code}")


def _fold_array(model, y):
    lo, hi = model[5], model[6]
    if model[4] == BOUNDARY_WRAP:
        y = y - np.floor(y)
        return np.where(y >= 1.0, 0.0, y)
    y = np.where(y < lo, 2.0 * lo - y, y)
    return np.where(y > hi, 2.0 * hi - y, y)


def step_array(model, x, u):
    """One randomized step for arrays of points and uniforms."""
    fx = apply_map_array(model, x)
    return _fold_array(model, fx + model[3] * (2.0 * u - 1.0))


def apply_map_scalar(model, x):
    code, p0, p1 = model[0], model[1], model[2]
    if code == MAP_DOUBLING:
        y = p0 * x
        return y - math.floor(y)
    if code == MAP_LORENZ:
        if x > 0.0:
            return p1 * math.pow(x, p0) - 1.0
        if x < 0.0:
            return -(p1 * math.pow(-x, p0) - 1.0)
        return -1.0
    if code == MAP_QUADRATIC:
        return p0 - x * x
    if code == MAP_GAUSS:
        y = 1.0 / max(x, GAUSS_FLOOR)
        return y - math.floor(y)
    raise ValueError(f"unknown map code {code}")


def step_scalar(model, x, u):
    y = apply_map_scalar(model, x) + model[3] * (2.0 * u - 1.0)
    if model[4] == BOUNDARY_WRAP:
        y = y - math.floor(y)
        return 0.0 if y >= 1.0 else y
    lo, hi = model[5], model[6]
    if y < lo:
        y = 2.0 * lo - y
    if y > hi:
        y = 2.0 * hi - y
    return y


def _distance_array(model, x, zeta):
    d = np.abs(x - zeta)
    if model[4] == BOUNDARY_WRAP:
        d = np.minimum(d, 1.0 - d)
    return d


def trajectory(model, x0, seed, stream, counter, n):
    out = np.empty(n + 1, dtype=np.float64)
    out[0] = x0
    x = float(x0)
    done = 0
    while done < n:
        width = min(65536, n - done)
        u = uniforms(seed, stream, counter + done, width).tolist()
        for k in range(width):
            x = step_scalar(model, x, u[k])
            out[done + k + 1] = x
        done += width
    return out


def first_entry(model, x0, seed, streams, counter0, zeta, radius, cap):
    """First ``j >= 1`` with ``dist(x_j, zeta) < radius``, or -1 past ``cap``.

    Trial ``i`` starts at ``x0[i]`` and draws from stream ``streams[i]``
    beginning at counter ``counter0``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    result = np.full(x0.shape[0], -1, dtype=np.int64)
    active = np.arange(x0.shape[0])
    x = x0.copy()
    j = 0
    while active.size and j < cap:
        width = min(_SLAB, cap - j)
        u = _uniform_slab(seed, streams[active], counter0 + j, width)
        alive = np.ones(active.size, dtype=bool)
        for k in range(width):
            x = step_array(model, x, u[:, k])
            hit = alive & (_distance_array(model, x, zeta) < radius)
            if hit.any():
                result[active[hit]] = j + k + 1
                alive &= ~hit
        j += width
        active = active[alive]
        x = x[alive]
    return result


def exceedance_times(model, x0, seed, streams, counter0, length, zeta, radius):
    """Times ``t`` in ``[0, length)`` with ``dist(x_t, zeta) < radius``.

    Returns ``(chain, time)`` int64 arrays sorted by chain then time.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    if x0.shape[0] < 16:
        return _exceedance_times_scalar(model, x0, seed, streams, counter0,
                                        length, zeta, radius)
    chains, times = [], []
    x = x0.copy()
    idx = np.arange(x0.shape[0])
    hit = _distance_array(model, x, zeta) < radius
    if length > 0 and hit.any():
        chains.append(idx[hit])
        times.append(np.zeros(int(hit.sum()), dtype=np.int64))
    t = 1
    while t < length:
        width = min(_SLAB, length - t)
        u = _uniform_slab(seed, streams, counter0 + t - 1, width)
        for k in range(width):
            x = step_array(model, x, u[:, k])
            hit = _distance_array(model, x, zeta) < radius
            if hit.any():
                chains.append(idx[hit])
                times.append(np.full(int(hit.sum()), t + k, dtype=np.int64))
        t += width
    if not chains:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    chain = np.concatenate(chains)
    time = np.concatenate(times)
    order = np.lexsort((time, chain))
    return chain[order], time[order]


def _exceedance_times_scalar(model, x0, seed, streams, counter0, length,
                             zeta, radius):
    circle = model[4] == BOUNDARY_WRAP
    chains, times = [], []
    for c in range(x0.shape[0]):
        x = float(x0[c])
        stream = int(streams[c])
        t = 0
        while t < length:
            if t == 0:
                u = ()
            else:
                width = min(65536, length - t)
                u = uniforms(seed, stream, counter0 + t - 1, width).tolist()
            for k in range(max(len(u), 1)):
                if t > 0:
                    x = step_scalar(model, x, u[k])
                d = abs(x - zeta)
                if circle and 1.0 - d < d:
                    d = 1.0 - d
                if d < radius:
                    chains.append(c)
                    times.append(t)
                t += 1
                if t >= length:
                    break
    return np.asarray(chains, dtype=np.int64), np.asarray(times, dtype=np.int64)


def advance(model, x0, seed, streams, counter0, steps):
    """Positions after ``steps`` randomized steps, one chain per stream."""
    x = np.asarray(x0, dtype=np.float64).copy()
    streams = np.asarray(streams, dtype=np.uint64)
    j = 0
    while j < steps:
        width = min(_SLAB, steps - j)
        u = _uniform_slab(seed, streams, counter0 + j, width)
        for k in range(width):
            x = step_array(model, x, u[:, k])
        j += width
    return x
