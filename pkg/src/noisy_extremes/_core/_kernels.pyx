# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels; see ``_fallback.py`` for the reference twin."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, pow, fabs
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef enum:
    MAP_DOUBLING = 0
    MAP_LORENZ = 1
    MAP_QUADRATIC = 2
    MAP_GAUSS = 3
    BOUNDARY_WRAP = 0

cdef double GAUSS_FLOOR = 1e-12
cdef double TO_UNIT = 1.0 / 9007199254740992.0
cdef uint64_t PARITY = 0x1BD11BDAA9FC1A22ULL


ctypedef struct Model:
    int code
    double p0
    double p1
    double eps
    int boundary
    double lo
    double hi


cdef Model _unpack(model):
    cdef Model m
    m.code = <int>model[0]
    m.p0 = <double>model[1]
    m.p1 = <double>model[2]
    m.eps = <double>model[3]
    m.boundary = <int>model[4]
    m.lo = <double>model[5]
    m.hi = <double>model[6]
    return m


cdef inline uint64_t _rotl(uint64_t x, int r) noexcept nogil:
    return (x << r) | (x >> (64 - r))


cdef inline void _threefry(uint64_t c0, uint64_t c1, uint64_t k0, uint64_t k1,
                           uint64_t* out0, uint64_t* out1) noexcept nogil:
    # rounds unrolled; rotation schedule 16 42 12 31 16 32 24 21
    cdef uint64_t k2 = PARITY ^ k0 ^ k1
    cdef uint64_t x0 = c0 + k0
    cdef uint64_t x1 = c1 + k1
    x0 += x1; x1 = _rotl(x1, 16); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 42); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 12); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 31); x1 ^= x0
    x0 += k1; x1 += k2 + 1
    x0 += x1; x1 = _rotl(x1, 16); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 32); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 24); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 21); x1 ^= x0
    x0 += k2; x1 += k0 + 2
    x0 += x1; x1 = _rotl(x1, 16); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 42); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 12); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 31); x1 ^= x0
    x0 += k0; x1 += k1 + 3
    x0 += x1; x1 = _rotl(x1, 16); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 32); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 24); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 21); x1 ^= x0
    x0 += k1; x1 += k2 + 4
    x0 += x1; x1 = _rotl(x1, 16); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 42); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 12); x1 ^= x0
    x0 += x1; x1 = _rotl(x1, 31); x1 ^= x0
    x0 += k2; x1 += k0 + 5
    out0[0] = x0
    out1[0] = x1


cdef inline double _unit(uint64_t raw) noexcept nogil:
    return <double>(raw >> 11) * TO_UNIT


ctypedef struct Cursor:
    uint64_t seed
    uint64_t stream
    uint64_t counter
    uint64_t spare


cdef inline void _cursor_init(Cursor* c, uint64_t seed, uint64_t stream,
                              uint64_t counter) noexcept nogil:
    cdef uint64_t w0
    c.seed = seed
    c.stream = stream
    c.counter = counter
    c.spare = 0
    if counter & 1:
        _threefry(counter >> 1, 0, seed, stream, &w0, &c.spare)


cdef inline double _next(Cursor* c) noexcept nogil:
    # odd draws reuse the second word of the block computed on the even draw
    cdef uint64_t r
    if c.counter & 1:
        r = c.spare
    else:
        _threefry(c.counter >> 1, 0, c.seed, c.stream, &r, &c.spare)
    c.counter += 1
    return _unit(r)


cdef inline double _apply_map(const Model* m, double x) noexcept nogil:
    cdef double y
    if m.code == MAP_DOUBLING:
        y = m.p0 * x
        return y - floor(y)
    if m.code == MAP_LORENZ:
        if x > 0.0:
            return m.p1 * pow(x, m.p0) - 1.0
        if x < 0.0:
            return -(m.p1 * pow(-x, m.p0) - 1.0)
        return -1.0
    if m.code == MAP_QUADRATIC:
        return m.p0 - x * x
    # Gauss
    if x < GAUSS_FLOOR:
        x = GAUSS_FLOOR
    y = 1.0 / x
    return y - floor(y)


cdef inline double _step(const Model* m, double x, double u) noexcept nogil:
    cdef double y = _apply_map(m, x) + m.eps * (2.0 * u - 1.0)
    if m.boundary == BOUNDARY_WRAP:
        y = y - floor(y)
        if y >= 1.0:
            y = 0.0
        return y
    if y < m.lo:
        y = 2.0 * m.lo - y
    if y > m.hi:
        y = 2.0 * m.hi - y
    return y


cdef inline double _distance(const Model* m, double x, double zeta) noexcept nogil:
    cdef double d = fabs(x - zeta)
    if m.boundary == BOUNDARY_WRAP and 1.0 - d < d:
        d = 1.0 - d
    return d


def threefry2x64(c0, c1, k0, k1):
    """Scalar Threefry-2x64-20 block; returns the two output words."""
    cdef uint64_t w0, w1
    _threefry(<uint64_t>c0, <uint64_t>c1, <uint64_t>k0, <uint64_t>k1, &w0, &w1)
    return w0, w1


def uniforms(seed, stream, counter, Py_ssize_t n):
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t st = <uint64_t>stream
    cdef uint64_t c = <uint64_t>counter
    cdef Py_ssize_t i
    cdef Cursor cur
    with nogil:
        _cursor_init(&cur, s, st, c)
        for i in range(n):
            ov[i] = _next(&cur)
    return out


def apply_map_array(model, x):
    cdef Model m = _unpack(model)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _apply_map(&m, xv[i])
    return out.reshape(np.shape(x))


def step_array(model, x, u):
    cdef Model m = _unpack(model)
    xb, ub = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                 np.asarray(u, dtype=np.float64))
    cdef double[::1] xv = np.ascontiguousarray(xb).ravel()
    cdef double[::1] uv = np.ascontiguousarray(ub).ravel()
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _step(&m, xv[i], uv[i])
    return out.reshape(xb.shape)


def trajectory(model, double x0, seed, stream, counter, Py_ssize_t n):
    cdef Model m = _unpack(model)
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] ov = out
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t st = <uint64_t>stream
    cdef uint64_t c = <uint64_t>counter
    cdef double x = x0
    cdef Py_ssize_t i
    cdef Cursor cur
    ov[0] = x0
    with nogil:
        _cursor_init(&cur, s, st, c)
        for i in range(n):
            x = _step(&m, x, _next(&cur))
            ov[i + 1] = x
    return out


def first_entry(model, x0, seed, streams, counter0, double zeta, double radius,
                int64_t cap):
    cdef Model m = _unpack(model)
    cdef double[::1] xv = np.ascontiguousarray(x0, dtype=np.float64)
    cdef uint64_t[::1] sv = np.ascontiguousarray(streams, dtype=np.uint64)
    result = np.full(xv.shape[0], -1, dtype=np.int64)
    cdef int64_t[::1] rv = result
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t c0 = <uint64_t>counter0
    cdef Py_ssize_t i
    cdef int64_t j
    cdef double x
    cdef Cursor cur
    with nogil:
        for i in range(xv.shape[0]):
            x = xv[i]
            _cursor_init(&cur, s, sv[i], c0)
            for j in range(cap):
                x = _step(&m, x, _next(&cur))
                if _distance(&m, x, zeta) < radius:
                    rv[i] = j + 1
                    break
    return result


def exceedance_times(model, x0, seed, streams, counter0, int64_t length,
                     double zeta, double radius):
    cdef Model m = _unpack(model)
    cdef double[::1] xv = np.ascontiguousarray(x0, dtype=np.float64)
    cdef uint64_t[::1] sv = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t c0 = <uint64_t>counter0
    cdef Py_ssize_t i, count = 0, capacity = 1024
    cdef int64_t t
    cdef double x
    cdef bint pending
    cdef Cursor cur
    chain = np.empty(capacity, dtype=np.int64)
    time = np.empty(capacity, dtype=np.int64)
    cdef int64_t[::1] cv = chain
    cdef int64_t[::1] tv = time
    for i in range(xv.shape[0]):
        x = xv[i]
        t = 0
        _cursor_init(&cur, s, sv[i], c0)
        while t < length:
            pending = False
            with nogil:
                while t < length:
                    if t > 0:
                        x = _step(&m, x, _next(&cur))
                    t += 1
                    if _distance(&m, x, zeta) < radius:
                        if count == capacity:
                            pending = True
                            break
                        cv[count] = i
                        tv[count] = t - 1
                        count += 1
            if pending:
                capacity *= 2
                chain = np.resize(chain, capacity)
                time = np.resize(time, capacity)
                cv = chain
                tv = time
                cv[count] = i
                tv[count] = t - 1
                count += 1
    return chain[:count].copy(), time[:count].copy()


def advance(model, x0, seed, streams, counter0, int64_t steps):
    cdef Model m = _unpack(model)
    out = np.array(x0, dtype=np.float64, copy=True).ravel()
    cdef double[::1] xv = out
    cdef uint64_t[::1] sv = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t c0 = <uint64_t>counter0
    cdef Py_ssize_t i
    cdef int64_t j
    cdef double x
    cdef Cursor cur
    with nogil:
        for i in range(xv.shape[0]):
            x = xv[i]
            _cursor_init(&cur, s, sv[i], c0)
            for j in range(steps):
                x = _step(&m, x, _next(&cur))
            xv[i] = x
    return out
