# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand sides and an adaptive DOP853 driver.

The state is a flat complex buffer. In Schrodinger mode it holds an
``n x m`` block of column vectors (row-major); in master-equation mode it
holds ``m`` density matrices of size ``n x n`` one after another. All loops
run without the GIL so independent evolutions can share a thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sin, cos, fabs, sqrt, pow, nextafter, INFINITY

cnp.import_array()

cdef double HALF_PI = 1.5707963267948966


cdef inline double envelope(int kind, const double[:] p, double t) noexcept nogil:
    cdef double s, F, x, ex, f
    if kind == 0:
        return p[0]
    s = t - p[1]
    if kind == 3:
        return p[0] * exp(-s * s / (2.0 * p[2] * p[2]))
    F = exp(-pow(fabs(s / p[2]), 2.0 * p[3]))
    if F == 0.0:
        return 0.0
    x = p[4] * s / (0.5 * p[2])
    if x >= 0:
        f = 1.0 / (1.0 + exp(-x))
    else:
        ex = exp(x)
        f = ex / (1.0 + ex)
    if kind == 1:
        return p[0] * F * sin(HALF_PI * f)
    return p[0] * F * cos(HALF_PI * f)


cdef class Problem:
    """Packed, read-only view of a compiled schedule."""

    cdef public int n, m, mode, sink
    cdef double[:, ::1] seg_t
    cdef double[:, ::1] seg_diag
    cdef int[::1] cp_seg
    cdef int[::1] cp_kind
    cdef double[:, ::1] cp_par
    cdef double complex[::1] cp_coef
    cdef int[::1] cp_off
    cdef int[::1] src
    cdef int[::1] dst
    cdef double[::1] gamma
    cdef int[::1] seg_cp_lo
    cdef int[::1] seg_cp_hi

    def __init__(self, compiled, int m):
        self.n = compiled.n
        self.m = m
        self.mode = 1 if compiled.master else 0
        self.sink = compiled.sink
        self.seg_t = np.ascontiguousarray(compiled.seg_t, dtype=np.float64)
        self.seg_diag = np.ascontiguousarray(compiled.seg_diag, dtype=np.float64)
        self.cp_seg = np.ascontiguousarray(compiled.cp_seg, dtype=np.intc)
        self.cp_kind = np.ascontiguousarray(compiled.cp_kind, dtype=np.intc)
        self.cp_par = np.ascontiguousarray(compiled.cp_par, dtype=np.float64).reshape(-1, 5)
        self.cp_coef = np.ascontiguousarray(compiled.cp_coef, dtype=np.complex128)
        self.cp_off = np.ascontiguousarray(compiled.cp_off, dtype=np.intc)
        self.src = np.ascontiguousarray(compiled.src, dtype=np.intc)
        self.dst = np.ascontiguousarray(compiled.dst, dtype=np.intc)
        self.gamma = np.ascontiguousarray(compiled.gamma, dtype=np.float64)
        # couplings are stored segment by segment; find each segment's slice
        nseg = self.seg_t.shape[0]
        lo = np.searchsorted(compiled.cp_seg, np.arange(nseg), side="left").astype(np.intc)
        hi = np.searchsorted(compiled.cp_seg, np.arange(nseg), side="right").astype(np.intc)
        self.seg_cp_lo = lo
        self.seg_cp_hi = hi

    cdef void rhs(self, int seg, double t, const double complex[::1] y,
                  double complex[::1] out) noexcept nogil:
        if self.mode == 0:
            self._rhs_schrodinger(seg, t, y, out)
        else:
            self._rhs_master(seg, t, y, out)

    cdef void _rhs_schrodinger(self, int seg, double t, const double complex[::1] y,
                               double complex[::1] out) noexcept nogil:
        cdef int n = self.n, m = self.m
        cdef int i, k, c, q, s, d
        cdef double om
        cdef double complex h, hc, mi = -1j
        for i in range(n):
            h = mi * self.seg_diag[seg, i]
            for k in range(m):
                out[i * m + k] = h * y[i * m + k]
        for c in range(self.seg_cp_lo[seg], self.seg_cp_hi[seg]):
            om = envelope(self.cp_kind[c], self.cp_par[c], t)
            if om == 0.0:
                continue
            h = mi * om * self.cp_coef[c]
            hc = mi * om * self.cp_coef[c].conjugate()
            for q in range(self.cp_off[c], self.cp_off[c + 1]):
                s = self.src[q]
                d = self.dst[q]
                for k in range(m):
                    out[d * m + k] = out[d * m + k] + h * y[s * m + k]
                    out[s * m + k] = out[s * m + k] + hc * y[d * m + k]

    cdef void _rhs_master(self, int seg, double t, const double complex[::1] y,
                          double complex[::1] out) noexcept nogil:
        cdef int n = self.n, nn = self.n * self.n
        cdef int b, i, j, c, q, s, d, base
        cdef double om, feed
        cdef double complex h, hc, mi = -1j
        for b in range(self.m):
            base = b * nn
            for i in range(n):
                for j in range(n):
                    out[base + i * n + j] = (
                        mi * (self.seg_diag[seg, i] - self.seg_diag[seg, j])
                        - 0.5 * (self.gamma[i] + self.gamma[j])
                    ) * y[base + i * n + j]
            if self.sink >= 0:
                feed = 0.0
                for i in range(n):
                    feed = feed + self.gamma[i] * y[base + i * n + i].real
                out[base + self.sink * n + self.sink] = out[base + self.sink * n + self.sink] + feed
        for c in range(self.seg_cp_lo[seg], self.seg_cp_hi[seg]):
            om = envelope(self.cp_kind[c], self.cp_par[c], t)
            if om == 0.0:
                continue
            # H[d, s] = h, H[s, d] = conj(h); out += -i (H rho - rho H)
            h = om * self.cp_coef[c]
            hc = h.conjugate()
            for b in range(self.m):
                base = b * nn
                for q in range(self.cp_off[c], self.cp_off[c + 1]):
                    s = self.src[q]
                    d = self.dst[q]
                    for j in range(n):
                        out[base + d * n + j] = out[base + d * n + j] + mi * h * y[base + s * n + j]
                        out[base + s * n + j] = out[base + s * n + j] + mi * hc * y[base + d * n + j]
                    for i in range(n):
                        out[base + i * n + s] = out[base + i * n + s] - mi * y[base + i * n + d] * h
                        out[base + i * n + d] = out[base + i * n + d] - mi * y[base + i * n + s] * hc


def rhs(compiled, int m, int seg, double t, y):
    """Evaluate the right-hand side once (used for cross-backend checks)."""
    cdef Problem p = Problem(compiled, m)
    cdef double complex[::1] yv = np.ascontiguousarray(y, dtype=np.complex128).ravel()
    out = np.empty(yv.shape[0], dtype=np.complex128)
    cdef double complex[::1] ov = out
    with nogil:
        p.rhs(seg, t, yv, ov)
    return out


cdef double error_norm(const double complex[:, ::1] K, const double complex[::1] y,
                       const double complex[::1] ynew, const double[::1] E3,
                       const double[::1] E5, double h, double rtol, double atol) noexcept nogil:
    cdef Py_ssize_t L = y.shape[0], i
    cdef int j
    cdef double scale, a, b, n5 = 0.0, n3 = 0.0, r
    cdef double complex e3, e5
    for i in range(L):
        a = abs(y[i])
        b = abs(ynew[i])
        scale = atol + rtol * (a if a > b else b)
        e3 = 0
        e5 = 0
        for j in range(13):
            e3 = e3 + E3[j] * K[j, i]
            e5 = e5 + E5[j] * K[j, i]
        r = abs(e5) / scale
        n5 = n5 + r * r
        r = abs(e3) / scale
        n3 = n3 + r * r
    if n5 == 0.0 and n3 == 0.0:
        return 0.0
    return fabs(h) * n5 / sqrt((n5 + 0.01 * n3) * L)


def propagate(compiled, y0, times, double rtol, double atol, long max_steps,
              double[:, ::1] A, double[::1] B, double[::1] C, double[::1] E3, double[::1] E5):
    """Integrate ``y0`` across all segments and return the state at ``times``.

    Returns ``(states, status, t_fail, n_steps, n_fev)``; ``status`` is 0 on
    success, 1 on step-size underflow and 2 when ``max_steps`` is exceeded.
    """
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    shape = y0.shape
    cdef int m
    if compiled.master:
        m = 1 if y0.ndim == 2 else shape[0]
    else:
        m = 1 if y0.ndim == 1 else shape[1]
    cdef Problem p = Problem(compiled, m)
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t L = y0.size
    cdef Py_ssize_t nt = tv.shape[0]
    out = np.empty((nt, L), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef double complex[::1] y = y0.ravel().copy()
    cdef double complex[::1] ynew = np.empty(L, dtype=np.complex128)
    cdef double complex[::1] ytmp = np.empty(L, dtype=np.complex128)
    cdef double complex[:, ::1] K = np.empty((13, L), dtype=np.complex128)
    cdef int nseg = p.seg_t.shape[0]
    cdef int seg, s, j, status = 0
    cdef Py_ssize_t i, sample = 0
    cdef long steps = 0, fev = 0
    cdef double t, t_end, target, h, h_abs = 0.0, err, factor, d0, d1, sc, t_fail = 0.0
    cdef bint rejected, clipped

    with nogil:
        for seg in range(nseg):
            t = p.seg_t[seg, 0]
            t_end = p.seg_t[seg, 1]
            # samples sitting before this segment's end are taken when reached
            while sample < nt and tv[sample] <= t:
                for i in range(L):
                    ov[sample, i] = y[i]
                sample += 1
            if t_end <= t:
                continue
            p.rhs(seg, t, y, K[0])
            fev += 1
            if h_abs == 0.0:
                d0 = 0.0
                d1 = 0.0
                for i in range(L):
                    sc = atol + rtol * abs(y[i])
                    d0 = d0 + (abs(y[i]) / sc) ** 2
                    d1 = d1 + (abs(K[0, i]) / sc) ** 2
                d0 = sqrt(d0 / L)
                d1 = sqrt(d1 / L)
                if d0 < 1e-5 or d1 < 1e-5:
                    h_abs = 1e-6 * (t_end - t)
                else:
                    h_abs = 0.01 * d0 / d1
            while t < t_end:
                target = t_end
                if sample < nt and tv[sample] < t_end:
                    target = tv[sample]
                rejected = False
                while True:
                    if h_abs < 10.0 * fabs(nextafter(t, INFINITY) - t):
                        status = 1
                        t_fail = t
                        break
                    if steps >= max_steps:
                        status = 2
                        t_fail = t
                        break
                    h = h_abs
                    clipped = False
                    if t + h >= target:
                        h = target - t
                        clipped = True
                    for s in range(1, 12):
                        for i in range(L):
                            ytmp[i] = y[i]
                            for j in range(s):
                                if A[s, j] != 0.0:
                                    ytmp[i] = ytmp[i] + h * A[s, j] * K[j, i]
                        p.rhs(seg, t + C[s] * h, ytmp, K[s])
                    for i in range(L):
                        ynew[i] = y[i]
                        for j in range(12):
                            if B[j] != 0.0:
                                ynew[i] = ynew[i] + h * B[j] * K[j, i]
                    p.rhs(seg, t + h, ynew, K[12])
                    fev += 12
                    steps += 1
                    err = error_norm(K, y, ynew, E3, E5, h, rtol, atol)
                    if err < 1.0:
                        if err == 0.0:
                            factor = 10.0
                        else:
                            factor = 0.9 * err ** (-1.0 / 8.0)
                            if factor > 10.0:
                                factor = 10.0
                            if factor < 0.2:
                                factor = 0.2
                        if rejected and factor > 1.0:
                            factor = 1.0
                        if clipped:
                            if h * factor > h_abs:
                                h_abs = h * factor
                            t = target
                        else:
                            h_abs = h * factor
                            t = t + h
                        for i in range(L):
                            y[i] = ynew[i]
                            K[0, i] = K[12, i]
                        break
                    factor = 0.9 * err ** (-1.0 / 8.0)
                    if factor < 0.2:
                        factor = 0.2
                    h_abs = h * factor
                    rejected = True
                if status != 0:
                    break
                while sample < nt and tv[sample] <= t:
                    for i in range(L):
                        ov[sample, i] = y[i]
                    sample += 1
            if status != 0:
                break
        if status == 0:
            while sample < nt:
                for i in range(L):
                    ov[sample, i] = y[i]
                sample += 1

    return out.reshape((nt,) + shape), status, t_fail, steps, fev
