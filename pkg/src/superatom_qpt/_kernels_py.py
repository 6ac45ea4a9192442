"""Pure-Python backend: scipy's DOP853 driven segment by segment.

Same contract as the compiled module. Slower by a large constant factor
but needs nothing beyond numpy and scipy.
"""

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

HALF_PI = 0.5 * np.pi


def envelope(kind, p, t):
    if kind == 0:
        return p[0]
    s = t - p[1]
    if kind == 3:
        return p[0] * np.exp(-s * s / (2.0 * p[2] * p[2]))
    with np.errstate(over="ignore"):
        F = np.exp(-(abs(s / p[2]) ** (2.0 * p[3])))
    if F == 0.0:
        return 0.0
    x = p[4] * s / (0.5 * p[2])
    if x >= 0:
        f = 1.0 / (1.0 + np.exp(-x))
    else:
        ex = np.exp(x)
        f = ex / (1.0 + ex)
    trig = np.sin if kind == 1 else np.cos
    return p[0] * F * trig(HALF_PI * f)


class _Segment:
    def __init__(self, compiled, seg):
        n = compiled.n
        self.diag = np.asarray(compiled.seg_diag[seg], dtype=float)
        self.terms = []
        for c in np.flatnonzero(np.asarray(compiled.cp_seg) == seg):
            lo, hi = compiled.cp_off[c], compiled.cp_off[c + 1]
            src, dst = compiled.src[lo:hi], compiled.dst[lo:hi]
            coef = compiled.cp_coef[c]
            # lower part carries coef, its transpose the conjugate
            op = sparse.csr_matrix(
                (np.full(hi - lo, coef), (dst, src)), shape=(n, n), dtype=complex
            )
            op = (op + op.conj().T).tocsr()
            self.terms.append((int(compiled.cp_kind[c]), np.asarray(compiled.cp_par[c]), op))
        self.n = n

    def apply(self, t, y):
        """``H(t) @ y`` for a dense ``y`` of shape ``(n, k)``."""
        out = self.diag[:, None] * y
        for kind, par, op in self.terms:
            om = envelope(kind, par, t)
            if om != 0.0:
                out = out + om * (op @ y)
        return out


def rhs(compiled, m, seg, t, y):
    segment = _Segment(compiled, seg)
    return _make_fun(compiled, segment, m)(t, np.ravel(y).astype(complex))


def _make_fun(compiled, segment, m):
    n = compiled.n
    if not compiled.master:

        def fun(t, y):
            return (-1j * segment.apply(t, y.reshape(n, m))).ravel()

        return fun
    gamma = np.asarray(compiled.gamma, dtype=float)
    loss = -0.5 * (gamma[:, None] + gamma[None, :])
    sink = compiled.sink

    def fun(t, y):
        R = y.reshape(m, n, n)
        out = np.empty_like(R)
        for b in range(m):
            r = R[b]
            hr = segment.apply(t, r)
            # H is Hermitian, so rho H = (H rho^dagger)^dagger
            rh = segment.apply(t, r.conj().T).conj().T
            out[b] = -1j * (hr - rh) + loss * r
            if sink >= 0:
                out[b, sink, sink] += np.dot(gamma, np.real(np.diag(r)))
        return out.ravel()

    return fun


def propagate(compiled, y0, times, rtol, atol, max_steps, A=None, B=None, C=None, E3=None, E5=None):
    y0 = np.ascontiguousarray(y0, dtype=complex)
    shape = y0.shape
    if compiled.master:
        m = 1 if y0.ndim == 2 else shape[0]
    else:
        m = 1 if y0.ndim == 1 else shape[1]
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), y0.size), dtype=complex)
    y = y0.ravel().copy()
    sample, steps, fev = 0, 0, 0
    for seg in range(len(compiled.seg_t)):
        t0, t1 = compiled.seg_t[seg]
        while sample < len(times) and times[sample] <= t0:
            out[sample] = y
            sample += 1
        if t1 <= t0:
            continue
        inside = times[sample:]
        inside = inside[inside <= t1]
        fun = _make_fun(compiled, _Segment(compiled, seg), m)
        t_eval = inside if inside.size and inside[-1] == t1 else np.append(inside, t1)
        sol = solve_ivp(
            fun, (t0, t1), y, method="DOP853", t_eval=t_eval,
            rtol=rtol, atol=atol,
        )
        steps += sol.nfev // 12
        fev += sol.nfev
        if sol.status != 0:
            return out.reshape((len(times),) + shape), 1, float(sol.t[-1]), steps, fev
        if steps > max_steps:
            return out.reshape((len(times),) + shape), 2, float(t1), steps, fev
        for k in range(len(inside)):
            out[sample] = sol.y[:, k]
            sample += 1
        y = sol.y[:, -1].copy()
    while sample < len(times):
        out[sample] = y
        sample += 1
    return out.reshape((len(times),) + shape), 0, 0.0, steps, fev
