"""Least-squares projection of measured matrices onto physical ones.

Physical matrices are parametrised as ``T^dagger T`` with ``T`` lower
triangular and a real diagonal, which makes them Hermitian and positive
semidefinite by construction. The parameter vector lists the diagonal of
``T`` first, then the real and imaginary parts of the strictly lower
entries in row-major order.

Densities are normalised by their trace inside the objective. Process
matrices carry the trace-preservation constraint
``sum_mn chi_mn sigma_n^dagger sigma_m = I``, handled with an augmented
Lagrangian around scipy's L-BFGS-B and an analytic gradient.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import pauli_basis
from .errors import ConvergenceFailure, InvalidArgument

HERMITIAN_TOL = 1e-6
CONSTRAINT_TOL = 1e-10
ACCEPT_VIOLATION = 1e-8
MAX_OUTER = 12
PENALTY0 = 10.0
PENALTY_GROWTH = 10.0
MAX_FEVAL = 10_000


def n_params(d):
    return d * d


def _lower_indices(d):
    return np.tril_indices(d, -1)


def params_to_T(t, d):
    t = np.asarray(t, dtype=float)
    if t.shape != (d * d,):
        raise InvalidArgument(f"expected {d * d} parameters, got {t.shape}")
    T = np.zeros((d, d), dtype=complex)
    T[np.diag_indices(d)] = t[:d]
    rows, cols = _lower_indices(d)
    off = t[d:].reshape(-1, 2)
    T[rows, cols] = off[:, 0] + 1j * off[:, 1]
    return T


def T_to_params(T):
    d = T.shape[0]
    rows, cols = _lower_indices(d)
    off = T[rows, cols]
    return np.concatenate([T.diagonal().real, np.column_stack([off.real, off.imag]).ravel()])


def _grad_from_W(W, d):
    """Parameter gradient of ``Re Tr[G dS]`` given ``W = G T^dagger`` (G Hermitian)."""
    rows, cols = _lower_indices(d)
    g_diag = 2 * W.diagonal().real
    wl = W[cols, rows]
    g_off = np.column_stack([2 * wl.real, -2 * wl.imag]).ravel()
    return np.concatenate([g_diag, g_off])


def initial_params(M):
    """Factor the eigenvalue-clipped, trace-normalised matrix as ``T^dagger T``."""
    d = M.shape[0]
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        w = np.ones(d)
    w = w / w.sum()
    B = np.sqrt(w)[:, None] * V.conj().T
    J = np.eye(d)[::-1]
    _, R = np.linalg.qr(B @ J)
    # make the diagonal real and non-negative; rows may be rephased freely
    ph = np.exp(-1j * np.angle(R.diagonal()))
    R = ph[:, None] * R
    T = J @ R @ J
    return T_to_params(T)


def trace_preservation_ops(n_qubits):
    """``Q[m, n] = sigma_n^dagger sigma_m`` for the Pauli basis."""
    ops = pauli_basis(n_qubits)
    return np.array([[En.conj().T @ Em for En in ops] for Em in ops])


def constraint_matrix(chi, Q):
    d = Q.shape[-1]
    return np.einsum("mn,mnpq->pq", chi, Q) - np.eye(d)


def _constraint_vector(C, mode):
    d = C.shape[0]
    parts = [C.diagonal().real]
    if mode == "full":
        iu = np.triu_indices(d, 1)
        parts += [C[iu].real, C[iu].imag]
    elif mode != "diagonal_only":
        raise InvalidArgument(f"constraint mode must be 'full' or 'diagonal_only', got {mode!r}")
    return np.concatenate(parts)


def _weights_matrix(w, d, mode):
    """Complex ``d x d`` matrix ``W`` with ``w . c == Re sum conj(W) * C``."""
    W = np.zeros((d, d), dtype=complex)
    W[np.diag_indices(d)] = w[:d]
    if mode == "full":
        iu = np.triu_indices(d, 1)
        k = len(iu[0])
        W[iu] = w[d:d + k] + 1j * w[d + k:]
    return W


def objective_and_constraints(t, measured, mode="full", kind="density", Q=None):
    """Objective ``sum |M(t) - measured|^2`` and constraint residuals.

    ``kind="density"`` normalises ``T^dagger T`` by its trace and has no
    constraints (an empty vector is returned).
    """
    measured = np.asarray(measured, dtype=complex)
    d = measured.shape[0]
    T = params_to_T(t, d)
    S = T.conj().T @ T
    if kind == "density":
        M = S / np.trace(S).real
        return float(np.sum(np.abs(M - measured) ** 2)), np.zeros(0)
    if kind != "process":
        raise InvalidArgument(f"kind must be 'density' or 'process', got {kind!r}")
    if Q is None:
        Q = trace_preservation_ops({4: 1, 16: 2}[d])
    delta = float(np.sum(np.abs(S - measured) ** 2))
    return delta, _constraint_vector(constraint_matrix(S, Q), mode)


def _density_fun(measured, d):
    def fun(t):
        T = params_to_T(t, d)
        S = T.conj().T @ T
        tau = np.trace(S).real
        G = S / tau - measured
        val = float(np.sum(np.abs(G) ** 2))
        Gs = 2 * (G / tau - (np.trace(G @ S).real / tau**2) * np.eye(d))
        return val, _grad_from_W(Gs @ T.conj().T, d)

    return fun


def _process_fun(measured, d, Q, mode, lam, mu):
    def fun(t):
        T = params_to_T(t, d)
        S = T.conj().T @ T
        G = S - measured
        val = float(np.sum(np.abs(G) ** 2))
        c = _constraint_vector(constraint_matrix(S, Q), mode)
        val += float(lam @ c + 0.5 * mu * c @ c)
        W = _weights_matrix(lam + mu * c, Q.shape[-1], mode)
        # Re sum_pq conj(W_pq) C_pq = Re Tr[Omega^T S] with Omega_mn = sum conj(W) Q_mn
        Om = np.einsum("pq,mnpq->mn", W.conj(), Q)
        Gc = 0.5 * (Om.T + Om.conj())
        Gs = 2 * G + Gc
        return val, _grad_from_W(Gs @ T.conj().T, d)

    return fun


@dataclass
class MLEResult:
    matrix: np.ndarray
    residual: float
    violation: float
    iterations: int
    evaluations: int
    wall_time: float
    params: np.ndarray = field(repr=False, default=None)

    def report(self):
        return {
            "residual": self.residual,
            "constraint_violation": self.violation,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "wall_time_s": self.wall_time,
        }


def _hermitian_input(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgument("input must be a square matrix")
    drift = np.abs(M - M.conj().T).max()
    if drift > HERMITIAN_TOL:
        raise InvalidArgument(f"input is not Hermitian (max deviation {drift:.3g})")
    return 0.5 * (M + M.conj().T)


_LBFGS = {"ftol": 1e-16, "gtol": 1e-14, "maxfun": MAX_FEVAL, "maxiter": MAX_FEVAL, "maxcor": 30}


def mle_density(rho_meas):
    """Closest trace-one positive matrix in the least-squares sense."""
    start = time.perf_counter()
    rho = _hermitian_input(rho_meas)
    d = rho.shape[0]
    t0 = initial_params(rho)
    fun = _density_fun(rho, d)
    res = minimize(fun, t0, jac=True, method="L-BFGS-B", options=_LBFGS)
    T = params_to_T(res.x, d)
    S = T.conj().T @ T
    out = S / np.trace(S).real
    out = 0.5 * (out + out.conj().T)
    return MLEResult(out, float(np.sum(np.abs(out - rho) ** 2)), 0.0, int(res.nit), int(res.nfev),
                     time.perf_counter() - start, res.x)


def mle_chi(chi_meas, constraint_mode=None, max_outer=MAX_OUTER, tol=CONSTRAINT_TOL):
    """Closest positive, trace-preserving process matrix (Pauli basis).

    ``constraint_mode`` defaults to ``"full"`` for one qubit and
    ``"diagonal_only"`` for two.
    """
    start = time.perf_counter()
    chi = _hermitian_input(chi_meas)
    d = chi.shape[0]
    if d not in (4, 16):
        raise InvalidArgument(f"process matrices must be 4x4 or 16x16, got {d}x{d}")
    n_qubits = {4: 1, 16: 2}[d]
    mode = constraint_mode or ("full" if n_qubits == 1 else "diagonal_only")
    Q = trace_preservation_ops(n_qubits)
    t = initial_params(chi)
    n_con = _constraint_vector(np.zeros((2**n_qubits,) * 2), mode).size
    lam = np.zeros(n_con)
    mu = PENALTY0
    iters = evals = 0
    viol = np.inf
    for _ in range(max_outer):
        res = minimize(_process_fun(chi, d, Q, mode, lam, mu), t, jac=True, method="L-BFGS-B",
                       options=_LBFGS)
        t = res.x
        iters += int(res.nit)
        evals += int(res.nfev)
        _, c = objective_and_constraints(t, chi, mode, "process", Q)
        viol = float(np.abs(c).max())
        if viol < tol:
            break
        lam = lam + mu * c
        mu *= PENALTY_GROWTH
    T = params_to_T(t, d)
    out = T.conj().T @ T
    out = 0.5 * (out + out.conj().T)
    result = MLEResult(out, float(np.sum(np.abs(out - chi) ** 2)), viol, iters, evals,
                       time.perf_counter() - start, t)
    if viol > ACCEPT_VIOLATION:
        raise ConvergenceFailure(
            f"trace-preservation violation {viol:.3g} after {max_outer} outer iterations",
            best=result, residual=result.residual, violation=viol,
        )
    return result
