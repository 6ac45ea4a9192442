"""Time evolution on a blockaded basis.

Pure states follow ``i d psi/dt = H(t) psi``; mixed states follow a Lindblad
equation in which the intermediate and Rydberg levels decay at rates
``gamma_e`` and ``gamma_r`` into one extra, never-observed sink state
appended after the last configuration.

Tolerances: ``tol`` is the relative tolerance of the adaptive DOP853 step
control; the absolute tolerance is ``tol / 100``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import _physical_part, collective_state, logical_basis
from .errors import IntegrationFailure, InvalidArgument
from .kernels import CompiledProblem

DEFAULT_TOL = 1e-10
DEFAULT_SAMPLES = 400
ATOL_RATIO = 1e-2


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    basis: object
    schedule: object

    def __post_init__(self):
        for seg in self.schedule.segments:
            for c in seg.couplings:
                a, b = c.transition
                for lev in (a, b):
                    self.basis.scheme.index(lev)
                    if lev not in self.basis.levels:
                        raise InvalidArgument(f"coupling {a}-{b} uses level {lev!r} absent from the basis")
                if c.ensemble is not None:
                    self.basis.ensemble_atoms(c.ensemble)
            for d in seg.detunings:
                self.basis.scheme.index(d.level)

    def compile(self, t_span=None, lindblad=None):
        return compile_problem(self.basis, self.schedule, t_span, lindblad)


@dataclass(frozen=True)
class LindbladModel:
    """Decay rates (rad/s) of the intermediate level and of both Rydberg levels."""

    gamma_e: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self):
        if self.gamma_e < 0 or self.gamma_r < 0:
            raise InvalidArgument("decay rates must be non-negative")

    def rates(self, basis):
        """Total decay rate out of every configuration."""
        g = np.zeros(basis.dim)
        if "e" in basis.levels:
            g += self.gamma_e * basis.level_counts("e")
        for r in ("r0", "r1"):
            if r in basis.levels:
                g += self.gamma_r * basis.level_counts(r)
        return g


def _segments_on_span(schedule, t0, t1):
    """Schedule segments clipped to ``[t0, t1]`` with idle gaps filled in."""
    out = []
    t = t0
    for seg in schedule.segments:
        a, b = max(seg.t_start, t0), min(seg.t_end, t1)
        if b <= a:
            continue
        if a > t:
            out.append((t, a, None))
        out.append((a, b, seg))
        t = b
    if t < t1:
        out.append((t, t1, None))
    return out


def compile_problem(basis, schedule, t_span=None, lindblad=None):
    t0, t1 = (schedule.t_start, schedule.t_end) if t_span is None else map(float, t_span)
    if not t1 >= t0:
        raise InvalidArgument("t_span must be increasing")
    pieces = _segments_on_span(schedule, t0, t1) or [(t0, t1, None)]
    n = basis.dim + (1 if lindblad is not None else 0)
    seg_t = np.array([(a, b) for a, b, _ in pieces], dtype=float)
    seg_diag = np.zeros((len(pieces), n))
    cp_seg, cp_kind, cp_par, cp_coef, cp_off, src, dst = [], [], [], [], [0], [], []
    for k, (_, _, seg) in enumerate(pieces):
        if seg is None:
            continue
        for d in seg.detunings:
            if d.level in basis.levels:
                seg_diag[k, : basis.dim] += d.value * basis.level_counts(d.level, d.ensemble)
        for c in seg.couplings:
            pairs = basis.transition_pairs(c.transition[0], c.transition[1], c.ensemble)
            kind, par = c.envelope.params()
            cp_seg.append(k)
            cp_kind.append(kind)
            cp_par.append(par)
            cp_coef.append(0.5 * np.exp(1j * c.phase))
            src.extend(pairs[0])
            dst.extend(pairs[1])
            cp_off.append(len(src))
    if lindblad is not None:
        gamma = np.append(lindblad.rates(basis), 0.0)
        sink = basis.dim
    else:
        gamma = np.zeros(n)
        sink = -1
    return CompiledProblem(
        n=n,
        seg_t=seg_t,
        seg_diag=seg_diag,
        cp_seg=np.array(cp_seg, dtype=np.intc),
        cp_kind=np.array(cp_kind, dtype=np.intc),
        cp_par=np.array(cp_par, dtype=float).reshape(-1, 5),
        cp_coef=np.array(cp_coef, dtype=complex),
        cp_off=np.array(cp_off, dtype=np.intc),
        src=np.array(src, dtype=np.intc),
        dst=np.array(dst, dtype=np.intc),
        gamma=gamma,
        master=lindblad is not None,
        sink=sink,
    )


def build_hamiltonian(model, t):
    """Dense Hamiltonian (rad/s) at time ``t``; zero outside every segment."""
    basis = model.basis
    H = np.zeros((basis.dim, basis.dim), dtype=complex)
    for seg in model.schedule.segments:
        if not seg.t_start <= t <= seg.t_end:
            continue
        for d in seg.detunings:
            if d.level in basis.levels:
                H[np.diag_indices(basis.dim)] += d.value * basis.level_counts(d.level, d.ensemble)
        for c in seg.couplings:
            src, dst = basis.transition_pairs(c.transition[0], c.transition[1], c.ensemble)
            h = 0.5 * float(c.envelope(t)) * np.exp(1j * c.phase)
            np.add.at(H, (dst, src), h)
            np.add.at(H, (src, dst), np.conj(h))
        break
    return H


@dataclass
class Trajectory:
    """Sampled evolution: ``states[k]`` is the state at ``times[k]``.

    Pure evolutions store vectors (or ``dim x m`` blocks), master-equation
    runs store density matrices including the trailing sink level.
    """

    basis: object
    times: np.ndarray
    states: np.ndarray
    mixed: bool = False
    stats: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def overlap_series(self, target):
        """``|<target|psi(t)>|^2`` or ``<target|rho(t)|target>`` for every sample."""
        target = np.asarray(target, dtype=complex)
        if self.mixed:
            rho = self.states[:, : self.basis.dim, : self.basis.dim]
            return np.real(np.einsum("i,kij,j->k", target.conj(), rho, target))
        return np.abs(np.einsum("i,ki->k", target.conj(), self.states)) ** 2

    def norms(self):
        if self.mixed:
            return np.real(np.einsum("kii->k", self.states))
        return np.linalg.norm(self.states, axis=1)


def _check_times(times, t0, t1):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidArgument("sample times must be a non-empty 1-d array")
    if np.any(np.diff(times) < 0) or times[0] < t0 or times[-1] > t1:
        raise InvalidArgument("sample times must be sorted and inside t_span")
    return times


def _sample_times(t0, t1, samples):
    if samples is None:
        return np.array([t1])
    if np.isscalar(samples):
        return np.linspace(t0, t1, max(int(samples), 2))
    return _check_times(samples, t0, t1)


def _run(problem, y0, times, tol, backend, max_steps):
    states, status, t_fail, steps, fev = kernels.propagate(
        problem, y0, times, tol, tol * ATOL_RATIO, max_steps, backend=backend
    )
    if status == 1:
        raise IntegrationFailure(f"step size underflow at t = {t_fail:.9g} s", t_fail)
    if status == 2:
        raise IntegrationFailure(f"step budget of {max_steps} exhausted at t = {t_fail:.9g} s", t_fail)
    return states, {"steps": int(steps), "fev": int(fev)}


def _validate_tol(tol):
    if not 0 < tol <= 1e-6:
        raise InvalidArgument(f"integrator tolerance must lie in (0, 1e-6], got {tol}")


def evolve_schrodinger(
    initial, model, t_span=None, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES, backend=None,
    max_steps=10_000_000,
):
    """Integrate pure states through ``model.schedule``.

    Parameters
    ----------
    initial : ndarray
        State vector of length ``dim`` or a ``dim x m`` block of columns that
        are propagated together.
    t_span : (float, float), optional
        Defaults to the schedule's extent.
    samples : int, array or None
        Number of equally spaced samples, explicit sample times, or ``None``
        for the final state only.
    """
    _validate_tol(tol)
    y0 = np.asarray(initial, dtype=complex)
    if y0.shape[0] != model.basis.dim or y0.ndim > 2:
        raise InvalidArgument(f"initial state shape {y0.shape} does not match dim {model.basis.dim}")
    problem = model.compile(t_span)
    t0, t1 = problem.seg_t[0, 0], problem.seg_t[-1, 1]
    times = _sample_times(t0, t1, samples)
    states, stats = _run(problem, y0, times, tol, backend, max_steps)
    return Trajectory(model.basis, times, states, False, stats)


def evolve_master(
    initial, model, lindblad, t_span=None, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
    backend=None, max_steps=10_000_000,
):
    """Integrate density matrices with decay into the sink state.

    ``initial`` is a ``dim x dim`` matrix (the sink is appended empty), a
    ``(dim+1) x (dim+1)`` matrix, or a stack of either along axis 0.
    """
    _validate_tol(tol)
    dim = model.basis.dim
    rho = np.asarray(initial, dtype=complex)
    stacked = rho.ndim == 3
    rhos = rho if stacked else rho[None]
    if rhos.shape[1] == dim:
        padded = np.zeros((rhos.shape[0], dim + 1, dim + 1), dtype=complex)
        padded[:, :dim, :dim] = rhos
        rhos = padded
    if rhos.shape[1:] != (dim + 1, dim + 1):
        raise InvalidArgument(f"density matrix shape {rho.shape} does not match dim {dim}")
    problem = model.compile(t_span, lindblad)
    t0, t1 = problem.seg_t[0, 0], problem.seg_t[-1, 1]
    times = _sample_times(t0, t1, samples)
    states, stats = _run(problem, rhos if stacked else rhos[0], times, tol, backend, max_steps)
    return Trajectory(model.basis, times, states, True, stats)


PHASE_FLOOR = 1e-6


def ground_phase(traj, reference=None):
    """Unwrapped phase of the all-g0 amplitude relative to its first sample.

    Samples where the amplitude is below ``1e-6`` in magnitude are NaN and
    the unwrapping continues across them.
    """
    if traj.mixed:
        raise InvalidArgument("the ground phase needs a pure-state trajectory")
    g = traj.basis.ground_index()
    amp = traj.states[:, g] if traj.states.ndim == 2 else traj.states[:, g, 0]
    ok = np.abs(amp) >= PHASE_FLOOR
    out = np.full(len(amp), np.nan)
    if not ok.any():
        return out
    ref = np.angle(amp[ok][0]) if reference is None else reference
    out[ok] = np.unwrap(np.angle(amp[ok]) - ref)
    # unwrap from a zero start so a branch cut at the first sample cannot bias it
    out[ok] -= 2 * np.pi * np.round(out[ok][0] / (2 * np.pi))
    return out


def max_phase_step(phase):
    """Largest jump between consecutive defined samples (unwrapping guard)."""
    p = phase[np.isfinite(phase)]
    return float(np.max(np.abs(np.diff(p)))) if p.size > 1 else 0.0


def evolve_with_phase(initial, model, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES, backend=None,
                      max_refine=6):
    """Pure evolution whose sampling is doubled until phase steps stay below pi/2."""
    n = samples
    for _ in range(max_refine + 1):
        traj = evolve_schrodinger(initial, model, tol=tol, samples=n, backend=backend)
        phase = ground_phase(traj)
        if max_phase_step(phase) < np.pi / 2:
            return traj, phase
        n *= 2
    raise IntegrationFailure("ground phase could not be resolved with refined sampling")


def readout_columns(basis):
    """Named projectors used for trajectory export.

    Bases with the qubit level get the logical populations; STIRAP bases
    without it get the ground state and the collective r0 state of ensemble 0.
    """
    if "g1" in basis.levels:
        V = logical_basis(basis)
        if basis.n_ensembles == 1:
            names = ["P0", "P1"]
        else:
            names = ["P" + "".join(str(x) for x in idx) for idx in np.ndindex(*([2] * basis.n_ensembles))]
        return names, [V[:, k] for k in range(V.shape[1])]
    cols = [collective_state(basis, 0, "g0")]
    names = ["P0"]
    if "r0" in basis.levels:
        cols.append(collective_state(basis, 0, "r0"))
        names.append("P1")
    return names, cols


def write_trajectory_csv(path, traj, phase=None):
    """Columns ``t, <populations>, alpha, leakage`` with one row per sample."""
    names, cols = readout_columns(traj.basis)
    pops = np.stack([traj.overlap_series(c) for c in cols], axis=1)
    total = traj.norms() ** (1 if traj.mixed else 2)
    leak = total - pops.sum(axis=1)
    if phase is None:
        phase = ground_phase(traj) if not traj.mixed else np.full(len(traj.times), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names, "alpha", "leakage"])
        for k, t in enumerate(traj.times):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in pops[k]), repr(float(phase[k])),
                        repr(float(leak[k]))])


def final_states(initial, model, lindblad=None, tol=DEFAULT_TOL, backend=None):
    """Convenience: only the end-of-schedule state(s)."""
    if lindblad is None:
        return evolve_schrodinger(initial, model, tol=tol, samples=None, backend=backend).final
    return evolve_master(initial, model, lindblad, tol=tol, samples=None, backend=backend).final


def physical_block(state, basis):
    return _physical_part(state, basis)
