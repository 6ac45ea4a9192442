"""Simulated tomography experiments.

Preparations are physically simulated rotation programs by default.
Analysis rotations are applied as ideal logical rotations to the logical
block of the final state unless ``physical_analysis`` is set, in which case
the analysis programs are simulated too. Readout is the overlap with the
logical product states, so leaked population simply goes missing.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import logical_basis, logical_state
from .errors import InvalidArgument
from .gates import ANALYSIS_ROTATIONS, PREPARATION_ROTATIONS, GateBuilder
from .mle import mle_chi, mle_density
from .propagator import DEFAULT_TOL
from .tomography import (
    TomographyRecord, analysis_labels, fidelity, ideal_chi, preparation_labels,
)


@dataclass
class Executor:
    """Runs programs on blocks of states, pure or mixed, optionally in parallel."""

    builder: GateBuilder
    lindblad: object = None
    tol: float = DEFAULT_TOL
    threads: int = 1
    backend: str = None

    @property
    def basis(self):
        return self.builder.basis

    @property
    def mixed(self):
        return self.lindblad is not None

    def ground(self):
        psi = logical_state(self.basis, (0,) * self.basis.n_ensembles)
        if not self.mixed:
            return psi[:, None]
        rho = np.zeros((1, self.basis.dim + 1, self.basis.dim + 1), dtype=complex)
        rho[0, : self.basis.dim, : self.basis.dim] = np.outer(psi, psi.conj())
        return rho

    def run(self, program, block):
        return program.run(block, self.lindblad, self.tol, self.backend)

    def map(self, fn, items):
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def concat(self, blocks):
        return np.concatenate(blocks, axis=0 if self.mixed else 1)

    def split(self, block):
        return [block[k : k + 1] for k in range(len(block))] if self.mixed else \
            [block[:, k : k + 1] for k in range(block.shape[1])]

    def count(self, block):
        return block.shape[0] if self.mixed else block.shape[1]

    def logical_blocks(self, block):
        """Logical density block (unnormalised) for every state in ``block``."""
        V = logical_basis(self.basis)
        d = self.basis.dim
        if self.mixed:
            return np.einsum("ia,kij,jb->kab", V.conj(), block[:, :d, :d], V)
        amps = V.conj().T @ block
        return np.einsum("ak,bk->kab", amps, amps.conj())


def _product_rotation(labels, table):
    out = np.eye(1, dtype=complex)
    for lab in labels:
        out = np.kron(out, table[lab])
    return out


def prepare_inputs(ex, physical=True):
    """Blocks for every preparation label, in ``preparation_labels`` order."""
    n = ex.basis.n_ensembles
    labels = preparation_labels(n)
    if not physical:
        V = logical_basis(ex.basis)
        kets = []
        for lab in labels:
            ket = _product_rotation(lab, PREPARATION_ROTATIONS)[:, 0]
            kets.append(V @ ket)
        block = np.stack(kets, axis=1)
        if not ex.mixed:
            return labels, block
        d = ex.basis.dim
        rhos = np.zeros((len(labels), d + 1, d + 1), dtype=complex)
        for k in range(len(labels)):
            rhos[k, :d, :d] = np.outer(block[:, k], block[:, k].conj())
        return labels, rhos
    block = ex.ground()
    for ens in range(n):
        progs = [ex.builder.prepare(p, ens) for p in ("H", "V", "D", "R")]
        parts = ex.map(lambda prog: ex.run(prog, block), progs)
        # ensemble 0 varies slowest: regroup so each earlier state gets all four
        per_state = [ex.split(part) for part in parts]
        block = ex.concat([per_state[j][i] for i in range(ex.count(block)) for j in range(4)])
    return labels, block


def measure(ex, block, physical=False):
    """Populations ``[state, analysis, outcome]`` for every analysis setting."""
    n = ex.basis.n_ensembles
    labels = analysis_labels(n)
    m = ex.count(block)
    out = np.zeros((m, len(labels), 2**n))
    if not physical:
        rhoL = ex.logical_blocks(block)
        for a, lab in enumerate(labels):
            R = _product_rotation(lab, ANALYSIS_ROTATIONS)
            out[:, a] = np.real(np.einsum("ij,kjl,il->ki", R, rhoL, R.conj()))
        return labels, np.clip(out, 0.0, 1.0)

    def run_label(lab):
        b = block
        for ens, ch in enumerate(lab):
            b = ex.run(ex.builder.analysis(ch, ens), b)
        rhoL = ex.logical_blocks(b)
        return np.real(np.einsum("kii->ki", rhoL))

    results = ex.map(run_label, labels)
    for a, res in enumerate(results):
        out[:, a] = res
    return labels, np.clip(out, 0.0, 1.0)


def add_shot_noise(populations, shots, rng):
    """Multinomial resampling of every population row with a leakage outcome."""
    pops = np.asarray(populations, dtype=float)
    flat = pops.reshape(-1, pops.shape[-1])
    noisy = np.empty_like(flat)
    for k, row in enumerate(flat):
        p = np.append(row, max(0.0, 1.0 - row.sum()))
        noisy[k] = rng.multinomial(shots, p / p.sum())[:-1] / shots
    return noisy.reshape(pops.shape)


@dataclass
class ProcessResult:
    name: str
    record: TomographyRecord
    chi_linear: np.ndarray
    chi_mle: np.ndarray
    chi_ideal: np.ndarray
    mle_report: dict

    @property
    def error_linear(self):
        return 1.0 - fidelity(self.chi_ideal, self.chi_linear)

    @property
    def error(self):
        return 1.0 - fidelity(self.chi_ideal, self.chi_mle)

    @property
    def mle_shift(self):
        return float(np.linalg.norm(self.chi_mle - self.chi_linear))


@dataclass
class StateResult:
    name: str
    record: TomographyRecord
    rho_linear: np.ndarray
    rho_mle: np.ndarray
    rho_ideal: np.ndarray
    mle_report: dict

    @property
    def error_linear(self):
        return 1.0 - fidelity(self.rho_ideal, self.rho_linear)

    @property
    def error(self):
        return 1.0 - fidelity(self.rho_ideal, self.rho_mle)

    @property
    def mle_shift(self):
        return float(np.linalg.norm(self.rho_mle - self.rho_linear))


def process_tomography(program, ex, physical_prep=True, physical_analysis=False, shots=None,
                       seed=0, constraint_mode=None, use_mle=True):
    """Full process tomography of ``program`` (1 or 2 ensembles)."""
    if program.basis is not ex.basis:
        raise InvalidArgument("program and executor use different bases")
    n = ex.basis.n_ensembles
    if n not in (1, 2):
        raise InvalidArgument("process tomography supports one or two ensembles")
    preps, inputs = prepare_inputs(ex, physical_prep)
    outputs = ex.run(program, inputs)
    anas, pops = measure(ex, outputs, physical_analysis)
    if shots:
        pops = add_shot_noise(pops, shots, np.random.default_rng(seed))
    record = TomographyRecord(n, preps, anas, pops)
    chi_lin = record.chi()
    chi_id = ideal_chi(program.ideal)
    if use_mle:
        res = mle_chi(0.5 * (chi_lin + chi_lin.conj().T), constraint_mode)
        chi_ml, report = res.matrix, res.report()
    else:
        chi_ml, report = chi_lin, {}
    return ProcessResult(program.name, record, chi_lin, chi_ml, chi_id, report)


def state_tomography(program, ex, target, physical_analysis=False, shots=None, seed=0,
                     use_mle=True):
    """Tomography of ``program`` applied to the logical ground state."""
    n = ex.basis.n_ensembles
    out = ex.run(program, ex.ground())
    anas, pops = measure(ex, out, physical_analysis)
    if shots:
        pops = add_shot_noise(pops, shots, np.random.default_rng(seed))
    record = TomographyRecord(n, ("-",), anas, pops)
    rho_lin = record.densities()["-"]
    if use_mle:
        res = mle_density(0.5 * (rho_lin + rho_lin.conj().T))
        rho_ml, report = res.matrix, res.report()
    else:
        rho_ml, report = rho_lin, {}
    return StateResult(program.name, record, rho_lin, rho_ml, np.asarray(target), report)


def logical_action(program, tol=DEFAULT_TOL, backend=None):
    """Simulated logical operator (``2^n x 2^n``, possibly non-unitary from leakage)."""
    V = logical_basis(program.basis)
    out = program.run(np.array(V), None, tol, backend)
    return V.conj().T @ out


def bit_strings(n):
    return list(itertools.product((0, 1), repeat=n))
