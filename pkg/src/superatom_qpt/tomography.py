"""Linear-inversion state and process tomography in the Pauli basis.

State tomography reads logical populations after the analysis rotations
``I``, ``Y`` = R_y(-pi/2) and ``X`` = R_x(pi/2). Differences ``P0 - P1``
after them give the X, Y and Z Bloch components (Z from ``I``).

Process tomography maps the outputs for the inputs ``H, V, D, R``
(``|0>, |1>, |+>, |+i>``) to the outputs for the matrix units ``|j><k|``,
stacks those into a block matrix and contracts it with a fixed matrix. That
yields the process matrix in the basis ``(I, X, -iY, Z)``; a diagonal phase
change brings it to the Hermitian Pauli basis ``(I, X, Y, Z)``. Two-qubit
quantities use the same single-qubit map on each factor.
"""

import csv
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .core import pauli_basis
from .errors import InvalidArgument, InvalidRecord

ANALYSES = ("I", "Y", "X")
PREPARATIONS = ("H", "V", "D", "R")
PAULI_LABELS = ("I", "X", "Y", "Z")
POP_TOL = 1e-9

# Pauli component read out by each analysis rotation: sigma index -> rotation
_READOUT = {0: "I", 1: "Y", 2: "X", 3: "I"}

_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / np.sqrt(2),
}

_A = 0.5 * (1 + 1j)
# rows: |0><0|, |0><1|, |1><0|, |1><1| as combinations of rho_H, rho_V, rho_D, rho_R
UNIT_FROM_PREP = np.array(
    [
        [1, 0, 0, 0],
        [-_A, -_A, 1, 1j],
        [-np.conj(_A), -np.conj(_A), 1, -1j],
        [0, 1, 0, 0],
    ],
    dtype=complex,
)
UNIT_FROM_PREP.setflags(write=False)

_LAMBDA1 = 0.5 * np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, -1, 0], [1, 0, 0, -1]], dtype=complex
)
_NC_TO_PAULI = np.diag([1, 1, -1j, 1]).astype(complex)


def _unit_from_prep(n_qubits):
    """``16 x 16`` (two qubits) map from product preparations to matrix units.

    Generated from the single-qubit map by tensor structure: unit
    ``|a1 a2><b1 b2|`` takes the coefficient of ``(a1, b1)`` on qubit 1 times
    that of ``(a2, b2)`` on qubit 2.
    """
    M = UNIT_FROM_PREP
    if n_qubits == 1:
        return M
    d = 4
    out = np.zeros((16, 16), dtype=complex)
    for a1, b1, a2, b2 in itertools.product(range(2), repeat=4):
        row = (2 * a1 + a2) * d + (2 * b1 + b2)
        for A, B in itertools.product(range(4), repeat=2):
            out[row, 4 * A + B] = M[2 * a1 + b1, A] * M[2 * a2 + b2, B]
    return out


UNIT_FROM_PREP_2Q = _unit_from_prep(2)
UNIT_FROM_PREP_2Q.setflags(write=False)


def _contraction(n_qubits):
    """Matrix ``K`` with ``chi_nc = K^T [eps(|j><k|)] K``."""
    if n_qubits == 1:
        return _LAMBDA1
    swap = np.eye(4)[[0, 2, 1, 3]]
    P = np.kron(np.kron(np.eye(2), swap), np.eye(2))
    return P @ np.kron(_LAMBDA1, _LAMBDA1)


def _nc_to_pauli(n_qubits):
    D = _NC_TO_PAULI
    return D if n_qubits == 1 else np.kron(D, D)


def preparation_density(label):
    """Density matrix of a one- or two-qubit preparation label such as ``"D"`` or ``"HR"``."""
    psi = np.ones(1, dtype=complex)
    for ch in label:
        if ch not in _KETS:
            raise InvalidArgument(f"unknown preparation {ch!r}")
        psi = np.kron(psi, _KETS[ch])
    return np.outer(psi, psi.conj())


def preparation_labels(n_qubits):
    return tuple("".join(p) for p in itertools.product(PREPARATIONS, repeat=n_qubits))


def analysis_labels(n_qubits):
    return tuple("".join(p) for p in itertools.product(ANALYSES, repeat=n_qubits))


def _check_populations(pops, n_qubits):
    pops = np.asarray(pops, dtype=float)
    if pops.shape != (2**n_qubits,):
        raise InvalidRecord(f"expected {2**n_qubits} populations, got shape {pops.shape}")
    if not np.all(np.isfinite(pops)) or pops.min() < -POP_TOL or pops.max() > 1 + POP_TOL:
        raise InvalidRecord(f"populations {pops} outside [0, 1]")
    if pops.sum() > 1 + POP_TOL:
        raise InvalidRecord(f"populations {pops} sum above 1")
    return pops


def _signs(i):
    return np.array([1.0, 1.0]) if i in (0,) else np.array([1.0, -1.0])


def state_from_populations(table, n_qubits):
    """Density matrix from ``{analysis label: populations}``.

    ``lambda_{ij...} = sum_ab s_i(a) s_j(b) P_ab`` with ``s = (1, 1)`` for the
    identity component and ``(1, -1)`` otherwise, read after the rotation
    that maps that Pauli component onto Z.
    """
    table = {k: _check_populations(v, n_qubits) for k, v in table.items()}
    ops = pauli_basis(n_qubits)
    rho = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for k, idx in enumerate(itertools.product(range(4), repeat=n_qubits)):
        key = "".join(_READOUT[i] for i in idx)
        if key not in table:
            raise InvalidRecord(f"missing analysis setting {key!r}")
        s = np.ones(1)
        for i in idx:
            s = np.kron(s, _signs(i))
        lam = float(s @ table[key])
        rho += lam * ops[k]
    return rho / 2**n_qubits


def state_tomo_1q(measure):
    """Single-qubit density matrix from ``measure(rotation) -> (P0, P1)``."""
    return state_from_populations({a: measure(a) for a in ANALYSES}, 1)


def state_tomo_2q(measure):
    """Two-qubit density matrix from ``measure(rotation_pair) -> (P00, P01, P10, P11)``."""
    return state_from_populations({a: measure(a) for a in analysis_labels(2)}, 2)


def chi_from_outputs(outputs, n_qubits):
    """Process matrix (Pauli basis) from output densities for every preparation label."""
    preps = preparation_labels(n_qubits)
    missing = [p for p in preps if p not in outputs]
    if missing:
        raise InvalidRecord(f"missing outputs for preparations {missing}")
    d = 2**n_qubits
    rhos = np.stack([np.asarray(outputs[p], dtype=complex) for p in preps])
    if rhos.shape[1:] != (d, d) or not np.all(np.isfinite(rhos)):
        raise InvalidRecord(f"output densities must be finite {d}x{d} matrices")
    M = UNIT_FROM_PREP if n_qubits == 1 else UNIT_FROM_PREP_2Q
    units = np.einsum("up,pij->uij", M, rhos)
    # block (j, k) of the big matrix is eps(|j><k|)
    big = units.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    K = _contraction(n_qubits)
    chi_nc = K.T @ big @ K
    D = _nc_to_pauli(n_qubits)
    return D @ chi_nc @ D.conj().T


def process_tomo_1q(outputs):
    """``outputs`` maps ``H, V, D, R`` to the tomographed output densities."""
    return chi_from_outputs(outputs, 1)


def process_tomo_2q(outputs):
    """``outputs`` maps ``HH, HV, ..., RR`` to the tomographed output densities."""
    return chi_from_outputs(outputs, 2)


def _n_qubits_of(dim):
    n = {2: 1, 4: 2}.get(dim)
    if n is None:
        raise InvalidArgument(f"only one- and two-qubit operators are supported, got dim {dim}")
    return n


def ideal_chi(U):
    """Process matrix of ``rho -> U rho U^dagger`` through the same pipeline."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise InvalidArgument("U must be square")
    n = _n_qubits_of(U.shape[0])
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10):
        raise InvalidArgument("U is not unitary")
    outputs = {p: U @ preparation_density(p) @ U.conj().T for p in preparation_labels(n)}
    return chi_from_outputs(outputs, n)


def apply_chi(chi, rho):
    """``sum_mn chi_mn sigma_m rho sigma_n^dagger``."""
    chi = np.asarray(chi)
    n = _n_qubits_of(np.asarray(rho).shape[0])
    ops = pauli_basis(n)
    out = np.zeros_like(rho, dtype=complex)
    for m, Em in enumerate(ops):
        left = Em @ rho
        for k, En in enumerate(ops):
            if chi[m, k] != 0:
                out += chi[m, k] * left @ En.conj().T
    return out


def fidelity(ideal, reconstructed):
    """Trace-distance fidelity ``1 - 0.5 * sum(singular values of A - B)``."""
    A, B = np.asarray(ideal, dtype=complex), np.asarray(reconstructed, dtype=complex)
    if A.shape != B.shape or A.ndim != 2:
        raise InvalidArgument(f"shape mismatch {A.shape} vs {B.shape}")
    return float(1.0 - 0.5 * np.linalg.svd(A - B, compute_uv=False).sum())


BELL = {
    "phip": np.array([1, 0, 0, 1]) / np.sqrt(2),
    "phim": np.array([1, 0, 0, -1]) / np.sqrt(2),
    "psip": np.array([0, 1, 1, 0]) / np.sqrt(2),
    "psim": np.array([0, 1, -1, 0]) / np.sqrt(2),
}


def bell_state_density(which):
    if which not in BELL:
        raise InvalidArgument(f"unknown Bell state {which!r}; use one of {sorted(BELL)}")
    v = BELL[which].astype(complex)
    return np.outer(v, v.conj())


@dataclass
class TomographyRecord:
    """Logical populations for every (preparation, analysis) pair.

    ``populations[p, a]`` holds ``(P0, P1)`` or ``(P00, P01, P10, P11)`` for
    ``preparations[p]`` and ``analyses[a]``. State tomography uses the single
    preparation label ``"-"``.
    """

    n_qubits: int
    preparations: tuple
    analyses: tuple
    populations: np.ndarray

    def __post_init__(self):
        self.populations = np.asarray(self.populations, dtype=float)
        shape = (len(self.preparations), len(self.analyses), 2**self.n_qubits)
        if self.populations.shape != shape:
            raise InvalidRecord(f"population table has shape {self.populations.shape}, expected {shape}")
        for row in self.populations.reshape(-1, shape[-1]):
            _check_populations(row, self.n_qubits)

    def densities(self):
        """Linear-inversion density matrix for every preparation."""
        return {
            p: state_from_populations(dict(zip(self.analyses, self.populations[k])), self.n_qubits)
            for k, p in enumerate(self.preparations)
        }

    def chi(self):
        return chi_from_outputs(self.densities(), self.n_qubits)

    def write_csv(self, path):
        names = ["".join(map(str, b)) for b in itertools.product((0, 1), repeat=self.n_qubits)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["preparation", "analysis", *("P" + n for n in names)])
            for p, prep in enumerate(self.preparations):
                for a, ana in enumerate(self.analyses):
                    w.writerow([prep, ana, *(repr(float(x)) for x in self.populations[p, a])])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        n_qubits = {3: 1, 5: 2}.get(len(header) - 1)
        if n_qubits is None:
            raise InvalidRecord(f"{path}: unrecognised header {header}")
        preps = tuple(dict.fromkeys(r[0] for r in body))
        anas = tuple(dict.fromkeys(r[1] for r in body))
        table = np.full((len(preps), len(anas), 2**n_qubits), np.nan)
        for r in body:
            table[preps.index(r[0]), anas.index(r[1])] = [float(x) for x in r[2:]]
        if np.isnan(table).any():
            raise InvalidRecord(f"{path}: incomplete population table")
        return cls(n_qubits, preps, anas, table)


def matrix_labels(n_qubits, kind):
    """Row/column labels: computational states or Pauli products."""
    if kind == "state":
        return ["".join(map(str, b)) for b in itertools.product((0, 1), repeat=n_qubits)]
    return ["".join(p) for p in itertools.product(PAULI_LABELS, repeat=n_qubits)]


def write_matrix_csv(path, M):
    """One row per matrix row with real and imaginary parts interleaved."""
    M = np.asarray(M, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([repr(float(x)) for z in row for x in (z.real, z.imag)])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
    arr = np.array(rows)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def matrix_document(M, kind, n_qubits, **extra):
    """JSON-ready description of a density or process matrix."""
    M = np.asarray(M, dtype=complex)
    doc = {
        "kind": kind,
        "n_qubits": n_qubits,
        "basis": matrix_labels(n_qubits, kind),
        "basis_order": "computational states, first qubit most significant"
        if kind == "state"
        else "Pauli products (I, X, Y, Z), first qubit varying slowest",
        "real": M.real.tolist(),
        "imag": M.imag.tolist(),
    }
    doc.update(extra)
    return doc


def write_matrix_json(path, M, kind, n_qubits, **extra):
    with open(path, "w") as fh:
        json.dump(matrix_document(M, kind, n_qubits, **extra), fh, indent=2, sort_keys=True)


def write_gnuplot_grid(path, M, labels=None):
    """Heat-map grid: ``i j |M_ij| Re Im`` with a blank line after each row."""
    M = np.asarray(M, dtype=complex)
    with open(path, "w") as fh:
        if labels is not None:
            fh.write("# labels: " + " ".join(labels) + "\n")
        fh.write("# i j abs real imag\n")
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                z = M[i, j]
                fh.write(f"{i} {j} {abs(z):.17g} {z.real:.17g} {z.imag:.17g}\n")
            fh.write("\n")


def gnuplot_script(data_file, title, labels):
    tics = ", ".join(f'"{lab}" {k}' for k, lab in enumerate(labels))
    return (
        f'set title "{title}"\n'
        "set view map\n"
        f"set xtics ({tics}) rotate\n"
        f"set ytics ({tics})\n"
        "set palette defined (0 'white', 1 'blue')\n"
        f"splot '{data_file}' using 1:2:3 with image notitle\n"
    )
