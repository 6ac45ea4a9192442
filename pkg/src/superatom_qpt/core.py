"""Blockade-truncated multi-atom bases, collective states and logical readout.

Every atom carries the five-level scheme ``g0, g1, e, r0, r1``: the two
hyperfine qubit levels, the intermediate level used by the two-photon
excitation, and two Rydberg levels. Perfect blockade is imposed by dropping
every configuration with more than one Rydberg atom in the whole system.
"""

import csv
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument

LEVELS = ("g0", "g1", "e", "r0", "r1")
RYDBERG = frozenset({"r0", "r1"})
MAX_ATOMS = 6


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple = LEVELS
    rydberg_set: frozenset = RYDBERG

    def __post_init__(self):
        if len(self.levels) != 5 or len(set(self.levels)) != 5:
            raise InvalidArgument("a level scheme needs exactly 5 unique labels")
        if len(self.rydberg_set) != 2 or not set(self.rydberg_set) <= set(self.levels):
            raise InvalidArgument("rydberg_set must name exactly 2 of the levels")

    def index(self, label):
        try:
            return self.levels.index(label)
        except ValueError:
            raise InvalidArgument(f"unknown level {label!r}") from None


SCHEME = LevelScheme()


@dataclass(frozen=True, eq=False)
class BlockadedBasis:
    """Configurations of ``n_atoms`` atoms with at most one Rydberg excitation.

    ``configs[k]`` is a tuple of per-atom level indices into ``scheme.levels``.
    Atoms are numbered ensemble by ensemble; ``levels`` optionally restricts
    which single-atom levels appear at all (the STIRAP scans only need
    ``g0, e, r0``).
    """

    ensemble_sizes: tuple
    levels: tuple
    configs: tuple
    scheme: LevelScheme = field(default=SCHEME, repr=False)

    @property
    def n_atoms(self):
        return sum(self.ensemble_sizes)

    @property
    def dim(self):
        return len(self.configs)

    @property
    def n_ensembles(self):
        return len(self.ensemble_sizes)

    @cached_property
    def index(self):
        return {c: k for k, c in enumerate(self.configs)}

    @cached_property
    def atom_ensemble(self):
        return tuple(
            e for e, size in enumerate(self.ensemble_sizes) for _ in range(size)
        )

    def ensemble_atoms(self, ensemble):
        if not 0 <= ensemble < self.n_ensembles:
            raise InvalidArgument(f"ensemble index {ensemble} out of range")
        start = sum(self.ensemble_sizes[:ensemble])
        return range(start, start + self.ensemble_sizes[ensemble])

    def labels(self, k):
        return tuple(self.scheme.levels[i] for i in self.configs[k])

    def ground_index(self):
        return self.index[(0,) * self.n_atoms]

    def level_counts(self, label, ensemble=None):
        """Number of atoms in ``label`` for every configuration."""
        lev = self.scheme.index(label)
        atoms = range(self.n_atoms) if ensemble is None else self.ensemble_atoms(ensemble)
        out = np.array([sum(c[a] == lev for a in atoms) for c in self.configs], dtype=float)
        out.setflags(write=False)
        return out

    def transition_pairs(self, a, b, ensemble=None):
        """Index pairs ``(src, dst)`` for single-atom moves ``a -> b``.

        Moves that would create a second Rydberg atom have no target
        configuration and are therefore absent: this is the blockade.
        """
        key = ("pairs", a, b, ensemble)
        if key not in self._cache:
            self._cache[key] = _transition_pairs(self, a, b, ensemble)
        return self._cache[key]

    @cached_property
    def _cache(self):
        return {}


def _transition_pairs(basis, a, b, ensemble):
    ia, ib = basis.scheme.index(a), basis.scheme.index(b)
    if ia == ib:
        raise InvalidArgument("a transition needs two distinct levels")
    atoms = range(basis.n_atoms) if ensemble is None else basis.ensemble_atoms(ensemble)
    src, dst = [], []
    for k, c in enumerate(basis.configs):
        for atom in atoms:
            if c[atom] != ia:
                continue
            target = basis.index.get(c[:atom] + (ib,) + c[atom + 1:])
            if target is not None:
                src.append(k)
                dst.append(target)
    pairs = np.array([src, dst], dtype=np.intc).reshape(2, -1)
    pairs.setflags(write=False)
    return pairs


def build_basis(ensemble_sizes, levels=None, max_atoms=MAX_ATOMS, scheme=SCHEME):
    """Enumerate the blockade-truncated basis for the given ensembles.

    Configurations are produced in lexicographic order of per-atom level
    indices, which is also the row order of every exported state file.
    """
    sizes = tuple(int(s) for s in ensemble_sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidArgument(f"ensemble sizes must be positive, got {list(ensemble_sizes)}")
    if sum(sizes) > max_atoms:
        raise InvalidArgument(f"{sum(sizes)} atoms exceeds the limit of {max_atoms}")
    if levels is None:
        levels = scheme.levels
    allowed = sorted(scheme.index(l) for l in levels)
    if scheme.index("g0") not in allowed:
        raise InvalidArgument("the level subset must contain g0")
    ryd = {scheme.index(l) for l in scheme.rydberg_set}
    configs = tuple(
        c
        for c in itertools.product(allowed, repeat=sum(sizes))
        if sum(x in ryd for x in c) <= 1
    )
    return BlockadedBasis(sizes, tuple(scheme.levels[i] for i in allowed), configs, scheme)


def expected_dim(n_atoms, n_levels=5, n_rydberg=2):
    plain = n_levels - n_rydberg
    return plain**n_atoms + n_rydberg * n_atoms * plain ** (n_atoms - 1)


def collective_state(basis, ensemble, level):
    """Symmetric single-excitation state of one ensemble, everything else in g0.

    ``level == "g0"`` gives the all-ground product state.
    """
    if level == "e":
        raise InvalidArgument("no collective state is defined for the intermediate level")
    lev = basis.scheme.index(level)
    if level not in basis.levels:
        raise InvalidArgument(f"level {level!r} is not part of this basis")
    psi = np.zeros(basis.dim, dtype=complex)
    n = basis.n_atoms
    if level == "g0":
        psi[basis.ground_index()] = 1.0
        return psi
    atoms = basis.ensemble_atoms(ensemble)
    amp = 1.0 / np.sqrt(len(atoms))
    for atom in atoms:
        cfg = [0] * n
        cfg[atom] = lev
        psi[basis.index[tuple(cfg)]] = amp
    return psi


def logical_state(basis, bits):
    """Product of collective logical states, one bit per ensemble."""
    bits = tuple(int(b) for b in bits)
    if len(bits) != basis.n_ensembles or any(b not in (0, 1) for b in bits):
        raise InvalidArgument(f"need one bit per ensemble, got {bits}")
    g1 = basis.scheme.index("g1")
    psi = np.zeros(basis.dim, dtype=complex)
    groups = [
        list(basis.ensemble_atoms(e)) if b else [None] for e, b in enumerate(bits)
    ]
    norm = np.prod([len(g) for g in groups])
    for choice in itertools.product(*groups):
        cfg = [0] * basis.n_atoms
        for atom in choice:
            if atom is not None:
                cfg[atom] = g1
        psi[basis.index[tuple(cfg)]] = 1.0
    return psi / np.sqrt(norm)


def logical_basis(basis):
    """Columns are the logical states ordered |0..0>, |0..1>, ... (ensemble 0 most significant)."""
    if "logical" not in basis._cache:
        n = basis.n_ensembles
        cols = [logical_state(basis, bits) for bits in itertools.product((0, 1), repeat=n)]
        V = np.stack(cols, axis=1)
        V.setflags(write=False)
        basis._cache["logical"] = V
    return basis._cache["logical"]


def _physical_part(state, basis):
    state = np.asarray(state)
    if state.shape[0] == basis.dim + 1:
        # trailing sink level from the master equation; never observed
        state = state[: basis.dim, : basis.dim] if state.ndim == 2 else state[: basis.dim]
    if state.shape[0] != basis.dim or (state.ndim == 2 and state.shape != (basis.dim, basis.dim)):
        raise InvalidArgument(f"state of shape {state.shape} does not match basis dim {basis.dim}")
    return state


def logical_projection(state, basis):
    """Logical amplitudes (vector input) or logical density block (matrix input)."""
    state = _physical_part(state, basis)
    V = logical_basis(basis)
    if state.ndim == 1:
        return V.conj().T @ state
    return V.conj().T @ state @ V


def logical_populations(state, basis):
    """Overlaps with the logical product states: ``[P0, P1]`` or ``[P00, P01, P10, P11]``.

    The populations sum to at most one; the remainder is leakage.
    """
    proj = logical_projection(state, basis)
    if proj.ndim == 1:
        return np.abs(proj) ** 2
    return np.real(np.diag(proj)).copy()


def single_excitation_population(state, basis, ensemble):
    """Diagnostic: probability of exactly one g1 atom in ``ensemble``, any distribution.

    Unlike the symmetric overlap used for tomography this also counts
    non-symmetric single-excitation states.
    """
    state = _physical_part(state, basis)
    g0, g1 = basis.scheme.index("g0"), basis.scheme.index("g1")
    atoms = list(basis.ensemble_atoms(ensemble))
    others = [a for a in range(basis.n_atoms) if a not in atoms]
    mask = np.array(
        [
            sum(c[a] == g1 for a in atoms) == 1
            and all(c[a] in (g0, g1) for a in atoms)
            and all(c[a] == g0 for a in others)
            for c in basis.configs
        ]
    )
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    return float(probs[mask].sum())


_PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def pauli(index):
    """Pauli matrix by 1-based index: 1 -> I, 2 -> X, 3 -> Y, 4 -> Z."""
    if index not in (1, 2, 3, 4):
        raise InvalidArgument(f"Pauli index must be 1..4, got {index}")
    return _PAULI[index - 1].copy()


def kron(a, b):
    return np.kron(a, b)


def pauli_basis(n_qubits):
    """Operator basis sigma_i (x) sigma_j ..., first factor varying slowest."""
    ops = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        ops = [np.kron(a, p) for a in ops for p in _PAULI]
    return ops


def write_state_csv(path, basis, state):
    """One row per configuration: labels, real part, imaginary part."""
    state = np.asarray(state)
    if state.shape != (basis.dim,):
        raise InvalidArgument("only state vectors can be dumped row by row")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "real", "imag"])
        for k in range(basis.dim):
            w.writerow([",".join(basis.labels(k)), repr(float(state[k].real)), repr(float(state[k].imag))])


def read_state_csv(path, basis):
    psi = np.zeros(basis.dim, dtype=complex)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    if len(rows) != basis.dim:
        raise InvalidArgument(f"{path}: expected {basis.dim} rows, found {len(rows)}")
    for k, (labels, re, im) in enumerate(rows):
        if tuple(labels.split(",")) != basis.labels(k):
            raise InvalidArgument(f"{path}: row {k} is {labels}, basis expects {basis.labels(k)}")
        psi[k] = float(re) + 1j * float(im)
    return psi
