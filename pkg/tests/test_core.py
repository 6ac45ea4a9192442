import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superatom_qpt.core import (
    LEVELS, build_basis, collective_state, expected_dim, logical_basis, logical_populations,
    logical_projection, logical_state, pauli, pauli_basis, read_state_csv, write_state_csv,
)
from superatom_qpt.errors import InvalidArgument


def brute_force_dim(n_atoms):
    """Count every level assignment with at most one Rydberg atom."""
    count = 0
    for cfg in itertools.product(LEVELS, repeat=n_atoms):
        if sum(x in ("r0", "r1") for x in cfg) <= 1:
            count += 1
    return count


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_dimension_matches_brute_force(n):
    assert build_basis([n]).dim == brute_force_dim(n) == expected_dim(n)


@pytest.mark.parametrize("sizes", [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3)])
def test_blockade_is_global(sizes):
    basis = build_basis(sizes)
    assert basis.dim == brute_force_dim(sum(sizes))
    ryd = {basis.scheme.index("r0"), basis.scheme.index("r1")}
    assert all(sum(x in ryd for x in c) <= 1 for c in basis.configs)


def test_configs_are_lexicographic():
    basis = build_basis([2])
    assert list(basis.configs) == sorted(basis.configs)
    assert basis.configs[0] == (0, 0)


def test_level_subset():
    basis = build_basis([3], levels=("g0", "e", "r0"))
    assert basis.dim == 2**3 + 3 * 2**2
    with pytest.raises(InvalidArgument):
        build_basis([1], levels=("g1", "r1"))


@pytest.mark.parametrize("bad", [[], [0], [4, 4]])
def test_bad_sizes(bad):
    with pytest.raises(InvalidArgument):
        build_basis(bad)


@pytest.mark.parametrize("sizes", [(1,), (3,), (1, 2), (2, 2)])
def test_logical_basis_orthonormal(sizes):
    V = logical_basis(build_basis(sizes))
    assert np.allclose(V.conj().T @ V, np.eye(V.shape[1]), atol=1e-14)


def test_logical_one_is_symmetric():
    basis = build_basis([3])
    psi = logical_state(basis, (1,))
    nz = np.flatnonzero(psi)
    assert len(nz) == 3
    assert np.allclose(psi[nz], 1 / np.sqrt(3))


def test_collective_state_normalised():
    basis = build_basis([4])
    for lev in ("g0", "g1", "r0", "r1"):
        assert np.isclose(np.linalg.norm(collective_state(basis, 0, lev)), 1.0)
    with pytest.raises(InvalidArgument):
        collective_state(basis, 0, "e")


def test_projection_of_pure_and_mixed_agree():
    basis = build_basis([1, 2])
    rng = np.random.default_rng(3)
    psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    psi /= np.linalg.norm(psi)
    pops = logical_populations(psi, basis)
    rho = np.outer(psi, psi.conj())
    assert np.allclose(pops, logical_populations(rho, basis))
    block = logical_projection(rho, basis)
    assert np.allclose(np.diag(block).real, pops)
    assert pops.sum() <= 1 + 1e-12


@given(st.integers(1, 4), st.integers(1, 4))
def test_pauli_products(i, j):
    P, Q = pauli(i), pauli(j)
    assert np.allclose(P @ P, np.eye(2))
    assert np.isclose(np.trace(P.conj().T @ Q), 2.0 * (i == j))


@pytest.mark.parametrize("n", [1, 2])
def test_pauli_basis_orthogonal(n):
    ops = pauli_basis(n)
    G = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.allclose(G, 2**n * np.eye(4**n))


def test_state_csv_roundtrip(tmp_path):
    basis = build_basis([2])
    rng = np.random.default_rng(0)
    psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    path = tmp_path / "state.csv"
    write_state_csv(path, basis, psi)
    assert np.array_equal(read_state_csv(path, basis), psi)
