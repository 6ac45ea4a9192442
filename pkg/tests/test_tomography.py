import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from superatom_qpt.core import pauli_basis
from superatom_qpt.errors import InvalidArgument, InvalidRecord
from superatom_qpt.gates import ANALYSIS_ROTATIONS
from superatom_qpt.tomography import (
    BELL, TomographyRecord, analysis_labels, apply_chi, bell_state_density, chi_from_outputs,
    fidelity, ideal_chi, matrix_labels, preparation_density, preparation_labels, read_matrix_csv,
    state_from_populations, state_tomo_1q, state_tomo_2q, write_gnuplot_grid, write_matrix_csv,
    write_matrix_json,
)

seeds = st.integers(0, 2**32 - 1)


def random_density(d, rng, rank=None):
    rank = rank or d
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_kraus(d, rng, n_ops=3):
    """Random CPTP channel from a Stiefel isometry."""
    V = unitary_group.rvs(d * n_ops, random_state=rng)[:, :d]
    return [V[k * d:(k + 1) * d] for k in range(n_ops)]


def rotation(label):
    out = np.eye(1)
    for ch in label:
        out = np.kron(out, ANALYSIS_ROTATIONS[ch])
    return out


def measured(rho, label):
    R = rotation(label)
    return np.real(np.diag(R @ rho @ R.conj().T))


def chi_oracle(kraus):
    """chi_mn = sum_k a_km conj(a_kn) with K_k = sum_m a_km sigma_m."""
    ops = pauli_basis(int(np.log2(kraus[0].shape[0])))
    d = kraus[0].shape[0]
    a = np.array([[np.trace(P.conj().T @ K) / d for P in ops] for K in kraus])
    return a.T @ a.conj()


@given(seeds)
def test_state_inversion_exact_1q(seed):
    rho = random_density(2, np.random.default_rng(seed))
    assert np.allclose(state_tomo_1q(lambda a: measured(rho, a)), rho, atol=1e-12)


@given(seeds)
def test_state_inversion_exact_2q(seed):
    rho = random_density(4, np.random.default_rng(seed))
    assert np.allclose(state_tomo_2q(lambda a: measured(rho, a)), rho, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
@given(seed=seeds)
def test_chi_of_random_channel_matches_oracle(n, seed):
    rng = np.random.default_rng(seed)
    kraus = random_kraus(2**n, rng)
    outputs = {}
    for p in preparation_labels(n):
        rho = preparation_density(p)
        outputs[p] = sum(K @ rho @ K.conj().T for K in kraus)
    chi = chi_from_outputs(outputs, n)
    assert np.allclose(chi, chi_oracle(kraus), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
@given(seed=seeds)
def test_ideal_chi_reproduces_unitary(n, seed):
    rng = np.random.default_rng(seed)
    U = unitary_group.rvs(2**n, random_state=rng)
    chi = ideal_chi(U)
    rho = random_density(2**n, rng)
    assert np.allclose(apply_chi(chi, rho), U @ rho @ U.conj().T, atol=1e-12)
    assert np.trace(chi).real == pytest.approx(1.0)
    assert np.linalg.matrix_rank(chi, tol=1e-10) == 1


def test_full_pipeline_from_populations():
    """Populations -> densities -> chi recovers a random channel exactly."""
    rng = np.random.default_rng(11)
    kraus = random_kraus(4, rng, 2)
    preps, anas = preparation_labels(2), analysis_labels(2)
    pops = np.zeros((len(preps), len(anas), 4))
    for i, p in enumerate(preps):
        rho = sum(K @ preparation_density(p) @ K.conj().T for K in kraus)
        for j, a in enumerate(anas):
            pops[i, j] = measured(rho, a)
    rec = TomographyRecord(2, preps, anas, pops)
    assert np.allclose(rec.chi(), chi_oracle(kraus), atol=1e-12)


def test_cnot_type_chi_entries():
    U = np.zeros((4, 4))
    U[[1, 0, 2, 3], [0, 1, 2, 3]] = 1
    chi = ideal_chi(U)
    labels = matrix_labels(2, "process")
    support = [labels.index(x) for x in ("II", "IX", "ZI", "ZX")]
    assert np.allclose(np.abs(chi[np.ix_(support, support)]), 0.25)
    mask = np.ones(16, bool)
    mask[support] = False
    assert np.allclose(chi[mask], 0) and np.allclose(chi[:, mask], 0)


def test_fidelity_properties():
    rng = np.random.default_rng(5)
    a, b = random_density(2, rng), random_density(2, rng)
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a))
    p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert fidelity(p0, p1) == pytest.approx(0.0)
    with pytest.raises(InvalidArgument):
        fidelity(np.eye(2), np.eye(4))


def test_bell_states():
    for name, v in BELL.items():
        rho = bell_state_density(name)
        assert np.isclose(np.trace(rho @ rho).real, 1)
        reduced = rho.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
        assert np.allclose(reduced, np.eye(2) / 2)
    with pytest.raises(InvalidArgument):
        bell_state_density("xx")


def test_record_validation():
    preps, anas = preparation_labels(1), analysis_labels(1)
    good = np.full((4, 3, 2), 0.5)
    TomographyRecord(1, preps, anas, good)
    bad = good.copy()
    bad[0, 0] = [0.9, 0.2]
    with pytest.raises(InvalidRecord):
        TomographyRecord(1, preps, anas, bad)
    bad[0, 0] = [1.2, -0.2]
    with pytest.raises(InvalidRecord):
        TomographyRecord(1, preps, anas, bad)
    with pytest.raises(InvalidRecord):
        TomographyRecord(1, preps, anas, good[:, :2])
    with pytest.raises(InvalidRecord):
        state_from_populations({"I": [1, 0], "Y": [0.5, 0.5]}, 1)
    with pytest.raises(InvalidRecord):
        chi_from_outputs({"H": np.eye(2)}, 1)


def test_record_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    preps, anas = preparation_labels(2), analysis_labels(2)
    pops = rng.dirichlet(np.ones(5), size=(16, 9))[..., :4]
    rec = TomographyRecord(2, preps, anas, pops)
    rec.write_csv(tmp_path / "rec.csv")
    back = TomographyRecord.read_csv(tmp_path / "rec.csv")
    assert back.preparations == preps and back.analyses == anas
    assert np.array_equal(back.populations, pops)


def test_matrix_writers(tmp_path):
    rng = np.random.default_rng(4)
    M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    write_matrix_csv(tmp_path / "m.csv", M)
    assert np.array_equal(read_matrix_csv(tmp_path / "m.csv"), M)
    write_matrix_json(tmp_path / "m.json", M, "process", 1, gate="x")
    import json
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["basis"] == ["I", "X", "Y", "Z"] and doc["gate"] == "x"
    assert np.allclose(np.array(doc["real"]) + 1j * np.array(doc["imag"]), M)
    write_gnuplot_grid(tmp_path / "m.dat", M, matrix_labels(1, "process"))
    rows = [r for r in (tmp_path / "m.dat").read_text().splitlines() if r and not r.startswith("#")]
    assert len(rows) == 16
    i, j, mag = (float(x) for x in rows[5].split()[:3])
    assert mag == pytest.approx(abs(M[int(i), int(j)]))


def test_labels():
    assert matrix_labels(2, "state") == ["00", "01", "10", "11"]
    assert len(matrix_labels(2, "process")) == 16
    assert list(itertools.islice(preparation_labels(2), 3)) == ["HH", "HV", "HD"]
