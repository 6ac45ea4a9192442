import numpy as np
import pytest

from superatom_qpt.core import build_basis
from superatom_qpt.errors import InvalidArgument
from superatom_qpt.gates import GateBuilder, short_pulse_settings
from superatom_qpt.pulses import mhz
from superatom_qpt.propagator import LindbladModel
from superatom_qpt.simulate import (
    Executor, add_shot_noise, bit_strings, logical_action, measure, prepare_inputs,
    process_tomography, state_tomography,
)
from superatom_qpt.tomography import bell_state_density


@pytest.fixture(scope="module")
def one_atom():
    gb = GateBuilder(build_basis([1]))
    return gb, Executor(gb)


def worst_leakage(record):
    return 1 - record.populations[:, 0].sum(axis=-1).min()


@pytest.mark.parametrize("gate", ["identity", "not_x", "not_y", "not_z", "hadamard"])
def test_process_tomography_closed(one_atom, gate):
    gb, ex = one_atom
    r = process_tomography(getattr(gb, gate)(), ex)
    assert r.error < 1e-4 and r.error_linear < 1e-4
    # the projection only removes the tiny unphysical part caused by leakage
    assert r.mle_shift <= worst_leakage(r.record) + 1e-8


def test_physical_preparation_close_to_ideal(one_atom):
    gb, ex = one_atom
    _, phys = prepare_inputs(ex, True)
    _, ideal = prepare_inputs(ex, False)
    overlaps = np.abs(np.einsum("ik,ik->k", ideal.conj(), phys))
    assert np.all(overlaps > 1 - 1e-4)


def test_physical_analysis_agrees(one_atom):
    gb, ex = one_atom
    _, block = prepare_inputs(ex, False)
    _, a = measure(ex, block, physical=False)
    _, b = measure(ex, block, physical=True)
    assert np.abs(a - b).max() < 1e-4


def test_threads_do_not_change_results():
    gb = GateBuilder(build_basis([2]))
    a = process_tomography(gb.hadamard(), Executor(gb, threads=1))
    b = process_tomography(gb.hadamard(), Executor(gb, threads=4))
    assert np.array_equal(a.record.populations, b.record.populations)


def test_shot_noise_is_seeded_and_scales(one_atom):
    gb, ex = one_atom
    prog = gb.hadamard()
    a = process_tomography(prog, ex, shots=2000, seed=1)
    b = process_tomography(prog, ex, shots=2000, seed=1)
    assert np.array_equal(a.record.populations, b.record.populations)
    errs = [np.mean([process_tomography(prog, ex, shots=s, seed=k).error_linear for k in range(6)])
            for s in (500, 50000)]
    assert errs[1] < errs[0] / 3


def test_shot_noise_counts():
    rng = np.random.default_rng(0)
    pops = np.array([[0.5, 0.3], [0.0, 1.0]])
    out = add_shot_noise(pops, 1000, rng)
    assert out.shape == pops.shape
    assert np.all(out.sum(axis=-1) <= 1)
    assert out[1, 0] == 0 and out[1, 1] == 1
    assert np.all((out * 1000) == np.round(out * 1000))


def test_bell_state_tomography():
    gb = GateBuilder(build_basis([1, 1]))
    ex = Executor(gb)
    r = state_tomography(gb.bell("phim"), ex, bell_state_density("phim"))
    assert r.error < 1e-4
    assert np.linalg.eigvalsh(r.rho_mle).min() > -1e-12


def test_decay_lowers_fidelity():
    settings = short_pulse_settings()
    gb = GateBuilder(build_basis([1]), settings)
    closed = process_tomography(gb.hadamard(), Executor(gb, tol=1e-9))
    lossy = process_tomography(gb.hadamard(),
                               Executor(gb, LindbladModel(mhz(5), mhz(0.8e-3)), tol=1e-9))
    assert lossy.error > 10 * closed.error
    assert 1e-4 < lossy.error < 0.05


def test_process_tomography_checks():
    gb = GateBuilder(build_basis([1]))
    other = GateBuilder(build_basis([1]))
    with pytest.raises(InvalidArgument):
        process_tomography(gb.hadamard(), Executor(other))
    gb3 = GateBuilder(build_basis([1, 1, 1]))
    with pytest.raises(InvalidArgument):
        process_tomography(gb3.hadamard(), Executor(gb3))


def test_logical_action_unitary_part():
    gb = GateBuilder(build_basis([1]))
    U = logical_action(gb.not_z())
    assert np.allclose(U, np.diag([1, -1]), atol=1e-6)
    assert bit_strings(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
