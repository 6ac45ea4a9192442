import math

import numpy as np
import pytest

from superatom_qpt.core import build_basis
from superatom_qpt.errors import InvalidArgument
from superatom_qpt.gates import (
    ANALYSIS_ROTATIONS, PREPARATION_ROTATIONS, GateBuilder, GateProgram, GateSettings,
    calibrate_frame, short_pulse_settings,
)
from superatom_qpt.pulses import NS, PulseSchedule
from superatom_qpt.simulate import logical_action
from superatom_qpt.tomography import preparation_density

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]])


def gate_error(U, ideal):
    """One minus the overlap |Tr(ideal^dagger U)| / d."""
    return 1 - abs(np.trace(ideal.conj().T @ U)) / U.shape[0]


def phase_equal(a, b, atol=1e-12):
    k = np.argmax(np.abs(b))
    ph = a.flat[k] / b.flat[k]
    return abs(abs(ph) - 1) < atol and np.allclose(a, ph * b, atol=atol)


def test_settings_validation():
    with pytest.raises(InvalidArgument):
        GateSettings(rabi_frequency=0.0)


def test_beta_grows_linearly_with_spectators():
    """Every blocked ground-state atom adds the same light-shift phase."""
    s = GateSettings()
    beta = [calibrate_frame(n, s)[1] for n in (1, 2, 3)]
    assert beta[0] == pytest.approx(0.0, abs=1e-9)
    assert beta[2] == pytest.approx(2 * beta[1], abs=1e-6)


def test_hadamard_ideal_is_exact():
    gb = GateBuilder(build_basis([1]))
    assert np.allclose(gb.hadamard().ideal, H, atol=1e-12)


def test_cnot_type_ideal():
    gb = GateBuilder(build_basis([1, 1]))
    U = gb.cnot_type().ideal
    expected = np.zeros((4, 4))
    expected[[1, 0, 2, 3], [0, 1, 2, 3]] = 1
    assert np.allclose(U, expected)


@pytest.mark.parametrize("which", ["H", "V", "D", "R"])
def test_preparations_match_tomography_states(which):
    gb = GateBuilder(build_basis([1]))
    ket = gb.prepare(which).ideal[:, 0]
    assert np.allclose(np.outer(ket, ket.conj()), preparation_density(which), atol=1e-12)
    assert phase_equal(PREPARATION_ROTATIONS[which][:, 0], ket)


@pytest.mark.parametrize("which", ["I", "Y", "X"])
def test_analysis_ideals(which):
    gb = GateBuilder(build_basis([1]))
    assert phase_equal(gb.analysis(which).ideal, ANALYSIS_ROTATIONS[which])


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("gate", ["identity", "not_x", "not_y", "not_z", "hadamard"])
def test_single_qubit_gates_simulated(n, gate):
    gb = GateBuilder(build_basis([n]))
    prog = getattr(gb, gate)()
    U = logical_action(prog)
    assert gate_error(U, prog.ideal) < 1e-4
    # the logical block is the gate itself, not just up to a phase
    assert np.abs(U - prog.ideal).max() < 1e-2


def test_rotation_simulated():
    gb = GateBuilder(build_basis([2]))
    prog = gb.rotation(0.7, -1.1)
    assert gate_error(logical_action(prog), prog.ideal) < 1e-4


@pytest.mark.parametrize("sizes", [(1, 1), (1, 2)])
def test_cnot_type_simulated(sizes):
    gb = GateBuilder(build_basis(sizes))
    prog = gb.cnot_type()
    assert gate_error(logical_action(prog), prog.ideal) < 1e-4


def test_rotation_on_second_ensemble_leaves_first():
    gb = GateBuilder(build_basis([1, 1]))
    prog = gb.not_x(1)
    assert np.allclose(prog.ideal, np.kron(np.eye(2), -1j * X), atol=1e-12)
    assert gate_error(logical_action(prog), prog.ideal) < 1e-4


def test_short_pulse_span():
    s = short_pulse_settings()
    gb = GateBuilder(build_basis([1]), s)
    sched = gb.hadamard().schedule
    first, last = sched.segments[0], sched.segments[-1]
    assert last.t_start - first.t_end == pytest.approx(600 * NS, rel=1e-9)
    with pytest.raises(InvalidArgument):
        short_pulse_settings(span=100 * NS)


def test_program_checks():
    basis = build_basis([1])
    with pytest.raises(InvalidArgument):
        GateProgram("bad", basis, PulseSchedule(()), np.ones((2, 2)))
    gb = GateBuilder(basis)
    with pytest.raises(InvalidArgument):
        gb.cnot_type()
    with pytest.raises(InvalidArgument):
        gb.prepare("Q")
    with pytest.raises(InvalidArgument):
        gb.bell("nope")
    with pytest.raises(InvalidArgument):
        GateBuilder(build_basis([1], levels=("g0", "e", "r0")))
    with pytest.raises(InvalidArgument):
        gb.rotation(math.inf, 0.0)


def test_composition_multiplies_ideals():
    gb = GateBuilder(build_basis([1]))
    prog = gb.hadamard().then(gb.hadamard())
    assert np.allclose(prog.ideal, np.eye(2), atol=1e-12)
    assert prog.duration == pytest.approx(2 * gb.hadamard().duration)
