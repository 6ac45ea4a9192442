import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superatom_qpt.errors import InvalidArgument
from superatom_qpt.pulses import (
    NS, US, Envelope, GaussianStirapParams, PulseSchedule, Segment, StirapParams,
    check_separation, double_stirap_schedule, gaussian_stirap_schedule, mhz,
    optimized_stirap_envelopes, pulse_area, rabi_pulse, rotation_matrix, rx, ry,
    single_stirap_schedule,
)

angles = st.floats(-4 * math.pi, 4 * math.pi, allow_nan=False)


def test_mhz_is_angular():
    assert mhz(1.0) == pytest.approx(2 * math.pi * 1e6)


@pytest.mark.parametrize("kind", ["hg_sin", "hg_cos", "gauss"])
def test_envelopes_smooth(kind):
    env = Envelope(kind, 1.0, center=0.0, width=1.0)
    t = np.linspace(-4, 4, 400001)
    y = env(t)
    dy = np.diff(y) / np.diff(t)
    # bounded first derivative and no jumps in it: C1 on the support
    assert np.abs(dy).max() < 10
    assert np.abs(np.diff(dy)).max() < 1e-3
    assert y.min() >= 0


def test_hg_legs_are_complementary():
    p = StirapParams.long()
    t = np.linspace(p.t1 - 3 * US, p.t1 + 3 * US, 1001)
    w1, w2 = optimized_stirap_envelopes(p, t)
    F = np.exp(-(((t - p.t1) / p.T0) ** (2 * p.n)))
    assert np.allclose(w1**2 + w2**2, (p.omega0 * F) ** 2, atol=1e-6 * p.omega0**2)
    # counter-intuitive order: Stokes first
    assert w2[100] > w1[100] and w1[-100] > w2[-100]


def test_double_stirap_is_time_reversed():
    p = StirapParams.long()
    sched = double_stirap_schedule(p, True)
    up, down = sched.segments
    mid = 0.5 * (p.t1 + p.t2)
    s = np.linspace(0.0, mid - up.t_start, 2001)
    for cu, cd in zip(up.couplings, down.couplings):
        assert cu.transition == cd.transition
        assert np.allclose(cu.envelope(mid - s), cd.envelope(mid + s), atol=1e-12 * p.omega0)
    assert up.detunings[0].value == -down.detunings[0].value


def test_unswitched_keeps_sign():
    sched = double_stirap_schedule(StirapParams.long(), False)
    assert sched.segments[0].detunings[0].value == sched.segments[1].detunings[0].value


def test_separation_check():
    check_separation(StirapParams.long())
    check_separation(StirapParams.short())
    with pytest.raises(InvalidArgument):
        check_separation(StirapParams(mhz(50), mhz(200), 2 * US, -1 * US, 1 * US))
    with pytest.raises(InvalidArgument):
        single_stirap_schedule(StirapParams(mhz(50), mhz(200), 2 * US, 1 * US, -1 * US))


def test_gaussian_window_and_order():
    p = GaussianStirapParams.long()
    (seg,) = gaussian_stirap_schedule(p).segments
    assert seg.t_start == pytest.approx(-9 * US) and seg.t_end == pytest.approx(9 * US)
    pump, stokes = seg.couplings
    assert pump.envelope.center > stokes.envelope.center


@given(st.floats(0.05, 4 * math.pi), st.floats(-math.pi, math.pi))
def test_rabi_area_equals_angle(theta, phi):
    sched = rabi_pulse(theta, phi, ("g1", "r1"), mhz(50))
    assert pulse_area(sched) == pytest.approx(theta, rel=1e-6)
    sched = rabi_pulse(-theta, phi, ("g1", "r1"), mhz(50))
    assert pulse_area(sched) == pytest.approx(theta, rel=1e-6)


def test_rabi_zero_is_empty():
    assert rabi_pulse(0.0, 1.0, ("g1", "r1"), mhz(50)).segments == ()


def test_rabi_phase_convention():
    (seg,) = rabi_pulse(math.pi, 0.3, ("r0", "r1"), mhz(25)).segments
    assert seg.couplings[0].phase == pytest.approx(0.3 + math.pi)
    (seg,) = rabi_pulse(-math.pi, 0.3, ("r0", "r1"), mhz(25)).segments
    assert seg.couplings[0].phase == pytest.approx(0.3)
    assert seg.duration == pytest.approx(20 * NS)


def test_rabi_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        rabi_pulse(float("nan"), 0.0, ("g1", "r1"), mhz(50))
    with pytest.raises(InvalidArgument):
        rabi_pulse(1.0, 0.0, ("g1", "r1"), 0.0)


@given(angles, angles)
def test_rotation_unitary(theta, phi):
    R = rotation_matrix(theta, phi)
    assert np.allclose(R.conj().T @ R, np.eye(2), atol=1e-12)
    assert np.allclose(rotation_matrix(-theta, phi), R.conj().T, atol=1e-12)


@given(angles, angles, st.floats(-math.pi, math.pi))
def test_rotations_compose(a, b, phi):
    assert np.allclose(rotation_matrix(a, phi) @ rotation_matrix(b, phi), rotation_matrix(a + b, phi),
                       atol=1e-12)


def test_named_rotations():
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(rx(math.pi), -1j * X)
    assert np.allclose(ry(math.pi), -1j * Y)
    assert np.allclose(rx(0.7), np.cos(0.35) * np.eye(2) - 1j * np.sin(0.35) * X)


def test_schedule_overlap_rejected():
    a = Segment(0.0, 1.0, label="a")
    b = Segment(0.5, 2.0, label="b")
    with pytest.raises(InvalidArgument):
        PulseSchedule((a, b))


def test_then_appends():
    a = rabi_pulse(math.pi, 0, ("g1", "r1"), mhz(50))
    b = rabi_pulse(math.pi / 2, 0, ("r0", "r1"), mhz(25), t_start=5.0)
    s = a.then(b)
    assert s.segments[1].t_start == pytest.approx(a.t_end)
    assert s.duration == pytest.approx(a.duration + b.duration)
    assert s.levels() == {"g1", "r1", "r0"}
    assert PulseSchedule(()).then(a) is a
