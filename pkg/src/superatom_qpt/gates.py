"""Gate pulse programs for superatom qubits.

A single-qubit rotation is the five-pulse echo

1. pi pulse ``g1 -> r1`` (moves ``|1>`` to the Rydberg manifold),
2. STIRAP ``g0 -> e -> r0`` (moves ``|0>``; blocked if ``|1>`` is in ``r1``),
3. resonant ``r0 <-> r1`` pulse of area ``theta``,
4. STIRAP back with the detuning sign switched,
5. 3pi pulse ``r1 -> g1``.

The two STIRAP halves leave phases ``alpha`` (transferred path) and
``beta`` (blocked path) that depend on the number of atoms. They cancel
between the halves but sandwich pulse 3, so its physical phase is shifted by
``beta - alpha`` (and the pi-pulse phase). Both are obtained by simulating
the first STIRAP half once per ensemble size and parameter set.
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .core import build_basis, collective_state
from .errors import InvalidArgument
from .propagator import (
    DEFAULT_TOL, HamiltonianModel, evolve_master, evolve_schrodinger,
)
from .pulses import (
    NS, PulseSchedule, StirapParams, check_separation, mhz, rabi_pulse, rotation_matrix, rx, ry,
    stirap_segment,
)

PI = math.pi


@dataclass(frozen=True)
class GateSettings:
    """Physical parameters shared by every program built from them.

    The level pairs are configuration data: ``qubit_rydberg`` carries pulses
    1 and 5, ``pump`` and ``stokes`` the STIRAP legs and ``rydberg_rydberg``
    pulse 3.
    """

    stirap: StirapParams = field(default_factory=StirapParams.long)
    rabi_frequency: float = mhz(50)
    microwave_frequency: float = mhz(25)
    stirap_outer: float = None
    qubit_rydberg: tuple = ("g1", "r1")
    pump: tuple = ("g0", "e")
    stokes: tuple = ("e", "r0")
    rydberg_rydberg: tuple = ("r0", "r1")
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        check_separation(self.stirap)
        if not (self.rabi_frequency > 0 and self.microwave_frequency > 0):
            raise InvalidArgument("Rabi frequencies must be positive")

    @property
    def outer(self):
        half = (self.stirap.t2 - self.stirap.t1) / 2
        return half if self.stirap_outer is None else self.stirap_outer

    def stirap_half(self, stage, ensemble):
        p = self.stirap
        mid = 0.5 * (p.t1 + p.t2)
        if stage == "up":
            seg = stirap_segment(p, "up", p.t1 - self.outer, mid, 1, ensemble, self.pump, self.stokes)
        else:
            seg = stirap_segment(p, "down", mid, p.t2 + self.outer, -1, ensemble, self.pump, self.stokes)
        return PulseSchedule((seg,))


def short_pulse_settings(microwave_area=PI / 2, span=600 * NS):
    """Short-pulse parameters with ``span`` from the end of pulse 1 to the start of pulse 5.

    The outer STIRAP windows are trimmed so that the two halves plus pulse 3
    fill exactly ``span``.
    """
    p = StirapParams.short()
    mw = mhz(25)
    outer = 0.5 * (span - abs(microwave_area) / mw) - (p.t2 - p.t1) / 2
    if outer <= 0:
        raise InvalidArgument("span too short for the short-pulse STIRAP pair")
    return GateSettings(stirap=p, rabi_frequency=mhz(50), microwave_frequency=mw, stirap_outer=outer)


@lru_cache(maxsize=64)
def calibrate_frame(n_atoms, settings):
    """Phases ``(alpha, beta)`` left by the first STIRAP half on an ``n_atoms`` ensemble.

    ``alpha`` is the phase of the transferred amplitude ``|0> -> |r0>``,
    ``beta`` the phase picked up by ``|r1>`` whose transfer is blocked.
    """
    levels = tuple(sorted({"g0", *settings.pump, *settings.stokes, *settings.rydberg_rydberg},
                          key=("g0", "g1", "e", "r0", "r1").index))
    basis = build_basis([n_atoms], levels=levels)
    model = HamiltonianModel(basis, settings.stirap_half("up", 0))
    r0 = collective_state(basis, 0, settings.stokes[1])
    r1 = collective_state(basis, 0, settings.rydberg_rydberg[1])
    block = np.stack([collective_state(basis, 0, "g0"), r1], axis=1)
    out = evolve_schrodinger(block, model, tol=settings.tol, samples=None).final
    alpha = float(np.angle(r0.conj() @ out[:, 0]))
    beta = float(np.angle(r1.conj() @ out[:, 1]))
    return alpha, beta


def _embed(U, ensemble, n_ensembles):
    ops = [np.eye(2, dtype=complex)] * n_ensembles
    ops = list(ops)
    ops[ensemble] = np.asarray(U, dtype=complex)
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


@dataclass(frozen=True, eq=False)
class GateProgram:
    """Time-ordered pulse schedule plus the logical unitary it should implement."""

    name: str
    basis: object
    schedule: PulseSchedule
    ideal: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.ideal, dtype=complex)
        d = 2**self.basis.n_ensembles
        if U.shape != (d, d) or not np.allclose(U.conj().T @ U, np.eye(d), atol=1e-12):
            raise InvalidArgument(f"ideal operator of {self.name!r} is not a {d}x{d} unitary")

    @property
    def duration(self):
        return self.schedule.duration

    def then(self, other, name=None):
        if other.basis is not self.basis:
            raise InvalidArgument("programs must share one basis to be composed")
        return GateProgram(
            name or f"{self.name}+{other.name}",
            self.basis,
            self.schedule.then(other.schedule),
            other.ideal @ self.ideal,
        )

    def model(self):
        return HamiltonianModel(self.basis, self.schedule)

    def run(self, states, lindblad=None, tol=DEFAULT_TOL, backend=None):
        """Final state(s): a ``dim x m`` block for pure input, a stack for density matrices."""
        if not self.schedule.segments:
            return np.array(states, dtype=complex)
        if lindblad is None:
            return evolve_schrodinger(states, self.model(), tol=tol, samples=None, backend=backend).final
        return evolve_master(states, self.model(), lindblad, tol=tol, samples=None, backend=backend).final


class GateBuilder:
    """Builds programs for one basis with calibrated pulse-3 phases."""

    def __init__(self, basis, settings=None):
        self.basis = basis
        self.settings = settings or GateSettings()
        missing = set(("g0", "g1", "e", "r0", "r1")) - set(basis.levels)
        if missing:
            raise InvalidArgument(f"gate programs need all five levels; missing {sorted(missing)}")

    def _check_ensemble(self, ensemble):
        self.basis.ensemble_atoms(ensemble)
        return ensemble

    def _pi_phase(self, area):
        """Amplitude factor of the ``g1 <-> r1`` transfer for a pulse of ``area``."""
        return rotation_matrix(area, 0.0)[1, 0]

    def _pulse(self, area, ensemble, transition=None, phase=0.0, frequency=None):
        s = self.settings
        return rabi_pulse(area, phase, transition or s.qubit_rydberg, frequency or s.rabi_frequency,
                          ensemble=ensemble)

    def _echo(self, theta, phi, ensemble, area_in=PI, area_out=3 * PI):
        """Pulses 1-5 (or 2-6 of the two-qubit gate) on one ensemble."""
        s = self.settings
        n = self.basis.ensemble_sizes[ensemble]
        alpha, beta = calibrate_frame(n, s)
        p_in = self._pi_phase(area_in)
        phys_phi = phi + np.angle(p_in) + beta - alpha
        sched = self._pulse(area_in, ensemble)
        sched = sched.then(s.stirap_half("up", ensemble))
        sched = sched.then(
            rabi_pulse(theta, phys_phi, s.rydberg_rydberg, s.microwave_frequency, ensemble=ensemble)
        )
        sched = sched.then(s.stirap_half("down", ensemble))
        sched = sched.then(self._pulse(area_out, ensemble))
        return sched

    def _local_ideal(self, theta, phi, area_in, area_out):
        """Logical action of the echo: ``R(theta, phi)`` up to a Z from the pulse pair."""
        sign = self._pi_phase(area_in) * rotation_matrix(area_out, 0.0)[0, 1]
        return np.diag([1.0, sign]) @ rotation_matrix(theta, phi)

    def rotation(self, theta, phi, ensemble=0, name=None):
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise InvalidArgument("rotation angles must be finite")
        self._check_ensemble(ensemble)
        sched = self._echo(theta, phi, ensemble)
        U = _embed(self._local_ideal(theta, phi, PI, 3 * PI), ensemble, self.basis.n_ensembles)
        return GateProgram(name or f"R({theta:.6g},{phi:.6g})@{ensemble}", self.basis, sched, U)

    def identity(self, ensemble=0):
        return self.rotation(0.0, 0.0, ensemble, name=f"identity@{ensemble}")

    def empty(self, name="none"):
        return GateProgram(name, self.basis, PulseSchedule(()), np.eye(2**self.basis.n_ensembles))

    def not_x(self, ensemble=0):
        return self.rotation(-PI, 0.0, ensemble, name=f"not_x@{ensemble}")

    def not_y(self, ensemble=0):
        return self.rotation(-PI, PI / 2, ensemble, name=f"not_y@{ensemble}")

    def not_z(self, ensemble=0):
        """Single 2pi pulse on ``g1 <-> r1``: ``|1>`` picks up a sign."""
        self._check_ensemble(ensemble)
        sched = self._pulse(2 * PI, ensemble)
        U = _embed(np.diag([1.0, -1.0]), ensemble, self.basis.n_ensembles)
        return GateProgram(f"not_z@{ensemble}", self.basis, sched, U)

    def hadamard(self, ensemble=0):
        """Echo with pi pulses at both ends and pulse 3 of area pi/2, phase pi/2.

        The pi/pi pair adds a Z to ``R_y(-pi/2)``, which gives H exactly.
        """
        self._check_ensemble(ensemble)
        sched = self._echo(PI / 2, PI / 2, ensemble, PI, PI)
        local = self._local_ideal(PI / 2, PI / 2, PI, PI)
        U = _embed(local, ensemble, self.basis.n_ensembles)
        return GateProgram(f"hadamard@{ensemble}", self.basis, sched, U)

    def cnot_type(self, control=0, target=1):
        """Seven-pulse gate: flips the target iff the control is in ``|0>``."""
        if self.basis.n_ensembles != 2 or {control, target} != {0, 1}:
            raise InvalidArgument("the CNOT-type gate needs a two-ensemble basis")
        sched = self._pulse(PI, control)
        # pulses 2-6: pi / pi pair gives Z R(pi, pi/2) = X on the target
        sched = sched.then(self._echo(PI, PI / 2, target, PI, PI))
        sched = sched.then(self._pulse(3 * PI, control))
        X = np.array([[0, 1], [1, 0]], dtype=complex)
        P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        ops = [None, None]
        ops[control], ops[target] = P0, X
        U = np.kron(*ops)
        ops[control], ops[target] = P1, np.eye(2)
        U = U + np.kron(*ops)
        return GateProgram("cnot_type", self.basis, sched, U)

    # -- preparations -----------------------------------------------------

    PREPARATIONS = ("H", "V", "D", "R")

    def prepare(self, which, ensemble=0):
        """Rotation taking ``|0>`` to the polarisation-style basis state ``which``."""
        self._check_ensemble(ensemble)
        if which == "H":
            return self.empty(f"prep_H@{ensemble}")
        if which == "V":
            return self.rotation(-PI, PI / 2, ensemble, f"prep_V@{ensemble}")
        if which == "D":
            return self.rotation(-PI / 2, PI / 2, ensemble, f"prep_D@{ensemble}")
        if which == "R":
            return self.rotation(PI / 2, 0.0, ensemble, f"prep_R@{ensemble}")
        raise InvalidArgument(f"unknown preparation {which!r}; use one of H, V, D, R")

    def analysis(self, which, ensemble=0):
        """Tomography analysis rotation: ``I``, ``Y`` = R_y(-pi/2) or ``X`` = R_x(pi/2)."""
        if which == "I":
            return self.empty(f"analysis_I@{ensemble}")
        if which == "Y":
            return self.rotation(PI / 2, PI / 2, ensemble, f"analysis_Y@{ensemble}")
        if which == "X":
            return self.rotation(-PI / 2, 0.0, ensemble, f"analysis_X@{ensemble}")
        raise InvalidArgument(f"unknown analysis rotation {which!r}")

    BELL_INPUTS = {"psip": (0, 0), "phip": (0, 1), "psim": (1, 0), "phim": (1, 1)}

    def bell(self, which, control=0, target=1):
        """Input flips by R_y(pi), Hadamard on the control, then the CNOT-type gate."""
        if which not in self.BELL_INPUTS:
            raise InvalidArgument(f"unknown Bell state {which!r}; use one of {sorted(self.BELL_INPUTS)}")
        bits = self.BELL_INPUTS[which]
        prog = self.empty("bell")
        for ens, bit in zip((control, target), bits):
            if bit:
                prog = prog.then(self.prepare("V", ens))
        prog = prog.then(self.hadamard(control)).then(self.cnot_type(control, target))
        return replace(prog, name=f"bell_{which}")


ANALYSIS_ROTATIONS = {
    "I": np.eye(2, dtype=complex),
    "Y": ry(-PI / 2),
    "X": rx(PI / 2),
}

PREPARATION_ROTATIONS = {
    "H": np.eye(2, dtype=complex),
    "V": ry(PI),
    "D": ry(PI / 2),
    "R": rx(-PI / 2),
}


# module-level conveniences with default settings ------------------------

def single_qubit_rotation(basis, theta, phi, ensemble=0, settings=None):
    return GateBuilder(basis, settings).rotation(theta, phi, ensemble)


def hadamard(basis, ensemble=0, settings=None):
    return GateBuilder(basis, settings).hadamard(ensemble)


def not_x(basis, ensemble=0, settings=None):
    return GateBuilder(basis, settings).not_x(ensemble)


def not_y(basis, ensemble=0, settings=None):
    return GateBuilder(basis, settings).not_y(ensemble)


def not_z(basis, ensemble=0, settings=None):
    return GateBuilder(basis, settings).not_z(ensemble)


def cnot_type(basis, settings=None):
    return GateBuilder(basis, settings).cnot_type()


def bell_program(basis, which, settings=None):
    return GateBuilder(basis, settings).bell(which)


def prepare_basis_state(basis, which, ensemble=0, settings=None):
    return GateBuilder(basis, settings).prepare(which, ensemble)
