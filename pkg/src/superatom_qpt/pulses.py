"""Pulse envelopes and piecewise pulse schedules.

Frequencies are angular (rad/s) and times are in seconds throughout. The
helpers :func:`mhz` and ``US`` convert from the "f/2pi in MHz" and
microsecond figures used in configuration files.

Each coupling contributes ``(Omega(t)/2) e^{i phi} |b><a| + h.c.`` for every
atom it addresses, with a real non-negative envelope ``Omega(t)``. A schedule
is a time-ordered list of segments; couplings inside one segment act
simultaneously, and segments never overlap.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument

US = 1e-6
NS = 1e-9
TWO_PI = 2.0 * math.pi


def mhz(f):
    """Angular frequency for a value quoted as f/2pi in MHz."""
    return TWO_PI * f * 1e6


@dataclass(frozen=True)
class StirapParams:
    """Optimised (hypergaussian) STIRAP pair; ``T`` is tied to ``T0 / 2``."""

    omega0: float
    delta: float
    T0: float
    t1: float
    t2: float
    n: int = 3
    lam: float = 4.0

    def __post_init__(self):
        if not self.T0 > 0:
            raise InvalidArgument("T0 must be positive")
        if self.n < 1:
            raise InvalidArgument("hypergaussian order must be >= 1")
        if self.omega0 < 0:
            raise InvalidArgument("omega0 is an amplitude and must be >= 0")

    @property
    def T(self):
        return self.T0 / 2

    @classmethod
    def long(cls):
        """Long-pulse set: 50 MHz Rabi frequency, 200 MHz detuning, T0 = 2 us."""
        return cls(omega0=mhz(50), delta=mhz(200), T0=2 * US, t1=-4 * US, t2=4 * US)

    @classmethod
    def short(cls):
        """Short-pulse set used against intermediate-state decay."""
        return cls(omega0=mhz(500), delta=mhz(2000), T0=100 * NS, t1=-170 * NS, t2=170 * NS)


@dataclass(frozen=True)
class GaussianStirapParams:
    omega0: float
    delta: float
    tau: float
    t1: float
    t2: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")

    @classmethod
    def long(cls):
        # t1 > t2: the pump (leg 1) peaks second, i.e. counter-intuitive order
        return cls(omega0=mhz(50), delta=mhz(200), tau=1 * US, t1=1 * US, t2=-1 * US)


def _hypergauss(s, T0, n):
    return np.exp(-((s / T0) ** (2 * n)))


def _sigmoid(s, lam, T):
    # written with exp of a non-positive argument so it never overflows
    x = lam * np.asarray(s, dtype=float) / T
    ex = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))


ENVELOPE_KINDS = ("const", "hg_sin", "hg_cos", "gauss")


@dataclass(frozen=True)
class Envelope:
    """Real envelope ``Omega(t)``; evaluated identically by both integrator backends.

    * ``const``:  ``amplitude``
    * ``hg_sin``: ``amplitude F(t - center) sin(pi/2 f(t - center))``
    * ``hg_cos``: same with ``cos``
    * ``gauss``:  ``amplitude exp(-(t - center)^2 / 2 width^2)``

    with ``F(s) = exp(-(s/width)^(2 order))`` and
    ``f(s) = 1 / (1 + exp(-steepness s / (width/2)))``.
    """

    kind: str
    amplitude: float
    center: float = 0.0
    width: float = 1.0
    order: int = 3
    steepness: float = 4.0

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise InvalidArgument(f"unknown envelope kind {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return np.full_like(t, self.amplitude)
        s = t - self.center
        if self.kind == "gauss":
            return self.amplitude * np.exp(-(s**2) / (2 * self.width**2))
        F = _hypergauss(s, self.width, self.order)
        f = _sigmoid(s, self.steepness, self.width / 2)
        trig = np.sin if self.kind == "hg_sin" else np.cos
        return self.amplitude * F * trig(0.5 * np.pi * f)

    def shifted(self, dt):
        return replace(self, center=self.center + dt)

    def params(self):
        """Packed parameters for the compiled kernel."""
        return (
            ENVELOPE_KINDS.index(self.kind),
            (self.amplitude, self.center, self.width, float(self.order), self.steepness),
        )


@dataclass(frozen=True)
class Coupling:
    transition: tuple
    envelope: Envelope
    phase: float = 0.0
    ensemble: int = None

    def shifted(self, dt):
        return replace(self, envelope=self.envelope.shifted(dt))


@dataclass(frozen=True)
class Detuning:
    """Rotating-frame energy of ``level`` for every atom of ``ensemble`` (all atoms if None)."""

    level: str
    value: float
    ensemble: int = None


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    couplings: tuple = ()
    detunings: tuple = ()
    label: str = ""

    def __post_init__(self):
        if not self.t_end >= self.t_start:
            raise InvalidArgument(f"segment {self.label!r} ends before it starts")

    @property
    def duration(self):
        return self.t_end - self.t_start

    def shifted(self, dt):
        return replace(
            self,
            t_start=self.t_start + dt,
            t_end=self.t_end + dt,
            couplings=tuple(c.shifted(dt) for c in self.couplings),
        )


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        for prev, nxt in zip(segs, segs[1:]):
            # tolerate float round-off from repeated shifting
            if nxt.t_start < prev.t_end - 1e-9 * max(abs(prev.t_end), 1e-12):
                raise InvalidArgument(
                    f"segments {prev.label!r} and {nxt.label!r} overlap; put simultaneous "
                    "couplings into one segment"
                )

    @property
    def t_start(self):
        return self.segments[0].t_start if self.segments else 0.0

    @property
    def t_end(self):
        return self.segments[-1].t_end if self.segments else 0.0

    @property
    def duration(self):
        return self.t_end - self.t_start

    def shifted(self, dt):
        return PulseSchedule(tuple(s.shifted(dt) for s in self.segments))

    def starting_at(self, t):
        return self.shifted(t - self.t_start)

    def then(self, other, gap=0.0):
        """Append ``other`` after this schedule, ``gap`` seconds later."""
        if not other.segments:
            return self
        if not self.segments:
            return other
        t = self.t_end + gap
        parts = other.starting_at(t).segments
        # the shift can land a few ulps early; snap the join exactly
        first = replace(parts[0], t_start=max(parts[0].t_start, t))
        return PulseSchedule(self.segments + (first,) + parts[1:])

    def levels(self):
        out = set()
        for seg in self.segments:
            for c in seg.couplings:
                out.update(c.transition)
            out.update(d.level for d in seg.detunings)
        return out


def optimized_stirap_envelopes(p, t):
    """Both legs of the optimised double sequence at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    F1, F2 = _hypergauss(t - p.t1, p.T0, p.n), _hypergauss(t - p.t2, p.T0, p.n)
    a1 = 0.5 * np.pi * _sigmoid(t - p.t1, p.lam, p.T)
    a2 = 0.5 * np.pi * _sigmoid(t - p.t2, p.lam, p.T)
    omega1 = p.omega0 * (F1 * np.sin(a1) + F2 * np.cos(a2))
    omega2 = p.omega0 * (F1 * np.cos(a1) + F2 * np.sin(a2))
    return omega1, omega2


def gaussian_stirap_envelopes(p, t):
    t = np.asarray(t, dtype=float)
    omega1 = p.omega0 * np.exp(-((t - p.t1) ** 2) / (2 * p.tau**2))
    omega2 = p.omega0 * np.exp(-((t - p.t2) ** 2) / (2 * p.tau**2))
    return omega1, omega2


def _hg(kind, p, center):
    return Envelope(kind, p.omega0, center=center, width=p.T0, order=p.n, steepness=p.lam)


def stirap_segment(
    p,
    stage,
    t_from,
    t_to,
    detuning_sign=1,
    ensemble=None,
    pump=("g0", "e"),
    stokes=("e", "r0"),
):
    """One sequence of the optimised pair as a segment on ``[t_from, t_to]``.

    ``stage="up"`` is the excitation sequence centred at ``t1`` (Stokes leg
    first); ``stage="down"`` the de-excitation sequence centred at ``t2``.
    """
    if stage == "up":
        legs = (_hg("hg_sin", p, p.t1), _hg("hg_cos", p, p.t1))
    elif stage == "down":
        legs = (_hg("hg_cos", p, p.t2), _hg("hg_sin", p, p.t2))
    else:
        raise InvalidArgument(f"stage must be 'up' or 'down', got {stage!r}")
    return Segment(
        t_from,
        t_to,
        couplings=(
            Coupling(tuple(pump), legs[0], ensemble=ensemble),
            Coupling(tuple(stokes), legs[1], ensemble=ensemble),
        ),
        detunings=(Detuning(pump[1], detuning_sign * p.delta, ensemble),),
        label=f"stirap_{stage}",
    )


TAIL_LIMIT = 1e-9


def check_separation(p):
    """Raise unless the two sequences are separated by negligible tails.

    The hypergaussian at the midpoint must have decayed below ``TAIL_LIMIT``.
    """
    half = (p.t2 - p.t1) / 2
    if half <= 0 or float(_hypergauss(half, p.T0, p.n)) > TAIL_LIMIT:
        raise InvalidArgument(
            f"STIRAP sequences at t1={p.t1:g}s and t2={p.t2:g}s overlap for T0={p.T0:g}s"
        )


def double_stirap_schedule(p, switch_detuning_sign=True, ensemble=None, outer=None,
                           pump=("g0", "e"), stokes=("e", "r0")):
    """Excitation at ``t1`` then de-excitation at ``t2``.

    With ``switch_detuning_sign`` the second sequence runs at ``-delta``.
    ``outer`` is how far each window reaches beyond its centre on the far
    side (defaults to the half-separation, i.e. a symmetric layout).
    """
    check_separation(p)
    half = (p.t2 - p.t1) / 2
    mid = p.t1 + half
    outer = half if outer is None else outer
    sign2 = -1 if switch_detuning_sign else 1
    return PulseSchedule(
        (
            stirap_segment(p, "up", p.t1 - outer, mid, 1, ensemble, pump, stokes),
            stirap_segment(p, "down", mid, p.t2 + outer, sign2, ensemble, pump, stokes),
        )
    )


def single_stirap_schedule(p, ensemble=None, outer=None, pump=("g0", "e"), stokes=("e", "r0")):
    """Only the excitation half, ending at the midpoint between the sequences."""
    check_separation(p)
    half = (p.t2 - p.t1) / 2
    outer = half if outer is None else outer
    return PulseSchedule((stirap_segment(p, "up", p.t1 - outer, p.t1 + half, 1, ensemble, pump, stokes),))


def gaussian_stirap_schedule(p, span=None, ensemble=None, pump=("g0", "e"), stokes=("e", "r0")):
    """Single Gaussian STIRAP on ``[min(t1,t2) - span, max(t1,t2) + span]`` (span = 8 tau)."""
    span = 8 * p.tau if span is None else span
    lo, hi = min(p.t1, p.t2) - span, max(p.t1, p.t2) + span
    return PulseSchedule(
        (
            Segment(
                lo,
                hi,
                couplings=(
                    Coupling(pump, Envelope("gauss", p.omega0, p.t1, p.tau), ensemble=ensemble),
                    Coupling(stokes, Envelope("gauss", p.omega0, p.t2, p.tau), ensemble=ensemble),
                ),
                detunings=(Detuning(pump[1], p.delta, ensemble),),
                label="stirap_gauss",
            ),
        )
    )


def rabi_pulse(theta, phi, transition, rabi_frequency, t_start=0.0, ensemble=None):
    """Constant resonant pulse whose ideal two-level action is ``R(theta, phi)``.

    ``R(theta, phi)`` has ``cos(theta/2)`` on the diagonal and
    ``i e^{-i phi} sin(theta/2)`` / ``i e^{i phi} sin(theta/2)`` off it, and a
    pulse of area ``A`` realises ``theta = -A``. Positive angles therefore
    use the opposite phase.
    """
    if not (math.isfinite(theta) and math.isfinite(phi)):
        raise InvalidArgument("pulse area and phase must be finite")
    if not rabi_frequency > 0:
        raise InvalidArgument("rabi_frequency must be positive")
    if theta == 0:
        return PulseSchedule(())
    area = abs(theta)
    phase = phi + math.pi if theta > 0 else phi
    seg = Segment(
        t_start,
        t_start + area / rabi_frequency,
        couplings=(
            Coupling(tuple(transition), Envelope("const", rabi_frequency), phase, ensemble),
        ),
        label=f"rabi_{transition[0]}_{transition[1]}",
    )
    return PulseSchedule((seg,))


def rotation_matrix(theta, phi):
    """Two-level ``R(theta, phi)`` in the pulse-phase convention above."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, 1j * np.exp(-1j * phi) * s], [1j * np.exp(1j * phi) * s, c]], dtype=complex
    )


def rx(theta):
    return rotation_matrix(-theta, 0.0)


def ry(theta):
    return rotation_matrix(-theta, math.pi / 2)


def pulse_area(schedule, t=None):
    """Integral of every coupling envelope over its segment (trapezoid on a fine grid)."""
    total = 0.0
    for seg in schedule.segments:
        grid = np.linspace(seg.t_start, seg.t_end, 20001) if t is None else t
        for c in seg.couplings:
            total += np.trapezoid(c.envelope(grid), grid)
    return total
