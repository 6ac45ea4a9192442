"""Simulated gates and tomography for Rydberg superatom qubits.

The package is organised bottom-up:

``core``
    blockade-truncated many-atom basis, logical states, Pauli operators
``pulses``
    STIRAP and resonant pulse envelopes, pulse schedules
``propagator``
    Schrödinger and Lindblad time evolution on top of ``kernels``
``gates``
    gate pulse programs with calibrated frames
``tomography``, ``mle``
    linear-inversion state/process tomography and least-squares projection
``simulate``, ``experiments``, ``cli``
    simulated tomography runs, presets and the command line
"""

__version__ = "0.1.0"

from .core import (
    build_basis, collective_state, expected_dim, logical_basis, logical_populations,
    logical_state, pauli_basis,
)
from .errors import (
    ConvergenceFailure, IntegrationFailure, InvalidArgument, InvalidConfig, InvalidRecord,
    SuperatomError,
)
from .gates import GateBuilder, GateProgram, GateSettings, short_pulse_settings
from .kernels import BACKEND
from .mle import mle_chi, mle_density
from .propagator import (
    HamiltonianModel, LindbladModel, Trajectory, evolve_master, evolve_schrodinger, ground_phase,
)
from .pulses import (
    GaussianStirapParams, PulseSchedule, StirapParams, double_stirap_schedule, mhz, rabi_pulse,
    rotation_matrix,
)
from .tomography import fidelity, ideal_chi, process_tomo_1q, process_tomo_2q, state_tomo_1q, state_tomo_2q

__all__ = [
    "BACKEND", "ConvergenceFailure", "GateBuilder", "GateProgram", "GateSettings",
    "GaussianStirapParams", "HamiltonianModel", "IntegrationFailure", "InvalidArgument",
    "InvalidConfig", "InvalidRecord", "LindbladModel", "PulseSchedule", "StirapParams",
    "SuperatomError", "Trajectory", "build_basis", "collective_state", "double_stirap_schedule",
    "evolve_master", "evolve_schrodinger", "expected_dim", "fidelity", "ground_phase", "ideal_chi",
    "logical_basis", "logical_populations", "logical_state", "mhz", "mle_chi", "mle_density",
    "pauli_basis", "process_tomo_1q", "process_tomo_2q", "rabi_pulse", "rotation_matrix",
    "short_pulse_settings", "state_tomo_1q", "state_tomo_2q",
]
