"""Dormand-Prince 8(5,3) tableau in the layout used by the compiled integrator.

The coefficients are taken from scipy's own table so both backends integrate
with bit-identical Butcher data.
"""

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _c

N_STAGES = _c.N_STAGES
A = np.ascontiguousarray(_c.A[:N_STAGES, :N_STAGES], dtype=float)
B = np.ascontiguousarray(_c.B, dtype=float)
C = np.ascontiguousarray(_c.C[:N_STAGES], dtype=float)
E3 = np.ascontiguousarray(_c.E3, dtype=float)
E5 = np.ascontiguousarray(_c.E5, dtype=float)
ERROR_EXPONENT = -1.0 / 8.0
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
