"""Integrator backend selection.

The compiled extension is used when it can be imported. Setting the
environment variable ``SUPERATOM_QPT_PURE_PYTHON`` to a non-empty value other
than ``0`` forces the scipy implementation.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _dop853, _kernels_py

ENV_FORCE_PURE = "SUPERATOM_QPT_PURE_PYTHON"


@dataclass(frozen=True)
class CompiledProblem:
    """Flat array form of a schedule on a concrete basis.

    Couplings are grouped by segment; coupling ``c`` acts on index pairs
    ``src[cp_off[c]:cp_off[c+1]]`` -> ``dst[...]`` with matrix element
    ``envelope(t) * cp_coef[c]`` (the conjugate on the transposed pair).
    """

    n: int
    seg_t: np.ndarray
    seg_diag: np.ndarray
    cp_seg: np.ndarray
    cp_kind: np.ndarray
    cp_par: np.ndarray
    cp_coef: np.ndarray
    cp_off: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    gamma: np.ndarray
    master: bool = False
    sink: int = -1


def _load_compiled():
    flag = os.environ.get(ENV_FORCE_PURE, "")
    if flag and flag != "0":
        return None
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the backend module: ``"compiled"``, ``"python"`` or the default."""
    name = name or BACKEND
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available in this installation")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def propagate(problem, y0, times, rtol, atol, max_steps=10_000_000, backend=None):
    mod = get_backend(backend)
    return mod.propagate(
        problem, y0, np.asarray(times, dtype=float), float(rtol), float(atol), int(max_steps),
        _dop853.A, _dop853.B, _dop853.C, _dop853.E3, _dop853.E5,
    )


def rhs(problem, m, seg, t, y, backend=None):
    return get_backend(backend).rhs(problem, int(m), int(seg), float(t), y)
