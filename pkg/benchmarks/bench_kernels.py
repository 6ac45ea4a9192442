"""Compare the compiled integrator against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--max-atoms 3]

Each case propagates an optimised double STIRAP on a single superatom with
both backends and reports the best wall time, the speed-up and the largest
difference between the final states.
"""

import argparse
import time

import numpy as np

from superatom_qpt.core import build_basis, collective_state
from superatom_qpt.kernels import BACKEND
from superatom_qpt.propagator import HamiltonianModel, LindbladModel, evolve_master, evolve_schrodinger
from superatom_qpt.pulses import StirapParams, double_stirap_schedule, mhz


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def _cases(max_atoms):
    sched = double_stirap_schedule(StirapParams.long())
    for n in range(1, max_atoms + 1):
        basis = build_basis([n])
        model = HamiltonianModel(basis, sched)
        psi = collective_state(basis, 0, "g0")
        yield (f"pure N={n} (dim {basis.dim})",
               lambda b, m=model, p=psi: evolve_schrodinger(p, m, samples=None, backend=b).final)
    for n in range(1, min(max_atoms, 2) + 1):
        basis = build_basis([n])
        model = HamiltonianModel(basis, sched)
        psi = collective_state(basis, 0, "g0")
        rho = np.outer(psi, psi.conj())
        lind = LindbladModel(mhz(5.0), mhz(0.8e-3))
        yield (f"master N={n} (dim {basis.dim})",
               lambda b, m=model, r=rho, l=lind: evolve_master(r, m, l, samples=None,
                                                               backend=b).final)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--max-atoms", type=int, default=3)
    args = parser.parse_args(argv)

    if BACKEND != "compiled":
        print("compiled extension not available; build it with "
              "`pip install -e . --no-build-isolation`")
        return 1
    print(f"{'case':<24}{'compiled [s]':>14}{'python [s]':>12}{'speed-up':>10}{'max |diff|':>12}")
    for label, run in _cases(args.max_atoms):
        tc, yc = _best(lambda: run("compiled"), args.repeat)
        tp, yp = _best(lambda: run("python"), args.repeat)
        print(f"{label:<24}{tc:>14.3f}{tp:>12.3f}{tp / tc:>10.1f}{np.abs(yc - yp).max():>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
