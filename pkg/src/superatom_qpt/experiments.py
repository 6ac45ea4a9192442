"""Experiment presets, configuration validation and result export.

A configuration is a JSON-style dictionary. It either names a preset,

    {"preset": "decay_scan", "params": {"n_atoms": [1, 2]}, "tol": 1e-9}

or describes a run explicitly (see ``EXPLICIT_KEYS``). Values follow the
laboratory convention: frequencies are f/2pi in MHz, times in microseconds
and angles in radians. They are converted to angular SI units here and
nowhere else.

Every run writes ``summary.json`` (deterministic: reruns with the same
configuration give identical bytes) and ``timing.json`` (wall-clock times,
which naturally vary), plus CSV series, gnuplot grids and script stubs.
"""

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import build_basis, collective_state, logical_state
from .errors import InvalidConfig
from .gates import GateBuilder, GateSettings, short_pulse_settings
from .propagator import (
    DEFAULT_SAMPLES, DEFAULT_TOL, HamiltonianModel, LindbladModel, evolve_master,
    evolve_schrodinger, evolve_with_phase, ground_phase, write_trajectory_csv,
)
from .pulses import (
    US, GaussianStirapParams, PulseSchedule, StirapParams, double_stirap_schedule,
    gaussian_stirap_schedule, mhz, rabi_pulse, single_stirap_schedule,
)
from .simulate import Executor, logical_action, process_tomography, state_tomography
from .tomography import (
    bell_state_density, gnuplot_script, matrix_labels, write_gnuplot_grid, write_matrix_json,
)

TOL_RANGE = (1e-14, 1e-6)
MAX_THREADS = 256
DECAY_RATES_MHZ = (5.0, 0.8e-3)
STIRAP_LEVELS = ("g0", "e", "r0")
GATES_1Q = ("identity", "not_x", "not_y", "not_z", "hadamard")
BELL_STATES = ("psip", "phip", "psim", "phim")


# -- small writers --------------------------------------------------------

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _plain(obj):
    """JSON-ready copy with numpy scalars and arrays turned into Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_plain(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Output:
    """Collects written files and timings for one run."""

    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        self.files = []
        self.timing = {}

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.dir, name)

    def csv(self, name, header, rows):
        _write_csv(self.path(name), header, rows)

    def json(self, name, doc):
        _write_json(self.path(name), doc)

    def matrix(self, stem, M, kind, n_qubits, title, **extra):
        """JSON matrix, gnuplot grid of ``|M|`` and a script stub that plots it."""
        labels = matrix_labels(n_qubits, kind)
        write_matrix_json(self.path(stem + ".json"), M, kind, n_qubits, **extra)
        write_gnuplot_grid(self.path(stem + ".dat"), M, labels)
        with open(self.path(stem + ".gp"), "w") as fh:
            fh.write(gnuplot_script(stem + ".dat", title, labels))

    def timed(self, key, fn, *args, **kwargs):
        start = time.perf_counter()
        out = fn(*args, **kwargs)
        self.timing[key] = time.perf_counter() - start
        return out


# -- parameter checks -----------------------------------------------------

def _int_list(lo, hi):
    def check(v):
        if not isinstance(v, list) or not v:
            return "expected a non-empty list of integers"
        if any(not isinstance(x, int) or isinstance(x, bool) or not lo <= x <= hi for x in v):
            return f"entries must be integers in [{lo}, {hi}]"
        return None
    return check


def _config_list(max_each, max_total):
    def check(v):
        if not isinstance(v, list) or not v:
            return "expected a non-empty list of ensemble-size pairs"
        for c in v:
            if (not isinstance(c, list) or len(c) != 2
                    or any(not isinstance(x, int) or isinstance(x, bool) or not 1 <= x <= max_each
                           for x in c)):
                return f"each entry must be a pair of sizes in [1, {max_each}]"
            if sum(c) > max_total:
                return f"configuration {c} exceeds {max_total} atoms"
        return None
    return check


def _bool(v):
    return None if isinstance(v, bool) else "expected true or false"


def _non_negative(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
        return "expected a finite non-negative number"
    return None


def _finite(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        return "expected a finite number"
    return None


def _positive(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        return "expected a finite positive number"
    return None


def _subset(choices):
    def check(v):
        if not isinstance(v, list) or not v or any(x not in choices for x in v):
            return f"expected a non-empty list drawn from {list(choices)}"
        return None
    return check


def _pair(v):
    if (not isinstance(v, list) or len(v) != 2
            or any(not isinstance(x, int) or isinstance(x, bool) or not 1 <= x <= 3 for x in v)):
        return "expected a pair of ensemble sizes in [1, 3]"
    return None


# -- presets --------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    budget_s: float
    params: dict = field(default_factory=dict)
    runner: object = None

    def defaults(self):
        return {k: v[0] for k, v in self.params.items()}


PRESETS = {}


def _preset(name, description, budget_s, **params):
    def register(fn):
        PRESETS[name] = Preset(name, description, budget_s, params, fn)
        return fn
    return register


def _stirap_basis(n):
    return build_basis([n], levels=STIRAP_LEVELS)


def _transfer_error(n, schedule, lindblad, tol, backend):
    """``1 - P1`` for the collective ``g0 -> r0`` transfer of an ``n``-atom ensemble."""
    basis = _stirap_basis(n)
    model = HamiltonianModel(basis, schedule)
    g = collective_state(basis, 0, "g0")
    r = collective_state(basis, 0, "r0")
    if lindblad is None:
        out = evolve_schrodinger(g, model, tol=tol, samples=None, backend=backend).final
        return 1.0 - float(abs(r.conj() @ out) ** 2)
    out = evolve_master(np.outer(g, g.conj()), model, lindblad, tol=tol, samples=None,
                        backend=backend).final
    d = basis.dim
    return 1.0 - float(np.real(r.conj() @ out[:d, :d] @ r))


@_preset(
    "stirap_error_scan",
    "Population-transfer error of one optimised and one Gaussian STIRAP sequence versus N",
    60,
    n_atoms=([1, 2, 3, 4, 5], _int_list(1, 6)),
)
def _run_stirap_error_scan(ctx, params):
    opt = single_stirap_schedule(StirapParams.long())
    gauss = gaussian_stirap_schedule(GaussianStirapParams.long())

    def one(n):
        return (_transfer_error(n, opt, None, ctx.tol, ctx.backend),
                _transfer_error(n, gauss, None, ctx.tol, ctx.backend))

    res = ctx.out.timed("scan", ctx.map, one, params["n_atoms"])
    rows = [(n, e_opt, e_g) for n, (e_opt, e_g) in zip(params["n_atoms"], res)]
    ctx.out.csv("stirap_error_scan.csv", ["N", "error_optimized", "error_gaussian"], rows)
    return {
        "rows": [{"N": n, "error_optimized": a, "error_gaussian": b} for n, a, b in rows],
        "max_error_optimized": max(r[1] for r in rows),
        "max_error_gaussian": max(r[2] for r in rows),
    }


def _wrap(phi):
    return float((phi + np.pi) % (2 * np.pi) - np.pi)


@_preset(
    "phase_check",
    "Transfer probability and ground-state phase through a double STIRAP, with and without "
    "the detuning sign switch",
    120,
    n_atoms=([1, 2, 3, 4], _int_list(1, 6)),
    samples=(DEFAULT_SAMPLES, _positive),
)
def _run_phase_check(ctx, params):
    p = StirapParams.long()
    jobs = [(n, sw) for n in params["n_atoms"] for sw in (True, False)]

    def one(job):
        n, sw = job
        basis = _stirap_basis(n)
        model = HamiltonianModel(basis, double_stirap_schedule(p, sw))
        traj, phase = evolve_with_phase(collective_state(basis, 0, "g0"), model, tol=ctx.tol,
                                        samples=int(params["samples"]), backend=ctx.backend)
        return traj, phase

    res = ctx.out.timed("trajectories", ctx.map, one, jobs)
    finals = {}
    for (n, sw), (traj, phase) in zip(jobs, res):
        tag = "switched" if sw else "unswitched"
        write_trajectory_csv(ctx.out.path(f"phase_N{n}_{tag}.csv"), traj, phase)
        amp = traj.final[traj.basis.ground_index()]
        finals[(n, sw)] = (_wrap(np.angle(amp)), float(abs(amp) ** 2), float(phase[-1]))
    rows = [(n, *finals[(n, True)][:2], *finals[(n, False)][:2]) for n in params["n_atoms"]]
    ctx.out.csv("phase_summary.csv",
                ["N", "final_phase_switched", "final_ground_population_switched",
                 "final_phase_unswitched", "final_ground_population_unswitched"], rows)
    return {
        "rows": [
            {"N": n, "final_phase_switched": a, "final_phase_unswitched": c,
             "final_ground_population_switched": b, "final_ground_population_unswitched": d}
            for n, a, b, c, d in rows
        ],
        "max_abs_phase_switched": max(abs(r[1]) for r in rows),
    }


def _gate_program(builder, name, ensemble=0):
    return getattr(builder, name)(ensemble)


def _chi_outputs(ctx, stem, result, title, n_qubits):
    ctx.out.matrix(stem + "_linear", result.chi_linear, "process", n_qubits, title + " (linear)")
    ctx.out.matrix(stem + "_mle", result.chi_mle, "process", n_qubits, title + " (MLE)")


def _mle_summary(report):
    # wall time goes to timing.json so the summary stays reproducible
    return {k: v for k, v in report.items() if k != "wall_time_s"}


@_preset(
    "single_qubit_chi",
    "Process tomography of the identity, NOT-X, NOT-Y, NOT-Z and Hadamard gates",
    600,
    n_atoms=([1, 2, 3, 4], _int_list(1, 6)),
    gates=(list(GATES_1Q), _subset(GATES_1Q)),
    physical_analysis=(False, _bool),
)
def _run_single_qubit_chi(ctx, params):
    rows, docs = [], []
    for n in params["n_atoms"]:
        builder = GateBuilder(build_basis([n]), ctx.settings())
        ex = ctx.executor(builder)
        for g in params["gates"]:
            r = ctx.out.timed(f"N{n}_{g}", process_tomography, _gate_program(builder, g), ex,
                              physical_analysis=params["physical_analysis"])
            ctx.out.timing[f"N{n}_{g}_mle"] = r.mle_report.get("wall_time_s", 0.0)
            _chi_outputs(ctx, f"chi_{g}_N{n}", r, f"{g}, N = {n}", 1)
            rows.append((n, g, r.error_linear, r.error, r.mle_shift))
            docs.append({"N": n, "gate": g, "error_linear": r.error_linear, "error_mle": r.error,
                         "mle_shift": r.mle_shift, "mle": _mle_summary(r.mle_report)})
    ctx.out.csv("gate_errors.csv", ["N", "gate", "error_linear", "error_mle", "mle_shift"], rows)
    return {"rows": docs, "max_error": max(r[3] for r in rows)}


@_preset(
    "bell_states",
    "State tomography of the four Bell states made by a Hadamard and the CNOT-type gate",
    1800,
    configurations=([[1, 1], [1, 2], [2, 1], [2, 2]], _config_list(3, 5)),
    states=(list(BELL_STATES), _subset(BELL_STATES)),
    physical_analysis=(False, _bool),
)
def _run_bell_states(ctx, params):
    rows, docs = [], []
    for cfg in params["configurations"]:
        builder = GateBuilder(build_basis(cfg), ctx.settings())
        ex = ctx.executor(builder)
        tag = f"{cfg[0]}{cfg[1]}"
        for w in params["states"]:
            r = ctx.out.timed(f"{tag}_{w}", state_tomography, builder.bell(w), ex,
                              bell_state_density(w), physical_analysis=params["physical_analysis"])
            ctx.out.matrix(f"rho_{w}_{tag}", r.rho_mle, "state", 2, f"{w}, N = ({cfg[0]}, {cfg[1]})")
            rows.append((tag, w, r.error_linear, r.error))
            docs.append({"configuration": cfg, "state": w, "error_linear": r.error_linear,
                         "error_mle": r.error})
    ctx.out.csv("bell_errors.csv", ["configuration", "state", "error_linear", "error_mle"], rows)
    return {"rows": docs, "max_error": max(r[3] for r in rows)}


@_preset(
    "cnot_chi",
    "Two-qubit process tomography of the CNOT-type gate",
    3600,
    configuration=([1, 1], _pair),
    physical_analysis=(False, _bool),
)
def _run_cnot_chi(ctx, params):
    cfg = params["configuration"]
    builder = GateBuilder(build_basis(cfg), ctx.settings())
    r = ctx.out.timed("tomography", process_tomography, builder.cnot_type(), ctx.executor(builder),
                      physical_analysis=params["physical_analysis"])
    ctx.out.timing["mle"] = r.mle_report.get("wall_time_s", 0.0)
    _chi_outputs(ctx, "chi_cnot", r, f"CNOT-type, N = ({cfg[0]}, {cfg[1]})", 2)
    ctx.out.matrix("chi_cnot_ideal", r.chi_ideal, "process", 2, "CNOT-type (ideal)")
    r.record.write_csv(ctx.out.path("cnot_populations.csv"))
    return {"configuration": cfg, "error_linear": r.error_linear, "error_mle": r.error,
            "mle_shift": r.mle_shift, "mle": _mle_summary(r.mle_report)}


@_preset(
    "decay_scan",
    "Transfer error of one optimised STIRAP sequence with intermediate and Rydberg decay, "
    "for the long-pulse and short-pulse parameter sets",
    300,
    n_atoms=([1, 2, 3, 4], _int_list(1, 6)),
    gamma_e=(DECAY_RATES_MHZ[0], _non_negative),
    gamma_r=(DECAY_RATES_MHZ[1], _non_negative),
)
def _run_decay_scan(ctx, params):
    lind = LindbladModel(mhz(params["gamma_e"]), mhz(params["gamma_r"]))
    out = {}
    for label, p in (("long", StirapParams.long()), ("short", StirapParams.short())):
        sched = single_stirap_schedule(p)

        def one(n):
            return (_transfer_error(n, sched, None, ctx.tol, ctx.backend),
                    _transfer_error(n, sched, lind, ctx.tol, ctx.backend))

        res = ctx.out.timed(label, ctx.map, one, params["n_atoms"])
        rows = [(n, closed, dec, dec / closed if closed > 0 else math.inf)
                for n, (closed, dec) in zip(params["n_atoms"], res)]
        ctx.out.csv(f"decay_{label}.csv", ["N", "error_closed", "error_decay", "ratio"], rows)
        out[label] = [{"N": n, "error_closed": a, "error_decay": b, "ratio": c} for n, a, b, c in rows]
    return out


@_preset(
    "hadamard_decay",
    "Hadamard process tomography with decay under the short-pulse parameters, simulated "
    "preparation and simulated analysis rotations",
    1200,
    n_atoms=([1, 2], _int_list(1, 3)),
    gamma_e=(DECAY_RATES_MHZ[0], _non_negative),
    gamma_r=(DECAY_RATES_MHZ[1], _non_negative),
    span_us=(0.6, _positive),
    physical_analysis=(True, _bool),
)
def _run_hadamard_decay(ctx, params):
    settings = replace(short_pulse_settings(span=params["span_us"] * US), tol=ctx.tol)
    lind = LindbladModel(mhz(params["gamma_e"]), mhz(params["gamma_r"]))
    rows, docs = [], []
    for n in params["n_atoms"]:
        builder = GateBuilder(build_basis([n]), settings)
        prog = builder.hadamard()
        ex = ctx.executor(builder, lind)
        r = ctx.out.timed(f"N{n}", process_tomography, prog, ex,
                          physical_analysis=params["physical_analysis"])
        ctx.out.timing[f"N{n}_mle"] = r.mle_report.get("wall_time_s", 0.0)
        _chi_outputs(ctx, f"chi_hadamard_decay_N{n}", r, f"Hadamard with decay, N = {n}", 1)
        rows.append((n, r.error_linear, r.error, prog.duration / US))
        docs.append({"N": n, "error_linear": r.error_linear, "error_mle": r.error,
                     "duration_us": prog.duration / US, "mle": _mle_summary(r.mle_report)})
    ctx.out.csv("hadamard_decay.csv", ["N", "error_linear", "error_mle", "duration_us"], rows)
    return {"rows": docs}


def list_presets():
    """Catalog entries ``{name, description, budget_s, defaults}``."""
    return [
        {"name": p.name, "description": p.description, "budget_s": p.budget_s, "defaults": p.defaults()}
        for p in PRESETS.values()
    ]


# -- explicit configurations ---------------------------------------------

COMMON_KEYS = {"preset", "params", "tol", "threads", "backend", "out", "name"}
EXPLICIT_KEYS = {"ensembles", "levels", "pulses", "gate", "settings", "initial", "lindblad",
                 "samples", "tomography", "physical_analysis"}
PULSE_FIELDS = {
    "stirap_opt": {"required": {"omega0", "delta", "T0", "t1", "t2"},
                   "optional": {"n", "lam", "sequence", "switch", "pump", "stokes"}},
    "stirap_gauss": {"required": {"omega0", "delta", "tau", "t1", "t2"},
                     "optional": {"span", "pump", "stokes"}},
    "rabi": {"required": {"theta", "transition", "rabi"}, "optional": {"phi"}},
}
PULSE_COMMON = {"type", "name", "ensemble", "start"}
GATE_NAMES = set(GATES_1Q) | {"rotation", "cnot_type"}


def _check_transition(v, levels):
    if (not isinstance(v, list) or len(v) != 2 or any(x not in levels for x in v) or v[0] == v[1]):
        return f"expected two distinct level labels from {list(levels)}"
    return None


def _validate_pulse(k, entry, n_ens, levels, diag):
    key = f"pulses[{k}]"
    if not isinstance(entry, dict):
        diag.append(f"{key}: expected an object")
        return
    kind = entry.get("type")
    if kind not in PULSE_FIELDS:
        diag.append(f"{key}.type: expected one of {sorted(PULSE_FIELDS)}")
        return
    fields = PULSE_FIELDS[kind]
    for f in sorted(fields["required"] - set(entry)):
        diag.append(f"{key}.{f}: missing")
    for f in sorted(set(entry) - fields["required"] - fields["optional"] - PULSE_COMMON):
        diag.append(f"{key}.{f}: unknown field")
    ens = entry.get("ensemble")
    if ens is not None and (not isinstance(ens, int) or isinstance(ens, bool) or not 0 <= ens < n_ens):
        diag.append(f"{key}.ensemble: expected null or an index below {n_ens}")
    checks = {"omega0": _positive, "delta": _finite, "T0": _positive, "tau": _positive, "span": _positive, "rabi": _positive,
              "n": lambda v: None if isinstance(v, int) and v >= 1 else "expected an integer >= 1",
              "lam": _positive, "switch": _bool,
              "sequence": lambda v: None if v in ("double", "single") else
              "expected 'double' or 'single'"}
    for f in ("t1", "t2", "theta", "phi", "start"):
        checks[f] = _finite
    for f in ("pump", "stokes", "transition"):
        checks[f] = lambda v: _check_transition(v, levels)
    for f, v in entry.items():
        if f in checks:
            msg = checks[f](v)
            if msg:
                diag.append(f"{key}.{f}: {msg}")


def _validate_explicit(config, diag):
    ens = config.get("ensembles")
    if (not isinstance(ens, list) or not ens
            or any(not isinstance(x, int) or isinstance(x, bool) or x < 1 for x in ens)):
        diag.append("ensembles: expected a non-empty list of positive integers")
        return
    if sum(ens) > 6:
        diag.append("ensembles: at most 6 atoms in total")
    levels = config.get("levels", ["g0", "g1", "e", "r0", "r1"])
    if not isinstance(levels, list) or "g0" in levels and any(
            x not in ("g0", "g1", "e", "r0", "r1") for x in levels) or "g0" not in levels:
        diag.append("levels: expected a list of level labels that includes g0")
        levels = ["g0", "g1", "e", "r0", "r1"]
    has_pulses, has_gate = "pulses" in config, "gate" in config
    if has_pulses == has_gate:
        diag.append("pulses/gate: give exactly one of 'pulses' or 'gate'")
    if has_pulses:
        if not isinstance(config["pulses"], list) or not config["pulses"]:
            diag.append("pulses: expected a non-empty list")
        else:
            for k, entry in enumerate(config["pulses"]):
                _validate_pulse(k, entry, len(ens), levels, diag)
    if has_gate:
        g = config["gate"]
        if not isinstance(g, dict) or g.get("name") not in GATE_NAMES:
            diag.append(f"gate.name: expected one of {sorted(GATE_NAMES)}")
        elif g["name"] == "cnot_type" and len(ens) != 2:
            diag.append("gate.name: cnot_type needs two ensembles")
        elif g["name"] == "rotation" and any(_finite(g.get(a, 0.0)) for a in ("theta", "phi")):
            diag.append("gate: rotation needs finite theta and phi")
        if isinstance(g, dict):
            e = g.get("ensemble", 0)
            if not isinstance(e, int) or isinstance(e, bool) or not 0 <= e < len(ens):
                diag.append(f"gate.ensemble: expected an index below {len(ens)}")
        if "levels" in config:
            diag.append("levels: gate programs always use all five levels")
        if config.get("settings", "long") not in ("long", "short"):
            diag.append("settings: expected 'long' or 'short'")
        tomo = config.get("tomography", "none")
        if tomo not in ("none", "process"):
            diag.append("tomography: expected 'none' or 'process'")
        elif tomo == "process" and len(ens) > 2:
            diag.append("tomography: process tomography supports one or two ensembles")
        if "physical_analysis" in config and _bool(config["physical_analysis"]):
            diag.append("physical_analysis: expected true or false")
    init = config.get("initial", "ground")
    if init != "ground":
        if (not isinstance(init, list) or len(init) != len(ens) or any(b not in (0, 1) for b in init)
                or any(b for b in init) and "g1" not in levels):
            diag.append("initial: expected 'ground' or one bit per ensemble (bits need level g1)")
    lind = config.get("lindblad")
    if lind is not None:
        if not isinstance(lind, dict) or set(lind) - {"gamma_e", "gamma_r"}:
            diag.append("lindblad: expected an object with gamma_e and/or gamma_r (MHz)")
        else:
            for f, v in lind.items():
                msg = _non_negative(v)
                if msg:
                    diag.append(f"lindblad.{f}: {msg}")
    if "samples" in config:
        s = config["samples"]
        if not isinstance(s, int) or isinstance(s, bool) or not 2 <= s <= 1_000_000:
            diag.append("samples: expected an integer in [2, 1000000]")


def validate_config(config):
    """Diagnostics ``["key: problem", ...]``; an empty list means the config is valid."""
    diag = []
    if not isinstance(config, dict):
        return ["config: expected a JSON object"]
    tol = config.get("tol", DEFAULT_TOL)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not (
            TOL_RANGE[0] <= tol <= TOL_RANGE[1]):
        diag.append(f"tol: {tol!r} outside the allowed range [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]")
    threads = config.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or not 1 <= threads <= MAX_THREADS:
        diag.append(f"threads: expected an integer in [1, {MAX_THREADS}]")
    if config.get("backend") not in (None, "compiled", "python"):
        diag.append("backend: expected 'compiled' or 'python'")
    if "out" in config and not isinstance(config["out"], str):
        diag.append("out: expected a directory path")
    if "preset" in config:
        name = config["preset"]
        if name not in PRESETS:
            diag.append(f"preset: unknown preset {name!r}; available: {', '.join(PRESETS)}")
            return diag
        extra = set(config) - COMMON_KEYS
        for k in sorted(extra):
            diag.append(f"{k}: not allowed together with a preset (use 'params')")
        params = config.get("params", {})
        if not isinstance(params, dict):
            diag.append("params: expected an object")
            return diag
        known = PRESETS[name].params
        for k, v in sorted(params.items()):
            if k not in known:
                diag.append(f"params.{k}: unknown parameter for {name} (known: {', '.join(known)})")
                continue
            msg = known[k][1](v)
            if msg:
                diag.append(f"params.{k}: {msg}")
        return diag
    for k in sorted(set(config) - COMMON_KEYS - EXPLICIT_KEYS):
        diag.append(f"{k}: unknown key")
    if "params" in config:
        diag.append("params: only valid together with a preset")
    _validate_explicit(config, diag)
    return diag


def _pulse_schedule(entry):
    kind = entry["type"]
    ens = entry.get("ensemble")
    if kind == "stirap_opt":
        p = StirapParams(mhz(entry["omega0"]), mhz(entry["delta"]), entry["T0"] * US,
                         entry["t1"] * US, entry["t2"] * US, entry.get("n", 3), entry.get("lam", 4.0))
        legs = {"pump": tuple(entry.get("pump", ("g0", "e"))),
                "stokes": tuple(entry.get("stokes", ("e", "r0")))}
        if entry.get("sequence", "double") == "single":
            return single_stirap_schedule(p, ensemble=ens, **legs)
        return double_stirap_schedule(p, entry.get("switch", True), ensemble=ens, **legs)
    if kind == "stirap_gauss":
        p = GaussianStirapParams(mhz(entry["omega0"]), mhz(entry["delta"]), entry["tau"] * US,
                                 entry["t1"] * US, entry["t2"] * US)
        span = entry.get("span")
        return gaussian_stirap_schedule(p, None if span is None else span * US, ens,
                                        tuple(entry.get("pump", ("g0", "e"))),
                                        tuple(entry.get("stokes", ("e", "r0"))))
    return rabi_pulse(entry["theta"], entry.get("phi", 0.0), tuple(entry["transition"]),
                      mhz(entry["rabi"]), ensemble=ens)


def schedule_from_config(entries):
    """Pulses in order; each starts where the previous ended unless it has ``start`` (us)."""
    sched = PulseSchedule(())
    for entry in entries:
        part = _pulse_schedule(entry)
        if "start" in entry:
            part = part.starting_at(entry["start"] * US)
            sched = PulseSchedule(sched.segments + part.segments)
        else:
            sched = sched.then(part)
    return sched


def _lindblad(config):
    lind = config.get("lindblad")
    if lind is None:
        return None
    return LindbladModel(mhz(lind.get("gamma_e", 0.0)), mhz(lind.get("gamma_r", 0.0)))


def _run_pulses(ctx, config):
    basis = build_basis(config["ensembles"], levels=config.get("levels"))
    model = HamiltonianModel(basis, schedule_from_config(config["pulses"]))
    init = config.get("initial", "ground")
    psi = (collective_state(basis, 0, "g0") if init == "ground" else logical_state(basis, init))
    samples = int(config.get("samples", DEFAULT_SAMPLES))
    lind = _lindblad(config)
    if lind is None:
        traj = ctx.out.timed("evolve", evolve_schrodinger, psi, model, tol=ctx.tol, samples=samples,
                             backend=ctx.backend)
        phase = ground_phase(traj)
    else:
        traj = ctx.out.timed("evolve", evolve_master, np.outer(psi, psi.conj()), model, lind,
                             tol=ctx.tol, samples=samples, backend=ctx.backend)
        phase = None
    write_trajectory_csv(ctx.out.path("trajectory.csv"), traj, phase)
    final = traj.final
    d = basis.dim
    summary = {"dim": d, "duration_s": model.schedule.duration, "steps": traj.stats["steps"]}
    if lind is None:
        summary["final_norm"] = float(np.linalg.norm(final))
        amp = final[basis.ground_index()]
        summary["final_ground_phase"] = _wrap(np.angle(amp)) if abs(amp) >= 1e-6 else None
    else:
        summary["final_trace"] = float(np.real(np.trace(final[:d, :d])))
        summary["sink_population"] = float(np.real(final[d, d]))
    return summary


def _run_gate(ctx, config):
    g = config["gate"]
    basis = build_basis(config["ensembles"])
    settings = ctx.settings(config.get("settings", "long"))
    builder = GateBuilder(basis, settings)
    ens = g.get("ensemble", 0)
    if g["name"] == "rotation":
        prog = builder.rotation(g.get("theta", 0.0), g.get("phi", 0.0), ens)
    elif g["name"] == "cnot_type":
        prog = builder.cnot_type()
    else:
        prog = _gate_program(builder, g["name"], ens)
    n = basis.n_ensembles
    summary = {"gate": prog.name, "duration_us": prog.duration / US}
    if config.get("tomography", "none") == "process":
        ex = ctx.executor(builder, _lindblad(config))
        r = ctx.out.timed("tomography", process_tomography, prog, ex,
                          physical_analysis=config.get("physical_analysis", False))
        ctx.out.timing["mle"] = r.mle_report.get("wall_time_s", 0.0)
        _chi_outputs(ctx, "chi", r, prog.name, n)
        r.record.write_csv(ctx.out.path("populations.csv"))
        summary.update(error_linear=r.error_linear, error_mle=r.error, mle_shift=r.mle_shift,
                       mle=_mle_summary(r.mle_report))
    else:
        U = ctx.out.timed("logical_action", logical_action, prog, ctx.tol, ctx.backend)
        ctx.out.matrix("logical_action", U, "state", n, prog.name)
        err = np.linalg.norm(U - prog.ideal, 2)
        summary.update(logical_action_error=float(err),
                       leakage=float(1 - np.min(np.linalg.svd(U, compute_uv=False)) ** 2))
    return summary


# -- running ----------------------------------------------------------------

@dataclass
class RunContext:
    out: _Output
    tol: float = DEFAULT_TOL
    threads: int = 1
    backend: str = None

    def map(self, fn, items):
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def settings(self, kind="long"):
        base = GateSettings() if kind == "long" else short_pulse_settings()
        return replace(base, tol=self.tol)

    def executor(self, builder, lindblad=None):
        return Executor(builder, lindblad, self.tol, self.threads, self.backend)


@dataclass
class RunReport:
    name: str
    out_dir: str
    summary: dict
    files: list
    timing: dict


def default_out_dir(name):
    base = os.environ.get("SUPERATOM_QPT_OUT", "results")
    return os.path.join(base, name)


def run_experiment(config, out_dir=None, tol=None, threads=None):
    """Validate ``config``, run it and write every output file.

    ``tol`` and ``threads`` override the values in the configuration.

    Raises
    ------
    InvalidConfig
        If validation produces any diagnostics.
    """
    if isinstance(config, str):
        config = {"preset": config}
    config = dict(config)
    if tol is not None:
        config["tol"] = tol
    if threads is not None:
        config["threads"] = threads
    diag = validate_config(config)
    if diag:
        raise InvalidConfig(diag)
    name = config.get("preset") or config.get("name") or "custom"
    out_dir = out_dir or config.get("out") or default_out_dir(name)
    ctx = RunContext(_Output(out_dir), config.get("tol", DEFAULT_TOL), config.get("threads", 1),
                     config.get("backend"))
    start = time.perf_counter()
    if "preset" in config:
        preset = PRESETS[name]
        params = {**preset.defaults(), **config.get("params", {})}
        result = preset.runner(ctx, params)
        run_info = {"preset": name, "params": params}
    else:
        result = _run_pulses(ctx, config) if "pulses" in config else _run_gate(ctx, config)
        run_info = {"config": {k: v for k, v in config.items() if k not in ("out", "threads")}}
    ctx.out.timing["total"] = time.perf_counter() - start
    summary = {**run_info, "tol": ctx.tol, "results": result}
    ctx.out.json("summary.json", summary)
    ctx.out.json("timing.json", ctx.out.timing)
    return RunReport(name, out_dir, _plain(summary), list(ctx.out.files), dict(ctx.out.timing))


def load_config(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig([f"{path}: not valid JSON ({exc})"]) from None


__all__ = [
    "PRESETS", "Preset", "RunReport", "default_out_dir", "list_presets", "load_config",
    "run_experiment", "schedule_from_config", "validate_config",
]
