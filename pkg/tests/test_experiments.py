import json
import math

import pytest

from superatom_qpt import cli, experiments
from superatom_qpt.errors import ConvergenceFailure, IntegrationFailure, InvalidConfig
from superatom_qpt.experiments import (
    PRESETS, list_presets, run_experiment, schedule_from_config, validate_config,
)
from superatom_qpt.pulses import US, mhz

CATALOG = {"stirap_error_scan", "phase_check", "single_qubit_chi", "bell_states", "cnot_chi",
           "decay_scan", "hadamard_decay"}

RABI = {"type": "rabi", "theta": -math.pi, "phi": 0.0, "transition": ["g1", "r1"], "rabi": 50}


def test_catalog():
    names = {p["name"] for p in list_presets()}
    assert CATALOG <= names and len(names) >= 7
    for p in list_presets():
        assert p["budget_s"] > 0 and p["description"]


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_presets_validate(name):
    assert validate_config({"preset": name}) == []
    assert validate_config({"preset": name, "params": PRESETS[name].defaults()}) == []


@pytest.mark.parametrize("tol", [1e-2, 1e-16, "small", True])
def test_tolerance_range(tol):
    diag = validate_config({"preset": "decay_scan", "tol": tol})
    assert len(diag) == 1 and diag[0].startswith("tol:")


def test_diagnostics_list_offending_keys():
    diag = validate_config({"preset": "decay_scan", "threads": 0, "ensembles": [1],
                            "params": {"n_atoms": [9], "bogus": 1}})
    keys = sorted(d.split(":")[0] for d in diag)
    assert keys == ["ensembles", "params.bogus", "params.n_atoms", "threads"]
    assert validate_config({"preset": "nope"})[0].startswith("preset:")
    assert validate_config([1]) == ["config: expected a JSON object"]


def test_explicit_validation():
    good = {"ensembles": [1], "pulses": [RABI]}
    assert validate_config(good) == []
    bad = {"ensembles": [1], "pulses": [{"type": "rabi", "theta": 1, "transition": ["g1", "x"],
                                          "rabi": -1, "extra": 0},
                                         {"type": "laser"}],
           "lindblad": {"gamma_e": -1}, "initial": [1, 0], "samples": 1, "mystery": 3}
    keys = {d.split(":")[0] for d in validate_config(bad)}
    assert {"pulses[0].transition", "pulses[0].rabi", "pulses[0].extra", "pulses[1].type",
            "lindblad.gamma_e", "initial", "samples", "mystery"} <= keys
    assert validate_config({"ensembles": [1], "pulses": [RABI], "gate": {"name": "hadamard"}})
    assert validate_config({"ensembles": [1], "gate": {"name": "cnot_type"}})
    assert validate_config({"ensembles": [1, 1, 1], "gate": {"name": "hadamard"},
                            "tomography": "process"})


def test_schedule_units():
    sched = schedule_from_config([
        {"type": "stirap_opt", "omega0": 50, "delta": 200, "T0": 2, "t1": -4, "t2": 4},
        dict(RABI, start=20.0),
    ])
    up = sched.segments[0]
    assert up.couplings[0].envelope.amplitude == pytest.approx(mhz(50))
    assert up.detunings[0].value == pytest.approx(mhz(200))
    assert up.couplings[0].envelope.width == pytest.approx(2 * US)
    assert sched.segments[-1].t_start == pytest.approx(20 * US)
    assert sched.segments[-1].duration == pytest.approx(math.pi / mhz(50))


def test_run_is_reproducible(tmp_path):
    cfg = {"preset": "stirap_error_scan", "params": {"n_atoms": [1, 2]}}
    a = run_experiment(cfg, out_dir=str(tmp_path / "a"), threads=2)
    b = run_experiment(cfg, out_dir=str(tmp_path / "b"))
    for name in ("summary.json", "stirap_error_scan.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.summary["results"]["max_error_optimized"] < 1e-5
    assert "total" in json.loads((tmp_path / "a" / "timing.json").read_text())


def test_run_rejects_invalid(tmp_path):
    with pytest.raises(InvalidConfig) as info:
        run_experiment({"preset": "decay_scan"}, out_dir=str(tmp_path), tol=1e-2)
    assert info.value.diagnostics[0].startswith("tol:")


def test_explicit_pulse_run(tmp_path):
    cfg = {"ensembles": [2], "levels": ["g0", "g1", "r1"], "pulses": [RABI], "initial": [1],
           "samples": 20, "lindblad": {"gamma_r": 0.001}}
    rep = run_experiment(cfg, out_dir=str(tmp_path))
    res = rep.summary["results"]
    assert res["final_trace"] + res["sink_population"] == pytest.approx(1.0, abs=1e-9)
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,P0,P1,alpha,leakage")


def test_explicit_gate_run(tmp_path):
    rep = run_experiment({"ensembles": [1], "gate": {"name": "not_y"}}, out_dir=str(tmp_path))
    assert rep.summary["results"]["logical_action_error"] < 1e-2
    assert (tmp_path / "logical_action.dat").exists()
    rep = run_experiment({"ensembles": [1], "gate": {"name": "rotation", "theta": 0.4, "phi": 1.0},
                          "tomography": "process"}, out_dir=str(tmp_path / "p"))
    assert rep.summary["results"]["error_mle"] < 1e-4
    assert (tmp_path / "p" / "chi_mle.gp").read_text().startswith("set title")


def test_env_out_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("SUPERATOM_QPT_OUT", str(tmp_path))
    assert experiments.default_out_dir("x") == str(tmp_path / "x")


# -- command line ---------------------------------------------------------

def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in CATALOG)


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", "cnot_chi"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"preset": "decay_scan", "tol": 0.01}))
    assert cli.main(["validate", str(bad)]) == 2
    assert "tol:" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["validate", str(broken)]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ensembles": [1], "pulses": [RABI], "initial": [1]}))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--tol", "1e-9"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["tol"] == 1e-9
    assert cli.main(["run", str(cfg), "--tol", "1e-3"]) == 2


@pytest.mark.parametrize("exc, code", [
    (ConvergenceFailure("no"), 3),
    (IntegrationFailure("no", 1.0), 4),
])
def test_cli_exit_codes(monkeypatch, tmp_path, exc, code):
    def boom(*args, **kwargs):
        raise exc

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["run", "decay_scan", "--out", str(tmp_path)]) == code


def test_cli_requires_command():
    with pytest.raises(SystemExit):
        cli.main([])
