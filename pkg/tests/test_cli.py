"""End-to-end command-line runs (in-process, via main())."""

import csv
import json
import math

import pytest

import vortexlab.cli as cli
from vortexlab.solvers import SolverError
from vortexlab.vortex_analysis import Rectangle, VortexMeasure


def _config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_cell_single_resolution(tmp_path, capsys):
    cfg = _config(tmp_path, {
        "coefficient": {"kind": "constant", "value": 2.5},
        "resolution": 32,
    })
    assert cli.main(["cell", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "tensor:" in out
    payload = json.load(open(tmp_path / "tensor.json", encoding="utf-8"))
    assert payload["tensor"]["a11"] == pytest.approx(2.5, rel=1e-9)
    assert payload["tensor"]["a12"] == pytest.approx(0.0, abs=1e-12)


def test_cell_refinement_table(tmp_path):
    cfg = _config(tmp_path, {
        "coefficient": {"kind": "laminate", "alpha": 1.0, "beta": 4.0},
        "resolutions": [16, 32, 64],
    })
    assert cli.main(["cell", "--config", cfg, "--out", str(tmp_path)]) == 0
    payload = json.load(open(tmp_path / "tensor.json", encoding="utf-8"))
    assert len(payload["table"]) == 3
    assert set(payload["orders"]) == {"a11", "a12", "a22"}
    assert "warning" in payload
    # laminate normal to e2: harmonic mean across, arithmetic along
    assert payload["tensor"]["a22"] == pytest.approx(1.6, rel=1e-9)
    assert payload["tensor"]["a11"] == pytest.approx(2.5, rel=1e-9)


def test_psi_with_explicit_tensor(tmp_path, capsys):
    cfg = _config(tmp_path, {
        "tensor": {"a11": 1.0, "a22": 1.0},
        "ratios": [4.0, 8.0, 16.0],
        "z_values": [1, 2],
        "n_theta": 64,
    })
    assert cli.main(["psi", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "psi(1)" in out and "Psi(2)" in out
    payload = json.load(open(tmp_path / "psi.json", encoding="utf-8"))
    assert payload["psi"]["1"]["value"] == pytest.approx(2 * math.pi, rel=1e-9)
    assert payload["psi"]["2"]["value"] == pytest.approx(8 * math.pi, rel=1e-9)
    # quadratic cost: the relaxed cost of charge 2 is two unit vortices
    cap = payload["capital_psi"]["2"]
    assert cap["value"] == pytest.approx(4 * math.pi, rel=1e-9)
    assert cap["splitting"] == [1, 1]


def test_minimize_writes_artifacts(tmp_path):
    cfg = _config(tmp_path, {
        "coefficient": {"kind": "constant", "value": 1.0},
        "epsilon": 2.0**-4,
        "vortices": [{"x": 0.5, "y": 0.5, "charge": 1}],
        "max_iterations": 500,
    })
    assert cli.main(["minimize", "--config", cfg, "--out", str(tmp_path),
                     "--seed", "7"]) == 0
    report = json.load(open(tmp_path / "minimize.json", encoding="utf-8"))
    assert report["converged"] is True
    assert report["final_energy"] < report["initial_energy"]
    assert len(report["vortices"]) == 1
    assert report["vortices"][0]["charge"] == 1
    with open(tmp_path / "trace.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == report["iterations"] + 1
    assert float(rows[-1]["energy"]) == pytest.approx(report["final_energy"],
                                                      rel=1e-9)
    back = VortexMeasure.from_csv(str(tmp_path / "vortices.csv"),
                                  Rectangle((0.0, 0.0), (1.0, 1.0)))
    assert len(back.atoms) == 1


def test_balls_csv_and_bad_family(tmp_path, capsys):
    cfg = _config(tmp_path, {
        "balls": [
            {"x": 0.0, "y": 0.0, "radius": 0.1, "weight": 1},
            {"x": 1.0, "y": 0.0, "radius": 0.1, "weight": -2},
        ],
        "t_final": 10.0,
    })
    assert cli.main(["balls", "--config", cfg, "--out", str(tmp_path)]) == 0
    with open(tmp_path / "balls.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["weight"] == "-1"
    bad = _config(tmp_path, {
        "balls": [
            {"x": 0.0, "y": 0.0, "radius": 0.5, "weight": 1},
            {"x": 0.1, "y": 0.0, "radius": 0.5, "weight": 1},
        ],
    }, name="bad.json")
    assert cli.main(["balls", "--config", bad, "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_scaling_study_end_to_end(tmp_path, capsys):
    cfg = _config(tmp_path, {
        "coefficient": {"kind": "constant", "value": 2.0},
        "vortices": [{"x": 0.5, "y": 0.5, "charge": 1}],
        "regime": {"kind": "delta_proportional"},
        "epsilons": {"k_min": 4, "k_max": 5},
        "solver": {"tensor_resolution": 32},
    })
    assert cli.main(["scaling", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "rel_gap" in out
    assert (tmp_path / "scaling.csv").exists()
    assert (tmp_path / "summary.json").exists()


def test_flat_between_csv_measures(tmp_path, capsys):
    dom = Rectangle((0.0, 0.0), (1.0, 1.0))
    VortexMeasure((((0.5, 0.5), 1),), dom).to_csv(str(tmp_path / "a.csv"))
    VortexMeasure((((0.6, 0.5), 1),), dom).to_csv(str(tmp_path / "b.csv"))
    assert cli.main(["flat", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                     "--out", str(tmp_path)]) == 0
    assert "flat distance" in capsys.readouterr().out
    payload = json.load(open(tmp_path / "flat.json", encoding="utf-8"))
    assert payload["value"] == pytest.approx(0.1, rel=1e-9)
    assert payload["plan"]


def test_config_errors_exit_2(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"coefficient": ', encoding="utf-8")
    assert cli.main(["cell", "--config", str(broken),
                     "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "line" in err
    unknown = _config(tmp_path, {"coefficient": {"kind": "perlin"}},
                      name="unknown.json")
    assert cli.main(["cell", "--config", unknown, "--out", str(tmp_path)]) == 2
    missing = str(tmp_path / "nope.json")
    assert cli.main(["cell", "--config", missing, "--out", str(tmp_path)]) == 2


def test_solver_failure_exits_3(tmp_path, capsys, monkeypatch):
    def explode(*args, **kwargs):
        raise SolverError("iteration budget exhausted")

    monkeypatch.setattr(cli, "homogenized_tensor", explode)
    cfg = _config(tmp_path, {
        "coefficient": {"kind": "constant", "value": 1.0},
        "resolution": 32,
    })
    assert cli.main(["cell", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "solver failure" in capsys.readouterr().err
