import csv
import json
import subprocess
import sys

import pytest

from inls.cli import main, parse_config, sweep_cells
from inls.errors import ValidationError
from inls.grid import make_grid, write_field_csv

from .conftest import gaussian

GRID = {"r_max": 32, "n": 4096}
COARSE = {"r_max": 32, "n": 1024}


def _run(tmp_path, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    out = tmp_path / "out"
    code = main(["run", str(path), "--out", str(out), *extra])
    return code, out


def _only_dir(out):
    dirs = [d for d in out.iterdir() if d.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestValidation:
    @pytest.mark.parametrize("patch,needle", [
        ({"b": 1.5}, "0 < b < 1"),
        ({"b": 0.0}, "0 < b < 1"),
        ({"command": "fly"}, "command"),
        ({"grid": {"r_max": 32, "n": 10}}, "n must be"),
        ({"potential": {"kind": "softcore", "c": -1}}, "amplitude"),
        ({"extra": 1}, "unknown config fields"),
    ])
    def test_rejected(self, tmp_path, capsys, patch, needle):
        code, _ = _run(tmp_path, {"command": "thresholds", "b": 0.5, **patch})
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValidationError" and needle in err["detail"]

    def test_bad_json(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "{not json")
        assert code == 2
        assert "JSON" in json.loads(capsys.readouterr().err)["detail"]

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "none.json")]) == 2

    def test_missing_initial_file(self, tmp_path):
        cfg = {"command": "classify", "b": 0.5, "initial": {"kind": "file", "path": "u.csv"}}
        with pytest.raises(ValidationError):
            parse_config(cfg, tmp_path)

    def test_evolve_needs_section(self):
        with pytest.raises(ValidationError):
            parse_config({"command": "evolve", "b": 0.5,
                          "initial": {"kind": "gaussian", "amp": 1.0}})

    def test_empty_sweep_grid(self, tmp_path):
        cfg = {"command": "sweep", "b": 0.5, "initial": {"kind": "scaled_ground", "lambda": 1},
               "sweep": {"grid": {}}}
        code, _ = _run(tmp_path, cfg)
        assert code == 2
        cfg["sweep"]["grid"] = {"lambda": []}
        code, _ = _run(tmp_path, cfg)
        assert code == 2

    def test_bad_jobs(self, tmp_path):
        code, _ = _run(tmp_path, {"command": "thresholds", "b": 0.5}, "--jobs", "0")
        assert code == 2

    def test_entry_point(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"command": "kato", "b": 1.5}))
        proc = subprocess.run([sys.executable, "-m", "inls.cli", "run", str(path)],
                              capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 2
        assert json.loads(proc.stderr)["error"] == "ValidationError"


class TestCommands:
    def test_thresholds(self, tmp_path):
        code, out = _run(tmp_path, {"command": "thresholds", "b": 0.5, "grid": GRID})
        assert code == 0
        th = json.loads((_only_dir(out) / "summary.json").read_text())["thresholds"]
        assert th["s_c"] == 0.75
        assert th["script_e"] == pytest.approx((0.75 / 3.5) ** 0.75 * th["script_k"], rel=1e-14)

    def test_kato(self, tmp_path):
        code, out = _run(tmp_path, {"command": "kato", "b": 0.5,
                                    "potential": {"kind": "softcore", "c": 1}})
        assert code == 0
        kato = json.loads((_only_dir(out) / "summary.json").read_text())["kato"]
        assert kato["abs"] == "Divergent" and kato["negative"] == 0.0

    def test_check(self, tmp_path):
        code, out = _run(tmp_path, {"command": "check", "b": 0.5, "grid": GRID,
                                    "potential": {"kind": "gaussian_repulsive", "c": 1}})
        hyp = json.loads((_only_dir(out) / "summary.json").read_text())["hypothesis"]
        assert code == 0 and hyp["T1.4"]["overall"] == "fail" and hyp["T1.1"]["overall"] == "pass"

    def test_groundstate_with_well(self, tmp_path):
        code, out = _run(tmp_path, {"command": "groundstate", "b": 0.5, "grid": GRID,
                                    "potential": {"kind": "gaussian_well", "c": 0.5}})
        d = _only_dir(out)
        assert code == 0
        assert {p.name for p in (d / "fields").iterdir()} == {
            "ground_free.csv", "ground_free.json",
            "ground_with_potential.csv", "ground_with_potential.json"}

    def test_evolve_below_threshold(self, tmp_path):
        cfg = {"command": "evolve", "b": 0.5, "grid": GRID,
               "initial": {"kind": "scaled_ground", "lambda": 0.5},
               "evolve": {"t_end": 0.5, "dt": 1e-3, "record_every": 10},
               "diagnostics": {"cutoff_R": 16, "exterior_R": 8}}
        code, out = _run(tmp_path, cfg)
        d = _only_dir(out)
        s = json.loads((d / "summary.json").read_text())
        assert code == 0 and s["outcome"] == "completed"
        assert s["trapping"]["kin_below_threshold"] and s["trapping"]["k_positive"]
        assert s["trapping"]["energy_band"]
        assert s["classification"]["consistent"] is True
        assert s["ground_states"]["free"]["residuals"]
        header = (d / "series.csv").read_text().splitlines()[0].split(",")
        assert header[-4:] == ["I", "Iprime", "Isecond", "exterior_mass_R"]
        assert (d / "fields" / "initial.csv").exists() and (d / "fields" / "final.csv").exists()

    def test_file_initial(self, tmp_path):
        g = make_grid(32, 1024)
        write_field_csv(tmp_path / "u0.csv", gaussian(g, 0.1))
        cfg = {"command": "classify", "b": 0.5, "grid": {"r_max": 32, "n": 1024},
               "initial": {"kind": "file", "path": "u0.csv"}}
        code, out = _run(tmp_path, cfg)
        s = json.loads((_only_dir(out) / "summary.json").read_text())
        assert code == 0 and s["classification"]["prediction"] == "global_scattering"

    def test_deterministic(self, tmp_path):
        cfg = {"command": "evolve", "b": 0.5, "grid": {"r_max": 32, "n": 1024},
               "initial": {"kind": "gaussian", "amp": 1.0},
               "evolve": {"t_end": 0.1, "dt": 1e-2, "record_every": 2}}
        _, out = _run(tmp_path, cfg)
        d = _only_dir(out)
        first = (d / "summary.json").read_bytes(), (d / "series.csv").read_bytes()
        _, out = _run(tmp_path, cfg)
        assert ((d / "summary.json").read_bytes(), (d / "series.csv").read_bytes()) == first


def _sweep_cfg(grid_axes, grid=COARSE, **extra):
    cfg = {"command": "sweep", "b": 0.5, "grid": grid,
           "initial": {"kind": "scaled_ground", "lambda": 1.0},
           "sweep": {"grid": grid_axes}}
    cfg["sweep"].update(extra)
    return cfg


class TestSweep:
    def test_lambda_evolve(self, tmp_path):
        cfg = _sweep_cfg({"lambda": [0.5, 0.8, 1.2, 1.5]}, grid=GRID, cell_command="evolve")
        cfg["evolve"] = {"t_end": 0.1, "dt": 1e-4, "record_every": 1}
        code, out = _run(tmp_path, cfg, "--jobs", "2")
        rows = _rows(_only_dir(out) / "results.csv")
        assert code == 0 and len(rows) == 4
        assert [float(r["lambda"]) for r in rows] == [0.5, 0.8, 1.2, 1.5]
        decided = [r for r in rows if r["prediction"] != "undetermined"]
        assert decided and all(r["consistent"] == "True" for r in decided)

    def test_b_axis(self, tmp_path):
        code, out = _run(tmp_path, _sweep_cfg({"b": [0.1, 0.5, 0.9], "lambda": [0.5]}))
        d = _only_dir(out)
        rows = _rows(d / "results.csv")
        assert code == 0 and [float(r["b"]) for r in rows] == [0.1, 0.5, 0.9]
        cells = sorted((d / "cells").iterdir())
        ks = {json.loads((c / "summary.json").read_text())["classification"]["thresholds"]["script_k"]
              for c in cells}
        assert len(cells) == 3 and len(ks) == 3

    def test_row_failures_recorded(self, tmp_path):
        cfg = _sweep_cfg({"amp": [0.1, 0.2]})
        code, out = _run(tmp_path, cfg)
        rows = _rows(_only_dir(out) / "results.csv")
        assert code == 0
        assert all(r["status"] == "exit 2" and "ValidationError" in r["error"] for r in rows)

    def test_jobs_do_not_change_rows(self, tmp_path):
        cfg = _sweep_cfg({"lambda": [0.3, 0.6, 0.9]},
                         potentials=[{"kind": "zero"}, {"kind": "softcore", "c": 0.1}])
        _, out1 = _run(tmp_path, cfg, "--jobs", "1", name="a.json")
        serial = (_only_dir(out1) / "results.csv").read_text()
        _, out2 = _run(tmp_path, cfg, "--jobs", "3", name="b.json")
        assert (_only_dir(out2) / "results.csv").read_text() == serial

    def test_row_independence(self, tmp_path):
        full = _sweep_cfg({"lambda": [0.3, 0.6, 0.9]})
        part = _sweep_cfg({"lambda": [0.3, 0.9]})
        _, out = _run(tmp_path, full, name="a.json")
        rows_full = [r for r in _rows(_only_dir(out) / "results.csv") if r["lambda"] != "0.6"]
        for r in rows_full:
            r.pop("index")
        _, out2 = _run(tmp_path, part, name="b.json")
        d2 = [d for d in out2.iterdir() if d.is_dir() and (d / "results.csv").exists()
              and len(_rows(d / "results.csv")) == 2][0]
        rows_part = _rows(d2 / "results.csv")
        for r in rows_part:
            r.pop("index")
        assert rows_full == rows_part

    def test_cell_order(self):
        cfg = parse_config(_sweep_cfg({"lambda": [1, 2], "c": [0.1, 0.2]},
                                          potentials=[{"kind": "softcore"}, {"kind": "zero"}]))
        cells = sweep_cells(cfg)
        assert [(c["potential"]["kind"], c["lambda"], c["c"]) for c in cells] == [
            ("softcore", 1, 0.1), ("softcore", 1, 0.2), ("softcore", 2, 0.1), ("softcore", 2, 0.2),
            ("zero", 1, 0.1), ("zero", 1, 0.2), ("zero", 2, 0.1), ("zero", 2, 0.2)]

