import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from oracles import geometric_poisson_cdf
from periodic_asep.cli import COLUMNS, RunConfig, compare_rows, main
from periodic_asep.errors import ConfigError
from periodic_asep.quadrature import CdfResult
from periodic_asep.simulator import EmpiricalCdf

TASEP_COMPARE = {
    "mode": "compare",
    "model": {"p": "0", "q": "1"},
    "profile": {"type": "periodic", "rho": ["1/2"]},
    "eval": {"l": [1], "t": "1", "x_range": [-8, 3]},
    "sim": {"trials": 4000, "seed": 1},
}


def write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestConfig:
    def test_round_trip(self):
        cfg = RunConfig.from_dict(TASEP_COMPARE)
        again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg
        assert cfg.params().tau == 0

    def test_q_is_derived(self):
        cfg = RunConfig.from_dict(dict(TASEP_COMPARE, model={"p": "3/10"}))
        assert cfg.model.q == "7/10"

    @pytest.mark.parametrize("patch,field", [
        ({"mode": "plot"}, "mode"),
        ({"model": {"p": "1/2"}}, "model.p"),
        ({"model": {"p": "1/3", "q": "1/3"}}, "model.q"),
        ({"profile": {"type": "periodic", "rho": ["3/2"]}}, "profile.rho[0]"),
        ({"profile": {"type": "periodic", "rho": ["1/2"], "m": 2}}, "profile.m"),
        ({"profile": {"type": "deterministic", "Y": [3, 1]}}, "profile.Y"),
        ({"eval": {"t": "1", "x_range": [3, -8]}}, "eval.x_range"),
        ({"eval": {"t": "1", "x_range": [0, 1], "bogus": 1}}, "eval.bogus"),
        ({"eval": {"x_range": [0, 1]}}, "eval.t"),
        ({"sim": {"trials": 0}}, "sim.trials"),
        ({"output": {"format": "xml"}}, "output.format"),
        ({"extra": {}}, "extra"),
    ])
    def test_malformed_names_field(self, patch, field):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(dict(TASEP_COMPARE, **patch))
        assert info.value.field == field

    def test_simulate_allows_symmetric_rates(self):
        cfg = RunConfig.from_dict(dict(TASEP_COMPARE, mode="simulate", model={"p": "1/2"}))
        assert cfg.model.q == "1/2"


class TestMain:
    def test_identities(self, tmp_path):
        out = tmp_path / "ids.jsonl"
        code = main(["identities", "--seed", "7", "--trials", "100", "--out", str(out)])
        lines = out.read_text().splitlines()
        assert code == 0
        assert len(lines) == 800
        assert all(json.loads(line)["equal"] for line in lines)

    def test_cdf_deterministic_time_zero(self, tmp_path):
        cfg = {"mode": "cdf", "model": {"p": "1/3"},
               "profile": {"type": "deterministic", "Y": [2, 4]},
               "eval": {"l": [1, 2], "t": "0", "x_range": [0, 5]},
               "output": {"path": str(tmp_path / "cdf.json")}}
        assert main(["--config", write(tmp_path, cfg)]) == 0
        doc = json.loads((tmp_path / "cdf.json").read_text())
        assert doc["ok"] is True
        for row in doc["results"]:
            y = 2 if row["l"] == 1 else 4
            assert row["value"] == pytest.approx(1.0 if row["x"] >= y else 0.0, abs=1e-8)

    def test_compare_tasep_scenario(self, tmp_path):
        out = tmp_path / "cmp.csv"
        code = main(["--config", write(tmp_path, TASEP_COMPARE), "--out", str(out), "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert list(rows[0]) == COLUMNS["compare"]
        assert len(rows) == 12
        for row in rows:
            assert float(row["formula"]) == pytest.approx(geometric_poisson_cdf(int(row["x"]), 1.0), abs=1e-6)
            assert row["pass"] == "True"

    def test_compare_failure_exit_code(self, tmp_path):
        # one trial gives p_hat in {0, 1} with zero stderr: interior CDF values cannot pass
        cfg = dict(TASEP_COMPARE, eval=dict(TASEP_COMPARE["eval"], abs_slack=0.0),
                   sim={"trials": 1, "seed": 0}, output={"path": str(tmp_path / "o.json")})
        assert main(["--config", write(tmp_path, cfg)]) == 1
        assert json.loads((tmp_path / "o.json").read_text())["ok"] is False

    def test_malformed_exit_code(self, tmp_path, capsys):
        cfg = dict(TASEP_COMPARE, model={"p": "1/2"})
        assert main(["--config", write(tmp_path, cfg)]) == 2
        assert "model.p" in capsys.readouterr().err
        assert main(["--config", str(tmp_path / "missing.json")]) == 2
        (tmp_path / "bad.json").write_text("{not json")
        assert main(["--config", str(tmp_path / "bad.json")]) == 2

    def test_deterministic_output(self, tmp_path):
        cfg = {"mode": "simulate", "model": {"p": "0.3"},
               "profile": {"type": "periodic", "rho": ["1/4", "1/2"]},
               "eval": {"l": [1, 2], "t": "1", "x_range": [-3, 3]}, "sim": {"trials": 300, "seed": 4}}
        path = write(tmp_path, cfg)
        out = tmp_path / "sim.json"
        assert main(["--config", path, "--out", str(out)]) == 0
        first = out.read_bytes()
        assert main(["--config", path, "--out", str(out)]) == 0
        assert out.read_bytes() == first

    @pytest.mark.parametrize("mode,cfg", [
        ("simulate", {"model": {"p": "1/3"}, "profile": {"type": "periodic", "rho": ["1"]},
                      "eval": {"t": "1/2", "x_range": [-1, 1]}, "sim": {"trials": 10}}),
        ("cdf", {"model": {"p": "0"}, "profile": {"type": "general", "rho": ["1/2", "1", "0", "1/3"]},
                 "eval": {"t": "1/2", "x_range": [-1, 1], "k_max": 2}}),
        ("pmf", {"model": {"p": "1/3"}, "profile": {"type": "deterministic", "Y": [1, 3]},
                 "eval": {"t": "0", "x_range": [0, 3]}}),
    ])
    def test_csv_headers(self, tmp_path, mode, cfg):
        out = tmp_path / "out.csv"
        code = main([mode, "--config", write(tmp_path, cfg), "--out", str(out), "--format", "csv"])
        assert code == 0
        reader = csv.reader(io.StringIO(out.read_text()))
        assert next(reader) == COLUMNS[mode]
        assert len(list(reader)) == (4 if mode == "pmf" else 3)

    def test_pmf_values(self, tmp_path):
        out = tmp_path / "pmf.csv"
        cfg = {"model": {"p": "1/3"}, "profile": {"type": "deterministic", "Y": [1, 3]},
               "eval": {"l": [2], "t": "0", "x_range": [0, 4]}}
        assert main(["pmf", "--config", write(tmp_path, cfg), "--out", str(out), "--format", "csv"]) == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        masses = {int(r["x"]): float(r["pmf"]) for r in rows}
        assert masses[3] == pytest.approx(1, abs=1e-8)
        assert sum(abs(v) for x, v in masses.items() if x != 3) < 1e-7

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "periodic_asep", "identities", "--trials", "2"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert len(proc.stdout.splitlines()) == 16


def test_compare_rule():
    results = [CdfResult(l=1, x=0, value=0.5, imag_residual=0.0, terms=[], tail_estimate=0.0,
                         series_converged=True, quadrature_converged=True)]
    emp = EmpiricalCdf([1], [0], np.array([[520]]), 1000)
    se = np.sqrt(0.52 * 0.48 / 1000)
    assert compare_rows(results, emp, 1e-3)[0].passed == (0.02 <= 3 * se + 1e-3)
    assert not compare_rows(results, EmpiricalCdf([1], [0], np.array([[600]]), 1000), 1e-3)[0].passed
