from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sbmclt.cli import main
from sbmclt.modelio import dumps_json, load_model, model_from_mapping, read_csv

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def schema(obj):
    """Key structure of a JSON document with leaf values replaced by their type names."""
    if isinstance(obj, dict):
        return {k: schema(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [schema(obj[0])] if obj else []
    return type(obj).__name__


def golden(name):
    return json.loads((GOLDEN / name).read_text())


class TestModelFiles:
    def test_load(self):
        k, p = load_model(DATA / "bench2.toml")
        np.testing.assert_array_equal(k.K, [[3, 1], [1, 2]])
        np.testing.assert_array_equal(k.Lambda, np.zeros((2, 2)))
        np.testing.assert_array_equal(p.beta, [0, 0])

    @pytest.mark.parametrize(
        "data, match",
        [
            ({"K": [1.0], "mu": [1.0]}, "missing"),
            ({"d": 2, "K": [1.0], "mu": [0.5, 0.5]}, "d\\*d"),
            ({"d": 1, "K": [1.0], "mu": [0.5, 0.5]}, "mu must have"),
            ({"d": 1, "K": [1.0], "mu": [1.0], "gamma": 1}, "unknown"),
            ({"d": 2, "K": [1.0, 2.0, 1.0, 1.0], "mu": [0.5, 0.5]}, "symmetric"),
            ({"d": 1, "K": ["x"], "mu": [1.0]}, "numeric"),
            ({"d": 0, "K": [], "mu": []}, "positive integer"),
        ],
    )
    def test_errors_name_invariant(self, data, match):
        from sbmclt.errors import ModelError

        with pytest.raises(ModelError, match=match):
            model_from_mapping(data)

    def test_malformed(self, tmp_path):
        from sbmclt.errors import ModelError

        f = tmp_path / "bad.toml"
        f.write_text("d = = 1\n")
        with pytest.raises(ModelError, match="malformed"):
            load_model(f)
        with pytest.raises(ModelError, match="cannot read"):
            load_model(tmp_path / "missing.toml")

    def test_json_17_digits(self):
        text = dumps_json({"x": 0.1 + 0.2, "v": np.array([1 / 3]), "ok": np.True_, "n": np.int64(3)})
        doc = json.loads(text)
        assert doc["x"] == 0.1 + 0.2 and doc["v"] == [1 / 3] and doc["ok"] is True and doc["n"] == 3
        assert "0.30000000000000004" in text


class TestCommands:
    def test_solve_rho(self, capsys, tmp_path):
        out = tmp_path / "rho.json"
        assert main(["solve-rho", str(DATA / "er2.toml"), "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "rho: [0.796812]" in text
        doc = json.loads(out.read_text())
        assert doc["rho"][0] == pytest.approx(0.79681213002002, abs=1e-12)
        assert schema(doc) == golden("solve_rho.schema.json")

    def test_limit_law_subcritical(self, capsys):
        assert main(["limit-law", str(DATA / "sub.toml")]) == 2
        assert "subcritical: lambda1=0.50 ≤ 1" in capsys.readouterr().err

    def test_limit_law_json(self, tmp_path, capsys):
        out = tmp_path / "law.json"
        assert main(["limit-law", str(DATA / "bench2.toml"), "--frame", "RAW", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["frame"] == "RAW"
        assert doc["covariance"][0][0] == pytest.approx(0.20449705926132605, abs=1e-12)
        assert schema(doc) == golden("limit_law.schema.json")

    def test_d1_check(self, capsys):
        assert main(["d1-check", "--c", "2", "--lambda", "0"]) == 0
        assert "verdict: PASS" in capsys.readouterr().out

    def test_model_error_exit_2(self, capsys):
        assert main(["solve-rho", str(DATA / "asym.toml")]) == 2
        assert "symmetric" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["solve-rho", str(DATA / "er2.toml"), "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_seed_required(self, capsys):
        for argv in (
            ["sample", str(DATA / "er2.toml"), "--n", "10"],
            ["clt", str(DATA / "er2.toml"), "--n-list", "100"],
            ["er-baseline", "--c", "2", "--n-list", "100"],
        ):
            assert main(argv) == 2
            assert "--seed" in capsys.readouterr().err

    def test_sample_dumps(self, tmp_path, capsys):
        comp, edges = tmp_path / "c.csv", tmp_path / "e.txt"
        model = DATA / "bench2.toml"
        before = model.read_bytes()
        argv = ["sample", str(model), "--n", "300", "--seed", "4", "--dump-components", str(comp), "--dump-edges", str(edges)]
        assert main(argv) == 0
        assert model.read_bytes() == before  # inputs are never modified
        header, rows = read_csv(comp)
        assert header == golden("components.header.json")
        assert sum(int(r[2]) for r in rows) == 300
        e = np.loadtxt(edges, dtype=np.int64, comments="#").reshape(-1, 2)
        assert f"edges: {e.shape[0]}" in capsys.readouterr().out
        assert edges.read_text().splitlines()[0] == "# schema_version: 1"

    def test_clt_outputs(self, tmp_path, capsys):
        argv = ["clt", str(DATA / "bench2.toml"), "--n-list", "200,400", "--replicas", "100", "--seed", "1",
                "--threads", "2", "--out", str(tmp_path)]
        code = main(argv)
        assert code in (0, 1)
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert schema(doc) == golden("clt_summary.schema.json")
        assert code == (0 if doc["verdict"] == "PASS" else 1)
        header, _ = read_csv(tmp_path / "replicas.csv")
        assert header == golden("replicas.header.json")

    def test_fail_exit_1(self, capsys):
        # barely supercritical and tiny: the variance is nowhere near its limit
        argv = ["er-baseline", "--c", "1.05", "--n-list", "200", "--replicas", "100", "--seed", "1"]
        assert main(argv) == 1
        assert "verdict: FAIL" in capsys.readouterr().out

    def test_walk_and_fluct(self, tmp_path, capsys):
        assert main(["walk-verify", str(DATA / "bench2.toml"), "--n", "50", "--replicas", "200", "--seed", "2",
                     "--y0", "0.05", "--out", str(tmp_path)]) in (0, 1)
        assert schema(json.loads((tmp_path / "walk_summary.json").read_text())) == golden("walk_summary.schema.json")
        assert main(["fluct", str(DATA / "bench2.toml"), "--n", "500", "--replicas", "200", "--seed", "2",
                     "--grid", "0.5,1.0", "--out", str(tmp_path)]) in (0, 1)
        doc = json.loads((tmp_path / "fluct_summary.json").read_text())
        assert doc["grid"] == [0.5, 1.0]

    def test_lln_and_er(self, tmp_path, capsys):
        assert main(["lln", str(DATA / "er2.toml"), "--n-list", "500,1000", "--replicas", "100", "--seed", "3"]) in (0, 1)
        assert "variance ratio n=500 -> 1000" in capsys.readouterr().out
        assert main(["er-baseline", "--c", "0.5", "--n-list", "100", "--seed", "1"]) == 2

    @pytest.mark.skipif(shutil.which("sbmclt") is None, reason="console script not installed")
    def test_console_script(self):
        r = subprocess.run(["sbmclt", "solve-rho", str(DATA / "er2.toml")], capture_output=True, text=True)
        assert r.returncode == 0 and "0.796812" in r.stdout

    def test_module_entry(self):
        r = subprocess.run([sys.executable, "-m", "sbmclt", "limit-law", str(DATA / "sub.toml")], capture_output=True, text=True)
        assert r.returncode == 2
        assert "subcritical: lambda1=0.50 ≤ 1" in r.stderr
