import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from curvemeas import InputFormatError, load_graph, total_length
from curvemeas.cli import load_manifest, main


@pytest.fixture()
def two_dirac_file(tmp_path):
    path = tmp_path / "two_dirac.json"
    path.write_text(json.dumps({"points": [[-1.0], [1.0]], "weights": [0.5, 0.5]}))
    return path


@pytest.fixture()
def piecewise_file(tmp_path):
    spec = {
        "vertices": [[0.0], [0.5], [1.0]],
        "edges": [[0, 1], [1, 2]],
        "edge_density": [2 / 3, 4 / 3],
        "vertex_atoms": [0.0, 0.0, 0.0],
    }
    path = tmp_path / "piecewise.json"
    path.write_text(json.dumps(spec))
    return path


def run(argv):
    return main([str(a) for a in argv])


class TestSolveCommand:
    def test_collapse_run(self, two_dirac_file, tmp_path, capsys):
        out = tmp_path / "run"
        code = run(
            ["solve", "--input", two_dirac_file, "--lambda", "0.6",
             "--mode", "uniform", "--out", out]
        )
        assert code == 0
        payload = json.loads((out / "result.json").read_text())
        assert payload["collapsed"] is True
        assert payload["energy"] == pytest.approx(1.0, abs=1e-3)
        assert abs(payload["collapse_point"][0]) <= 1e-3
        stdout = capsys.readouterr().out
        assert "collapsed true" in stdout

    def test_deterministic_output_bytes(self, two_dirac_file, tmp_path):
        """Same seed and inputs give byte-identical results; only the
        manifest (wall time) may differ."""
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = run(
                ["solve", "--input", two_dirac_file, "--lambda", "0.3",
                 "--mode", "uniform", "--seed", "7", "--quadrature", "50",
                 "--out", out]
            )
            assert code == 0
            outs.append((out / "result.json").read_bytes())
        assert outs[0] == outs[1]

    def test_svg_emitted_for_2d(self, tmp_path):
        src = tmp_path / "gauss.json"
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((12, 2)).tolist()
        src.write_text(json.dumps({"points": pts}))
        out = tmp_path / "run"
        code = run(
            ["solve", "--input", src, "--lambda", "0.4", "--mode", "uniform",
             "--vertices", "4", "--quadrature", "30", "--iters", "6",
             "--svg", "--out", out]
        )
        assert code == 0
        manifest = load_manifest(out / "manifest.json")
        if not json.loads((out / "result.json").read_text())["collapsed"]:
            assert (out / "solve.svg").exists()
            assert any(p.endswith("solve.svg") for p in manifest["outputs"])

    def test_lambda_zero_usage_error(self, two_dirac_file, tmp_path):
        code = run(
            ["solve", "--input", two_dirac_file, "--lambda", "0", "--out", tmp_path]
        )
        assert code == 2

    def test_missing_lambda_usage_error(self, two_dirac_file, tmp_path):
        code = run(["solve", "--input", two_dirac_file, "--out", tmp_path])
        assert code == 2

    def test_missing_input_file(self, tmp_path):
        code = run(
            ["solve", "--input", tmp_path / "absent.json", "--lambda", "0.3",
             "--out", tmp_path]
        )
        assert code == 3

    def test_malformed_input_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        code = run(["solve", "--input", bad, "--lambda", "0.3", "--out", tmp_path])
        assert code == 3


class TestSweepCommand:
    def test_bracketing_sweep(self, two_dirac_file, tmp_path):
        out = tmp_path / "sweep"
        code = run(
            ["sweep", "--input", two_dirac_file, "--lambdas", "0.8,0.6,0.4,0.2",
             "--mode", "uniform", "--vertices", "6", "--out", out]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["collapsed_flags"][:2] == [True, True]
        assert summary["collapsed_flags"][2:] == [False, False]
        assert summary["lambda_star_empirical"] == pytest.approx(0.5, abs=1e-12)
        assert summary["in_sweep_range"] is True
        assert summary["bounds"]["p2_bound"] == pytest.approx(2.0, rel=1e-12)
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert [float(r["lambda"]) for r in rows] == [0.8, 0.6, 0.4, 0.2]
        # energies are nondecreasing in the penalty
        energies = [float(r["energy"]) for r in rows]
        assert all(a >= b - 1e-9 for a, b in zip(energies, energies[1:]))

    def test_lambda_range_geomspace(self, two_dirac_file, tmp_path):
        out = tmp_path / "range"
        code = run(
            ["sweep", "--input", two_dirac_file, "--lambda-range", "0.1:0.8:4",
             "--mode", "uniform", "--vertices", "4", "--iters", "10", "--out", out]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        lams = summary["lambdas"]
        assert len(lams) == 4
        assert lams[0] == pytest.approx(0.8, rel=1e-12)
        assert lams[-1] == pytest.approx(0.1, rel=1e-12)
        # geometric spacing: constant ratio
        ratios = [a / b for a, b in zip(lams, lams[1:])]
        assert all(r == pytest.approx(ratios[0], rel=1e-9) for r in ratios)

    def test_bad_range_spec(self, two_dirac_file, tmp_path):
        for spec in ("1:2", "0:0.5:3", "0.5:0.1:3", "0.1:0.5:1"):
            code = run(
                ["sweep", "--input", two_dirac_file, "--lambda-range", spec,
                 "--out", tmp_path]
            )
            assert code == 2, spec

    def test_lambdas_and_range_exclusive(self, two_dirac_file, tmp_path):
        code = run(
            ["sweep", "--input", two_dirac_file, "--lambdas", "0.5,0.2",
             "--lambda-range", "0.1:0.5:3", "--out", tmp_path]
        )
        assert code == 2


class TestLengthCommand:
    def test_piecewise_value(self, piecewise_file, tmp_path, capsys):
        out = tmp_path / "len"
        code = run(["length", "--input", piecewise_file, "--out", out])
        assert code == 0
        report = json.loads((out / "length.json").read_text())
        assert report["length"] == pytest.approx(1.5, rel=1e-12)
        assert report["support_length"] == pytest.approx(1.0, rel=1e-12)
        assert report["is_dirac"] is False
        printed = capsys.readouterr().out.strip()
        assert float(printed) == pytest.approx(1.5, rel=1e-12)

    def test_dirac_value(self, tmp_path):
        src = tmp_path / "dirac.json"
        src.write_text(
            json.dumps({"vertices": [[0.5, 0.5]], "edges": [],
                        "edge_density": [], "vertex_atoms": [1.0],
                        "singleton": True})
        )
        out = tmp_path / "len"
        code = run(["length", "--input", src, "--out", out])
        assert code == 0
        report = json.loads((out / "length.json").read_text())
        assert report["length"] == 0.0
        assert report["is_dirac"] is True


class TestApproxCommand:
    def test_piecewise_enlargement(self, piecewise_file, tmp_path, capsys):
        out = tmp_path / "apx"
        code = run(["approx", "--input", piecewise_file, "--n", "4", "--out", out])
        assert code == 0
        sigma = load_graph(out / "approx_graph.json")
        assert total_length(sigma) == pytest.approx(1.5, rel=1e-12)
        report = json.loads((out / "approx.json").read_text())
        assert report["added_length"] == pytest.approx(0.5, abs=1e-12)
        assert report["n"] == 4
        assert "added_length" in capsys.readouterr().out

    def test_n_validated(self, piecewise_file, tmp_path):
        code = run(
            ["approx", "--input", piecewise_file, "--n", "0", "--out", tmp_path]
        )
        assert code == 2


class TestTransportCommand:
    def test_plan_outputs(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        a.write_text(json.dumps({"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}))
        b.write_text(json.dumps({"points": [[2.0], [3.0]], "weights": [0.5, 0.5]}))
        out = tmp_path / "tr"
        code = run(["transport", "--source", a, "--target", b, "--out", out])
        assert code == 0
        report = json.loads((out / "transport.json").read_text())
        assert report["cost"] == pytest.approx(4.0, abs=1e-10)
        assert report["wasserstein"] == pytest.approx(2.0, abs=1e-10)
        with open(out / "plan.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert report["entries"] == len(rows)
        assert report["entries"] <= report["support_bound"]
        assert sum(float(r["mass"]) for r in rows) == pytest.approx(1.0, abs=1e-12)

    def test_missing_target(self, tmp_path):
        a = tmp_path / "a.json"
        a.write_text(json.dumps({"points": [[0.0]]}))
        code = run(
            ["transport", "--source", a, "--target", tmp_path / "nope.json",
             "--out", tmp_path]
        )
        assert code == 3


class TestValidateCommand:
    def test_two_dirac_suite(self, tmp_path, capsys):
        code = run(["validate", "--suite", "two-dirac", "--out", tmp_path])
        assert code == 0
        assert "fail" not in capsys.readouterr().out.lower()

    def test_all_suites(self, tmp_path):
        code = run(["validate", "--suite", "all", "--out", tmp_path])
        assert code == 0
        report = json.loads((tmp_path / "validation.json").read_text())
        assert report["pass"] is True
        assert all(c["pass"] for s in report["suites"] for c in s["checks"])


class TestManifest:
    def test_digest_verification(self, two_dirac_file, tmp_path):
        out = tmp_path / "run"
        run(
            ["solve", "--input", two_dirac_file, "--lambda", "0.6",
             "--mode", "uniform", "--out", out]
        )
        manifest = load_manifest(out / "manifest.json")
        assert manifest["tool_version"]
        assert str(two_dirac_file) in manifest["inputs"]
        assert manifest["seed"] == 0
        assert "result.json" in " ".join(manifest["outputs"])
        # tamper with the input: verification must now fail
        two_dirac_file.write_text(
            json.dumps({"points": [[-1.0], [1.0]], "weights": [0.4, 0.6]})
        )
        with pytest.raises(InputFormatError, match="digest mismatch"):
            load_manifest(out / "manifest.json")
        # but loading without verification still works
        assert load_manifest(out / "manifest.json", verify=False)["seed"] == 0

    def test_command_echoed(self, two_dirac_file, tmp_path):
        out = tmp_path / "run"
        run(
            ["solve", "--input", two_dirac_file, "--lambda", "0.6",
             "--mode", "uniform", "--seed", "3", "--out", out]
        )
        manifest = load_manifest(out / "manifest.json")
        assert manifest["command"][0] == "curvemeas"
        assert "--lambda" in manifest["command"]
        assert manifest["seed"] == 3
        assert manifest["wall_time_s"] >= 0


class TestEntryPoints:
    def test_help_exits_zero(self):
        assert run(["--help"]) == 0

    def test_version_exits_zero(self):
        assert run(["--version"]) == 0

    def test_unknown_command(self):
        assert run(["fly"]) == 2

    def test_no_command(self):
        assert run([]) == 2

    def test_console_script_subprocess(self, two_dirac_file, tmp_path):
        """The installed entry point behaves like main()."""
        out = tmp_path / "sp"
        proc = subprocess.run(
            [sys.executable, "-m", "curvemeas.cli", "solve",
             "--input", str(two_dirac_file), "--lambda", "0.6",
             "--mode", "uniform", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "energy" in proc.stdout
        assert (out / "result.json").exists()
