import json
import subprocess
import sys

import numpy as np
import pytest

from sparselind.cli import ExperimentConfig, infer_pattern, main, parse_grid
from sparselind.errors import ValidationError
from sparselind.lindblad import LindbladModel, exact_channel

DENSE = '{"class": "dense_diagonal", "a": [0.2, 0.5, 0.1, 0.7]}'
DIAG = json.dumps({"class": "diagonal", "a": [[0.1, 0.3, 0, 0], [0.2, 0, 0.4, 0], [0, 0.1, 0.2, 0.5], [0.3, 0, 0.1, 0]]})
PATH = '{"vertices": 3, "edges": [[0, 1], [1, 2]], "hamiltonian": "laplacian"}'
KSPARSE = json.dumps({"class": "sparse_operator", "L": [[0, 0.8, 0.3, 0], [0.5, 0, 0, 0.2], [0, 0.6, 0, 0.9], [0.4, 0, 0.7, 0]]})
TWO_OPS = json.dumps({
    "dim": 3,
    "hamiltonian": [[1, [0, 0.5], 0], [[0, -0.5], 0, 0.2], [0, 0.2, -1]],
    "lindblad_ops": [[[0, 1, 0], [0, 0, 0.5], [0, 0, 0]], [[0.3, 0, 0], [0, 0, 0], [0, 0, -0.3]]],
})


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def csv_body(text):
    """Data rows as dicts, skipping comment lines."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    head = lines[0].split(",")
    return [dict(zip(head, map(float, line.split(",")))) for line in lines[1:]]


def summary(text, key):
    for line in text.splitlines():
        if line.startswith(f"# {key}:"):
            return line.split(":", 1)[1].strip()
    return None


def strip_volatile(text):
    """Drop the timestamp line and the wall-time column."""
    lines = [line for line in text.splitlines() if "generated" not in line]
    out = []
    wall = None
    for line in lines:
        if line.startswith("#"):
            out.append(line)
            continue
        cells = line.split(",")
        if wall is None and "wall_seconds" in cells:
            wall = cells.index("wall_seconds")
        if wall is not None and len(cells) > wall:
            cells = cells[:wall] + cells[wall + 1:]
        out.append(",".join(cells))
    return "\n".join(out)


class TestSimulate:
    def test_dense_diagonal_class(self, capsys):
        rep = run_json(capsys, "simulate", "--model", DENSE, "--t", "0.8", "--method", "class")
        assert rep["choi_lower"] < 1e-9
        assert rep["choi_lower"] <= rep["choi_upper"]
        assert len(rep["choi"]) == 16

    def test_t_zero_identity(self, capsys):
        for method in ("exact", "class"):
            rep = run_json(capsys, "simulate", "--model", DENSE, "--t", "0", "--method", method)
            assert rep["choi_upper"] == 0
            J = np.array(rep["choi"])[..., 0]
            assert np.allclose(J, np.outer(np.eye(4).reshape(-1), np.eye(4).reshape(-1)))

    def test_methods_against_oracle(self, capsys):
        rep = run_json(capsys, "simulate", "--model", TWO_OPS, "--t", "0.7", "--method", "stinespring-pipeline")
        assert rep["choi_upper"] < 1e-8
        rep = run_json(capsys, "simulate", "--model", TWO_OPS, "--t", "0.7", "--method", "trotter", "--r", "16")
        assert 0 < rep["choi_lower"] < 1e-2
        rep = run_json(capsys, "simulate", "--model", KSPARSE, "--t", "0.5", "--method", "short-time", "--n", "200")
        assert rep["choi_lower"] < 2e-2

    def test_output_file(self, tmp_path, capsys):
        out = tmp_path / "res.json"
        code, stdout, _ = run(capsys, "simulate", "--model", DENSE, "--out", str(out))
        assert code == 0 and stdout == ""
        assert json.loads(out.read_text())["method"] == "exact"

    def test_model_file(self, tmp_path, capsys):
        path = tmp_path / "m.json"
        path.write_text(DIAG)
        rep = run_json(capsys, "simulate", "--model", str(path), "--method", "class", "--r", "4")
        assert rep["model"] == "DiagonalSpec"

    def test_no_class_construction(self, capsys):
        code, _, err = run(capsys, "simulate", "--model", TWO_OPS, "--method", "class")
        assert code == 2 and "no class construction" in err


class TestConvergence:
    def test_trotter_slope(self, capsys):
        code, out, _ = run(capsys, "convergence", "--model", DIAG, "--method", "trotter", "--grid", "2,4,8,16")
        assert code == 0
        assert float(summary(out, "slope")) == pytest.approx(-2, abs=0.3)
        rows = csv_body(out)
        assert [r["r"] for r in rows] == [2, 4, 8, 16]
        assert all(r["error_lower"] <= r["error_upper"] for r in rows)

    def test_short_time_defect_slope(self, capsys):
        code, out, _ = run(capsys, "convergence", "--model", KSPARSE, "--method", "short-time", "--axis", "eps",
                           "--grid", "0.0125,0.025,0.05,0.1")
        assert code == 0
        assert float(summary(out, "defect_slope")) == pytest.approx(2, abs=0.2)
        assert float(summary(out, "slope")) == pytest.approx(2, abs=0.2)

    def test_short_time_steps(self, capsys):
        code, out, _ = run(capsys, "convergence", "--model", KSPARSE, "--method", "short-time", "--t", "0.5",
                           "--grid", "100,200,400")
        assert code == 0
        assert float(summary(out, "slope")) == pytest.approx(-1, abs=0.2)

    def test_single_generator(self, capsys):
        model = '{"dim": 2, "lindblad_ops": [[[0, 1], [0, 0]]]}'
        code, out, _ = run(capsys, "convergence", "--model", model, "--grid", "1,2,4")
        assert code == 0
        assert all(r["error_upper"] < 1e-13 for r in csv_body(out))
        assert summary(out, "slope") == "none"

    def test_grid_validation(self, capsys):
        assert run(capsys, "convergence", "--model", DIAG, "--grid", "4,2")[0] == 2
        assert run(capsys, "convergence", "--model", DIAG, "--grid", "1.5,2")[0] == 2
        assert run(capsys, "convergence", "--model", DIAG, "--grid", "a,b")[0] == 2


class TestOtherCommands:
    def test_decompose_diagonal(self, capsys):
        rep = run_json(capsys, "decompose", "--model", DIAG)
        assert rep["reconstruction_error"] == 0
        assert rep["count"] <= rep["piece_bound"]

    def test_decompose_operator(self, capsys):
        rep = run_json(capsys, "decompose", "--model", KSPARSE)
        op = rep["operators"][0]
        assert op["k"] == 2 and len(op["perms"]) == 2

    def test_verify_gram(self, capsys):
        rep = run_json(capsys, "verify-gram", "--model", TWO_OPS, "--t", "0.7")
        assert rep["pass"]
        assert rep["choi_upper"] < 1e-8
        assert rep["gram_psd_violation"] < 1e-9

    def test_walk_stationary(self, capsys):
        rep = run_json(capsys, "walk", "--model", PATH, "--mode", "stationary")
        state = np.array(rep["state"])
        rho = state[..., 0] + 1j * state[..., 1]
        expected = np.array([[8, -1 + 1j, 2], [-1 - 1j, 12, -1 - 1j], [2, -1 + 1j, 8]]) / 28
        assert np.abs(rho - expected).max() < 1e-6

    def test_walk_trajectory(self, capsys):
        code, out, _ = run(capsys, "walk", "--model", PATH, "--mode", "trajectory", "--times", "0,1,2")
        assert code == 0
        rows = csv_body(out)
        assert [r["t"] for r in rows] == [0, 1, 2]
        assert rows[0]["rho_0_0_re"] == 1

    def test_walk_needs_graph(self, capsys):
        assert run(capsys, "walk", "--model", DENSE)[0] == 2

    def test_nff_default(self, capsys):
        rep = run_json(capsys, "nff", "--seed", "5")
        assert rep["N"] == 7 and rep["t"] == 28
        assert rep["success_prob"] >= 63 / 64
        assert rep["readout"] == rep["parity"]
        for key in ("queries", "tail"):
            assert key in rep

    def test_nff_single_bit(self, capsys):
        assert run_json(capsys, "nff", "--N", "1", "--s", "1")["readout"] == 1


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ("nff", "--N", "10", "--seed", "11"),
        ("convergence", "--model", DIAG, "--grid", "2,4,8"),
        ("simulate", "--model", TWO_OPS, "--method", "trotter"),
        ("walk", "--model", PATH, "--mode", "trajectory", "--times", "0.5,1"),
    ])
    def test_repeat_runs(self, capsys, argv):
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        assert first[0] == second[0] == 0
        assert strip_volatile(first[1]) == strip_volatile(second[1])

    def test_timestamp_isolated(self, capsys):
        code, out, _ = run(capsys, "convergence", "--model", DIAG, "--grid", "2,4")
        assert out.splitlines()[0].startswith("# generated: ")


class TestExitCodes:
    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n "dim": 2,\n "lindblad_ops": [[[0,1],[0,0]]\n}\n')
        code, _, err = run(capsys, "simulate", "--model", str(path))
        assert code == 2
        assert "bad.json:4:" in err

    def test_invalid_spec(self, capsys):
        ket = '{"class": "one_ket_sparse", "nu": [1,0], "a": [0.1,0.1], "aprime": [0.1,0.1], "b": [1,1]}'
        assert run(capsys, "simulate", "--model", ket)[0] == 2

    def test_missing_model(self, capsys):
        assert run(capsys, "simulate")[0] == 2

    def test_invariant_failure(self, capsys):
        model = '{"dim": 2, "gks_entries": [{"k": 0, "l": 1, "kp": 0, "lp": 1, "re": -1}]}'
        code, _, err = run(capsys, "simulate", "--model", model)
        assert code == 3
        assert "complete_positivity" in err

    def test_argparse_errors(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--method", "nonsense"])
        assert exc.value.code == 2


class TestHelpers:
    def test_parse_grid(self):
        assert parse_grid("1,2,4", integer=True) == [1, 2, 4]
        assert parse_grid("0.1,0.2") == [0.1, 0.2]
        assert parse_grid(None) == []
        with pytest.raises(ValidationError):
            parse_grid("0,1")

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            ExperimentConfig("simulate", method="magic")
        with pytest.raises(ValidationError):
            ExperimentConfig("simulate", t=-1.0)
        with pytest.raises(ValidationError):
            ExperimentConfig("convergence", grid=[2, 2])

    def test_infer_pattern(self):
        L = np.zeros((4, 4))
        L[1, 0] = L[0, 1] = 1.0
        L[3, 3] = 0.5
        pattern = infer_pattern(exact_channel(LindbladModel(4, None, [L]), 1.0))
        assert sorted(map(sorted, pattern.orbits())) == [[0, 1], [2], [3]]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sparselind", "nff", "--N", "2", "--s", "11"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["readout"] == 0
