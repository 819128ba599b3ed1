import json
import math

import numpy as np
import pytest

from constants import MIN_TOLERANCE
from main import (
    EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, RunConfig, build_parser, dispatch, parse_grid,
    parse_vector,
)
from utils.exceptions import InputError


def run(capsys, *argv):
    code = dispatch(list(argv))
    return code, capsys.readouterr().out


class TestParsing:
    def test_vector(self):
        assert parse_vector("0.5,-1").tolist() == [0.5, -1.0]
        with pytest.raises(InputError):
            parse_vector("1,,2")
        with pytest.raises(InputError):
            parse_vector("1,inf")

    def test_grid(self):
        assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
        assert parse_grid("0.05,0.4") == [0.05, 0.4]
        with pytest.raises(InputError):
            parse_grid("1:0:0.1")
        with pytest.raises(InputError):
            parse_grid("0.1:0.2")

    def test_tolerance_floor(self):
        args = build_parser().parse_args(["distance", "--metric", "euclidean", "--from", "0,0", "--to", "1,0",
                                          "--tol", "0"])
        assert RunConfig.from_args(args).shoot_options().tol == MIN_TOLERANCE


class TestCommands:
    def test_eval(self, capsys):
        code, out = run(capsys, "eval", "--metric", "euclidean", "--x", "0,0", "--y", "3,4")
        assert code == EXIT_OK
        assert out.strip() == "5.0"

    def test_eval_json_negative_vector(self, capsys):
        code, out = run(capsys, "eval", "--metric", "randers_flat", "--x", "0,0", "--y=-1,0", "--json")
        assert code == EXIT_OK
        assert json.loads(out)["F"] == pytest.approx(0.5)

    def test_tensor(self, capsys):
        code, out = run(capsys, "tensor", "--metric", "poincare", "--x", "0,0", "--y", "1,0", "--json")
        assert code == EXIT_OK
        np.testing.assert_allclose(json.loads(out)["g"], 4 * np.eye(2), atol=1e-12)

    def test_connection(self, capsys):
        code, out = run(capsys, "connection", "--metric", "euclidean", "--x", "0,0", "--y", "1,0", "--json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert set(data) == {"G", "P", "gamma1"}
        assert data["G"] == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_trace(self, capsys, tmp_path):
        code, out = run(capsys, "trace", "--metric", "euclidean", "--x", "0,0", "--y", "1,0",
                        "--t-end", "0.5", "--step", "0.1")
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == "t,x1,x2,v1,v2,F"
        assert len(lines) == 7
        assert [float(v) for v in lines[-1].split(",")] == pytest.approx([0.5, 0.5, 0.0, 1.0, 0.0, 1.0])

        path = tmp_path / "trace.csv"
        code, out = run(capsys, "trace", "--metric", "euclidean", "--x", "0,0", "--y", "1,0",
                        "--step", "0.25", "--out", str(path))
        assert code == EXIT_OK and out == ""
        assert path.read_text(encoding="utf-8").startswith("t,x1,x2,v1,v2,F\n")

    def test_exp(self, capsys):
        code, out = run(capsys, "exp", "--metric", "poincare", "--x", "0,0", "--X", "0.5,0", "--json")
        assert code == EXIT_OK
        assert json.loads(out)["point"] == pytest.approx([math.tanh(0.5), 0.0], abs=1e-8)

    def test_distance_is_directed(self, capsys):
        code, out = run(capsys, "distance", "--metric", "randers_flat", "--from=1,0", "--to=0,0", "--step", "0.25")
        assert code == EXIT_OK
        assert float(out) == pytest.approx(0.5)

    def test_connect(self, capsys):
        code, out = run(capsys, "connect", "--metric", "euclidean", "--from", "0,0", "--to", "3,4",
                        "--step", "0.5", "--json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["converged"]
        assert data["length"] == pytest.approx(5.0)

    def test_convexity(self, capsys):
        code, out = run(capsys, "convexity", "--metric", "euclidean", "--at", "0,0", "--grid", "0.1:0.2:0.1",
                        "--samples", "2", "--step", "0.25", "--json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["epsilon"] == pytest.approx(0.2)
        assert data["epsilon_tilde"] == pytest.approx(0.2 / 3)

    def test_verify_rejects_non_convex_metric(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        code, out = run(capsys, "verify", "--metric-set", "quartic", "--out", str(path))
        assert code == EXIT_VERIFY
        assert out.strip() == "FAIL"
        report = json.loads(path.read_text(encoding="utf-8"))
        assert not report["passed"]
        assert "quartic" in report["rejected"]

    def test_verify_empty_set(self, capsys):
        code, out = run(capsys, "verify", "--metric-set=", "--json")
        assert code == EXIT_OK
        assert json.loads(out)["passed"] is True

    def test_verify_json_path(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        code, out = run(capsys, "verify", "--metric-set", "", "--seed", "42", "--json", str(path))
        assert code == EXIT_OK
        assert out.strip() == "PASS"
        report = json.loads(path.read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert report["seed"] == 42

    def test_verify_json_path_is_strict_json(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        code, _ = run(capsys, "verify", "--metric-set=quartic", "--json", str(path))
        assert code == EXIT_VERIFY
        text = path.read_text(encoding="utf-8")
        assert "Infinity" not in text and "NaN" not in text
        assert "quartic" in json.loads(text)["rejected"]

    def test_verify_json_dash_is_stdout(self, capsys):
        code, out = run(capsys, "verify", "--metric-set=", "--json", "-")
        assert code == EXIT_OK
        assert json.loads(out)["metrics"] == []


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["eval", "--x", "0,0", "--y", "1,0"],
        ["eval", "--metric", "euclidean", "--x", "a,b", "--y", "1,0"],
        ["eval", "--metric", "no-such-metric", "--x", "0,0", "--y", "1,0"],
        ["eval", "--metric", '{"kind": "expression", "n": 2, "F": "y1^2"}', "--x", "0,0", "--y", "1,0"],
        ["convexity", "--metric", "euclidean", "--at", "0,0", "--grid", "0.2,0.1"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert dispatch(argv) == EXIT_USAGE

    @pytest.mark.parametrize("argv", [
        ["exp", "--metric", "poincare", "--x", "2,0", "--X", "0.1,0"],
        ["exp", "--metric", "euclidean_disk", "--x", "0,0", "--X", "3,0", "--step", "0.1"],
        ["connect", "--metric", "poincare", "--from", "0,0", "--to", "1.2,0"],
        ["tensor", "--metric", "quartic", "--x", "0,0", "--y", "1,0"],
    ])
    def test_numeric_errors(self, capsys, argv):
        assert dispatch(argv) == EXIT_NUMERIC
