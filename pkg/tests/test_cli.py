import json
import math

import pytest

from planted_bipartite.cli import dispatch
from planted_bipartite.graph_model import read_matrix


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_null_matrix(self, tmp_path, capsys):
        out = tmp_path / "m.txt"
        code, _, _ = run(capsys, "gen", "--null", "--n1", "4", "--n2", "4",
                         "--p0", "0.25", "--seed", "1", "--out", str(out))
        assert code == 0
        A = read_matrix(out)
        assert (A.n1, A.n2) == (4, 4)

    def test_missing_seed_is_usage_error(self, tmp_path, capsys):
        out = tmp_path / "m.txt"
        code, _, err = run(capsys, "gen", "--null", "--n1", "4", "--n2", "4",
                           "--p0", "0.25", "--out", str(out))
        assert code == 1
        assert json.loads(err)["error"] == "usage"

    def test_planted(self, tmp_path, capsys):
        out = tmp_path / "m.txt"
        code, _, _ = run(capsys, "gen", "--n1", "8", "--n2", "8", "--k1", "3",
                         "--k2", "3", "--p0", "0.1", "--delta", "0.8",
                         "--seed", "2", "--out", str(out))
        assert code == 0
        assert read_matrix(out).bits.sum() >= 5


class TestStat:
    def test_total_degree(self, tmp_path, capsys):
        m = tmp_path / "m.txt"
        m.write_text("2 2\n00\n00\n")
        code, out, _ = run(capsys, "stat", str(m), "--p0", "0.25")
        assert code == 0
        value = float(out.split()[1])
        assert value == pytest.approx(-1 / math.sqrt(0.75), rel=1e-12)

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        code, _, err = run(capsys, "stat", str(tmp_path / "nope.txt"), "--p0", "0.25")
        assert code == 3

    def test_malformed_file(self, tmp_path, capsys):
        m = tmp_path / "m.txt"
        m.write_text("2 2\n0x\n00\n")
        code, _, err = run(capsys, "stat", str(m), "--p0", "0.25")
        assert code == 3
        assert json.loads(err)["error"] == "format"

    def test_budget_exceeded(self, tmp_path, capsys):
        rows = "\n".join("0" * 8 for _ in range(30))
        m = tmp_path / "m.txt"
        m.write_text(f"30 8\n{rows}\n")
        code, _, err = run(capsys, "stat", str(m), "--p0", "0.25",
                           "--detector", "MAX_TRUNC_AXIS1", "--tau", "1.0",
                           "--k1", "15", "--budget", "100")
        assert code == 2
        assert json.loads(err)["error"] == "budget"


class TestRates:
    def test_reference_output(self, capsys):
        code, out, _ = run(capsys, "rates", "--n1", "100", "--n2", "100",
                           "--k1", "10", "--k2", "10", "--c-phi", "10")
        assert code == 0
        fields = dict(line.split() for line in out.strip().split("\n"))
        assert float(fields["R"]) == pytest.approx(math.log(2), rel=1e-12)
        assert fields["branch"] == "MAX_TRUNC_1"


class TestLb:
    def test_reference_output(self, capsys):
        code, out, _ = run(capsys, "lb", "--n1", "2", "--n2", "2", "--k1", "1",
                           "--k2", "1", "--p0", "0.25", "--delta", "0.25")
        assert code == 0
        fields = dict(line.split() for line in out.strip().split("\n"))
        assert float(fields["exact"]) == pytest.approx(13 / 12, rel=1e-12)
        assert float(fields["risk_lb"]) == pytest.approx(0.855662, abs=1e-6)


class TestCalibrate:
    def test_prints_threshold(self, capsys):
        code, out, _ = run(capsys, "calibrate", "--n1", "16", "--n2", "16",
                           "--k1", "4", "--k2", "4", "--p0", "0.25",
                           "--detector", "TOTAL_DEGREE", "--trials", "500",
                           "--seed", "3")
        assert code == 0
        assert out.startswith("threshold ")


class TestSweep:
    def test_flag_sweep_csv(self, tmp_path, capsys):
        out = tmp_path / "res.csv"
        code, _, _ = run(capsys, "sweep", "--n1", "16", "--n2", "16", "--k1", "4",
                         "--k2", "4", "--p0", "0.25", "--delta", "0,0.4",
                         "--trials", "200", "--seed", "4", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("experiment_id,")
        assert len(lines) == 3
        assert (tmp_path / "res.csv.meta.json").exists()

    def test_determinism_byte_identical(self, tmp_path, capsys):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            code, _, _ = run(capsys, "sweep", "--n1", "16", "--n2", "16", "--k1", "4",
                             "--k2", "4", "--p0", "0.25", "--delta", "0,0.4",
                             "--trials", "200", "--seed", "4", "--out", str(out))
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_config_file(self, tmp_path, capsys):
        cfg = {
            "shape": {"n1": 16, "n2": 16, "k1": 4, "k2": 4},
            "p0": 0.25,
            "delta_grid": [0.0, 0.4],
            "threshold": {"mode": "CALIBRATED", "alpha": 0.1, "trials": 200, "seed": 4},
            "trials": 200,
            "seed": 4,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "res.csv"
        code, _, _ = run(capsys, "sweep", "--config", str(cfg_path), "--out", str(out))
        assert code == 0
        assert out.read_text().count("\n") == 3

    def test_config_empty_grid_names_field(self, tmp_path, capsys):
        cfg = {
            "shape": {"n1": 16, "n2": 16, "k1": 4, "k2": 4},
            "p0": 0.25, "delta_grid": [], "trials": 200, "seed": 4,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        code, _, err = run(capsys, "sweep", "--config", str(cfg_path))
        assert code == 1
        assert "delta_grid" in json.loads(err)["message"]


class TestPhase:
    def test_grid_output(self, capsys):
        code, out, _ = run(capsys, "phase", "--n1", "32,64", "--n2", "64",
                           "--k1", "4,8", "--k2", "8")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "n1,n2,k1,k2,R,R_tilde,branch"
        assert len(lines) == 5


class TestUsage:
    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "rates", "--n1", "4", "--n2", "4", "--bogus", "1")
        assert code == 1

    def test_unknown_subcommand(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1
