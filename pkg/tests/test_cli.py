import json

import pytest

from auxref.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestVerifyCommand:
    def test_small_suite_exits_zero(self, capsys):
        code = run_cli("verify", "--suite", "thm1", "--d", "4", "--trials", "5",
                       "--seed", "7")
        assert code == 0
        out = capsys.readouterr().out
        assert "representation_identity" in out
        assert "PASS" in out

    def test_unknown_suite_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("verify", "--suite", "nosuch")
        assert exc_info.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("verify", "--nosuchflag", "1")
        assert exc_info.value.code == 2

    def test_json_report_contract(self, tmp_path):
        path = tmp_path / "r.json"
        code = run_cli("verify", "--suite", "thm1", "--d", "8", "--trials", "1",
                       "--seed", "7", "--json", str(path))
        assert code == 0
        data = json.loads(path.read_text())
        assert data["schema"] == 1
        assert data["suite"] == "thm1"
        assert data["passed"] is True
        assert data["checks"][0]["name"] == "representation_identity"
        assert data["checks"][0]["pass"] is True

    def test_impossible_tolerance_fails_with_exit_one(self, capsys):
        code = run_cli("verify", "--suite", "thm1", "--d", "4", "--trials", "2",
                       "--tol", "1e-300")
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_reports_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("verify", "--suite", "all", "--d", "2,4", "--trials", "3",
                "--seed", "5", "--json", str(a))
        run_cli("verify", "--suite", "all", "--d", "2,4", "--trials", "3",
                "--seed", "5", "--json", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestBenchCommand:
    def test_writes_two_row_csv_with_matching_checksums(self, tmp_path, capsys):
        path = tmp_path / "b.csv"
        code = run_cli("bench", "--d", "16", "--k", "8", "--batch", "32",
                       "--reps", "3", "--warmup", "1", "--out", str(path))
        assert code == 0
        assert "speedup chain/auxiliary" in capsys.readouterr().out
        lines = path.read_text().splitlines()
        assert lines[0] == "method,d,k,batch,reps,threads,mean_ms,std_ms,checksum"
        assert len(lines) == 3
        chain = dict(zip(lines[0].split(","), lines[1].split(",")))
        aux = dict(zip(lines[0].split(","), lines[2].split(",")))
        assert chain["method"] == "chain" and aux["method"] == "auxiliary"
        c, a = float(chain["checksum"]), float(aux["checksum"])
        assert abs(c - a) <= 1e-6 * max(abs(c), abs(a))

    def test_smoke_minimal_problem(self, capsys):
        assert run_cli("bench", "--d", "2", "--k", "1", "--batch", "1",
                       "--reps", "3", "--warmup", "0") == 0
        assert "speedup" in capsys.readouterr().out

    def test_too_few_reps_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("bench", "--reps", "1")
        assert exc_info.value.code == 2

    def test_unwritable_path_exits_one(self, tmp_path):
        code = run_cli("bench", "--d", "4", "--k", "2", "--batch", "4",
                       "--reps", "3", "--warmup", "0",
                       "--out", str(tmp_path / "missing" / "b.csv"))
        assert code == 1

    def test_non_timing_fields_are_deterministic(self, tmp_path):
        paths = [tmp_path / "b1.csv", tmp_path / "b2.csv"]
        for p in paths:
            run_cli("bench", "--d", "8", "--k", "4", "--batch", "8",
                    "--reps", "3", "--warmup", "0", "--seed", "3", "--out", str(p))
        stable = []
        for p in paths:
            rows = [line.split(",") for line in p.read_text().splitlines()]
            header = rows[0]
            drop = {header.index("mean_ms"), header.index("std_ms")}
            stable.append([[v for i, v in enumerate(r) if i not in drop]
                           for r in rows])
        assert stable[0] == stable[1]


class TestTrainCommand:
    def test_writes_trace_and_prints_final_loss(self, tmp_path, capsys):
        path = tmp_path / "t.csv"
        code = run_cli("train", "--d", "4", "--steps", "5", "--lr", "0.1",
                       "--batch", "8", "--seed", "0", "--out", str(path))
        assert code == 0
        assert "final loss" in capsys.readouterr().out
        lines = path.read_text().splitlines()
        assert lines[0] == "step,loss,grad_norm"
        assert len(lines) == 7   # header + steps + final evaluation row

    def test_zero_learning_rate_repeats_loss(self, tmp_path):
        path = tmp_path / "t.csv"
        run_cli("train", "--d", "4", "--steps", "1", "--lr", "0", "--batch", "4",
                "--seed", "2", "--out", str(path))
        rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
        assert rows[0][1] == rows[1][1]

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            run_cli("train", "--d", "4", "--steps", "10", "--lr", "0.1",
                    "--batch", "8", "--seed", "1", "--out", str(p))
        assert a.read_bytes() == b.read_bytes()

    def test_divergence_exits_one_with_step_index(self, capsys):
        code = run_cli("train", "--d", "4", "--steps", "5", "--lr", "1e308",
                       "--batch", "4", "--seed", "0")
        assert code == 1
        assert "step 1" in capsys.readouterr().err

    def test_bad_flags_are_usage_errors(self):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("train", "--steps", "0")
        assert exc_info.value.code == 2


class TestInvertCommand:
    def test_constrained_case_converges(self, capsys):
        code = run_cli("invert", "--d", "4", "--seed", "42", "--constrained",
                       "--tol", "1e-7")
        assert code == 0
        out = capsys.readouterr().out
        assert "[00/" in out
        assert "reconstruction error" in out

    def test_orthogonal_case_converges(self):
        assert run_cli("invert", "--d", "2", "--seed", "0", "--orthogonal") == 0

    def test_forced_non_convergence_exits_one(self, capsys):
        code = run_cli("invert", "--d", "4", "--max-iters", "1", "--tol", "1e-12")
        assert code == 1
        assert "residual" in capsys.readouterr().out

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            run_cli()
        assert exc_info.value.code == 2
