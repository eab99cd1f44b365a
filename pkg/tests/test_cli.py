import csv
import io
import os
import re
import subprocess
import sys

import numpy as np
import pytest

from nonmarkov.cli import SERIES_HEADER, fmt, main, read_series_csv
from nonmarkov.measure import measure_from_values


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def summary_value(text):
    return float(re.search(r"^N = (\S+)$", text, re.M).group(1))


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


class TestSimulate:
    def test_markovian_csv(self, capsys, tmp_path):
        out_path = tmp_path / "m.csv"
        code, out, _ = run(capsys, "simulate", "--lambda-ratio", "3", "--t-max", "10", "--steps", "2000", "--out", str(out_path))
        assert code == 0
        assert out_path.read_text().splitlines()[0] == "t_gamma0,p,gamma_over_gamma0,E_SA,J_SE"
        data = read_series_csv(str(out_path))
        assert len(data["E_SA"]) == 2001
        assert np.all(np.diff(data["E_SA"]) <= 0)
        assert "growth intervals detected: no" in out
        assert "N = 0.000000000" in out

    def test_oscillatory_detects_growth(self, capsys, tmp_path):
        out_path = tmp_path / "o.csv"
        code, out, _ = run(capsys, "simulate", "--lambda-ratio", "0.1", "--t-max", "30", "--steps", "3000", "--out", str(out_path))
        assert code == 0
        assert "growth intervals detected: yes" in out
        assert summary_value(out) > 1e-3

    def test_csv_to_stdout_summary_to_stderr(self, capsys):
        code, out, err = run(capsys, "simulate", "--lambda-ratio", "3", "--steps", "200")
        assert code == 0
        assert out.splitlines()[0] == ",".join(SERIES_HEADER)
        assert "N = " in err and "N = " not in out

    def test_pole_written_as_inf(self, capsys, tmp_path):
        # first pole of gamma at lambda = 0.1 lies at 8.2420343...; a grid point
        # close enough to it makes the rate diverge
        out_path = tmp_path / "pole.csv"
        code, _, _ = run(capsys, "simulate", "--lambda-ratio", "0.1", "--t-max", "8.2420343116920724", "--steps", "200", "--out", str(out_path))
        assert code == 0
        last = out_path.read_text().splitlines()[-1].split(",")
        assert last[2] == "inf"
        assert float(last[1]) == pytest.approx(1.0, abs=1e-9)

    def test_precision_flag(self, capsys):
        _, out, _ = run(capsys, "simulate", "--lambda-ratio", "0.5", "--steps", "200", "--precision", "4")
        for row in rows_of(out)[1:]:
            for tok in row:
                if tok != "inf":
                    assert len(re.sub(r"[-.]|e.*$", "", tok).lstrip("0")) <= 4

    def test_steps_too_small_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--lambda-ratio", "3", "--steps", "10"])
        assert exc.value.code == 2
        assert "steps" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["simulate"],
        ["simulate", "--lambda-ratio", "-1"],
        ["simulate", "--lambda-ratio", "1", "--r", "1.5"],
        ["measure", "--lambda-ratio", "1", "--r-grid", "0,abc"],
        ["sweep", "--lambda-grid", "0,1"],
        ["frobnicate"],
    ])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert err.strip().splitlines()[-1].startswith("nonmarkov")

    def test_unwritable_output(self, capsys, tmp_path):
        target = tmp_path / "missing-dir" / "x.csv"
        code, _, err = run(capsys, "simulate", "--lambda-ratio", "3", "--steps", "200", "--out", str(target))
        assert code == 1
        assert len(err.strip().splitlines()) == 1 and err.startswith("nonmarkov: error:")


class TestMeasure:
    def test_markovian(self, capsys):
        code, out, _ = run(capsys, "measure", "--lambda-ratio", "3")
        assert code == 0
        assert "N = 0.000000000" in out.splitlines()

    def test_oscillatory(self, capsys):
        code, out, _ = run(capsys, "measure", "--lambda-ratio", "0.1")
        assert code == 0
        assert summary_value(out) > 0
        assert "argmax r = 0" in out.splitlines()

    def test_pure_apparatus_only(self, capsys):
        _, out, _ = run(capsys, "measure", "--lambda-ratio", "0.1", "--r-grid", "1.0")
        assert summary_value(out) == 0.0
        assert "intervals: none" in out

    def test_per_r_csv(self, capsys, tmp_path):
        out_path = tmp_path / "r.csv"
        run(capsys, "measure", "--lambda-ratio", "0.5", "--r-grid", "0,0.5,1", "--out", str(out_path))
        rows = rows_of(out_path.read_text())
        assert rows[0] == ["r", "N"]
        assert [float(r) for r, _ in rows[1:]] == [0.0, 0.5, 1.0]
        assert float(rows[-1][1]) == 0.0


class TestSweep:
    def test_grid(self, capsys):
        code, out, _ = run(capsys, "sweep", "--lambda-grid", "0.1,0.5,1,2,3", "--r-grid", "0,0.5,1")
        assert code == 0
        rows = [[float(x) for x in row] for row in rows_of(out)[1:]]
        assert len(rows) == 15
        assert rows == sorted(rows)
        assert all(n == 0.0 for lam, _, n in rows if lam >= 2)
        at_zero = [n for _, r, n in rows if r == 0.0]
        assert all(a >= b for a, b in zip(at_zero, at_zero[1:]))

    def test_single_point(self, capsys):
        _, out, _ = run(capsys, "sweep", "--lambda-grid", "0.5", "--r-grid", "0.25")
        assert len(rows_of(out)) == 2

    def test_unsorted_input_is_sorted(self, capsys):
        _, out, _ = run(capsys, "sweep", "--lambda-grid", "3,0.5", "--r-grid", "1,0")
        keys = [(float(a), float(b)) for a, b, _ in rows_of(out)[1:]]
        assert keys == [(0.5, 0.0), (0.5, 1.0), (3.0, 0.0), (3.0, 1.0)]

    def test_parallel_matches_serial(self, capsys):
        argv = ["sweep", "--lambda-grid", "0.1,0.5,3", "--r-grid", "0,0.5"]
        _, serial, _ = run(capsys, *argv)
        _, parallel, _ = run(capsys, *argv, "--jobs", "3")
        assert serial == parallel


class TestVerify:
    @pytest.mark.parametrize("lam", ["3", "0.1"])
    def test_all_pass(self, capsys, lam):
        code, out, _ = run(capsys, "verify", "--lambda-ratio", lam)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[-1] == "ALL PASS"
        assert len(lines) == 7 and all(line.endswith("PASS") for line in lines[:-1])

    def test_injected_fault(self, capsys):
        code, out, _ = run(capsys, "verify", "--lambda-ratio", "3", "--inject-fault")
        assert code == 1
        assert "FAIL" in out and out.strip().splitlines()[-1] == "FAILED"


class TestCsvContract:
    @pytest.mark.parametrize("lam", ["0.1", "0.5", "3"])
    def test_round_trip_reproduces_summary(self, capsys, tmp_path, lam):
        out_path = tmp_path / "rt.csv"
        _, out, _ = run(capsys, "simulate", "--lambda-ratio", lam, "--out", str(out_path))
        data = read_series_csv(str(out_path))
        recomputed = measure_from_values(data["t_gamma0"], data["E_SA"]).value
        # the summary carries nine decimals
        assert abs(recomputed - summary_value(out)) <= 1e-9

    def test_deterministic_bytes(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run(capsys, "simulate", "--lambda-ratio", "0.1", "--r", "0.3", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()

    def test_fmt(self):
        assert fmt(float("inf"), 9) == "inf"
        assert fmt(-0.0, 9) == "0"
        assert fmt(0.1234567891234, 9) == "0.123456789"

    def test_locale_independent_decimal_point(self, tmp_path):
        env = dict(os.environ, LC_ALL="de_DE.UTF-8", LANG="de_DE.UTF-8")
        proc = subprocess.run(
            [sys.executable, "-m", "nonmarkov", "simulate", "--lambda-ratio", "3", "--steps", "200"],
            capture_output=True, text=True, env=env, check=True,
        )
        second = proc.stdout.splitlines()[2].split(",")
        assert len(second) == 5 and "." in second[0]


class TestConfigFile:
    def test_values_used(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nlambda-ratio = 3\nsteps=400\n")
        code, out, _ = run(capsys, "simulate", "--config", str(cfg))
        assert code == 0
        assert len(rows_of(out)) == 402

    def test_flags_take_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lambda_ratio=3\nsteps=400\n")
        _, out, _ = run(capsys, "simulate", "--config", str(cfg), "--steps", "250")
        assert len(rows_of(out)) == 252

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lambda_ratio=3\ncolour=blue\n")
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--config", str(cfg)])
        assert exc.value.code == 2

    def test_missing_file(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--config", str(tmp_path / "nope.cfg")])
        assert exc.value.code == 2


def test_console_script_installed():
    proc = subprocess.run(["nonmarkov", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("simulate", "measure", "sweep", "verify"):
        assert name in proc.stdout
