import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "mimobp.cli"]


def run_cli(*args):
    return subprocess.run(CLI + list(args), capture_output=True, text=True)


def strip_elapsed(text):
    """Drop the wall-clock column, the one non-deterministic field."""
    out = []
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("detector") or "," not in line:
            out.append(line)
        else:
            out.append(line.rsplit(",", 1)[0])
    return "\n".join(out)


class TestExitCodes:
    def test_success(self, tmp_path):
        res = run_cli("simulate", "--snr-db", "8", "--trials", "50",
                      "--detectors", "LMMSE", "--out", str(tmp_path / "o.csv"))
        assert res.returncode == 0

    def test_config_error(self):
        res = run_cli("simulate", "--detectors", "WAT")
        assert res.returncode == 2
        assert "config error" in res.stderr

    def test_missing_config_file(self):
        res = run_cli("simulate", "--config", "/nonexistent/path.cfg")
        assert res.returncode == 2

    def test_capacity_error(self):
        res = run_cli("simulate", "--m", "16", "--n", "16",
                      "--constellation", "QAM16", "--detectors", "MAP",
                      "--trials", "1")
        assert res.returncode == 3
        assert "capacity" in res.stderr

    def test_bad_flag_exits_two(self):
        res = run_cli("simulate", "--format", "xml")
        assert res.returncode == 2

    def test_numerical_error_exits_four(self, monkeypatch):
        from mimobp import cli
        from mimobp.errors import NumericalError

        def boom(cfg):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli.sim, "run_simulate", boom)
        assert cli.main(["simulate", "--snr-db", "8", "--trials", "1",
                         "--detectors", "LMMSE"]) == 4


class TestDeterminism:
    def test_rerun_identical_sans_elapsed(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ("simulate", "--snr-db", "8", "--trials", "800", "--seed", "21",
                "--detectors", "LMMSE,BP3")
        assert run_cli(*args, "--out", str(a)).returncode == 0
        assert run_cli(*args, "--out", str(b)).returncode == 0
        assert strip_elapsed(a.read_text()) == strip_elapsed(b.read_text())

    def test_batch_size_does_not_change_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ("simulate", "--snr-db", "8", "--trials", "700", "--seed", "22",
                "--detectors", "BP2,LMMSE")
        run_cli(*args, "--batch-size", "64", "--out", str(a))
        run_cli(*args, "--batch-size", "999", "--out", str(b))
        assert strip_elapsed(a.read_text()) == strip_elapsed(b.read_text())

    def test_converge_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ("converge", "--channels", "3", "--seed", "23")
        run_cli(*args, "--out", str(a))
        run_cli(*args, "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestFormats:
    def test_json_output(self, tmp_path):
        out = tmp_path / "o.json"
        res = run_cli("simulate", "--snr-db", "8", "--trials", "60",
                      "--detectors", "LMMSE", "--format", "json", "--out", str(out))
        assert res.returncode == 0
        payload = json.loads(out.read_text())
        rec = payload["records"][0]
        assert set(rec) >= {"detector", "snr_db", "trials", "bit_errors", "ber", "ci95", "elapsed_s"}

    def test_iterstudy_csv_schema(self, tmp_path):
        out = tmp_path / "o.csv"
        res = run_cli("iterstudy", "--snr-db", "8", "--trials", "200",
                      "--iter-list", "2,3", "--out", str(out), "--seed", "3")
        assert res.returncode == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "detector,iterations,snr_db,trials,bit_errors,ber,ci95,elapsed_s"
        assert len(lines) == 2 + 2 * 2  # two detectors x two settings

    def test_detect_text_and_dump(self, tmp_path):
        res = run_cli("detect", "--seed", "4", "--snr-db", "10",
                      "--detectors", "ML,BP2,LMMSE")
        assert res.returncode == 0
        assert "[BP2]" in res.stdout and "sum=1.0000" in res.stdout
        out = tmp_path / "d.json"
        res = run_cli("detect", "--seed", "4", "--snr-db", "10",
                      "--detectors", "ML,BP2,LMMSE", "--dump", "--out", str(out))
        assert res.returncode == 0
        payload = json.loads(out.read_text())
        assert "BP2" in payload["records"]["detectors"]

    def test_config_file_with_flag_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("trials = 40\nseed = 5\ndetectors = LMMSE\nsnr_db = 8\n")
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("simulate", "--config", str(cfgfile), "--out", str(out1))
        run_cli("simulate", "--config", str(cfgfile), "--seed", "6", "--out", str(out2))
        assert "seed=5" in out1.read_text().splitlines()[0]
        assert "seed=6" in out2.read_text().splitlines()[0]
