import json
import subprocess
import sys

import pytest

from carbonsched.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestSimulate:
    def test_edf_uncongested_full_delivery(self, tmp_path):
        # small batteries and long windows: EDF always finishes everyone
        out = tmp_path / "out"
        code = run_cli("simulate", "--policy", "edf", "--synth-days", "1",
                       "--synth-sessions-per-day", "8",
                       "--synth-capacity-kwh", "5", "--out-dir", str(out))
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["edq_station"] == pytest.approx(1.0, abs=1e-9)
        assert (out / "schedule.csv").exists()
        assert (out / "shift.csv").exists()

    def test_lambda_zero_means_no_charging(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("simulate", "--policy", "carbon-offline", "--lambda",
                       "0", "--synth-days", "1", "--out-dir", str(out))
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["total_emissions_kg"] == pytest.approx(0.0, abs=1e-7)
        assert report["edq_station"] == pytest.approx(0.0, abs=1e-7)

    def test_unknown_policy_exits_1(self, capsys):
        assert run_cli("simulate", "--policy", "nope") == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_input_file_exits_1(self, tmp_path):
        code = run_cli("simulate", "--policy", "edf",
                       "--sessions", str(tmp_path / "absent.csv"),
                       "--out-dir", str(tmp_path / "out"))
        assert code == 1

    def test_online_policy_writes_decision_log(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("simulate", "--policy", "carbon-online",
                       "--synth-days", "1", "--synth-sessions-per-day", "4",
                       "--synth-capacity-kwh", "5", "--out-dir", str(out))
        assert code == 0
        log = (out / "decisions.csv").read_text().splitlines()
        assert log[0] == "slot,session_id,power_kw,forecast_c,true_c"
        assert len(log) > 1

    def test_determinism_byte_identical(self, tmp_path):
        args = ("simulate", "--policy", "carbon-offline", "--lambda", "0.4",
                "--synth-days", "2", "--synth-sessions-per-day", "6",
                "--synth-capacity-kwh", "5", "--seed", "3")
        assert run_cli(*args, "--out-dir", str(tmp_path / "a")) == 0
        assert run_cli(*args, "--out-dir", str(tmp_path / "b")) == 0
        assert (tmp_path / "a/report.json").read_bytes() \
            == (tmp_path / "b/report.json").read_bytes()
        assert (tmp_path / "a/schedule.csv").read_bytes() \
            == (tmp_path / "b/schedule.csv").read_bytes()

    def test_adaptive_policy_runs(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("simulate", "--policy", "carbon-adaptive",
                       "--synth-days", "1", "--synth-sessions-per-day", "6",
                       "--synth-capacity-kwh", "5", "--out-dir", str(out))
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["policy"] == "carbon-adaptive"

    def test_tou_policy_runs(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("simulate", "--policy", "tou", "--lambda", "5",
                       "--synth-days", "1", "--synth-sessions-per-day", "6",
                       "--synth-capacity-kwh", "5", "--out-dir", str(out))
        assert code == 0

    def test_writes_only_under_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "only"
        assert run_cli("simulate", "--policy", "edf", "--synth-days", "1",
                       "--synth-sessions-per-day", "3",
                       "--out-dir", str(out)) == 0
        created = {p.name for p in tmp_path.iterdir()}
        assert created == {"only"}


class TestLambdaSweep:
    def test_single_lambda_single_row(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("lambda-sweep", "--lambdas", "0.3", "--synth-days", "1",
                       "--synth-sessions-per-day", "5",
                       "--synth-capacity-kwh", "5", "--out-dir", str(out))
        assert code == 0
        lines = (out / "tradeoff.csv").read_text().strip().splitlines()
        assert lines[0] == "lambda,emissions_kg,energy_loss_pct"
        assert len(lines) == 2

    def test_empty_lambda_list_exits_1(self, tmp_path):
        assert run_cli("lambda-sweep", "--lambdas", "",
                       "--out-dir", str(tmp_path / "out")) == 1

    def test_emissions_monotone_in_lambda(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("lambda-sweep", "--lambdas", "0.1,0.2,0.3,0.4,0.5",
                       "--synth-days", "2", "--synth-sessions-per-day", "6",
                       "--synth-capacity-kwh", "5", "--seed", "2",
                       "--out-dir", str(out))
        assert code == 0
        rows = [line.split(",") for line in
                (out / "tradeoff.csv").read_text().strip().splitlines()[1:]]
        emissions = [float(r[1]) for r in rows]
        losses = [float(r[2]) for r in rows]
        assert all(b >= a - 1e-7 for a, b in zip(emissions, emissions[1:]))
        assert all(b <= a + 1e-7 for a, b in zip(losses, losses[1:]))


class TestForecastCommand:
    def test_fits_and_reports(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("forecast", "--synth-days", "60", "--out-dir", str(out))
        assert code == 0
        model = json.loads((out / "model.json").read_text())
        assert len(model["beta"]) == 9
        stats = json.loads((out / "forecast_metrics.json").read_text())
        assert stats["mae"] >= 0.0

    def test_too_little_history_exits_1(self, tmp_path):
        # one synthetic day leaves no rows after warm-up
        code = run_cli("forecast", "--synth-days", "1",
                       "--out-dir", str(tmp_path / "out"))
        assert code == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "carbonsched.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
