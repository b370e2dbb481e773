import json

import pytest

from steinlab import acceptance, cli
from steinlab.reporting import read_csv


def _run(argv, capsys):
    code = cli.run(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestOutput:
    def test_meanfield_curve(self, capsys):
        code, out, _ = _run(["meanfield", "curve", "--t", "0.5"], capsys)
        assert code == 0
        assert out.splitlines()[1] == "0.5,-0.80685281944005471,3.375"

    def test_oracle_ergm(self, capsys):
        code, out, _ = _run(["oracle", "ergm", "--n", "3", "--beta", "0", "--h", "0", "--format", "json"], capsys)
        assert code == 0
        row = json.loads(out)["rows"][0]
        assert row["log_Z"] == pytest.approx(2.0794415416798362, abs=1e-15)

    def test_out_file_and_manifest(self, tmp_path, capsys):
        path = tmp_path / "theta.csv"
        code, out, _ = _run(["ising", "theta", "--d", "2", "--beta", "0.44", "--out", str(path)], capsys)
        assert code == 0 and out == ""
        assert read_csv(path).rows
        man = json.loads((tmp_path / "theta.csv.manifest.json").read_text())
        assert man["command"] == "ising theta" and man["params"]["beta"] == 0.44

    def test_env_out_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("STEINLAB_OUT_DIR", str(tmp_path))
        assert _run(["meanfield", "roots", "--beta", "1", "--h", "0"], capsys)[0] == 0
        assert (tmp_path / "meanfield_roots.csv").exists()
        assert (tmp_path / "meanfield_roots.csv.manifest.json").exists()

    def test_sampled_runs_are_reproducible(self, tmp_path, capsys):
        argv = ["cw", "tail", "--n", "50", "--samples", "200", "--chains", "2", "--seed", "3", "--t-grid", "0:1:0.5"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert _run(argv + ["--out", str(a)], capsys)[0] == 0
        assert _run(argv + ["--out", str(b)], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"t": 1.0, "format": "json"}))
        code, out, _ = _run(["meanfield", "curve", "--config", str(cfg), "--t", "0.5"], capsys)
        assert code == 0
        assert json.loads(out)["rows"][0]["beta"] == pytest.approx(3.375)


class TestExitCodes:
    def test_bad_subcommand(self, capsys):
        assert _run(["cw", "nope"], capsys)[0] == 2

    def test_invalid_value(self, capsys):
        assert _run(["meanfield", "curve", "--t", "-1"], capsys)[0] == 2

    def test_resource_limit(self, capsys):
        code, _, err = _run(["oracle", "ergm", "--n", "9", "--beta", "0", "--h", "0"], capsys)
        assert code == 3 and "resource" in err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        code = _run(["meanfield", "curve", "--t", "0.5", "--out", str(blocker / "x.csv")], capsys)[0]
        assert code == 4

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert _run(["meanfield", "curve", "--config", str(cfg)], capsys)[0] == 2


def _fake_results(failing):
    out = []
    for k in range(1, 11):
        r = acceptance.CriterionResult(k, f"criterion {k}", k not in failing, 0.01, 1.0, {"within_runtime": True})
        out.append(r)
    return out


class TestVerify:
    @pytest.mark.parametrize("budget,failing,expected", [
        ("quick", (), 0),
        ("quick", (7, 8), 0),
        ("quick", (3,), 1),
        ("full", (7,), 1),
        ("full", (), 0),
    ])
    def test_exit_code(self, monkeypatch, tmp_path, capsys, budget, failing, expected):
        monkeypatch.setattr(acceptance, "run_all", lambda b: _fake_results(failing))
        path = tmp_path / "verify_all.csv"
        code, _, err = _run(["verify", "all", "--budget", budget, "--out", str(path)], capsys)
        assert code == expected
        assert err.count("criterion") >= 10
        assert len(read_csv(path).rows) == 10
        assert (tmp_path / "verify_all_criterion_4.csv.manifest.json").exists()
