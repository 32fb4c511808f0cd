import subprocess
import sys

import pytest

from wickwave import cli
from wickwave._runtime import read_csv
from wickwave.experiments import Check, ExperimentResult


def _ini(tmp_path, body, name="c.ini"):
    p = tmp_path / name
    p.write_text(body)
    return p


@pytest.mark.parametrize(
    "body, extra",
    [
        ("", []),
        ("# nothing here\n", []),
        ("[experiment]\n", []),
        ("[other]\nx = 1\n", []),
        ("[experiment]\nladder = 8,16\n[more]\ny = 2\n", []),
        ("[experiment]\nbogus = 1\n", []),
        ("[experiment]\nladder = eight\n", []),
        ("[experiment]\nmanifold = cube\n", []),
        ("not an ini file", []),
        ("[experiment]\nladder = 8,16\n", ["--override", "noequals"]),
        ("[experiment]\nladder = 8,16\n", ["--threads", "0"]),
        ("[experiment]\nladder = 8,16\n", ["--seed", "-3"]),
    ],
)
def test_config_errors_exit_2_without_outputs(tmp_path, body, extra):
    cfg = _ini(tmp_path, body)
    out = tmp_path / "out"
    assert cli.main(["sigma-scan", "--config", str(cfg), "--out", str(out), *extra]) == 2
    assert not out.exists()


@pytest.mark.parametrize("body", ["kind = bogus\n", "mode = twice\n", "dt = -1\n"])
def test_solve_config_errors_exit_2(tmp_path, body):
    cfg = _ini(tmp_path, "[experiment]\n" + body)
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_file_exits_2(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["sigma-scan", "--config", str(tmp_path / "none.ini"), "--out", str(out)]) == 2
    assert not out.exists()


def test_sigma_scan_outputs(tmp_path):
    cfg = _ini(tmp_path, "[experiment]\nladder = 8,16,32,64\n")
    out = tmp_path / "out"
    assert cli.main(["sigma-scan", "--config", str(cfg), "--out", str(out)]) == 0
    meta, rows = read_csv(out / "sigma-scan.csv")
    assert len([r for r in rows if r["manifold"] == "torus"]) == 4
    assert "slope_forward" in rows[0]
    assert meta[0].startswith("# wickwave")
    assert any(line.startswith("# config_hash=") for line in meta)
    assert any(line.startswith("# seed=20201012") for line in meta)
    assert any(line.startswith("# ladder=") for line in meta)
    _, summary = read_csv(out / "summary.csv")
    assert summary and all(r["status"] in ("PASS", "FAIL") for r in summary)
    assert (out / "sigma-scan.svg").read_text().lstrip().startswith("<?xml")


def test_override_and_seed_are_echoed(tmp_path):
    cfg = _ini(tmp_path, "[experiment]\nladder = 8,16\n")
    out = tmp_path / "out"
    rc = cli.main(["sigma-scan", "--config", str(cfg), "--out", str(out), "--seed", "77",
                   "--override", "ladder=8,16,32", "--no-svg"])
    assert rc == 0
    text = (out / "sigma-scan.csv").read_text()
    assert "# seed=77" in text and "# ladder=8.0,16.0,32.0" in text
    assert not (out / "sigma-scan.svg").exists()


def test_failing_check_exits_1(tmp_path, monkeypatch):
    def fake(name, raw, threads=1):
        return ExperimentResult(name, {"t": (["x"], [(1.0,)])}, [Check("always fails", 1.0, "< 0", False)])

    monkeypatch.setattr(cli, "run_experiment", fake)
    cfg = _ini(tmp_path, "[experiment]\nladder = 8\n")
    out = tmp_path / "out"
    assert cli.main(["sigma-scan", "--config", str(cfg), "--out", str(out)]) == 1
    _, rows = read_csv(out / "summary.csv")
    assert rows[0]["status"] == "FAIL"


def _run(tmp_path, name, body, threads, tag):
    cfg = _ini(tmp_path, body, f"{tag}.ini")
    out = tmp_path / tag
    rc = cli.main([name, "--config", str(cfg), "--out", str(out), "--threads", str(threads)])
    return rc, {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize(
    "name, body",
    [
        ("sigma-scan", "[experiment]\nladder = 8,16\n"),
        ("ito-check", "[experiment]\nN = 8\nM = 600\ndt = 0.01\nn_probes = 3\n"),
        ("solve", "[experiment]\nmode = single\nN = 8\nM = 300\nT = 0.1\ndt = 0.01\n"),
    ],
)
def test_rerun_is_byte_identical_across_thread_counts(tmp_path, name, body):
    rc1, a = _run(tmp_path, name, body, 1, "one")
    rc4, b = _run(tmp_path, name, body, 4, "four")
    assert rc1 == rc4
    assert a.keys() == b.keys() and any(k.endswith(".csv") for k in a)
    for k in a:
        assert a[k] == b[k], k


def test_module_entry_point(tmp_path):
    cfg = _ini(tmp_path, "")
    proc = subprocess.run([sys.executable, "-m", "wickwave", "sigma-scan", "--config", str(cfg)],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 2
    assert "config error" in proc.stderr
