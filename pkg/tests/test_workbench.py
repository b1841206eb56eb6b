import csv
import hashlib
import json
import os

import numpy as np
import pytest

from dtcforge import cli
from dtcforge import workbench as wb
from dtcforge.config import ConfigError, default_chain_config, default_dicke_config
from dtcforge.pulse import FourierPulse, pulse_to_dict


def small_dicke(**kw):
    base = {"optimizer.budget": 40, "dicke.burn_in": 4, "dicke.classify_burn_in": 4, "dicke.report_periods": 16, "dicke.steps_per_period": 200}
    return default_dicke_config(**{**base, **kw})


def small_chain(**kw):
    base = {"optimizer.budget": 12, "chain.L": 5, "chain.sites": [2, 3], "chain.n_periods": 16}
    return default_chain_config(**{**base, **kw})


def manifest_ok(out):
    m = json.loads((out / "manifest.json").read_text())
    listed = {f["name"] for f in m["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for f in m["files"]:
        assert hashlib.sha256((out / f["name"]).read_bytes()).hexdigest() == f["sha256"]
    assert m["version"] and m["wall_clock_seconds"] >= 0
    return m


def payloads(out):
    return {p.name: p.read_bytes() for p in out.iterdir() if p.name != "manifest.json"}


def test_csv_number_format_roundtrips():
    text = wb.csv_text(["a", "b"], [(0.1, 3), (1 / 3, None)])
    rows = list(csv.reader(text.splitlines()))
    assert rows[1] == ["0.1", "3"] and float(rows[2][0]) == 1 / 3 and rows[2][1] == ""


def test_atomic_write_leaves_no_temporaries(tmp_path):
    w = wb.ArtifactWriter(tmp_path / "o")
    w.write("a.txt", "x")
    w.write("a.txt", "y")
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["a.txt"]
    assert (tmp_path / "o" / "a.txt").read_text() == "y"


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(wb.ArtifactIOError):
        wb.ArtifactWriter(blocker / "sub")


def test_dicke_optimize_bundle_and_determinism(tmp_path):
    cfg = small_dicke()
    m = wb.run_dicke_optimize(cfg, tmp_path / "a")
    manifest_ok(tmp_path / "a")
    assert {f["name"] for f in m["files"]} == {
        "guess_pulse.json", "optimized_pulse.json", "guess_trajectory.csv", "optimized_trajectory.csv",
        "costs.json", "classification.json", "trace.jsonl",
    }
    header = (tmp_path / "a" / "guess_trajectory.csv").read_text().splitlines()[0]
    assert header == "t,jx,jy,jz,x,p,lambda"
    assert m["config"] == cfg.to_dict()
    wb.run_dicke_optimize(small_dicke(**{"optimizer.workers": 3}), tmp_path / "b")
    assert payloads(tmp_path / "a") == payloads(tmp_path / "b")


def test_manifest_config_reproduces_run(tmp_path):
    from dtcforge.config import parse_config
    import yaml

    cfg = small_dicke()
    m = wb.run_dicke_optimize(cfg, tmp_path / "a")
    again = parse_config(yaml.safe_dump(m["config"]))
    wb.run_dicke_optimize(again, tmp_path / "b")
    assert payloads(tmp_path / "a") == payloads(tmp_path / "b")


def test_sweep_sorted_and_empty(tmp_path):
    cfg = small_dicke()
    pulse = FourierPulse(0.8, [1.0] + [0.0] * 9, [0.0] * 10, 2 * np.pi)
    rows = wb.run_dicke_sweep(cfg, pulse, [0.06, 0.04, 0.05], tmp_path / "s")
    assert [r.epsilon for r in rows] == [0.04, 0.05, 0.06]
    lines = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "epsilon,label,peak_freq,peak_mag" and len(lines) == 4
    manifest_ok(tmp_path / "s")
    assert wb.run_dicke_sweep(cfg, pulse, [], tmp_path / "e") == []
    assert (tmp_path / "e" / "sweep.csv").read_text().splitlines() == ["epsilon,label,peak_freq,peak_mag"]


def test_sweep_needs_pulse(tmp_path):
    with pytest.raises(ConfigError):
        wb.run_dicke_sweep(small_dicke(), None, [0.05], tmp_path)
    with pytest.raises(ConfigError):
        wb.run_dicke_sweep(small_dicke(), tmp_path / "missing.json", [0.05], tmp_path)


@pytest.mark.parametrize("text, expected", [
    ("0.01:0.03:0.005", [0.01, 0.015, 0.02, 0.025, 0.03]),
    ("0.1,0.04", [0.1, 0.04]),
    ("", []),
])
def test_parse_epsilons(text, expected):
    assert wb.parse_epsilons(text) == expected


def test_parse_epsilons_rejects_garbage():
    with pytest.raises(ConfigError):
        wb.parse_epsilons("0.1:0.05:0.01")
    with pytest.raises(ConfigError):
        wb.parse_epsilons("a,b")


def test_chain_optimize_bundle_and_determinism(tmp_path):
    m = wb.run_chain_optimize(small_chain(), tmp_path / "a")
    manifest_ok(tmp_path / "a")
    names = {f["name"] for f in m["files"]}
    assert {"disorder.json", "peak_tests.json", "optimized_spectrum_all.csv", "guess_autocorrelation_sites.csv"} <= names
    head = (tmp_path / "a" / "guess_autocorrelation_sites.csv").read_text().splitlines()[0]
    assert head == "n,t,R_2,R_3,R_bar"
    assert (tmp_path / "a" / "optimized_spectrum_sites.csv").read_text().startswith("omega,magnitude\n")
    disorder = json.loads((tmp_path / "a" / "disorder.json").read_text())
    assert set(disorder) == {"seed", "Jz", "Bz"}
    wb.run_chain_optimize(small_chain(**{"optimizer.workers": 2}), tmp_path / "b")
    assert payloads(tmp_path / "a") == payloads(tmp_path / "b")


def test_chain_spectrum_perfect_flip(tmp_path):
    tests = wb.run_chain_spectrum(small_chain(), wb.constant_theta(small_chain(), 0.0), tmp_path)
    assert tests["sites"]["passed"] and tests["sites"]["peak_mag"] == pytest.approx(1.0)


def test_classify_roundtrip(tmp_path):
    T = 2 * np.pi
    n = np.arange(40)
    rows = [(k * T, 0.3 * (-1) ** k, 0, -0.4, 0, 0, 0.8) for k in n]
    path = tmp_path / "traj.csv"
    path.write_text(wb.csv_text(wb.TRAJECTORY_HEADER, rows))
    assert wb.run_classify(default_dicke_config(), path, tmp_path / "o")["label"] == "DTC"
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        wb.run_classify(default_dicke_config(), bad, tmp_path / "o")


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["chain-spectrum", "--theta0", "0.2", "--set", "chain.L=0", "--out", str(tmp_path / "x")]) == 2
    cfg = tmp_path / "c.yaml"
    cfg.write_text("dicke:\n  epsilonn: 0.05\n")
    assert cli.main(["dicke-optimize", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 2
    assert cli.main(["classify", "--trajectory", str(tmp_path / "none.csv"), "--out", str(tmp_path / "z")]) == 4
    blocker = tmp_path / "blk"
    blocker.write_text("")
    assert cli.main(["chain-spectrum", "--theta0", "0.2", "--out", str(blocker / "o")]) == 4
    pulse = tmp_path / "huge.json"
    pulse.write_text(json.dumps(pulse_to_dict(FourierPulse(1e200, [0.0], [0.0], 2 * np.pi))))
    assert cli.main(["dicke-sweep", "--pulse", str(pulse), "--epsilons", "0.05", "--out", str(tmp_path / "d")]) == 0
    assert "DIVERGED" in (tmp_path / "d" / "sweep.csv").read_text()


def test_cli_divergence_exit_code(tmp_path):
    argv = ["dicke-optimize", "--out", str(tmp_path / "o"), "--set", "pulse.chi=1e300",
            "--set", "pulse.A0=1e200", "--set", "optimizer.budget=2"]
    assert cli.main(argv) == 3


def test_cli_chain_spectrum_and_sweep(tmp_path, capsys):
    out = tmp_path / "cs"
    assert cli.main(["chain-spectrum", "--theta0", "0.0", "--set", "chain.L=4", "--set", "chain.sites=[2]",
                     "--set", "chain.n_periods=16", "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    manifest_ok(out)
