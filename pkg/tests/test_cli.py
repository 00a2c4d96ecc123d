"""tests for the stim-clone command line"""

import csv
import hashlib
import json
from unittest.mock import patch

import pytest

from stim_clone.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_parser, main

SMALL = {
    "delay_grid_fs": [-1500, -1200, -1000, 0, 1000, 1200, 1500],
    "duration_per_point_s": 600.0,
}


def _write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_parser_requires_config():
    """test that scan without --config is a usage error"""
    with pytest.raises(SystemExit):
        build_parser().parse_args(["scan"])


def test_scan_exact_writes_outputs(tmp_path):
    """test scan outputs and their manifest hashes"""
    config = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    args = ["scan", "--config", config, "--mode", "exact", "--out", str(out)]
    assert main(args) == EXIT_OK

    names = {p.name for p in out.iterdir()}
    assert names == {
        "scan_vh.csv",
        "scan_45.csv",
        "scan_circ.csv",
        "fidelity.json",
        "manifest.json",
        "metrics.prom",
    }
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["mode"] == "exact"
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert "metrics.prom" not in manifest["outputs"]

    fidelity = json.loads((out / "fidelity.json").read_text())
    assert fidelity["run_id"] == manifest["run_id"]
    assert fidelity["universal"] is True
    assert "stimclone_points_total" in (out / "metrics.prom").read_text()


def test_scan_csv_shapes(tmp_path):
    """test a flat N11 column and a peaked N20 column"""
    config = _write(tmp_path, dict(SMALL, bases=["vh"]))
    out = tmp_path / "out"
    assert main(["scan", "--config", config, "--out", str(out)]) == EXIT_OK

    rows = _rows(out / "scan_vh.csv")
    n11 = [float(r["expected_rate_hz"]) for r in rows if r["scheme"] == "n11"]
    n20 = [float(r["expected_rate_hz"]) for r in rows if r["scheme"] == "n20"]
    assert len(n11) == len(n20) == 7
    assert max(n11) == pytest.approx(min(n11), rel=1e-11)
    assert n20[3] > 1.5 * n20[0]
    assert all(r["sampled_count"] == "" for r in rows)
    assert all(float(r["trigger_count"]) > 0 for r in rows)


def test_scan_seed_is_reproducible(tmp_path):
    """test that --seed 7 twice gives byte-identical outputs"""
    config = _write(tmp_path, dict(SMALL, bases=["45"]))
    for run in ("a", "b"):
        out = str(tmp_path / run)
        args = ["scan", "--config", config, "--mode", "mc", "--seed", "7", "--out", out]
        assert main(args) == EXIT_OK
    for name in ("scan_45.csv", "fidelity.json", "manifest.json"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()
    rows = _rows(tmp_path / "a" / "scan_45.csv")
    assert all(r["sampled_count"].isdigit() for r in rows)


def test_scan_identical_across_workers(tmp_path):
    """test byte-identical csv files for 1, 2 and 8 workers"""
    config = _write(tmp_path, dict(SMALL, mode="both", seed=3))
    with patch("stim_clone.experiment.THREADS", 8):
        for workers in ("1", "2", "8"):
            out = str(tmp_path / f"w{workers}")
            args = ["scan", "--config", config, "--workers", workers, "--out", out]
            assert main(args) == EXIT_OK
    for name in ("scan_vh.csv", "scan_45.csv", "scan_circ.csv"):
        first = (tmp_path / "w1" / name).read_bytes()
        assert first == (tmp_path / "w2" / name).read_bytes()
        assert first == (tmp_path / "w8" / name).read_bytes()


def test_manifest_round_trip(tmp_path):
    """test that re-running from a manifest reproduces the csv files"""
    config = _write(tmp_path, dict(SMALL, mode="both"))
    first = tmp_path / "first"
    second = tmp_path / "second"
    args = ["scan", "--config", config, "--basis", "circ", "--out", str(first)]
    assert main(args) == EXIT_OK
    manifest = str(first / "manifest.json")
    assert main(["scan", "--config", manifest, "--out", str(second)]) == EXIT_OK
    csv_bytes = (first / "scan_circ.csv").read_bytes()
    assert csv_bytes == (second / "scan_circ.csv").read_bytes()
    assert not (second / "scan_vh.csv").exists()


def test_malformed_config_exit_2(tmp_path, capsys):
    """test that broken json exits with the configuration code"""
    path = tmp_path / "broken.json"
    path.write_text("{ nope")
    assert main(["scan", "--config", str(path)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_unknown_key_names_field(tmp_path, capsys):
    """test that the diagnostic lists the offending field"""
    config = _write(tmp_path, {"pdc": {"kapa_t": 0.03}})
    assert main(["fidelity", "--config", config]) == EXIT_CONFIG
    assert "pdc.kapa_t" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    """test a config path that does not exist"""
    assert main(["scan", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_analysis_failure_exit_3(tmp_path):
    """test that a grid without baseline points is a numerical failure"""
    config = _write(tmp_path, {"delay_grid_fs": [-100, 0, 100], "bases": ["vh"]})
    args = ["scan", "--config", config, "--out", str(tmp_path / "out")]
    assert main(args) == EXIT_NUMERICAL


@pytest.mark.parametrize(
    "gamma,clone,anticlone", [(1.0, 5 / 6, 2 / 3), (0.0, 0.75, 0.5)]
)
def test_fidelity_command(tmp_path, capsys, gamma, clone, anticlone):
    """test exact fidelities printed by the fidelity command"""
    config = _write(tmp_path, {"input": {"gamma": gamma, "polarization": "45"}})
    assert main(["fidelity", "--config", config]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["clone_fidelity"] == pytest.approx(clone, abs=1e-12)
    assert doc["anticlone_fidelity"] == pytest.approx(anticlone, abs=1e-12)
    assert doc["ratio"] == pytest.approx(1 + gamma * gamma)


def test_fidelity_command_defaults_to_peak_overlap(tmp_path, capsys):
    """test that gamma(0) of the overlap model is used without an explicit gamma"""
    overlap = {"sigma_input_fs": 100.0, "sigma_dc_fs": 100.0}
    config = _write(tmp_path, {"overlap": overlap})
    assert main(["fidelity", "--config", config]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["gamma"] == 1.0
    assert doc["clone_fidelity"] == pytest.approx(5 / 6, abs=1e-12)


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"rep_rate_hz": 1.0, "duration_per_point_s": 0.4}, "duration_per_point_s"),
        ({"rep_rate_hz": float("inf")}, "rep_rate_hz"),
        ({"duration_per_point_s": float("inf")}, "duration_per_point_s"),
        ({"overlap": {"sigma_dc_fs": float("inf")}}, "overlap.sigma_dc_fs"),
    ],
)
def test_unrunnable_monte_carlo_config_exit_2(tmp_path, capsys, doc, field):
    """test that configs giving no finite pulse count are rejected by field"""
    config = _write(tmp_path, dict(doc, mode="mc", bases=["vh"]))
    args = ["scan", "--config", config, "--out", str(tmp_path / "out")]
    assert main(args) == EXIT_CONFIG
    assert field in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_scan_rejects_fixed_gamma(tmp_path, capsys):
    """test that input.gamma is refused by scan but read by fidelity"""
    config = _write(tmp_path, dict(SMALL, input={"gamma": 0.5}))
    args = ["scan", "--config", config, "--out", str(tmp_path / "out")]
    assert main(args) == EXIT_CONFIG
    assert "input.gamma" in capsys.readouterr().err
    assert main(["fidelity", "--config", config]) == EXIT_OK
