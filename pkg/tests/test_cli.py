"""Command line behavior: argument handling, exit codes, file outputs."""

import csv
import json
import subprocess
import sys

import pytest

import uplinksense.experiment as exp
from uplinksense import cli
from uplinksense.experiment import CSV_COLUMNS, SCHEMA_VERSION, preset
from uplinksense.sbl import VIDivergenceError


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == CSV_COLUMNS
        return list(reader)


def test_run_smoke_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--out", str(out)])
    assert rc == 0
    rows = read_rows(out)
    assert len(rows) == 8
    assert (tmp_path / "res.csv.manifest.json").exists()
    assert all(r["failed"] == "0" for r in rows)


def test_run_trials_override(tmp_path):
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--out", str(out)])
    assert rc == 0
    assert len(read_rows(out)) == 4  # 2 sweep values x 1 trial x 2 methods


def test_run_methods_override(tmp_path):
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--methods", "cluster_sbl", "--out", str(out)])
    assert rc == 0
    rows = read_rows(out)
    assert len(rows) == 2
    assert {r["method"] for r in rows} == {"cluster_sbl"}


def test_run_seed_changes_data(tmp_path):
    hashes = []
    for seed in ("1", "2"):
        out = tmp_path / ("res%s.csv" % seed)
        rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                       "--seed", seed, "--methods", "cluster_sbl",
                       "--out", str(out)])
        assert rc == 0
        hashes.append(read_rows(out)[0]["data_hash"])
    assert hashes[0] != hashes[1]


def test_run_from_config_file(tmp_path):
    spec = preset("smoke")
    d = spec.to_dict()
    d["trials"] = 1
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps(d))
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert len(read_rows(out)) == 4


def test_run_requires_preset_or_config(tmp_path):
    with pytest.raises(SystemExit) as ei:
        cli.main(["run", "--out", str(tmp_path / "res.csv")])
    assert ei.value.code == 2


def test_run_requires_out():
    with pytest.raises(SystemExit) as ei:
        cli.main(["run", "--preset", "smoke"])
    assert ei.value.code == 2


def test_run_unknown_preset_is_startup_error(tmp_path, capsys):
    rc = cli.main(["run", "--preset", "fig9", "--out",
                   str(tmp_path / "res.csv")])
    assert rc == 2
    assert "fig9" in capsys.readouterr().err


def test_run_bad_config_json_is_startup_error(tmp_path, capsys):
    cfg = tmp_path / "spec.json"
    cfg.write_text("{not json")
    rc = cli.main(["run", "--config", str(cfg), "--out",
                   str(tmp_path / "res.csv")])
    assert rc == 2
    assert capsys.readouterr().err


def test_run_failed_trial_sets_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise VIDivergenceError("no finite posterior", iteration=2)

    monkeypatch.setitem(exp._METHOD_RUNNERS, "cluster_sbl", boom)
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--out", str(out)])
    assert rc == 1
    assert "failed" in capsys.readouterr().err.lower()
    rows = read_rows(out)  # rows are still written, flagged
    assert sum(r["failed"] == "1" for r in rows) == 2


def test_run_keep_going_ignores_failures(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise VIDivergenceError("no finite posterior", iteration=2)

    monkeypatch.setitem(exp._METHOD_RUNNERS, "cluster_sbl", boom)
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--keep-going", "--out", str(out)])
    assert rc == 0


def test_run_no_noise_conflicts_with_snr_sweep(tmp_path, capsys):
    rc = cli.main(["run", "--preset", "smoke", "--no-noise",
                   "--out", str(tmp_path / "res.csv")])
    assert rc == 2
    assert "no-noise" in capsys.readouterr().err


def test_run_flags_recorded_in_manifest(tmp_path):
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--no-offsets", "--no-oracle-count", "--out", str(out)])
    assert rc == 0
    manifest = json.loads((tmp_path / "res.csv.manifest.json").read_text())
    assert manifest["spec"]["no_offsets"] is True
    assert manifest["spec"]["oracle_count"] is False


def test_run_workers_flag(tmp_path):
    out = tmp_path / "res.csv"
    rc = cli.main(["run", "--preset", "smoke", "--trials", "1",
                   "--workers", "2", "--out", str(out)])
    assert rc == 0
    assert len(read_rows(out)) == 4


def test_inspect_prints_summary(tmp_path, capsys):
    out = tmp_path / "res.csv"
    assert cli.main(["run", "--preset", "smoke", "--trials", "1",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    rc = cli.main(["inspect", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "cluster_sbl" in text
    assert "individual_sbl" in text
    assert "nmse_delay" in text
    assert "4 rows" in text


def test_inspect_missing_file(tmp_path, capsys):
    rc = cli.main(["inspect", str(tmp_path / "nope.csv")])
    assert rc == 2
    assert capsys.readouterr().err


def test_inspect_rejects_unknown_schema(tmp_path, capsys):
    out = tmp_path / "res.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        row = {c: "0" for c in CSV_COLUMNS}
        row.update(schema_version="999", composition="1+1",
                   method="cluster_sbl", sweep_param="snr")
        writer.writerow([row[c] for c in CSV_COLUMNS])
    rc = cli.main(["inspect", str(out)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "schema" in err.lower()
    assert str(SCHEMA_VERSION) in err


def test_inspect_rejects_empty_csv(tmp_path, capsys):
    out = tmp_path / "res.csv"
    with open(out, "w", newline="") as fh:
        csv.writer(fh).writerow(CSV_COLUMNS)
    rc = cli.main(["inspect", str(out)])
    assert rc == 1
    assert "no rows" in capsys.readouterr().err.lower()


def test_module_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "uplinksense.cli", "--help"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "run" in proc.stdout
    assert "inspect" in proc.stdout
