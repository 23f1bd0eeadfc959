import json

import pytest

from contact_fronts.cli import EXIT_AUDIT_FAILED, EXIT_CONFIG, EXIT_OK, build_parser, run
from contact_fronts.results import read_csv
from contact_fronts.utils import calculate_file_hash

QUICK = {"lambda": 4.0, "p": 0.9, "trials": 3, "seed": 7, "progress": False}


def _config(tmp_path, **values):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps({**QUICK, **values}))
    return str(path)


def _summary(out, name="summary.json"):
    return json.loads((out / name).read_text())


def test_parser_needs_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["sweep", "--seed", "3", "-d"])
    assert (args.command, args.seed, args.debug) == ("sweep", 3, True)


def test_simulate_at_time_zero(tmp_path):
    out = tmp_path / "out"
    assert run(["simulate", "-c", _config(tmp_path, horizon=0.0), "--out", str(out)]) == EXIT_OK
    schema, header, rows = read_csv(str(out / "trajectory.csv"))
    assert rows == [["0.0", "0", "1"]]
    summary = _summary(out)
    assert summary["estimates"]["survival"]["estimate"] == 1.0
    assert summary["diagnostics"]["speed"] == "horizon is zero"
    assert len(summary["seed_manifest"]) == 3
    assert (out / "events.json").exists()
    assert (out / "witness.json").exists()
    digests = summary["diagnostics"]["output_digests"]
    assert sorted(digests) == ["events.json", "trajectory.csv", "witness.json"]
    assert digests["trajectory.csv"] == calculate_file_hash(str(out / "trajectory.csv"))


def test_simulate_reruns_are_identical(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, horizon=2.0, diagram=True)
    assert run(["simulate", "-c", config, "--out", str(out)]) == EXIT_OK
    first = {name: (out / name).read_bytes() for name in ("summary.json", "trajectory.csv", "events.json")}
    assert (out / "diagram.svg").exists()
    assert run(["simulate", "-c", config, "--out", str(out)]) == EXIT_OK
    assert {name: (out / name).read_bytes() for name in first} == first


def test_simulate_coupled(tmp_path):
    out = tmp_path / "out"
    assert run(["simulate", "-c", _config(tmp_path, kind="coupled", horizon=2.0), "--out", str(out)]) == EXIT_OK
    assert _summary(out)["diagnostics"]["ordering_violations"] == 0
    for kind in ("spont", "is", "cp"):
        assert (out / f"trajectory_{kind}.csv").exists()


def test_configuration_errors_exit_two(tmp_path):
    assert run(["simulate", "-c", _config(tmp_path, kind="voter")]) == EXIT_CONFIG
    assert run(["simulate", "-c", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert run(["renewal", "-c", _config(tmp_path, kind="cp", output_dir=str(tmp_path / "r"))]) == EXIT_CONFIG
    assert run(["simulate", "-c", _config(tmp_path), "--trials", "0"]) == EXIT_CONFIG


def test_renewal_without_uncensored_increments(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, horizon=2.0, guard=5.0, initial="heaviside:0")
    assert run(["renewal", "-c", config, "--out", str(out)]) == EXIT_OK
    summary = _summary(out)
    assert "insufficient_samples" in summary["diagnostics"]
    assert summary["diagnostics"]["n_increments"] == 0
    assert "speed_renewal" not in summary["estimates"]
    assert read_csv(str(out / "increments.csv"))[2] == []
    assert read_csv(str(out / "renewals.csv"))[0] == "renewals:1"


@pytest.mark.parametrize("coupled", [False, True])
def test_sweep_writes_one_row_per_cell_and_kind(tmp_path, coupled):
    out = tmp_path / "out"
    sweep = {"lambdas": [4.0], "ps": [0.9, 1.0], "kinds": ["spont", "cp"], "coupled": coupled, "horizon": 1.0}
    assert run(["sweep", "-c", _config(tmp_path, sweep=sweep), "--out", str(out)]) == EXIT_OK
    _, header, rows = read_csv(str(out / "sweep.csv"))
    assert len(rows) == 4
    assert [row[0] for row in rows] == ["spont", "cp", "spont", "cp"]
    assert header[-1] == "ordering_violations"
    assert all((row[-1] == "0") == coupled for row in rows)


def _audit(**sizes):
    counts = {
        "coupling_trials": 0,
        "path_trials": 0,
        "discrepancy_trials": 0,
        "attractivity_trials": 0,
        "monotonicity_trials": 0,
        "agreement_trials": 0,
        "region_trials": 0,
        "renewal_trials": 0,
    }
    counts.update(sizes)
    return {
        "coupling_horizon": 3.0,
        "path_horizon": 2.0,
        "discrepancy_horizon": 3.0,
        "region_horizon": 3.0,
        "renewal_horizon": 4.0,
        **counts,
    }


def test_audit_reports_injected_fault(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, audit={**_audit(coupling_trials=2), "corrupt_replay": True})
    assert run(["audit", "-c", config, "--out", str(out)]) == EXIT_AUDIT_FAILED
    audit = _summary(out, "audit.json")
    assert audit["estimates"]["passed"] is False
    report = audit["diagnostics"]["audits"][0]
    assert report["name"] == "coupling-order"
    assert report["first_violation"].startswith("trial 0")


def test_small_audit_passes(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, audit=_audit())
    assert run(["audit", "-c", config, "--out", str(out), "--trials", "2"]) == EXIT_OK
    audit = _summary(out, "audit.json")
    assert audit["estimates"]["passed"] is True
    names = [report["name"] for report in audit["diagnostics"]["audits"]]
    assert "attractivity" in names
    assert (out / "is_counterexample.json").exists()
