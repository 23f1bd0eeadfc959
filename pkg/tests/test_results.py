import json
import math

import numpy as np
import pytest

from contact_fronts.audits import AuditReport
from contact_fronts.dynamics import Retention, evolve
from contact_fronts.errors import ConfigError
from contact_fronts.lattice import ProcessKind
from contact_fronts.renewal import IncrementSample, RenewalRecord
from contact_fronts.results import (
    SummaryManager,
    increment_rows,
    json_safe,
    read_csv,
    renewal_rows,
    seed_manifest,
    trajectory_rows,
    write_csv,
)
from contact_fronts.runner import trial_seeds


def test_trajectory_csv(tmp_path, hand_log, single_site):
    traj = evolve(ProcessKind.SPONT, single_site, hand_log)
    path = str(tmp_path / "trajectory.csv")
    assert write_csv(path, "trajectory", trajectory_rows(traj)) == 3
    with open(path) as f:
        assert f.readline() == "#schema=trajectory:1\n"
    schema, header, rows = read_csv(path)
    assert schema == "trajectory:1"
    assert header == ["time", "site", "new_state"]
    assert rows == [["0.0", "0", "1"], ["0.5", "1", "1"], ["0.8", "0", "0"]]


def test_trajectory_rows_need_full_retention(hand_log, single_site):
    traj = evolve(ProcessKind.SPONT, single_site, hand_log, retain=Retention.FRONT)
    with pytest.raises(ConfigError):
        trajectory_rows(traj)


def test_rows_must_match_the_schema(tmp_path):
    with pytest.raises(ValueError):
        write_csv(str(tmp_path / "x.csv"), "increments", [(1, 2, 3.0)])
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(str(path))


def test_renewal_and_increment_rows(tmp_path):
    record = RenewalRecord(2, 10.0, 3.0, ([0.0, 4.0], [0, 3]))
    record.add(0.0, 0)
    record.add(8.0, 3)
    assert renewal_rows([record]) == [(2, 0, 0.0, 0, 0), (2, 1, 8.0, 3, 1)]
    samples = [IncrementSample(1.5, np.int64(2), 2, 0)]
    path = str(tmp_path / "increments.csv")
    write_csv(path, "increments", increment_rows(samples))
    assert read_csv(path)[2] == [["2", "0", "1.5", "2"]]


def test_json_safe():
    report = AuditReport("a", n_events_checked=2)
    assert json_safe(report)["n_events_checked"] == 2
    assert json_safe({1: [math.nan, np.float64(0.5), np.int32(3), np.bool_(True)]}) == {"1": [None, 0.5, 3, True]}
    assert json_safe(np.arange(3)) == [0, 1, 2]
    assert json_safe((math.inf, "x")) == [None, "x"]


def test_seed_manifest():
    manifest = seed_manifest(42, 3)
    assert list(manifest) == ["0", "1", "2"]
    assert list(manifest.values()) == trial_seeds(42, 3)


def test_summary_manager(tmp_path):
    out = tmp_path / "results"
    summary = SummaryManager(str(out))
    summary.start({"kind": "spont"}, 5, 2)
    summary.record("estimates", "speed", math.nan)
    summary.record("diagnostics", "ties", np.int64(0))
    summary.save()

    text = (out / "summary.json").read_text()
    data = json.loads(text)
    assert data["schema"] == "summary:1"
    assert data["estimates"] == {"speed": None}
    assert data["diagnostics"] == {"ties": 0}
    assert data["seed_manifest"] == seed_manifest(5, 2)
    assert list(data) == sorted(data)

    again = SummaryManager(str(out))
    assert again.get() == data
    assert SummaryManager(str(tmp_path / "empty")).load()["params"] == {}
