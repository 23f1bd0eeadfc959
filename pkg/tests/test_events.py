import json

import numpy as np
import pytest

from contact_fronts.errors import InvalidParameterError, OutOfHorizonError
from contact_fronts.events import (
    ArrowKind,
    EventLog,
    ObjectKey,
    build_event_log,
    keys_into,
    keys_touching,
    merged_arrivals,
)


def test_streams_do_not_depend_on_realisation_order():
    a = build_event_log(42, 3.0, 0.8, 20.0)
    b = build_event_log(42, 3.0, 0.8, 20.0)
    keys = [ObjectKey.fertile(0, 1), ObjectKey.healing(5), ObjectKey.blocking(-3, -2)]

    first = [a.stream(key) for key in keys]
    second = [b.stream(key) for key in reversed(keys)][::-1]
    for x, y in zip(first, second):
        np.testing.assert_array_equal(x, y)


def test_streams_are_sorted_and_inside_horizon():
    log = build_event_log(1, 5.0, 0.5, 10.0)
    times = log.stream(ObjectKey.fertile(2, 3))
    assert times.size > 0
    assert np.all(np.diff(times) > 0)
    assert times[0] > 0.0
    assert times[-1] <= 10.0


def test_different_keys_and_seeds_differ():
    log = build_event_log(3, 5.0, 0.5, 10.0)
    assert not np.array_equal(log.stream(ObjectKey.fertile(0, 1)), log.stream(ObjectKey.fertile(1, 0)))
    other = build_event_log(4, 5.0, 0.5, 10.0)
    assert not np.array_equal(log.stream(ObjectKey.healing(0)), other.stream(ObjectKey.healing(0)))


def test_blocking_streams_vanish_at_p_one():
    log = build_event_log(0, 4.0, 1.0, 50.0)
    assert log.stream(ObjectKey.blocking(0, 1)).size == 0
    assert log.stream(ObjectKey.fertile(0, 1)).size > 0


def test_rates_split_lambda():
    log = build_event_log(0, 4.0, 0.75, 1.0)
    assert log.rate(ArrowKind.FERTILE) == pytest.approx(3.0)
    assert log.rate(ArrowKind.BLOCKING) == pytest.approx(1.0)
    assert log.rate(ArrowKind.HEALING) == 1.0


def test_healing_count_matches_rate():
    log = build_event_log(9, 1.0, 0.5, 2000.0)
    count = sum(log.stream(ObjectKey.healing(x)).size for x in range(5))
    # five unit-rate streams over 2000 time units
    assert count == pytest.approx(10_000, rel=0.05)


@pytest.mark.parametrize(
    "seed,lambda_,p,horizon",
    [(-1, 1.0, 0.5, 1.0), (0, 0.0, 0.5, 1.0), (0, -2.0, 0.5, 1.0), (0, 1.0, 1.5, 1.0), (0, 1.0, 0.5, -1.0)],
)
def test_invalid_parameters(seed, lambda_, p, horizon):
    with pytest.raises(InvalidParameterError):
        build_event_log(seed, lambda_, p, horizon)


def test_zero_horizon_is_allowed():
    log = build_event_log(0, 2.0, 0.5, 0.0)
    assert log.stream(ObjectKey.healing(0)).size == 0


def test_arrivals_interval_ends():
    log = EventLog.scripted({ObjectKey.healing(0): [0.2, 0.5, 0.9]})
    key = ObjectKey.healing(0)
    assert log.arrivals(key, 0.2, 0.9).tolist() == [0.2, 0.5, 0.9]
    assert log.arrivals(key, 0.2, 0.9, left_open=True).tolist() == [0.5, 0.9]
    assert log.first_arrival(key, 0.2, 1.0) == 0.5
    assert log.first_arrival(key, 0.2, 1.0, left_open=False) == 0.2
    assert log.first_arrival(key, 0.9, 1.0) is None


def test_arrivals_outside_horizon_raise():
    log = build_event_log(0, 1.0, 0.5, 5.0)
    with pytest.raises(OutOfHorizonError):
        log.arrivals(ObjectKey.healing(0), 0.0, 6.0)
    with pytest.raises(InvalidParameterError):
        log.arrivals(ObjectKey.healing(0), 3.0, 2.0)


def test_restrict_drops_earlier_arrivals():
    log = EventLog.scripted({ObjectKey.fertile(0, 1): [0.1, 0.4, 0.7]})
    view = log.restrict(0.4)
    key = ObjectKey.fertile(0, 1)
    assert view.stream(key).tolist() == [0.4, 0.7]
    assert view.arrivals(key, 0.0, 1.0).tolist() == [0.4, 0.7]
    assert view.arrivals(key, 0.0, 0.3).size == 0
    assert view.restrict(0.5).stream(key).tolist() == [0.7]
    assert view.restrict(0.1).start == 0.4


def test_restrict_outside_horizon():
    with pytest.raises(OutOfHorizonError):
        build_event_log(0, 1.0, 0.5, 2.0).restrict(3.0)


def test_scripted_logs_validate_times():
    with pytest.raises(OutOfHorizonError):
        EventLog.scripted({ObjectKey.healing(0): [1.5]})
    with pytest.raises(InvalidParameterError):
        EventLog.scripted({ObjectKey.healing(0): [0.3, 0.3]})


def test_object_keys_must_join_neighbours():
    with pytest.raises(InvalidParameterError):
        ObjectKey.coerce((ArrowKind.FERTILE, 0, 2))
    with pytest.raises(InvalidParameterError):
        ObjectKey.coerce((ArrowKind.HEALING, 0, 1))
    assert ObjectKey.coerce((0, 1, 2)) == ObjectKey.fertile(1, 2)


def test_key_neighbourhoods():
    into = keys_into(3)
    assert ObjectKey.healing(3) in into
    assert ObjectKey.fertile(2, 3) in into and ObjectKey.blocking(4, 3) in into
    assert len(into) == 5
    touching = keys_touching(3)
    assert ObjectKey.fertile(3, 4) in touching
    assert len(touching) == 9


def test_merged_arrivals_break_ties_by_key():
    log = EventLog.scripted(
        {
            ObjectKey.healing(1): [0.5],
            ObjectKey.fertile(0, 1): [0.5, 0.8],
            ObjectKey.blocking(2, 1): [0.2],
        },
        p=0.5,
    )
    keys = sorted(keys_into(1))
    times, owners = merged_arrivals(log, keys, 0.0, 1.0)
    assert times.tolist() == [0.2, 0.5, 0.5, 0.8]
    assert [keys[o] for o in owners.tolist()] == [
        ObjectKey.blocking(2, 1),
        ObjectKey.fertile(0, 1),
        ObjectKey.healing(1),
        ObjectKey.fertile(0, 1),
    ]


def test_dump_lists_realised_streams(tmp_path):
    log = EventLog.scripted({ObjectKey.healing(0): [0.25]})
    log.stream(ObjectKey.healing(0))
    log.stream(ObjectKey.fertile(0, 1))
    path = tmp_path / "events.json"
    log.dump(str(path))
    records = json.loads(path.read_text())
    assert records == [
        {"kind": "fertile", "origin": 0, "target": 1, "times": []},
        {"kind": "healing", "origin": 0, "target": 0, "times": [0.25]},
    ]


def test_extend_window_realises_the_neighbourhood_once():
    a = build_event_log(9, 3.0, 0.7, 5.0)
    b = build_event_log(9, 3.0, 0.7, 5.0)
    a.extend_window(5)
    a.extend_window(-3)
    b.extend_window(-3)
    b.extend_window(5)
    assert set(a.realized) == set(keys_touching(5)) | set(keys_touching(-3))
    cached = {key: times for key, times in a.realized.items()}
    a.extend_window(5)
    for key, times in cached.items():
        assert a.realized[key] is times
        np.testing.assert_array_equal(times, b.realized[key])
