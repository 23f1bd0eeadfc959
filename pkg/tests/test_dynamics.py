import pytest

from contact_fronts.dynamics import (
    LatticeProcess,
    ProcessKind,
    Retention,
    apply_rule,
    evolve,
    evolve_coupled,
    extinction_time,
    front_paths,
)
from contact_fronts.errors import OutOfHorizonError, PreconditionError, WindowOverflowError
from contact_fronts.events import ArrowKind, EventLog, ObjectKey, build_event_log
from contact_fronts.lattice import BLOCKED, EMPTY, OCCUPIED, BoundaryPolicy, Configuration

FERTILE, BLOCKING, HEALING = int(ArrowKind.FERTILE), int(ArrowKind.BLOCKING), int(ArrowKind.HEALING)


@pytest.mark.parametrize(
    "kind,mark,source,target,expected",
    [
        (ProcessKind.SPONT, FERTILE, OCCUPIED, EMPTY, OCCUPIED),
        (ProcessKind.SPONT, FERTILE, EMPTY, EMPTY, None),
        (ProcessKind.SPONT, FERTILE, OCCUPIED, BLOCKED, None),
        (ProcessKind.SPONT, BLOCKING, EMPTY, EMPTY, BLOCKED),
        (ProcessKind.SPONT, BLOCKING, OCCUPIED, OCCUPIED, None),
        (ProcessKind.IS, BLOCKING, EMPTY, EMPTY, None),
        (ProcessKind.IS, BLOCKING, OCCUPIED, EMPTY, BLOCKED),
        (ProcessKind.CP, BLOCKING, OCCUPIED, EMPTY, None),
        (ProcessKind.CP, HEALING, EMPTY, OCCUPIED, EMPTY),
        (ProcessKind.IS, HEALING, EMPTY, BLOCKED, EMPTY),
        (ProcessKind.IS, HEALING, EMPTY, EMPTY, None),
    ],
)
def test_update_rules(kind, mark, source, target, expected):
    assert apply_rule(kind, mark, source, target) == expected


def test_hand_replay(hand_log, single_site):
    traj = evolve(ProcessKind.SPONT, single_site, hand_log)
    assert traj.deltas == [(0.5, 1, OCCUPIED), (0.8, 0, EMPTY)]
    assert traj.state_at(1, 0.5) == OCCUPIED
    assert traj.state_before(1, 0.5) == EMPTY
    assert traj.occupied_at(0.6) == [0, 1]
    assert traj.occupied_at(1.0) == [1]
    assert traj.front_times == [0.0, 0.5]
    assert traj.front_sites == [0, 1]
    assert traj.left_sites == [0, 1]
    assert traj.rightmost_at(0.49) == 0
    assert traj.leftmost_at(0.9) == 1
    assert not traj.extinct
    assert extinction_time(traj).censored


def test_hand_replay_is_the_same_for_every_kind(hand_log, single_site):
    runs = [evolve(kind, single_site, hand_log) for kind in ProcessKind]
    assert all(run.deltas == runs[0].deltas for run in runs)


def test_inherited_sterility_is_not_monotone(sterility_log, single_site, pair_sites):
    low = evolve(ProcessKind.IS, single_site, sterility_log)
    high = evolve(ProcessKind.IS, pair_sites, sterility_log)
    assert single_site.dominated_by(pair_sites)
    assert low.state_at(2, 0.3) == OCCUPIED
    assert high.state_at(2, 0.3) == BLOCKED


def test_spont_blocks_without_an_occupied_origin(sterility_log, single_site):
    traj = evolve(ProcessKind.SPONT, single_site, sterility_log)
    assert traj.state_at(2, 0.1) == BLOCKED
    assert traj.state_at(2, 1.0) == BLOCKED
    assert traj.rightmost_at(1.0) == 1


def test_contact_process_ignores_blocking(sterility_log, pair_sites):
    traj = evolve(ProcessKind.CP, pair_sites, sterility_log)
    assert traj.state_at(2, 0.3) == OCCUPIED
    assert all(state != BLOCKED for _, _, state in traj.deltas)


def test_extinction_is_recorded():
    log = EventLog.scripted({ObjectKey.healing(0): [0.4]})
    traj = evolve(ProcessKind.IS, Configuration(0, [1]), log)
    assert traj.extinction_time == 0.4
    assert traj.front_sites[-1] is None
    assert extinction_time(traj).tau == 0.4


def test_front_retention_matches_full():
    log = build_event_log(17, 4.0, 0.9, 8.0)
    full = evolve(ProcessKind.IS, Configuration(0, [1]), log)
    front = evolve(ProcessKind.IS, Configuration(0, [1]), log, retain=Retention.FRONT)
    assert front.deltas is None
    assert not front.retained
    if full.extinct:
        assert front.extinction_time == full.extinction_time
    else:
        assert front.front_times == full.front_times
        assert front.front_sites == full.front_sites
    with pytest.raises(PreconditionError):
        front.change_times()


def test_front_paths_agree_with_engine():
    log = build_event_log(23, 3.0, 0.8, 6.0)
    traj = evolve(ProcessKind.SPONT, Configuration(-1, [1, 0, 1]), log)
    front, left, extinct = front_paths(traj.initial.as_dict(), traj.deltas, traj.start)
    assert front == (traj.front_times, traj.front_sites)
    assert left == (traj.left_times, traj.left_sites)
    assert extinct == traj.extinction_time


def test_replay_is_deterministic():
    a = evolve(ProcessKind.SPONT, Configuration(0, [1]), build_event_log(5, 4.0, 0.9, 5.0))
    b = evolve(ProcessKind.SPONT, Configuration(0, [1]), build_event_log(5, 4.0, 0.9, 5.0))
    assert a.deltas == b.deltas


def test_restart_on_sub_interval():
    log = build_event_log(8, 4.0, 0.9, 6.0)
    whole = evolve(ProcessKind.CP, Configuration(0, [1]), log)
    middle = whole.configuration_at(2.0)
    rest = evolve(ProcessKind.CP, middle, log, interval=(2.0, 6.0))
    assert rest.occupied_at(6.0) == whole.occupied_at(6.0)


def test_empty_interval_keeps_the_start(single_site):
    log = build_event_log(0, 4.0, 0.9, 3.0)
    traj = evolve(ProcessKind.SPONT, single_site, log, interval=(1.0, 1.0))
    assert traj.deltas == []
    assert traj.occupied_at(1.0) == [0]


def test_interval_outside_horizon(single_site):
    log = build_event_log(0, 4.0, 0.9, 3.0)
    with pytest.raises(OutOfHorizonError):
        evolve(ProcessKind.SPONT, single_site, log, interval=(1.0, 4.0))


def test_contact_process_needs_binary_start():
    log = build_event_log(0, 4.0, 0.9, 1.0)
    with pytest.raises(PreconditionError):
        evolve(ProcessKind.CP, Configuration(0, [1, -1]), log)
    with pytest.raises(PreconditionError):
        evolve(ProcessKind.CP, Configuration(0, [1], BoundaryPolicy.blocked_tail()), log)


def test_window_cap():
    log = build_event_log(2, 20.0, 1.0, 5.0)
    with pytest.raises(WindowOverflowError):
        evolve(ProcessKind.CP, Configuration(0, [1]), log, window_cap=4)


def test_coupled_order_holds_pointwise():
    log = build_event_log(31, 4.0, 0.85, 5.0)
    start = Configuration(0, [1])
    xi, eta, zeta = evolve_coupled(start, start, start, log)
    times = sorted({0.0, *xi.change_times(), *eta.change_times(), *zeta.change_times()})
    lo = min(r.window[0] for r in (xi, eta, zeta))
    hi = max(r.window[1] for r in (xi, eta, zeta))
    for t in times:
        for x in range(lo, hi + 1):
            assert xi.state_at(x, t) <= eta.state_at(x, t) <= zeta.state_at(x, t)


def test_coupled_starts_must_be_ordered():
    log = build_event_log(0, 4.0, 0.9, 1.0)
    with pytest.raises(PreconditionError):
        evolve_coupled(Configuration(0, [1, 1]), Configuration(0, [1]), Configuration(0, [1, 1]), log)


def test_heaviside_clamp_never_dies():
    log = build_event_log(4, 2.0, 0.9, 4.0)
    clamp = Configuration(0, [1, 1], BoundaryPolicy.left_clamp(-1))
    process = LatticeProcess(ProcessKind.SPONT, clamp, log).run()
    assert process.alive
    assert process.rightmost is not None and process.rightmost >= -1
    assert process.extinction_time is None


def test_ties_are_counted():
    log = EventLog.scripted(
        {
            ObjectKey.fertile(0, 1): [0.5],
            ObjectKey.fertile(0, -1): [0.5],
        }
    )
    traj = evolve(ProcessKind.CP, Configuration(0, [1]), log)
    assert traj.tie_count == 1
    assert traj.occupied_at(0.5) == [-1, 0, 1]


def test_stepping_reports_changes(hand_log, single_site):
    process = LatticeProcess(ProcessKind.SPONT, single_site, hand_log)
    assert process.peek() == (0.5, FERTILE, 0, 1)
    assert process.step() == (FERTILE, 0, 1, OCCUPIED)
    assert process.step() == (HEALING, 0, 0, EMPTY)
    assert process.peek_time() is None
