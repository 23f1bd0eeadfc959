import pytest

from contact_fronts.audits import (
    AuditReport,
    agreement_region_audit,
    attractivity_suite,
    chain_violation,
    corrupt_replay,
    coupling_order_audit,
    coupling_order_violations,
    discrepancy_audit,
    path_equivalence_audit,
    path_equivalence_check,
    region_agreement_problems,
    renewal_audit,
    split_site_problems,
    truncation_agreement_audit,
    truncation_monotonicity_audit,
)
from contact_fronts.dynamics import evolve, evolve_coupled
from contact_fronts.errors import CounterexampleNotFoundError, InvalidParameterError, PreconditionError
from contact_fronts.events import EventLog, ObjectKey
from contact_fronts.lattice import Configuration, InitialSpec, ProcessKind, make_initial


def test_report_counts_and_merges():
    first = AuditReport("a")
    first.check(True)
    first.check(False, "broken")
    first.check(False, "broken again")
    assert not first.passed
    assert first.first_violation == "broken"

    second = AuditReport("b", n_events_checked=4)
    total = AuditReport.combine("total", [second, first])
    assert total.n_events_checked == 7
    assert total.n_violations == 2
    assert total.first_violation == "broken"
    assert total.to_dict() == {
        "name": "total",
        "n_events_checked": 7,
        "n_violations": 2,
        "first_violation": "broken",
        "passed": False,
    }
    assert "details" in AuditReport("c", details={"x": 1}).to_dict()


def test_corrupted_replay_breaks_the_chain(hand_log, single_site):
    traj = evolve(ProcessKind.SPONT, single_site, hand_log)
    assert chain_violation([traj, traj], lambda s: s[0] <= s[1]) == (3, None)

    corrupted = corrupt_replay(traj, 3, 1.0)
    assert corrupted.rightmost_at(1.0) == 3
    assert corrupted.state_at(3, 1.0) == 1
    checked, failure = chain_violation([corrupted, traj], lambda s: s[0] <= s[1])
    assert failure.startswith("site 3 at time 1.0")
    assert chain_violation([corrupted, traj], lambda s: s[0] <= s[1], sites=[0, 1])[1] is None


def test_coupled_hand_runs_are_ordered(sterility_log, single_site):
    xi, eta, zeta = evolve_coupled(single_site, single_site, single_site, sterility_log)
    assert coupling_order_violations(xi, eta, zeta).passed
    assert not coupling_order_violations(corrupt_replay(xi, 5, 0.25), eta, zeta).passed


def test_coupling_order_audit():
    report = coupling_order_audit(4.0, 0.85, 5, 3.0, seed=2)
    assert report.passed
    assert report.n_events_checked > 0


def test_coupling_order_audit_catches_injected_fault():
    report = coupling_order_audit(4.0, 0.85, 3, 3.0, seed=2, corrupt=True)
    assert report.n_violations >= 1
    assert report.first_violation.startswith("trial 0")


def test_path_equivalence(hand_log, single_site):
    assert path_equivalence_check(evolve(ProcessKind.SPONT, single_site, hand_log), hand_log, 1.0) == []
    assert path_equivalence_audit(4.0, 0.85, 3, 2.0, seed=5).passed


def test_split_site_on_hand_log(hand_log, single_site):
    richer = evolve(ProcessKind.SPONT, single_site, hand_log)
    hostile = evolve(ProcessKind.SPONT, make_initial(InitialSpec.hostile(0)), hand_log)
    assert hostile.rightmost_at(1.0) is None
    assert split_site_problems(ProcessKind.SPONT, richer, hostile, hand_log, 0.5) == []
    # swapping the runs puts the Empty destination on the wrong side for Spont
    assert split_site_problems(ProcessKind.SPONT, hostile, richer, hand_log, 0.5)


def test_discrepancy_audit():
    start = Configuration(-2, [1, 0, 1])
    for kind in (ProcessKind.SPONT, ProcessKind.IS):
        assert discrepancy_audit(kind, 0, start, 6, 3.0, seed=8).passed


def test_discrepancy_audit_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        discrepancy_audit(ProcessKind.CP, 0, Configuration(0, [1]), 2, 1.0)
    with pytest.raises(PreconditionError):
        discrepancy_audit(ProcessKind.SPONT, 0, Configuration(0, [1, 1]), 2, 1.0)


def test_attractivity_suite_finds_a_sterile_counterexample():
    report = attractivity_suite(4, seed=3)
    assert report.passed
    found = report.details["is_counterexample"]
    assert found["attempt"] >= 0
    assert found["where"].startswith("site")


def test_attractivity_suite_without_blocking_arrows_is_monotone():
    with pytest.raises(CounterexampleNotFoundError):
        attractivity_suite(1, seed=3, p=1.0, budget=5)


def test_truncation_audits():
    assert truncation_monotonicity_audit(4.0, 0.9, 3, 2.0, seed=1).passed
    assert truncation_agreement_audit(2.0, 0.9, 2, seed=1, radii=(20, 30), check_time=2.0).passed


def test_region_agreement_needs_a_live_spont_run():
    log = EventLog.scripted({ObjectKey.healing(0): [0.4]})
    spont = evolve(ProcessKind.SPONT, make_initial(InitialSpec.hostile(0)), log)
    eta = evolve(ProcessKind.IS, Configuration(0, [1]), log)
    assert region_agreement_problems(eta, eta, spont, log, 1.0) is None


def test_agreement_region_audit():
    assert agreement_region_audit(4.0, 0.9, 4, 3.0, seed=6).passed


def test_renewal_audit():
    assert renewal_audit(4.0, 0.95, 3, 4.0, seed=1).passed
