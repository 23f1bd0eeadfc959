from contact_fronts.renewal import PolicyMode, PropertyPolicy
from contact_fronts.runner import (
    RenewalJob,
    TrialJob,
    coupled_task,
    front_task,
    ordered_fronts,
    renewal_task,
    run_trials,
    trial_jobs,
    trial_seeds,
)


def test_trial_seeds_are_stable_and_distinct():
    seeds = trial_seeds(42, 50)
    assert seeds == trial_seeds(42, 50)
    assert len(set(seeds)) == 50
    assert trial_seeds(42, 10) == seeds[:10]
    assert trial_seeds(43, 1) != seeds[:1]


def test_trial_jobs_carry_the_parameters():
    jobs = trial_jobs("is", 3.0, 0.8, "single:2", 5.0, 3, 9)
    assert [job.index for job in jobs] == [0, 1, 2]
    assert all(job.kind == "is" and job.initial == "single:2" for job in jobs)
    assert jobs[0].spec().initial.site == 2


def test_front_task_reads_the_front_at_the_horizon():
    job = TrialJob(0, 77, "spont", 4.0, 0.95, "heaviside:0", 3.0)
    outcome = front_task(job)
    assert outcome.survived
    assert outcome.rightmost == outcome.front_sites[-1]
    assert outcome.front_times[0] == 0.0
    assert front_task(job) == outcome


def test_ordered_fronts():
    assert ordered_fronts((1, 2, 3))
    assert ordered_fronts((2, 2, 2))
    assert ordered_fronts((None, 1, 4))
    assert ordered_fronts((None, None, None))
    assert not ordered_fronts((3, 2, 5))
    assert not ordered_fronts((1, None, 5))


def test_coupled_task_keeps_the_order():
    for job in trial_jobs("coupled", 4.0, 0.85, "single:0", 4.0, 10, 5):
        outcome = coupled_task(job)
        assert not outcome.ordering_violation
        assert outcome.survived == all(r is not None for r in outcome.rightmosts)


def test_renewal_task_with_guard_past_the_horizon_censors_everything():
    trial = TrialJob(0, 13, "spont", 4.0, 0.95, "heaviside:0", 5.0)
    outcome = renewal_task(RenewalJob(trial, 10.0, PropertyPolicy(PolicyMode.SPONT_EXTREMAL)))
    assert not outcome.rejected
    assert outcome.record.guard == 10.0
    assert all(outcome.record.censored)
    assert outcome.increments == []


def test_run_trials_keeps_job_order_across_workers():
    jobs = trial_jobs("cp", 3.0, 1.0, "single:0", 2.0, 6, 21)
    serial = run_trials(front_task, jobs)
    parallel = run_trials(front_task, jobs, workers=2)
    assert [o.index for o in parallel] == list(range(6))
    assert serial == parallel
