"""Exact per-run audits of the structural facts the estimators rely on.

Every audit replays independent logs and reports an :class:`AuditReport`.
A violation is a correctness bug, never sampling noise, so every passing
audit has ``n_violations == 0``.
"""

from __future__ import annotations

from bisect import bisect_left
from functools import partial
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import Retention, Trajectory, evolve, evolve_coupled
from .errors import CounterexampleNotFoundError, InvalidParameterError, PreconditionError
from .events import EventLog, ObjectKey
from .lattice import (
    BLOCKED,
    EMPTY,
    OCCUPIED,
    BoundaryPolicy,
    Configuration,
    InitialSpec,
    ProcessKind,
    make_initial,
    random_member,
)
from .logger import logger
from .paths import active_reachable, leftmost_active_path, occupancy_mismatches
from .renewal import PolicyMode, PropertyPolicy, first_disagreement, special_property
from .runner import run_trials
from .truncation import truncated_evolve_is, truncated_evolve_spont
from .utils import derive_seed


class AuditReport:
    """Counts of checked events and violations, with the first violation found."""

    def __init__(
        self,
        name: str,
        n_events_checked: int = 0,
        n_violations: int = 0,
        first_violation: Optional[str] = None,
        details: Optional[dict] = None,
    ):
        self.name = name
        self.n_events_checked = n_events_checked
        self.n_violations = n_violations
        self.first_violation = first_violation
        self.details = details if details is not None else {}

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def check(self, ok: bool, description: str = ""):
        self.n_events_checked += 1
        if not ok:
            self.violation(description)

    def violation(self, description: str):
        self.n_violations += 1
        if self.first_violation is None:
            self.first_violation = description

    def merge(self, other: "AuditReport") -> "AuditReport":
        self.n_events_checked += other.n_events_checked
        self.n_violations += other.n_violations
        if self.first_violation is None:
            self.first_violation = other.first_violation
        return self

    @classmethod
    def combine(cls, name: str, reports: Iterable["AuditReport"]) -> "AuditReport":
        total = cls(name)
        for report in reports:
            total.merge(report)
        return total

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_events_checked": self.n_events_checked,
            "n_violations": self.n_violations,
            "first_violation": self.first_violation,
            "passed": self.passed,
            **({"details": self.details} if self.details else {}),
        }

    def __repr__(self) -> str:
        return (
            f"AuditReport({self.name}: {self.n_violations} violations "
            f"in {self.n_events_checked} checks)"
        )


def _log(seed: int, label: str, index: int, lambda_: float, p: float, horizon: float) -> EventLog:
    return EventLog(derive_seed(seed, label, index), lambda_, p, horizon)


def _finish(report: AuditReport) -> AuditReport:
    if report.passed:
        logger.info(f"✓ {report.name}: {report.n_events_checked} checks, no violations")
    else:
        logger.error(f"{report.name}: {report.n_violations} violations, first: {report.first_violation}")
    return report


def _touched(trajectories: Sequence[Trajectory], until: float) -> List[Tuple[float, List[int]]]:
    """Change times of any trajectory up to ``until`` with the sites changed there."""
    by_time: Dict[float, set] = {}
    for traj in trajectories:
        for time, site, _ in traj.deltas:
            if time <= until:
                by_time.setdefault(time, set()).add(site)
    return [(time, sorted(sites)) for time, sites in sorted(by_time.items())]


def _initial_sites(trajectories: Sequence[Trajectory]) -> List[int]:
    lo = min(traj.initial.lo for traj in trajectories)
    hi = max(traj.initial.hi for traj in trajectories)
    return list(range(lo - 1, hi + 2))


def chain_violation(
    trajectories: Sequence[Trajectory],
    relation: Callable[[Sequence[int]], bool],
    sites: Optional[Iterable[int]] = None,
    until: Optional[float] = None,
) -> Tuple[int, Optional[str]]:
    """First (time, site) at which ``relation`` fails on the states of the runs.

    The states only change at recorded deltas, so the check runs once over
    the starting window and then on the sites touched at each change time.

    Returns:
        (number of checked times, description of the first failure or None)
    """
    until = min(traj.end for traj in trajectories) if until is None else until
    start = trajectories[0].start
    keep = set(sites) if sites is not None else None
    checks = [(start, _initial_sites(trajectories))] + _touched(trajectories, until)
    for time, touched in checks:
        for site in touched:
            if keep is not None and site not in keep:
                continue
            states = [traj.state_at(site, time) for traj in trajectories]
            if not relation(states):
                return len(checks), f"site {site} at time {time!r}: states {states}"
    return len(checks), None


def _ordered(states: Sequence[int]) -> bool:
    return all(a <= b for a, b in zip(states, states[1:]))


def _additive(states: Sequence[int]) -> bool:
    first, second, joined = states
    return joined == max(first, second)


def corrupt_replay(traj: Trajectory, site: int, time: float) -> Trajectory:
    """Copy of ``traj`` with a spurious birth at ``site``; used for fault injection."""
    deltas = sorted(list(traj.deltas) + [(time, site, OCCUPIED)], key=lambda delta: delta[0])
    lo, hi = traj.window
    front_sites = list(traj.front_sites)
    front_times = list(traj.front_times)
    current = traj.rightmost_at(time)
    if current is None or site > current:
        front_times.append(time)
        front_sites.append(site)
    return Trajectory(
        kind=traj.kind,
        initial=traj.initial,
        deltas=deltas,
        start=traj.start,
        end=traj.end,
        horizon=traj.horizon,
        window=(min(lo, site), max(hi, site)),
        front=(front_times, front_sites),
        left_front=(list(traj.left_times), list(traj.left_sites)),
        extinction_time=traj.extinction_time if traj.extinction_time is None or traj.extinction_time < time else None,
        tail=traj.tail,
        tie_count=traj.tie_count,
    )


def coupling_order_violations(xi: Trajectory, eta: Trajectory, zeta: Trajectory) -> AuditReport:
    """Check Spont <= IS <= CP at every change time and site of one coupled run."""
    report = AuditReport("coupling-order")
    checked, failure = chain_violation([xi, eta, zeta], _ordered)
    report.n_events_checked = checked
    if failure is not None:
        report.violation(failure)
    return report


def _coupling_trial(
    index: int, seed: int, lambda_: float, p: float, horizon: float, initial: str, corrupt: bool
) -> AuditReport:
    events = _log(seed, "coupling", index, lambda_, p, horizon)
    start = make_initial(InitialSpec.parse(initial), lambda_, horizon)
    xi, eta, zeta = evolve_coupled(start, start, start, events)
    if corrupt and index == 0:
        front = eta.rightmost_at(horizon)
        xi = corrupt_replay(xi, (front if front is not None else 0) + 1, horizon)
    report = coupling_order_violations(xi, eta, zeta)
    if report.first_violation is not None:
        report.first_violation = f"trial {index}: {report.first_violation}"
    return report


def coupling_order_audit(
    lambda_: float,
    p: float,
    trials: int,
    horizon: float,
    seed: int = 0,
    initial: str = "single:0",
    corrupt: bool = False,
    workers: int = 1,
    progress: bool = False,
) -> AuditReport:
    """Coupled Spont, IS and CP runs stay pointwise ordered on shared logs.

    With ``corrupt`` the Spont replay of the first trial gets a spurious birth
    right of the IS front, which the audit must report.
    """
    task = partial(
        _coupling_trial, seed=seed, lambda_=lambda_, p=p, horizon=horizon, initial=initial, corrupt=corrupt
    )
    reports = run_trials(task, list(range(trials)), workers=workers, progress=progress, desc="coupling")
    return _finish(AuditReport.combine("coupling-order", reports))


def _small_start(generator: np.random.Generator, kind: ProcessKind, radius: int) -> Configuration:
    low = EMPTY if kind == ProcessKind.CP else BLOCKED
    states = generator.integers(low, OCCUPIED + 1, size=2 * radius + 1)
    states[radius] = OCCUPIED
    return Configuration(-radius, states.tolist(), BoundaryPolicy.empty_tail())


def path_equivalence_check(traj: Trajectory, events, t: float) -> List[str]:
    """Occupation at ``t`` against active paths, with every witness re-validated."""
    problems = [f"site {x} at time {t!r} disagrees with reachability" for x in occupancy_mismatches(traj, events, t)]
    sources = [int(y) for y in traj.initial.occupied_sites()]
    for x in traj.occupied_at(t):
        for y in sources:
            found, witness = active_reachable(traj, events, (y, traj.start), (x, t))
            if found:
                problems += [f"witness for site {x}: {issue}" for issue in witness.validate(traj, events)]
                break
    return problems


def _path_trial(
    index: int, seed: int, lambda_: float, p: float, horizon: float, radius: int, samples: int
) -> AuditReport:
    report = AuditReport("path-equivalence")
    events = _log(seed, "paths", index, lambda_, p, horizon)
    generator = np.random.default_rng(derive_seed(seed, "paths-start", index))
    for kind in ProcessKind:
        traj = evolve(kind, _small_start(generator, kind, radius), events)
        times = traj.change_times()
        picks = []
        if times:
            picks = [times[k] for k in np.linspace(0, len(times) - 1, min(samples, len(times))).astype(int)]
        for t in sorted(set(picks) | {horizon}):
            problems = path_equivalence_check(traj, events, t)
            report.check(not problems, f"trial {index}, {kind.value}: {problems[0]}" if problems else "")
    return report


def path_equivalence_audit(
    lambda_: float,
    p: float,
    trials: int,
    horizon: float,
    seed: int = 0,
    radius: int = 3,
    samples: int = 5,
    workers: int = 1,
    progress: bool = False,
) -> AuditReport:
    """A site is occupied exactly when an active path from an initial 1 reaches it."""
    task = partial(_path_trial, seed=seed, lambda_=lambda_, p=p, horizon=horizon, radius=radius, samples=samples)
    reports = run_trials(task, list(range(trials)), workers=workers, progress=progress, desc="paths")
    return _finish(AuditReport.combine("path-equivalence", reports))


def _front_before(traj: Trajectory, time: float) -> Optional[int]:
    return traj.front_sites[max(bisect_left(traj.front_times, time) - 1, 0)]


def _ever_occupied(traj: Trajectory, site: int, until: float) -> bool:
    times, states = traj.site_history(site)
    return any(state == OCCUPIED for time, state in zip(times, states) if time < until)


def split_site_problems(kind: ProcessKind, a: Trajectory, b: Trajectory, events, D: float) -> List[str]:
    """Conditions every first rightmost discrepancy must meet at its destination.

    The discrepancy comes from a fertile arrow out of the common front R into
    R + 1, a site that no process has occupied before D, that has never healed
    on [start, D] and that is Blocked in one run and Empty in the other. For
    Spont the Empty run is ``a``, the one started from the richer configuration.
    """
    R = _front_before(a, D)
    y = R + 1
    problems = []
    if events.first_arrival(ObjectKey.fertile(R, y), D, D, left_open=False) != D:
        problems.append(f"no fertile arrow {R}->{y} at {D!r}")
    if events.first_arrival(ObjectKey.healing(y), a.start, D, left_open=False) is not None:
        problems.append(f"destination {y} healed before {D!r}")
    if _ever_occupied(a, y, D) or _ever_occupied(b, y, D):
        problems.append(f"destination {y} was occupied before {D!r}")
    before = (a.state_before(y, D), b.state_before(y, D))
    expected = {(EMPTY, BLOCKED)} if kind == ProcessKind.SPONT else {(EMPTY, BLOCKED), (BLOCKED, EMPTY)}
    if before not in expected:
        problems.append(f"destination {y} states before {D!r} are {before}")
    return problems


def _discrepancy_trial(
    index: int, seed: int, kind: str, x: int, c: Configuration, lambda_: float, p: float, horizon: float
) -> AuditReport:
    kind = ProcessKind(kind)
    report = AuditReport(f"discrepancy-{kind.value}")
    events = _log(seed, "discrepancy", index, lambda_, p, horizon)
    hostile = make_initial(InitialSpec.hostile(x))
    base = evolve(kind, c, events)
    worst = evolve(kind, hostile, events)
    spont = worst if kind == ProcessKind.SPONT else evolve(ProcessKind.SPONT, hostile, events, retain=Retention.FRONT)
    D = first_disagreement(
        (base.front_times, base.front_sites), (worst.front_times, worst.front_sites), base.start, horizon
    )
    if D is None:
        report.check(True)
        return report
    if spont.rightmost_at(D) is None:
        logger.debug(f"⊗ trial {index}: hostile Spont run dead at {D:.4f}, discrepancy skipped")
        return report
    problems = split_site_problems(kind, base, worst, events, D)
    report.check(not problems, f"trial {index}: {'; '.join(problems)}")
    return report


def discrepancy_audit(
    kind: ProcessKind,
    x: int,
    c: Configuration,
    trials: int,
    T: float,
    lambda_: float = 4.0,
    p: float = 0.9,
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
) -> AuditReport:
    """First front discrepancy between the run from ``c`` and the hostile run from x.

    Runs where the hostile Spont process is dead at the discrepancy are
    skipped, since the structural conditions assume it alive.

    Raises:
        PreconditionError: If the rightmost occupied site of ``c`` is not ``x``
    """
    kind = ProcessKind(kind)
    if kind == ProcessKind.CP:
        raise InvalidParameterError("the split-site audit covers Spont and IS only")
    if not c.in_class(x):
        raise PreconditionError(f"configuration does not have its rightmost 1 at {x}")
    task = partial(_discrepancy_trial, seed=seed, kind=kind.value, x=x, c=c, lambda_=lambda_, p=p, horizon=T)
    reports = run_trials(task, list(range(trials)), workers=workers, progress=progress, desc="discrepancy")
    return _finish(AuditReport.combine(f"discrepancy-{kind.value}", reports))


def _ordered_pair(generator: np.random.Generator, radius: int, low: int) -> Tuple[Configuration, Configuration]:
    u = generator.integers(low, OCCUPIED + 1, size=2 * radius + 1)
    v = generator.integers(low, OCCUPIED + 1, size=2 * radius + 1)
    lower, upper = np.minimum(u, v), np.maximum(u, v)
    return Configuration(-radius, lower.tolist()), Configuration(-radius, upper.tolist())


def attractivity_suite(
    trials: int,
    seed: int = 0,
    lambda_: float = 4.0,
    p: float = 0.7,
    T: float = 2.0,
    radius: int = 3,
    budget: int = 100_000,
) -> AuditReport:
    """Spont monotonicity, CP additivity and a search for IS non-monotonicity.

    Spont and CP checks count as violations. The IS search stores its first
    counterexample under ``details["is_counterexample"]``.

    Raises:
        CounterexampleNotFoundError: If ``budget`` IS attempts find no counterexample
    """
    report = AuditReport("attractivity")
    generator = np.random.default_rng(derive_seed(seed, "attractivity"))
    for i in range(trials):
        events = _log(seed, "attractivity", i, lambda_, p, T)
        low, high = _ordered_pair(generator, radius, BLOCKED)
        checked, failure = chain_violation([evolve(ProcessKind.SPONT, c, events) for c in (low, high)], _ordered)
        report.n_events_checked += checked
        if failure is not None:
            report.violation(f"Spont monotonicity, trial {i}: {failure}")

        first, second = _ordered_pair(generator, radius, EMPTY)
        runs = [evolve(ProcessKind.CP, c, events) for c in (first, second, first.join(second))]
        checked, failure = chain_violation(runs, _additive)
        report.n_events_checked += checked
        if failure is not None:
            report.violation(f"CP additivity, trial {i}: {failure}")

    for attempt in range(budget):
        attempt_seed = derive_seed(seed, "is-search", attempt)
        events = EventLog(attempt_seed, lambda_, p, T)
        low, high = _ordered_pair(np.random.default_rng(attempt_seed), radius, BLOCKED)
        runs = [evolve(ProcessKind.IS, c, events) for c in (low, high)]
        _, failure = chain_violation(runs, _ordered)
        if failure is not None:
            report.details["is_counterexample"] = {
                "attempt": attempt,
                "seed": attempt_seed,
                "lambda": lambda_,
                "p": p,
                "horizon": T,
                "lower": low.as_dict(),
                "upper": high.as_dict(),
                "where": failure,
            }
            logger.info(f"✓ IS counterexample after {attempt + 1} attempts: {failure}")
            break
    else:
        raise CounterexampleNotFoundError(f"no IS counterexample in {budget} attempts")
    return _finish(report)


def _random_start(generator: np.random.Generator, radius: int) -> Configuration:
    states = generator.integers(BLOCKED, OCCUPIED + 1, size=2 * radius + 1)
    states[radius] = OCCUPIED
    return Configuration(-radius, states.tolist())


def truncation_monotonicity_audit(
    lambda_: float,
    p: float,
    trials: int,
    T: float,
    seed: int = 0,
    n: int = 5,
    larger: Sequence[int] = (6, 10),
    radius: int = 8,
) -> AuditReport:
    """Spont in the box [-n, n] stays below Spont in every larger box."""
    report = AuditReport("truncation-monotonicity")
    generator = np.random.default_rng(derive_seed(seed, "truncation-start"))
    box = range(-n, n + 1)
    for i in range(trials):
        events = _log(seed, "truncation", i, lambda_, p, T)
        start = _random_start(generator, radius)
        small = truncated_evolve_spont(n, start, events, T)
        for m in larger:
            checked, failure = chain_violation([small, truncated_evolve_spont(m, start, events, T)], _ordered, box)
            report.n_events_checked += checked
            if failure is not None:
                report.violation(f"trial {i}, boxes {n} < {m}: {failure}")
    return _finish(report)


def truncation_agreement_audit(
    lambda_: float,
    p: float,
    trials: int,
    seed: int = 0,
    radii: Sequence[int] = (20, 30, 40),
    check_radius: int = 5,
    check_time: float = 5.0,
    radius: int = 8,
) -> AuditReport:
    """Box-truncated Spont and growing-box IS match the event-driven runs on the checked box."""
    report = AuditReport("truncation-agreement")
    generator = np.random.default_rng(derive_seed(seed, "agreement-start"))
    sites = range(-check_radius, check_radius + 1)
    for i in range(trials):
        events = _log(seed, "agreement", i, lambda_, p, check_time)
        start = _random_start(generator, radius)
        full = {kind: evolve(kind, start, events) for kind in (ProcessKind.SPONT, ProcessKind.IS)}
        for n in radii:
            boxed = {
                ProcessKind.SPONT: truncated_evolve_spont(n, start, events, check_time),
                ProcessKind.IS: truncated_evolve_is(n, start, events, check_time),
            }
            for kind, traj in boxed.items():
                checked, failure = chain_violation(
                    [traj, full[kind]], lambda states: states[0] == states[1], sites
                )
                report.n_events_checked += checked
                if failure is not None:
                    report.violation(f"trial {i}, {kind.value}, box {n}: {failure}")
    return _finish(report)


def region_agreement_problems(
    eta1: Trajectory, eta2: Trajectory, spont: Trajectory, events, t: float
) -> Optional[List[str]]:
    """Compare two IS runs between the leftmost Spont path and their common front.

    Returns:
        None when the preconditions fail, otherwise the list of disagreements
    """
    if spont.rightmost_at(t) is None:
        return None
    if first_disagreement(
        (eta1.front_times, eta1.front_sites), (eta2.front_times, eta2.front_sites), eta1.start, t
    ) is not None:
        return None
    gamma = leftmost_active_path(spont, events, t)
    times = {eta1.start}
    times.update(time for traj in (eta1, eta2) for time, _, _ in traj.deltas if time <= t)
    times.update(segment.t_start for segment in gamma.segments)
    problems = []
    for time in sorted(times):
        front = eta1.rightmost_at(time)
        if front is None:
            continue
        for y in range(gamma.site_at(time), front + 1):
            if eta1.state_at(y, time) != eta2.state_at(y, time):
                problems.append(f"site {y} at time {time!r}")
                break
    return problems


def _region_trial(index: int, seed: int, x: int, radius: int, lambda_: float, p: float, horizon: float) -> AuditReport:
    report = AuditReport("agreement-region")
    events = _log(seed, "region", index, lambda_, p, horizon)
    generator = np.random.default_rng(derive_seed(seed, "region-start", index))
    first = random_member(generator, x, radius)
    second = random_member(generator, x, radius)
    spont = evolve(ProcessKind.SPONT, make_initial(InitialSpec.hostile(x)), events)
    problems = region_agreement_problems(
        evolve(ProcessKind.IS, first, events), evolve(ProcessKind.IS, second, events), spont, events, horizon
    )
    if problems is not None:
        report.check(not problems, f"trial {index}: {problems[0]}" if problems else "")
    return report


def agreement_region_audit(
    lambda_: float,
    p: float,
    trials: int,
    T: float,
    seed: int = 0,
    x: int = 0,
    radius: int = 6,
    workers: int = 1,
    progress: bool = False,
) -> AuditReport:
    """IS runs from two members of the class of x agree left of their front."""
    task = partial(_region_trial, seed=seed, x=x, radius=radius, lambda_=lambda_, p=p, horizon=T)
    reports = run_trials(task, list(range(trials)), workers=workers, progress=progress, desc="region")
    return _finish(AuditReport.combine("agreement-region", reports))


def _extremal() -> PropertyPolicy:
    return PropertyPolicy(PolicyMode.SPONT_EXTREMAL)


def _renewal_trial(
    index: int, seed: int, lambda_: float, p: float, horizon: float, block: int, radius: int
) -> AuditReport:
    report = AuditReport("renewal")
    policy = _extremal()
    events = _log(seed, "renewal-audit", index, lambda_, p, horizon)
    base = evolve(ProcessKind.SPONT, make_initial(InitialSpec.single(0)), events, retain=Retention.FRONT)
    run = (base, events)
    t1, t2 = min(1.0, horizon / 4), horizon / 2

    # inference
    first = special_property(ProcessKind.SPONT, run, (t1, t2), policy)
    if first.holds and base.rightmost_at(t2) is not None:
        second = special_property(ProcessKind.SPONT, run, (t2, horizon), policy)
        if second.holds:
            whole = special_property(ProcessKind.SPONT, run, (t1, horizon), policy)
            report.check(whole.holds, f"trial {index}: inference fails on [{t1}, {horizon}]")

    # configuration independence
    other = random_member(np.random.default_rng(derive_seed(seed, "renewal-member", index)), 0, radius)
    alt = evolve(ProcessKind.SPONT, other, events, retain=Retention.FRONT)
    mine = special_property(ProcessKind.SPONT, run, (0.0, horizon), policy)
    theirs = special_property(ProcessKind.SPONT, (alt, events), (0.0, horizon), policy)
    report.check(mine == theirs, f"trial {index}: verdicts differ between configurations")
    if mine.holds:
        split = first_disagreement(
            (base.front_times, base.front_sites), (alt.front_times, alt.front_sites), 0.0, horizon
        )
        report.check(split is None, f"trial {index}: fronts split at {split!r} under a holding verdict")

    # restart agreement
    for t in (t1, t2):
        r = base.rightmost_at(t)
        if r is None:
            continue
        if not special_property(ProcessKind.SPONT, run, (t, horizon), policy).holds:
            continue
        restart = evolve(
            ProcessKind.SPONT,
            Configuration(r - block, [OCCUPIED] * (block + 1)),
            events.restrict(t),
            (t, horizon),
            retain=Retention.FRONT,
        )
        split = first_disagreement(
            (base.front_times, base.front_sites), (restart.front_times, restart.front_sites), t, horizon
        )
        report.check(split is None, f"trial {index}: block restart at {t} leaves the base front at {split!r}")
    return report


def renewal_audit(
    lambda_: float,
    p: float,
    trials: int,
    T: float,
    seed: int = 0,
    block: int = 20,
    radius: int = 6,
    workers: int = 1,
    progress: bool = False,
) -> AuditReport:
    """Inference, configuration independence and restart agreement of Spont verdicts."""
    task = partial(_renewal_trial, seed=seed, lambda_=lambda_, p=p, horizon=T, block=block, radius=radius)
    reports = run_trials(task, list(range(trials)), workers=workers, progress=progress, desc="renewal audit")
    return _finish(AuditReport.combine("renewal", reports))


__all__ = [
    "AuditReport",
    "agreement_region_audit",
    "attractivity_suite",
    "chain_violation",
    "corrupt_replay",
    "coupling_order_audit",
    "coupling_order_violations",
    "discrepancy_audit",
    "path_equivalence_audit",
    "path_equivalence_check",
    "region_agreement_problems",
    "renewal_audit",
    "split_site_problems",
    "truncation_agreement_audit",
    "truncation_monotonicity_audit",
]
