"""Special property, failure times and the renewal sequence of a front.

The property holds on [t1, t2] when a process restarted at t1 from the most
hostile configuration with the base's rightmost 1 survives up to t2 (survival)
and every restart from a configuration with the same rightmost 1 moves its
front exactly like the base (invariance). Three policies decide it:

* ``spont-extremal`` is exact for Spont: by attractivity only the hostile and
  the maximal restart matter, and the maximal one only gets ahead of the
  hostile one when the hostile front fires a fertile arrow into a site right
  of r(t1) that has neither healed nor received a blocking arrow since t1.
* ``is-sampled-family`` compares the base front with the hostile IS restart
  and a random family of restarts. It can only miss failures.
* ``certificate`` checks a sufficient event: a quiet block at the front, a
  contact-process envelope and the never-healed frontier.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .dynamics import (
    DEFAULT_WINDOW_CAP,
    FERTILE,
    LatticeProcess,
    Retention,
    Trajectory,
    TrialSpec,
    evolve,
)
from .errors import (
    ExtinctRunError,
    InvalidModeError,
    InvalidParameterError,
    OutOfHorizonError,
    TooFewSurvivorsError,
)
from .events import EventLog, Events, ObjectKey
from .lattice import InitialSpec, ProcessKind, heaviside_depth, make_initial, random_member
from .logger import logger
from .paths import never_healed_frontier
from .utils import derive_seed

HORIZON_CERTIFIED = math.inf


class PolicyMode(str, Enum):
    SPONT_EXTREMAL = "spont-extremal"
    IS_SAMPLED_FAMILY = "is-sampled-family"
    CERTIFICATE = "certificate"


class FailureReason(str, Enum):
    SURVIVAL_FAILED = "survival-failed"
    INVARIANCE_FAILED = "invariance-failed"


class CertificateConstants(NamedTuple):
    """Envelope offset L1, frontier offset L2 and contact-process speed estimate."""

    L1: int
    L2: int
    alpha_hat: float

    def to_dict(self) -> dict:
        return {"L1": self.L1, "L2": self.L2, "alpha_hat": self.alpha_hat}


class PropertyPolicy:
    """How the special property is decided.

    Args:
        mode: One of the three policy modes
        family_size: Random restarts compared in is-sampled-family mode
        family_window_radius: Half-width of the random restart windows
        constants: Certificate constants, required in certificate mode
        quiet: Length of the quiet block of the certificate
        envelope_depth: Clamp depth of the envelope restart; the default is
            sized from the rate and the horizon
        window_cap: Largest window of every restart
    """

    def __init__(
        self,
        mode: PolicyMode,
        family_size: int = 8,
        family_window_radius: int = 30,
        constants: Optional[CertificateConstants] = None,
        quiet: float = 1.0,
        envelope_depth: Optional[int] = None,
        window_cap: int = DEFAULT_WINDOW_CAP,
    ):
        self.mode = PolicyMode(mode)
        if family_size < 2:
            raise InvalidParameterError(f"family_size must be at least 2, got {family_size}")
        if family_window_radius < 0:
            raise InvalidParameterError("family_window_radius must be >= 0")
        if quiet <= 0:
            raise InvalidParameterError(f"quiet block length must be positive, got {quiet}")
        self.family_size = int(family_size)
        self.family_window_radius = int(family_window_radius)
        self.constants = CertificateConstants(*constants) if constants is not None else None
        self.quiet = float(quiet)
        self.envelope_depth = envelope_depth
        self.window_cap = window_cap

    def check(self, kind: ProcessKind):
        """Raise InvalidModeError unless this policy applies to ``kind``."""
        kind = ProcessKind(kind)
        if kind == ProcessKind.CP:
            raise InvalidModeError("the special property is defined for Spont and IS only")
        if self.mode == PolicyMode.SPONT_EXTREMAL and kind != ProcessKind.SPONT:
            raise InvalidModeError("spont-extremal mode only applies to the Spont process")
        if self.mode == PolicyMode.CERTIFICATE and self.constants is None:
            raise InvalidParameterError("certificate mode needs L1, L2 and alpha_hat")


class PropertyVerdict(NamedTuple):
    holds: bool
    failure_time: Optional[float]
    failure_reason: Optional[FailureReason]
    certified: bool = False


class FrontPath(NamedTuple):
    """Piecewise-constant front on [start, until)."""

    times: List[float]
    sites: List[Optional[int]]
    until: float

    def at(self, time: float) -> Optional[int]:
        return self.sites[max(bisect_right(self.times, time) - 1, 0)]


class RenewalRecord:
    """Renewal times of one run, with the failure times met on the way."""

    def __init__(
        self,
        run_id: int,
        horizon: float,
        guard: float,
        front: Tuple[List[float], List[Optional[int]]],
    ):
        self.run_id = run_id
        self.horizon = horizon
        self.guard = guard
        self.front_times, self.front_sites = front
        self.sigmas: List[float] = []
        self.rightmosts: List[int] = []
        self.censored: List[bool] = []
        self.failure_log: List[float] = []

    def add(self, sigma: float, rightmost: int):
        self.sigmas.append(sigma)
        self.rightmosts.append(rightmost)
        self.censored.append(self.horizon - sigma < self.guard)

    def recensor(self, guard: float):
        """Re-flag every entry against a new guard; a guard reaching the horizon censors all."""
        self.guard = guard
        self.censored = [guard >= self.horizon or self.horizon - sigma < guard for sigma in self.sigmas]

    def rightmost_at(self, time: float) -> Optional[int]:
        return self.front_sites[max(bisect_right(self.front_times, time) - 1, 0)]

    @property
    def n_uncensored(self) -> int:
        return self.censored.count(False)

    def rows(self) -> List[tuple]:
        return [
            (self.run_id, k, sigma, r, int(censored))
            for k, (sigma, r, censored) in enumerate(zip(self.sigmas, self.rightmosts, self.censored))
        ]


class IncrementSample(NamedTuple):
    d_sigma: float
    d_r: int
    run_id: int
    index: int


def _hostile_process(kind: ProcessKind, events: Events, site: int, t1: float, t2: float, cap: int):
    return LatticeProcess(
        kind,
        make_initial(InitialSpec.hostile(site)),
        events.restrict(t1),
        start=t1,
        end=t2,
        window_cap=cap,
        retain=Retention.FRONT,
    )


def _untouched(events: Events, site: int, t1: float, t2: float) -> bool:
    """Whether ``site`` saw no healing and no blocking arrow on (t1, t2)."""
    for key in (
        ObjectKey.healing(site),
        ObjectKey.blocking(site - 1, site),
        ObjectKey.blocking(site + 1, site),
    ):
        hit = events.first_arrival(key, t1, t2)
        if hit is not None and hit < t2:
            return False
    return True


def _extremal_walk(events: Events, r1: int, t1: float, t2: float, cap: int):
    process = _hostile_process(ProcessKind.SPONT, events, r1, t1, t2, cap)
    while True:
        upcoming = process.peek()
        if upcoming is None or upcoming[0] > t2:
            return process, None, None
        time, mark, origin, site = upcoming
        if (
            mark == FERTILE
            and origin == process.rightmost
            and site == origin + 1
            and site > r1
            and _untouched(events, site, t1, time)
        ):
            return process, time, FailureReason.INVARIANCE_FAILED
        process.step()
        if process.extinction_time is not None:
            return process, process.extinction_time, FailureReason.SURVIVAL_FAILED


def maximal_restart_front(
    events: Events, r1: int, t1: float, t2: float, window_cap: int = DEFAULT_WINDOW_CAP
) -> FrontPath:
    """Front of the Spont restart at t1 from 1s on (-inf, r1] and 0s to the right.

    The path is exact up to ``until``: the end of the interval, or the
    extinction of the hostile restart.
    """
    process, failure, reason = _extremal_walk(events, r1, t1, t2, window_cap)
    times, sites = list(process.front_times), list(process.front_sites)
    if reason == FailureReason.INVARIANCE_FAILED:
        times.append(failure)
        sites.append(process.rightmost + 1)
        return FrontPath(times, sites, failure)
    if reason == FailureReason.SURVIVAL_FAILED:
        return FrontPath(times[:-1], sites[:-1], failure)
    return FrontPath(times, sites, t2)


def first_disagreement(
    a: Tuple[Sequence[float], Sequence[Optional[int]]],
    b: Tuple[Sequence[float], Sequence[Optional[int]]],
    t1: float,
    t2: float,
) -> Optional[float]:
    """First time in [t1, t2] at which two piecewise-constant paths differ."""
    times = sorted({t1, *(t for t in a[0] if t1 < t <= t2), *(t for t in b[0] if t1 < t <= t2)})
    for time in times:
        va = a[1][max(bisect_right(a[0], time) - 1, 0)]
        vb = b[1][max(bisect_right(b[0], time) - 1, 0)]
        if va != vb:
            return time
    return None


def _family_failure(
    traj: Trajectory, events: EventLog, r1: int, t1: float, limit: float, policy: PropertyPolicy
) -> Optional[float]:
    generator = np.random.default_rng(derive_seed(events.master_seed, "family", t1))
    members = [make_initial(InitialSpec.hostile(r1))]
    members += [
        random_member(generator, r1, policy.family_window_radius) for _ in range(policy.family_size)
    ]
    base = (traj.front_times, traj.front_sites)
    earliest = None
    for member in members:
        process = LatticeProcess(
            ProcessKind.IS,
            member,
            events.restrict(t1),
            start=t1,
            end=limit,
            window_cap=policy.window_cap,
            retain=Retention.FRONT,
        )
        process.run(limit if earliest is None else earliest)
        found = first_disagreement(
            base, (process.front_times, process.front_sites), t1, limit if earliest is None else earliest
        )
        if found is not None and (earliest is None or found < earliest):
            earliest = found
    return earliest


def _quiet_block_failure(events: Events, r: int, t: float, quiet: float, L2: int) -> Optional[float]:
    """First time the quiet block [t, t + quiet] is seen to fail.

    A block that does not fit inside the log is never certified: it fails at
    its first violating arrival, or at the horizon.
    """
    end = t + quiet
    stop = min(end, events.horizon)
    hits = [
        events.first_arrival(key, t, stop)
        for key in (ObjectKey.fertile(r, r - 1), ObjectKey.fertile(r, r + 1), ObjectKey.healing(r))
    ]
    hits = [hit for hit in hits if hit is not None]
    if hits:
        return min(hits)
    if end > events.horizon:
        return events.horizon
    for y in range(r + 1, r + 2 * L2 + 1):
        if events.first_arrival(ObjectKey.healing(y), t, end) is None:
            return end
    return None


def _envelope_failure(
    events: Events,
    r: int,
    t: float,
    quiet: float,
    constants: CertificateConstants,
    end: float,
    depth: int,
    cap: int,
) -> Optional[float]:
    """First time the contact envelope reaches r + L1 + 3*alpha*(u - t)."""
    start = t + quiet
    if start >= end:
        return None
    L1, _, alpha = constants
    process = LatticeProcess(
        ProcessKind.CP,
        make_initial(InitialSpec.heaviside(r + 1), depth=depth),
        events.restrict(start),
        start=start,
        end=end,
        window_cap=cap,
        retain=Retention.FRONT,
    )
    if process.rightmost >= r + L1 + 3.0 * alpha * (start - t):
        return start
    seen = len(process.front_times)
    while process.peek_time() is not None and process.peek_time() <= end:
        process.step()
        if len(process.front_times) > seen:
            seen = len(process.front_times)
            time, front = process.front_times[-1], process.front_sites[-1]
            if front >= r + L1 + 3.0 * alpha * (time - t):
                return time
    return None


def _frontier_failure(
    events: Events, anchor: int, base: float, slope: float, t: float, start: float, end: float
) -> Optional[float]:
    """First u in [start, end] with H_u(anchor) <= base + slope * (u - t)."""
    if start > end:
        return None
    now = start
    h = never_healed_frontier(events, anchor, start, start=start).value
    while True:
        crossing = t + (h - base) / slope if slope > 0 else math.inf
        crossing = max(crossing, start)
        heal = events.first_arrival(ObjectKey.healing(h), start, end, left_open=False)
        if crossing <= end and (heal is None or crossing <= heal):
            return crossing
        if heal is None:
            return None
        now = heal
        h += 1
        while events.first_arrival(ObjectKey.healing(h), start, now, left_open=False) is not None:
            h += 1


def _certificate_failure(
    traj: Trajectory,
    events: Events,
    t: float,
    end: float,
    constants: CertificateConstants,
    quiet: float,
    depth: Optional[int],
    cap: int,
) -> Optional[float]:
    r = traj.rightmost_at(t)
    L1, L2, alpha = constants
    if depth is None:
        depth = _default_depth(events, end)
    candidates = [
        _quiet_block_failure(events, r, t, quiet, L2),
        _frontier_failure(events, r + 2 * L2, r + L2, 4.0 * alpha, t, t + quiet, end),
        _envelope_failure(events, r, t, quiet, constants, end, depth, cap),
    ]
    candidates = [c for c in candidates if c is not None and c <= end]
    return min(candidates) if candidates else None


def _default_depth(events: Events, end: float) -> int:
    return heaviside_depth(events.lambda_, end)


def certificate_IRH(
    run: Tuple[Trajectory, Events],
    t: float,
    constants: CertificateConstants,
    quiet: float = 1.0,
    envelope_depth: Optional[int] = None,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> bool:
    """Whether the quiet block, envelope and frontier conditions hold on [t, horizon].

    Args:
        run: Base trajectory and its event log
        t: Time of the quiet block's start; the front r is read off the base here
        constants: (L1, L2, alpha_hat)
        quiet: Length of the quiet block, 1 or 2
        envelope_depth: Clamp depth of the envelope restart

    Raises:
        InvalidParameterError: If ``t`` is before time 1
    """
    traj, events = run
    if t < 1.0:
        raise InvalidParameterError(f"the certificate needs t >= 1, got {t}")
    if traj.rightmost_at(t) is None:
        return False
    failure = _certificate_failure(
        traj, events, t, events.horizon, CertificateConstants(*constants), quiet, envelope_depth, window_cap
    )
    return failure is None


def special_property(
    kind: ProcessKind,
    base_run: Tuple[Trajectory, EventLog],
    interval: Tuple[float, float],
    policy: PropertyPolicy,
) -> PropertyVerdict:
    """Decide the special property of the base run on ``interval``.

    Args:
        kind: Process of the base run
        base_run: Base trajectory and the event log it was built from
        interval: (t1, t2) with t1 < t2 <= horizon
        policy: Decision policy

    Returns:
        Verdict with the earliest failure time found in (t1, t2]

    Raises:
        InvalidModeError: If the policy does not apply to ``kind``
    """
    kind = ProcessKind(kind)
    policy.check(kind)
    traj, events = base_run
    t1, t2 = interval
    if not t1 < t2:
        raise InvalidParameterError(f"interval [{t1}, {t2}] is empty")
    if t1 < traj.start or t2 > events.horizon:
        raise OutOfHorizonError(f"[{t1}, {t2}] leaves [{traj.start}, {events.horizon}]")

    r1 = traj.rightmost_at(t1)
    if r1 is None:
        return PropertyVerdict(False, t1, FailureReason.SURVIVAL_FAILED)

    if policy.mode == PolicyMode.SPONT_EXTREMAL:
        _, failure, reason = _extremal_walk(events, r1, t1, t2, policy.window_cap)
        if failure is None:
            return PropertyVerdict(True, None, None)
        return PropertyVerdict(False, failure, reason)

    hostile = _hostile_process(ProcessKind.SPONT, events, r1, t1, t2, policy.window_cap).run(t2)
    death = hostile.extinction_time
    limit = death if death is not None else t2

    if policy.mode == PolicyMode.IS_SAMPLED_FAMILY:
        if kind == ProcessKind.SPONT:
            found = first_disagreement(
                (traj.front_times, traj.front_sites), (hostile.front_times, hostile.front_sites), t1, limit
            )
        else:
            found = _family_failure(traj, events, r1, t1, limit, policy)
        certified = False
    else:
        found = _certificate_failure(
            traj, events, t1, limit, policy.constants, policy.quiet, policy.envelope_depth, policy.window_cap
        )
        certified = True

    if found is not None and (death is None or found < death):
        return PropertyVerdict(False, found, FailureReason.INVARIANCE_FAILED)
    if death is not None:
        return PropertyVerdict(False, death, FailureReason.SURVIVAL_FAILED)
    return PropertyVerdict(True, None, None, certified)


def failure_time(
    kind: ProcessKind,
    base_run: Tuple[Trajectory, EventLog],
    start: float,
    policy: PropertyPolicy,
    horizon: Optional[float] = None,
) -> float:
    """First time after ``start`` at which the property fails, or HORIZON_CERTIFIED."""
    horizon = base_run[1].horizon if horizon is None else horizon
    if not start < horizon:
        raise InvalidParameterError(f"start {start} must be before the horizon {horizon}")
    verdict = special_property(kind, base_run, (start, horizon), policy)
    return HORIZON_CERTIFIED if verdict.holds else verdict.failure_time


def renewal_sequence(
    kind: ProcessKind,
    run_config: TrialSpec,
    horizon: float,
    guard: float,
    policy: PropertyPolicy,
    run_id: int = 0,
) -> RenewalRecord:
    """Renewal times of one run, censored near the horizon.

    Each search starts at F_0 (0, then one time unit after the last renewal)
    and moves to the next failure time until the property holds up to the
    horizon; that start becomes the next renewal.

    Raises:
        ExtinctRunError: If the base run dies before its first renewal
    """
    if not guard < horizon:
        raise InvalidParameterError(f"guard {guard} must be below the horizon {horizon}")
    kind = ProcessKind(kind)
    policy.check(kind)
    events = run_config.event_log(horizon)
    traj = evolve(
        kind,
        run_config.initial_configuration(horizon),
        events,
        window_cap=run_config.window_cap,
        retain=Retention.FRONT,
    )
    record = RenewalRecord(run_id, horizon, guard, traj.rightmost_path())

    start = 0.0
    while start < horizon:
        if traj.rightmost_at(start) is None:
            if not record.sigmas:
                raise ExtinctRunError(f"run {run_id} died at {traj.extinction_time} before renewing")
            break
        found = failure_time(kind, (traj, events), start, policy, horizon)
        if found == HORIZON_CERTIFIED:
            record.add(start, traj.rightmost_at(start))
            logger.debug(f"run {run_id}: renewal at {start:.4f}, r = {traj.rightmost_at(start)}")
            start += 1.0
        else:
            record.failure_log.append(found)
            start = found
    return record


def harvest_increments(record: RenewalRecord, run: Optional[Trajectory] = None) -> List[IncrementSample]:
    """One sample per pair of consecutive uncensored renewals."""
    rightmost = run.rightmost_at if run is not None else record.rightmost_at
    samples = []
    for k in range(len(record.sigmas) - 1):
        if record.censored[k] or record.censored[k + 1]:
            continue
        a, b = record.sigmas[k], record.sigmas[k + 1]
        samples.append(IncrementSample(b - a, rightmost(b) - rightmost(a), record.run_id, k))
    return samples


def _envelope_excess(events: Events, alpha: float, quiet: float, end: float, depth: int, cap: int) -> float:
    """Largest value of front(u) - 3*alpha*u for the envelope restarted at ``quiet``."""
    process = LatticeProcess(
        ProcessKind.CP,
        make_initial(InitialSpec.heaviside(1), depth=depth),
        events.restrict(quiet),
        start=quiet,
        end=end,
        window_cap=cap,
        retain=Retention.FRONT,
    ).run(end)
    return max(site - 3.0 * alpha * time for time, site in zip(process.front_times, process.front_sites))


def _quantile_offset(values: List[float], rate: float) -> int:
    """Smallest integer L with values < L for at least ``rate`` of the values."""
    ordered = sorted(values)
    k = max(math.ceil(rate * len(ordered)), 1)
    return max(math.floor(ordered[k - 1]) + 1, 1)


def calibrate_certificate(
    lambda_: float,
    p: float,
    trials: int,
    horizon: float,
    seed: int,
    quiet: float = 1.0,
    pass_rate: float = 0.9,
    envelope_depth: Optional[int] = None,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> CertificateConstants:
    """Fit certificate constants from pilot contact-process runs.

    The contact process driven by the fertile arrows alone runs at rate
    lambda * p. alpha_hat is the pooled least-squares slope of its front over
    surviving pilots. L1 and then L2 >= L1 are the smallest integers for which
    ``pass_rate`` of the pilots satisfy the envelope and frontier conditions.

    Raises:
        TooFewSurvivorsError: If fewer than two pilots survive
    """
    if trials < 1:
        raise InvalidParameterError("calibration needs at least one pilot run")
    logs = [
        EventLog(derive_seed(seed, "pilot", i), lambda_, p, horizon) for i in range(trials)
    ]

    times, fronts = [], []
    grid = np.linspace(0.0, horizon, 21)
    for events in logs:
        traj = evolve(ProcessKind.CP, make_initial(InitialSpec.single(0)), events, retain=Retention.FRONT)
        if traj.extinct:
            continue
        times.extend(grid.tolist())
        fronts.extend(traj.rightmost_at(u) for u in grid)
    if len(times) < 2 * grid.size:
        raise TooFewSurvivorsError("fewer than two contact-process pilots survived")
    alpha = max(float(stats.linregress(times, fronts).slope), 0.0)

    depth = envelope_depth if envelope_depth is not None else _default_depth(logs[0], horizon)
    L1 = _quantile_offset(
        [_envelope_excess(events, alpha, quiet, horizon, depth, window_cap) for events in logs], pass_rate
    )

    L2 = L1
    while True:
        passed = sum(
            _frontier_failure(events, 2 * L2, L2, 4.0 * alpha, 0.0, quiet, horizon) is None
            for events in logs
        )
        if passed >= pass_rate * len(logs):
            break
        L2 += 1
    logger.info(f"✓ Calibrated certificate: L1={L1}, L2={L2}, alpha_hat={alpha:.4f}")
    return CertificateConstants(L1, L2, alpha)
