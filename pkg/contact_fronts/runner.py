"""Independent trials fanned out over worker processes."""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

from tqdm import tqdm

from .dynamics import DEFAULT_WINDOW_CAP, Retention, TrialSpec, evolve, evolve_coupled
from .errors import ExtinctRunError
from .lattice import InitialSpec, ProcessKind
from .logger import logger
from .renewal import IncrementSample, PropertyPolicy, RenewalRecord, harvest_increments, renewal_sequence
from .utils import derive_seed


class TrialJob(NamedTuple):
    """One picklable work unit; rebuilt into a log and a start inside the worker."""

    index: int
    seed: int
    kind: str
    lambda_: float
    p: float
    initial: str
    horizon: float
    window_cap: int = DEFAULT_WINDOW_CAP

    def spec(self) -> TrialSpec:
        return TrialSpec(self.lambda_, self.p, InitialSpec.parse(self.initial), self.seed, self.window_cap)


class TrialOutcome(NamedTuple):
    index: int
    seed: int
    extinct: bool
    extinction_time: Optional[float]
    rightmost: Optional[int]
    front_times: List[float]
    front_sites: List[Optional[int]]
    ties: int

    @property
    def survived(self) -> bool:
        return not self.extinct


class CoupledOutcome(NamedTuple):
    index: int
    seed: int
    rightmosts: Tuple[Optional[int], Optional[int], Optional[int]]
    survived: bool
    ordering_violation: bool
    ties: int


class RenewalJob(NamedTuple):
    trial: TrialJob
    guard: float
    policy: PropertyPolicy


class RenewalOutcome(NamedTuple):
    index: int
    seed: int
    record: Optional[RenewalRecord]
    increments: List[IncrementSample]

    @property
    def rejected(self) -> bool:
        return self.record is None


def trial_seeds(master_seed: int, trials: int) -> List[int]:
    """Per-trial seeds, keyed by trial index."""
    return [derive_seed(master_seed, "trial", i) for i in range(trials)]


def trial_jobs(
    kind: str,
    lambda_: float,
    p: float,
    initial: str,
    horizon: float,
    trials: int,
    master_seed: int,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> List[TrialJob]:
    return [
        TrialJob(i, seed, kind, lambda_, p, initial, horizon, window_cap)
        for i, seed in enumerate(trial_seeds(master_seed, trials))
    ]


def front_task(job: TrialJob) -> TrialOutcome:
    """Run one process keeping only its front paths."""
    spec = job.spec()
    traj = evolve(
        ProcessKind(job.kind),
        spec.initial_configuration(job.horizon),
        spec.event_log(job.horizon),
        window_cap=job.window_cap,
        retain=Retention.FRONT,
    )
    return TrialOutcome(
        index=job.index,
        seed=job.seed,
        extinct=traj.extinct,
        extinction_time=traj.extinction_time,
        rightmost=traj.rightmost_at(job.horizon),
        front_times=traj.front_times,
        front_sites=traj.front_sites,
        ties=traj.tie_count,
    )


def ordered_fronts(fronts: Sequence[Optional[int]]) -> bool:
    """Whether r(Spont) <= r(IS) <= r(CP); a dead process sits below every live one."""
    for lower, upper in zip(fronts, fronts[1:]):
        if lower is None:
            continue
        if upper is None or lower > upper:
            return False
    return True


def coupled_task(job: TrialJob) -> CoupledOutcome:
    """Run Spont, inherited sterility and contact process on one log."""
    spec = job.spec()
    start = spec.initial_configuration(job.horizon)
    trajectories = evolve_coupled(
        start,
        start,
        start,
        spec.event_log(job.horizon),
        window_cap=job.window_cap,
        retain=Retention.FRONT,
    )
    fronts = tuple(traj.rightmost_at(job.horizon) for traj in trajectories)
    return CoupledOutcome(
        index=job.index,
        seed=job.seed,
        rightmosts=fronts,
        survived=all(r is not None for r in fronts),
        ordering_violation=not ordered_fronts(fronts),
        ties=sum(traj.tie_count for traj in trajectories),
    )


def renewal_task(job: RenewalJob) -> RenewalOutcome:
    """Renewal sequence of one run; extinct runs come back rejected."""
    trial = job.trial
    # a guard reaching the horizon still locates renewals, then censors them all
    guard = job.guard if job.guard < trial.horizon else 0.0
    try:
        record = renewal_sequence(
            ProcessKind(trial.kind), trial.spec(), trial.horizon, guard, job.policy, run_id=trial.index
        )
    except ExtinctRunError as e:
        logger.debug(f"⊗ {e}")
        return RenewalOutcome(trial.index, trial.seed, None, [])
    if guard != job.guard:
        record.recensor(job.guard)
    return RenewalOutcome(trial.index, trial.seed, record, harvest_increments(record))


def run_trials(
    task: Callable,
    jobs: Sequence,
    workers: int = 1,
    progress: bool = False,
    desc: str = "trials",
) -> list:
    """Map ``task`` over ``jobs``; results come back in job order.

    Args:
        task: Module-level function taking one job
        jobs: Work units, each picklable when ``workers > 1``
        workers: Number of worker processes; 1 runs in this process
        progress: Show a progress bar
        desc: Progress bar label

    Returns:
        List of task results, aligned with ``jobs``
    """
    if workers <= 1 or len(jobs) <= 1:
        return [task(job) for job in tqdm(jobs, desc=desc, disable=not progress)]
    chunksize = max(len(jobs) // (workers * 8), 1)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(
            tqdm(
                executor.map(task, jobs, chunksize=chunksize),
                total=len(jobs),
                desc=desc,
                disable=not progress,
            )
        )
