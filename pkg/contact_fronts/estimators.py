"""Monte Carlo estimates of survival, front speed and the renewal structure."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .dynamics import DEFAULT_WINDOW_CAP
from .errors import InsufficientSamplesError, InvalidParameterError, TooFewSurvivorsError
from .events import EventLog
from .lattice import ProcessKind
from .logger import logger
from .paths import never_healed_frontier
from .renewal import IncrementSample, RenewalRecord
from .runner import CoupledOutcome, TrialOutcome, front_task, run_trials, trial_jobs
from .utils import derive_seed

MIN_SURVIVORS = 30
MIN_RENEWAL_SAMPLES = 30
MIN_CLT_SAMPLES = 500
MIN_INDEPENDENCE_SAMPLES = 200
CLT_BLOCKS = (1, 8, 32)

Z95 = float(stats.norm.ppf(0.975))


class ModelParams(NamedTuple):
    """Which process to run, at which rates, from which start."""

    kind: str
    lambda_: float
    p: float
    initial: str = "single:0"


class StatsSummary:
    """Point estimate with standard error and 95% interval."""

    def __init__(
        self,
        n_trials: int,
        n_surviving: int,
        estimate: float,
        std_error: float,
        ci95,
        method: str,
    ):
        self.n_trials = int(n_trials)
        self.n_surviving = int(n_surviving)
        self.estimate = float(estimate)
        self.std_error = float(std_error)
        self.ci95 = (float(ci95[0]), float(ci95[1]))
        self.method = method

    @classmethod
    def normal(cls, n_trials: int, n_surviving: int, estimate: float, std_error: float, method: str):
        half = Z95 * std_error
        return cls(n_trials, n_surviving, estimate, std_error, (estimate - half, estimate + half), method)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "n_surviving": self.n_surviving,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci95": list(self.ci95),
            "method": self.method,
        }

    def __repr__(self) -> str:
        lo, hi = self.ci95
        return f"StatsSummary({self.method}: {self.estimate:.4g} ± {self.std_error:.2g}, [{lo:.4g}, {hi:.4g}])"


class NormalityReport(NamedTuple):
    block: int
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_statistic: float
    ks_pvalue: float

    def to_dict(self) -> dict:
        return self._asdict()


class Correlation(NamedTuple):
    series: str
    lag: int
    value: float
    within_band: bool


class IndependenceReport(NamedTuple):
    n: int
    band: float
    correlations: List[Correlation]

    @property
    def passed(self) -> bool:
        return all(c.within_band for c in self.correlations)

    def flagged(self) -> List[Correlation]:
        return [c for c in self.correlations if not c.within_band]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "band": self.band,
            "passed": self.passed,
            "correlations": [c._asdict() for c in self.correlations],
        }


class TailReport(NamedTuple):
    """Empirical tail P(value > L) on a grid, with a log-linear slope fit."""

    n_records: int
    n_excluded: int
    values: List[float]
    grid: List[float]
    tail: List[float]
    log_slope: Optional[float]
    shape_ok: bool
    excursions: Sequence[float] = ()

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_excluded": self.n_excluded,
            "grid": self.grid,
            "tail": self.tail,
            "log_slope": self.log_slope,
            "shape_ok": self.shape_ok,
            "mean": float(np.mean(self.values)) if self.values else None,
            "max_excursion": max(self.excursions) if self.excursions else None,
        }


def survival_from_outcomes(outcomes: Sequence[TrialOutcome], method: str = "survival") -> StatsSummary:
    """Fraction of runs still alive at their horizon, with a Wilson interval."""
    return survival_from_fronts([outcome.rightmost for outcome in outcomes], method)


def survival_from_fronts(rightmosts: Sequence[Optional[int]], method: str = "survival") -> StatsSummary:
    """Survival read off the fronts at the horizon; None marks a dead run."""
    n = len(rightmosts)
    if n < 1:
        raise InvalidParameterError("survival needs at least one trial")
    k = sum(r is not None for r in rightmosts)
    estimate = k / n
    interval = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return StatsSummary(
        n, k, estimate, math.sqrt(estimate * (1.0 - estimate) / n), (interval.low, interval.high), method
    )


def _run_fronts(params: ModelParams, trials: int, T: float, seed: int, workers: int, progress: bool, window_cap: int):
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    jobs = trial_jobs(
        ProcessKind(params.kind).value, params.lambda_, params.p, params.initial, T, trials, seed, window_cap
    )
    return run_trials(front_task, jobs, workers=workers, progress=progress, desc=f"{params.kind} runs")


def estimate_survival(
    params: ModelParams,
    trials: int,
    T: float,
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> StatsSummary:
    """Probability that the process is still alive at time T."""
    return survival_from_outcomes(_run_fronts(params, trials, T, seed, workers, progress, window_cap))


def speed_from_fronts(rightmosts: Sequence[Optional[int]], T: float, method: str = "direct") -> StatsSummary:
    """Mean of r_T / T over the runs alive at T.

    Raises:
        TooFewSurvivorsError: If fewer than 30 runs survive
    """
    if T <= 0:
        raise InvalidParameterError(f"speed needs a positive horizon, got {T}")
    alive = np.array([r for r in rightmosts if r is not None], dtype=float) / T
    if alive.size < MIN_SURVIVORS:
        raise TooFewSurvivorsError(
            f"only {alive.size} of {len(rightmosts)} runs survived to {T}; need {MIN_SURVIVORS}"
        )
    std_error = float(alive.std(ddof=1) / math.sqrt(alive.size))
    return StatsSummary.normal(len(rightmosts), alive.size, float(alive.mean()), std_error, method)


def speed_from_outcomes(outcomes: Sequence[TrialOutcome], T: float) -> StatsSummary:
    return speed_from_fronts([outcome.rightmost for outcome in outcomes], T)


def estimate_speed_direct(
    params: ModelParams,
    trials: int,
    T: float,
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> StatsSummary:
    """Front speed from r_T / T, conditioned on survival by rejection at T."""
    return speed_from_outcomes(_run_fronts(params, trials, T, seed, workers, progress, window_cap), T)


def _increment_arrays(samples: Sequence[IncrementSample]):
    d_sigma = np.array([s.d_sigma for s in samples], dtype=float)
    d_r = np.array([s.d_r for s in samples], dtype=float)
    return d_sigma, d_r


def estimate_speed_renewal(samples: Sequence[IncrementSample]) -> StatsSummary:
    """Ratio of mean front increment to mean renewal gap.

    The standard error follows the delta method with the sample covariance of
    (d_sigma, d_r). ``n_trials`` counts samples and ``n_surviving`` the runs
    they came from.

    Raises:
        InsufficientSamplesError: If fewer than 30 samples are given
    """
    if len(samples) < MIN_RENEWAL_SAMPLES:
        raise InsufficientSamplesError(
            f"{len(samples)} renewal increments; need at least {MIN_RENEWAL_SAMPLES}"
        )
    d_sigma, d_r = _increment_arrays(samples)
    n = d_sigma.size
    m_s, m_r = float(d_sigma.mean()), float(d_r.mean())
    ratio = m_r / m_s
    cov = np.cov(np.vstack([d_sigma, d_r]), ddof=1)
    var_s, var_r, cov_sr = float(cov[0, 0]), float(cov[1, 1]), float(cov[0, 1])
    variance = (var_r - 2.0 * ratio * cov_sr + ratio * ratio * var_s) / (m_s * m_s * n)
    runs = len({s.run_id for s in samples})
    return StatsSummary.normal(n, runs, ratio, math.sqrt(max(variance, 0.0)), "renewal")


def speeds_consistent(a: StatsSummary, b: StatsSummary, k: float = 3.0) -> bool:
    """|a - b| within k combined standard errors."""
    return abs(a.estimate - b.estimate) <= k * math.hypot(a.std_error, b.std_error)


def _block_sums(values: np.ndarray, m: int) -> np.ndarray:
    usable = (values.size // m) * m
    return values[:usable].reshape(-1, m).sum(axis=1)


def normality_report(values: np.ndarray, block: int = 1) -> NormalityReport:
    """Moments and KS distance of already standardized values."""
    values = np.asarray(values, dtype=float)
    ks = stats.kstest(values, "norm")
    return NormalityReport(
        block=block,
        n=int(values.size),
        mean=float(values.mean()),
        variance=float(values.var(ddof=1)),
        skewness=float(stats.skew(values)),
        excess_kurtosis=float(stats.kurtosis(values)),
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
    )


def clt_statistics(
    samples: Sequence[IncrementSample], mu_hat: float, blocks: Iterable[int] = CLT_BLOCKS
) -> List[NormalityReport]:
    """Normality of block sums of the centered increments d_r - mu_hat * d_sigma.

    Each block of ``m`` consecutive increments is divided by sqrt(m * var),
    with ``var`` the sample variance of a single centered increment.

    Raises:
        InsufficientSamplesError: If fewer than 500 samples are given
    """
    if len(samples) < MIN_CLT_SAMPLES:
        raise InsufficientSamplesError(f"{len(samples)} increments; need at least {MIN_CLT_SAMPLES}")
    d_sigma, d_r = _increment_arrays(samples)
    centered = d_r - mu_hat * d_sigma
    variance = float(centered.var(ddof=1))
    if variance <= 0.0:
        raise InsufficientSamplesError("centered increments have zero variance")
    reports = []
    for m in blocks:
        sums = _block_sums(centered, m)
        if sums.size < 3:
            logger.debug(f"⊗ block size {m}: only {sums.size} blocks")
            continue
        reports.append(normality_report(sums / math.sqrt(m * variance), block=m))
    return reports


def _lagged_pairs(samples: Sequence[IncrementSample], lag: int):
    """Index pairs (i, j) of increments ``lag`` apart within the same run."""
    first, second = [], []
    position = {(s.run_id, s.index): i for i, s in enumerate(samples)}
    for i, s in enumerate(samples):
        j = position.get((s.run_id, s.index + lag))
        if j is not None:
            first.append(i)
            second.append(j)
    return np.array(first, dtype=int), np.array(second, dtype=int)


def _lag_correlation(x: np.ndarray, y: np.ndarray, first: np.ndarray, second: np.ndarray) -> float:
    dx, dy = x - x.mean(), y - y.mean()
    scale = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if scale == 0.0 or first.size == 0:
        return 0.0
    return float(dx[first] @ dy[second]) / scale


def independence_check(samples: Sequence[IncrementSample], max_lag: int = 3) -> IndependenceReport:
    """Lagged auto- and cross-correlations of (d_sigma, d_r) against a 3/sqrt(N) band.

    Raises:
        InsufficientSamplesError: If fewer than 200 samples are given
    """
    if len(samples) < MIN_INDEPENDENCE_SAMPLES:
        raise InsufficientSamplesError(
            f"{len(samples)} increments; need at least {MIN_INDEPENDENCE_SAMPLES}"
        )
    samples = sorted(samples, key=lambda s: (s.run_id, s.index))
    d_sigma, d_r = _increment_arrays(samples)
    band = 3.0 / math.sqrt(len(samples))
    series = {
        "d_sigma": (d_sigma, d_sigma),
        "d_r": (d_r, d_r),
        "d_sigma->d_r": (d_sigma, d_r),
        "d_r->d_sigma": (d_r, d_sigma),
    }
    correlations = []
    for lag in range(1, max_lag + 1):
        first, second = _lagged_pairs(samples, lag)
        for name, (x, y) in series.items():
            value = _lag_correlation(x, y, first, second)
            correlations.append(Correlation(name, lag, value, abs(value) <= band))
    return IndependenceReport(len(samples), band, correlations)


def _tail_curve(values: Sequence[float], grid: Sequence[float]) -> List[float]:
    values = np.asarray(values, dtype=float)
    return [float(np.mean(values > g)) for g in grid]


def _log_tail_shape(grid: Sequence[float], tail: Sequence[float], convex: bool):
    """Log-linear slope of the positive part of the tail and its curvature check."""
    points = [(g, math.log(q)) for g, q in zip(grid, tail) if q > 0.0]
    if len(points) < 3:
        return None, True
    xs, ys = zip(*points)
    slope = float(stats.linregress(xs, ys).slope)
    second = np.diff(ys, 2)
    tolerance = 0.25
    ok = bool(np.all(second >= -tolerance)) if convex else bool(np.all(second <= tolerance))
    return slope, ok


def last_renewal_tail(
    records: Sequence[RenewalRecord], t: float, grid: Optional[Sequence[float]] = None
) -> TailReport:
    """Age t - sigma_N(t) of the last renewal strictly before ``t``.

    Also collects the largest front excursion |r_s - r(sigma_N(t))| until the
    next renewal (or the record's horizon). Records without a renewal before
    ``t`` are excluded and counted. The log-tail should be concave or linear.
    """
    if not records:
        raise InvalidParameterError("last_renewal_tail needs at least one record")
    ages, excursions, excluded = [], [], 0
    for record in records:
        before = [k for k, sigma in enumerate(record.sigmas) if sigma < t]
        if not before:
            excluded += 1
            continue
        k = before[-1]
        sigma = record.sigmas[k]
        until = record.sigmas[k + 1] if k + 1 < len(record.sigmas) else record.horizon
        base = record.rightmost_at(sigma)
        sites = [record.rightmost_at(sigma)] + [
            site for time, site in zip(record.front_times, record.front_sites) if sigma < time <= until
        ]
        excursions.append(float(max(abs(site - base) for site in sites if site is not None)))
        ages.append(t - sigma)
    if grid is None:
        top = max(ages) if ages else 1.0
        grid = np.linspace(0.0, top, 11).tolist()
    tail = _tail_curve(ages, grid) if ages else [0.0] * len(grid)
    slope, ok = _log_tail_shape(grid, tail, convex=False)
    return TailReport(len(records), excluded, ages, list(grid), tail, slope, ok, excursions)


def first_renewal_tail(records: Sequence[RenewalRecord], grid: Optional[Sequence[float]] = None) -> TailReport:
    """Empirical P(sigma_1 > t | sigma_0 = 0); a missing sigma_1 counts as beyond the horizon."""
    started = [r for r in records if r.sigmas and r.sigmas[0] == 0.0]
    values = [r.sigmas[1] if len(r.sigmas) > 1 else math.inf for r in started]
    if grid is None:
        top = max((r.horizon for r in started), default=1.0)
        grid = np.linspace(0.0, top, 21).tolist()
    tail = _tail_curve(values, grid) if values else [0.0] * len(grid)
    slope, ok = _log_tail_shape(grid, tail, convex=True)
    return TailReport(len(records), len(records) - len(started), values, list(grid), tail, slope, ok)


class FrontierReport(NamedTuple):
    times: List[float]
    values: Dict[float, List[int]]
    offset: int
    log_slope: Optional[float]

    def to_dict(self) -> dict:
        return {
            "times": self.times,
            "mean": {str(t): float(np.mean(v)) for t, v in self.values.items()},
            "offset": self.offset,
            "log_slope": self.log_slope,
        }


def frontier_growth(
    lambda_: float,
    p: float,
    trials: int,
    times: Sequence[float],
    alpha_hat: float,
    seed: int = 0,
    level: float = 0.95,
) -> FrontierReport:
    """Distribution of the never-healed frontier H_t(0) over independent logs.

    ``offset`` is the smallest L with H_t(0) >= 4 * alpha_hat * t - L on a
    ``level`` fraction of runs at every t. ``log_slope`` fits log P(H_t(0) <= c t)
    against t with c = 4 * alpha_hat.
    """
    if trials < 1:
        raise InvalidParameterError("frontier_growth needs at least one trial")
    times = sorted(float(t) for t in times)
    horizon = times[-1]
    values: Dict[float, List[int]] = {t: [] for t in times}
    for i in range(trials):
        events = EventLog(derive_seed(seed, "frontier", i), lambda_, p, horizon)
        for t in times:
            start = min(1.0, t)
            values[t].append(never_healed_frontier(events, 0, t, start=start).value)

    slope = 4.0 * alpha_hat
    offset = 0
    for t in times:
        shortfall = slope * t - np.asarray(values[t], dtype=float)
        offset = max(offset, math.ceil(float(np.quantile(shortfall, level))))

    c = slope if slope > 0 else 1.0
    points = [(t, np.mean(np.asarray(values[t]) <= c * t)) for t in times]
    points = [(t, math.log(q)) for t, q in points if q > 0]
    log_slope = float(stats.linregress(*zip(*points)).slope) if len(points) >= 2 else None
    return FrontierReport(times, values, offset, log_slope)


class ConvergenceReport(NamedTuple):
    summaries: Dict[float, StatsSummary]
    cauchy: List[dict]

    @property
    def passed(self) -> bool:
        return all(item["ok"] for item in self.cauchy)

    def to_dict(self) -> dict:
        return {
            "summaries": {str(t): s.to_dict() for t, s in self.summaries.items()},
            "cauchy": self.cauchy,
            "passed": self.passed,
        }


def speed_convergence(
    params: ModelParams,
    trials: int,
    horizons: Sequence[float],
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> ConvergenceReport:
    """Survival-conditioned r_T / T for several T read off one run per trial."""
    horizons = sorted(float(T) for T in horizons)
    outcomes = _run_fronts(params, trials, horizons[-1], seed, workers, progress, window_cap)
    summaries = {}
    for T in horizons:
        fronts = []
        for outcome in outcomes:
            k = max(np.searchsorted(outcome.front_times, T, side="right") - 1, 0)
            fronts.append(outcome.front_sites[k])
        summaries[T] = speed_from_fronts(fronts, T, method=f"direct@{T:g}")
    cauchy = []
    for i, a in enumerate(horizons):
        for b in horizons[i + 1:]:
            sa, sb = summaries[a], summaries[b]
            cauchy.append(
                {
                    "horizons": [a, b],
                    "difference": abs(sa.estimate - sb.estimate),
                    "bound": 3.0 * math.hypot(sa.std_error, sb.std_error),
                    "ok": speeds_consistent(sa, sb),
                }
            )
    return ConvergenceReport(summaries, cauchy)


class Bracket(NamedTuple):
    lo: float
    hi: float
    visited: List[tuple]

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "visited": [list(v) for v in self.visited]}


def bracket_critical_lambda(
    kind: str,
    p: float,
    lo: float,
    hi: float,
    trials: int,
    T: float,
    seed: int = 0,
    tol: float = 0.05,
    initial: str = "single:0",
    workers: int = 1,
) -> Bracket:
    """Bisect on lambda for the survival estimate at T crossing 0.5.

    Every lambda reuses the same trial seeds.
    """
    if not 0 < lo < hi:
        raise InvalidParameterError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    visited = []
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        summary = estimate_survival(ModelParams(kind, mid, p, initial), trials, T, seed, workers)
        visited.append((mid, summary.estimate))
        logger.debug(f"lambda {mid:.4f}: survival {summary.estimate:.3f}")
        if summary.estimate >= 0.5:
            hi = mid
        else:
            lo = mid
    logger.info(f"✓ Critical lambda bracketed in [{lo:.4f}, {hi:.4f}]")
    return Bracket(lo, hi, visited)


def coupled_speeds(outcomes: Sequence[CoupledOutcome], T: float) -> Dict[str, StatsSummary]:
    """Per-kind r_T / T over the coupled runs where all three processes survive."""
    alive = [o for o in outcomes if o.survived]
    result = {}
    for i, kind in enumerate((ProcessKind.SPONT, ProcessKind.IS, ProcessKind.CP)):
        fronts = [o.rightmosts[i] for o in alive]
        summary = speed_from_fronts(fronts, T, method=f"coupled-{kind.value}")
        summary.n_trials = len(outcomes)
        result[kind.value] = summary
    return result
