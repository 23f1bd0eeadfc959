#!/usr/bin/env python3
"""Main CLI entry point for contact-fronts."""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from .audits import (
    AuditReport,
    agreement_region_audit,
    attractivity_suite,
    coupling_order_audit,
    discrepancy_audit,
    path_equivalence_audit,
    renewal_audit,
    truncation_agreement_audit,
    truncation_monotonicity_audit,
)
from .config import RunConfig, load_config
from .diagram import render_coupled, render_run
from .dynamics import Retention, evolve, evolve_coupled
from .errors import (
    ConfigError,
    CounterexampleNotFoundError,
    InconsistentSpecError,
    InsufficientSamplesError,
    InvalidModeError,
    InvalidParameterError,
    NoOccupiedSiteError,
    PreconditionError,
    ResourceCapError,
    TooFewSurvivorsError,
)
from .estimators import (
    ModelParams,
    clt_statistics,
    coupled_speeds,
    estimate_speed_renewal,
    first_renewal_tail,
    independence_check,
    last_renewal_tail,
    speed_convergence,
    speed_from_fronts,
    speeds_consistent,
    survival_from_fronts,
)
from .lattice import ProcessKind, random_member
from .logger import logger, setup_logger
from .paths import leftmost_active_path
from .renewal import calibrate_certificate
from .results import (
    SummaryManager,
    increment_rows,
    renewal_rows,
    trajectory_rows,
    write_csv,
)
from .runner import RenewalJob, coupled_task, front_task, renewal_task, run_trials, trial_jobs
from .utils import calculate_file_hash, derive_seed

EXIT_OK = 0
EXIT_AUDIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

# errors that come from a configuration the library rejects
CONFIG_ERRORS = (
    ConfigError,
    InvalidParameterError,
    InvalidModeError,
    InconsistentSpecError,
    PreconditionError,
)


def _jobs(config: RunConfig, kind: str, lambda_: float, p: float, horizon: float):
    return trial_jobs(kind, lambda_, p, config.initial, horizon, config.trials, config.seed, config.window_cap)


def _speed_or_note(summary: SummaryManager, key: str, fronts, horizon: float):
    """Record a direct speed estimate, or why there is none."""
    if horizon <= 0:
        summary.record("diagnostics", key, "horizon is zero")
        return None
    try:
        speed = speed_from_fronts(fronts, horizon)
    except TooFewSurvivorsError as e:
        logger.info(f"⊗ {key}: {e}")
        summary.record("diagnostics", key, str(e))
        return None
    summary.record("estimates", key, speed)
    return speed


def _write_example_run(config: RunConfig, job) -> List[str]:
    """Full replay of the first trial: trajectory CSVs, event log and optional SVG.

    Returns:
        Paths of the files written
    """
    spec = job.spec()
    events = spec.event_log(config.horizon)
    start = spec.initial_configuration(config.horizon)
    out = config.output_dir
    written = []
    if config.kind == "coupled":
        runs = evolve_coupled(start, start, start, events, window_cap=config.window_cap)
        for traj in runs:
            written.append(os.path.join(out, f"trajectory_{traj.kind.value}.csv"))
            write_csv(written[-1], "trajectory", trajectory_rows(traj))
    else:
        runs = (evolve(ProcessKind(config.kind), start, events, window_cap=config.window_cap),)
        written.append(os.path.join(out, "trajectory.csv"))
        write_csv(written[-1], "trajectory", trajectory_rows(runs[0]))
    written.append(os.path.join(out, "events.json"))
    events.dump(written[-1])

    witness = None
    try:
        witness = leftmost_active_path(runs[-1], events, config.horizon)
        written.append(os.path.join(out, "witness.json"))
        witness.dump(written[-1])
    except (NoOccupiedSiteError, PreconditionError) as e:
        logger.debug(f"⊗ No witness path for the example run: {e}")

    if config.diagram:
        diagram = render_coupled(*runs, witness=witness) if len(runs) == 3 else render_run(runs[0], witness=witness)
        path = os.path.join(out, "diagram.svg")
        diagram.write(path)
        written.append(path)
        logger.info(f"✓ Diagram saved to: {path}")
    return written


def cmd_simulate(config: RunConfig) -> int:
    """Run ``trials`` independent runs and summarise survival and speed."""
    os.makedirs(config.output_dir, exist_ok=True)
    summary = SummaryManager(config.output_dir)
    summary.start(config.to_dict(), config.seed, config.trials)
    T = config.horizon

    if config.kind == "coupled":
        jobs = _jobs(config, "spont", config.lambda_, config.p, T)
        outcomes = run_trials(coupled_task, jobs, config.workers, config.progress, "coupled runs")
        alive = [o.rightmosts[0] if o.survived else None for o in outcomes]
        summary.record("estimates", "survival", survival_from_fronts(alive))
        violations = sum(o.ordering_violation for o in outcomes)
        summary.record("diagnostics", "ordering_violations", violations)
        summary.record("diagnostics", "ties", sum(o.ties for o in outcomes))
        if T > 0:
            try:
                summary.record("estimates", "speeds", coupled_speeds(outcomes, T))
            except TooFewSurvivorsError as e:
                summary.record("diagnostics", "speeds", str(e))
    else:
        jobs = _jobs(config, config.kind, config.lambda_, config.p, T)
        outcomes = run_trials(front_task, jobs, config.workers, config.progress, f"{config.kind} runs")
        fronts = [o.rightmost for o in outcomes]
        survival = survival_from_fronts(fronts)
        summary.record("estimates", "survival", survival)
        summary.record("diagnostics", "ties", sum(o.ties for o in outcomes))
        _speed_or_note(summary, "speed", fronts, T)
        logger.info(f"✓ Survival {survival.estimate:.3f} over {survival.n_trials} runs")

    if config.horizons:
        kind = config.kind if config.kind != "coupled" else "spont"
        params = ModelParams(kind, config.lambda_, config.p, config.initial)
        try:
            report = speed_convergence(
                params, config.trials, config.horizons, config.seed, config.workers, config.progress, config.window_cap
            )
            summary.record("diagnostics", "speed_convergence", report)
        except TooFewSurvivorsError as e:
            summary.record("diagnostics", "speed_convergence", str(e))

    if config.retain == Retention.FULL.value:
        written = _write_example_run(config, jobs[0])
        summary.record(
            "diagnostics", "output_digests", {os.path.basename(path): calculate_file_hash(path) for path in written}
        )

    summary.save()
    logger.info(f"✓ Summary saved to: {summary.summary_file}")
    return EXIT_OK


def cmd_renewal(config: RunConfig) -> int:
    """Renewal sequences, increments and the renewal-based estimators."""
    if config.kind not in ("spont", "is"):
        raise ConfigError(f"invalid value for 'kind': renewal needs spont or is, got '{config.kind}'")
    os.makedirs(config.output_dir, exist_ok=True)
    summary = SummaryManager(config.output_dir)
    summary.start(config.to_dict(), config.seed, config.trials)
    T = config.horizon

    constants = None
    if config.policy.needs_calibration(config.kind):
        pilots = max(config.trials // 4, 20)
        constants = calibrate_certificate(
            config.lambda_,
            config.p,
            pilots,
            T,
            derive_seed(config.seed, "calibration"),
            quiet=config.policy.quiet,
            envelope_depth=config.policy.envelope_depth,
            window_cap=config.window_cap,
        )
        summary.record("diagnostics", "certificate_constants", constants.to_dict())
        logger.info(f"✓ Calibrated certificate constants {constants.to_dict()}")
    policy = config.policy.build(config.kind, config.window_cap, constants)

    jobs = [RenewalJob(job, config.guard, policy) for job in _jobs(config, config.kind, config.lambda_, config.p, T)]
    outcomes = run_trials(renewal_task, jobs, config.workers, config.progress, "renewals")
    records = [o.record for o in outcomes if not o.rejected]
    samples = [sample for o in outcomes for sample in o.increments]
    write_csv(os.path.join(config.output_dir, "renewals.csv"), "renewals", renewal_rows(records))
    write_csv(os.path.join(config.output_dir, "increments.csv"), "increments", increment_rows(samples))

    fronts = [o.record.rightmost_at(T) if o.record is not None else None for o in outcomes]
    survivors = [r for r in records if r.rightmost_at(T) is not None]
    summary.record("diagnostics", "rejected_runs", sum(o.rejected for o in outcomes))
    summary.record("diagnostics", "n_increments", len(samples))
    summary.record(
        "diagnostics",
        "renewal_positivity",
        survival_from_fronts([0 if r.n_uncensored else None for r in survivors], "renewal-positivity")
        if survivors
        else "no surviving runs",
    )
    direct = _speed_or_note(summary, "speed_direct", fronts, T)

    try:
        renewal = estimate_speed_renewal(samples)
    except InsufficientSamplesError as e:
        logger.info(f"⊗ {e}")
        summary.record("diagnostics", "insufficient_samples", str(e))
    else:
        summary.record("estimates", "speed_renewal", renewal)
        if direct is not None:
            summary.record("diagnostics", "speeds_consistent", speeds_consistent(direct, renewal))
        for key, check in (
            ("normality", lambda: clt_statistics(samples, renewal.estimate)),
            ("independence", lambda: independence_check(samples)),
        ):
            try:
                summary.record("diagnostics", key, check())
            except InsufficientSamplesError as e:
                summary.record("diagnostics", key, str(e))

    if records:
        summary.record("diagnostics", "first_renewal_tail", first_renewal_tail(records))
        summary.record("diagnostics", "last_renewal_tail", last_renewal_tail(records, T / 2))

    summary.save()
    logger.info(f"✓ {len(records)} renewal records, {len(samples)} increments")
    return EXIT_OK


def _sweep_row(kind: str, lambda_: float, p: float, T: float, fronts, violations):
    survival = survival_from_fronts(fronts)
    speed = None
    if T > 0:
        try:
            speed = speed_from_fronts(fronts, T)
        except TooFewSurvivorsError as e:
            logger.debug(f"⊗ {kind} at lambda={lambda_}, p={p}: {e}")
    return (
        kind,
        lambda_,
        p,
        T,
        survival.n_trials,
        survival.n_surviving,
        survival.estimate,
        survival.ci95[0],
        survival.ci95[1],
        speed.estimate if speed is not None else None,
        speed.std_error if speed is not None else None,
        violations,
    )


def cmd_sweep(config: RunConfig) -> int:
    """One row per (lambda, p) cell and kind."""
    os.makedirs(config.output_dir, exist_ok=True)
    summary = SummaryManager(config.output_dir)
    summary.start(config.to_dict(), config.seed, config.trials)
    sweep = config.sweep
    T = sweep.horizon if sweep.horizon is not None else config.horizon
    rows = []
    total_violations = 0
    for lambda_, p in sweep.cells():
        if sweep.coupled:
            outcomes = run_trials(
                coupled_task, _jobs(config, "spont", lambda_, p, T), config.workers, config.progress, "coupled"
            )
            violations = sum(o.ordering_violation for o in outcomes)
            total_violations += violations
            order = [kind.value for kind in ProcessKind]
            for kind in sweep.kinds:
                fronts = [o.rightmosts[order.index(kind)] for o in outcomes]
                rows.append(_sweep_row(kind, lambda_, p, T, fronts, violations))
        else:
            for kind in sweep.kinds:
                outcomes = run_trials(
                    front_task, _jobs(config, kind, lambda_, p, T), config.workers, config.progress, kind
                )
                rows.append(_sweep_row(kind, lambda_, p, T, [o.rightmost for o in outcomes], None))
        logger.info(f"✓ Cell lambda={lambda_}, p={p} done")

    path = os.path.join(config.output_dir, "sweep.csv")
    write_csv(path, "sweep", rows)
    summary.record("estimates", "rows", len(rows))
    if sweep.coupled:
        summary.record("diagnostics", "ordering_violations", total_violations)
    summary.save()
    logger.info(f"✓ Sweep saved to: {path}")
    return EXIT_OK


def _run_audits(config: RunConfig) -> List[AuditReport]:
    a = config.audit
    seed = config.seed
    common = {"workers": config.workers, "progress": config.progress}
    reports = []
    if a.coupling_trials:
        reports.append(
            coupling_order_audit(
                a.lambda_, a.p, a.coupling_trials, a.coupling_horizon, seed, corrupt=a.corrupt_replay, **common
            )
        )
    if a.path_trials:
        reports.append(
            path_equivalence_audit(a.lambda_, a.p, a.path_trials, a.path_horizon, seed, radius=a.path_radius, **common)
        )
    if a.discrepancy_trials:
        start = random_member(np.random.default_rng(derive_seed(seed, "discrepancy-start")), 0, 6)
        for kind in (ProcessKind.SPONT, ProcessKind.IS):
            reports.append(
                discrepancy_audit(
                    kind, 0, start, a.discrepancy_trials, a.discrepancy_horizon, a.lambda_, a.p, seed, **common
                )
            )
    if a.attractivity_trials:
        try:
            report = attractivity_suite(a.attractivity_trials, seed, budget=a.search_budget)
        except CounterexampleNotFoundError as e:
            report = AuditReport("attractivity")
            report.violation(str(e))
        else:
            path = os.path.join(config.output_dir, "is_counterexample.json")
            with open(path, "w") as f:
                json.dump(report.details["is_counterexample"], f, indent=2, sort_keys=True)
        reports.append(report)
    if a.monotonicity_trials:
        reports.append(
            truncation_monotonicity_audit(a.lambda_, a.p, a.monotonicity_trials, float(a.check_radius), seed)
        )
    if a.agreement_trials:
        reports.append(
            truncation_agreement_audit(
                a.lambda_, a.p, a.agreement_trials, seed, a.truncation_radii, a.check_radius, float(a.check_radius)
            )
        )
    if a.region_trials:
        reports.append(agreement_region_audit(a.lambda_, a.p, a.region_trials, a.region_horizon, seed, **common))
    if a.renewal_trials:
        reports.append(renewal_audit(a.lambda_, a.p, a.renewal_trials, a.renewal_horizon, seed, **common))
    return reports


def cmd_audit(config: RunConfig) -> int:
    """Run every structural audit; exit 1 on any violation."""
    os.makedirs(config.output_dir, exist_ok=True)
    summary = SummaryManager(config.output_dir, "audit.json")
    summary.start(config.to_dict(), config.seed, 0)
    reports = _run_audits(config)
    summary.record("diagnostics", "audits", [report.to_dict() for report in reports])
    failed = [report.name for report in reports if not report.passed]
    summary.record("estimates", "passed", not failed)
    summary.save()
    if failed:
        logger.error(f"Audits with violations: {', '.join(failed)}")
        return EXIT_AUDIT_FAILED
    logger.info(f"✓ All {len(reports)} audits passed")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "renewal": cmd_renewal,
    "sweep": cmd_sweep,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, help="Path to config file (default: sim.toml or sim.json)")
    common.add_argument("--seed", type=int, help="Master seed, overriding the config file")
    common.add_argument("--trials", type=int, help="Number of trials, overriding the config file")
    common.add_argument("--out", type=str, help="Output directory, overriding the config file")
    common.add_argument("--debug", "-d", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(description="Simulate contact processes with blocked sites")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        commands.add_parser(name, parents=[common], help=command.__doc__)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logger(level=logging.DEBUG if args.debug else logging.INFO)

    try:
        config = load_config(args.config)
        if args.command == "audit" and args.trials is not None:
            config.audit.set_trials(args.trials)
            config.override(seed=args.seed, output_dir=args.out)
        else:
            config.override(seed=args.seed, trials=args.trials, output_dir=args.out)
        logger.info(f"Running {args.command} (kind={config.kind}, seed={config.seed})")
        return COMMANDS[args.command](config)
    except CONFIG_ERRORS as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except ResourceCapError as e:
        logger.error(f"Resource cap exceeded: {e}")
        return EXIT_RESOURCE


def main():
    """Main entry point: run the requested command and exit with its code."""
    sys.exit(run())


if __name__ == "__main__":
    main()
