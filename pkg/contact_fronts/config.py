"""Configuration loader for contact-fronts runs."""

import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from .dynamics import DEFAULT_WINDOW_CAP, Retention
from .errors import ConfigError, SimulationError
from .lattice import InitialSpec, ProcessKind
from .logger import logger
from .renewal import CertificateConstants, PolicyMode, PropertyPolicy

if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomli as tomllib
    except ModuleNotFoundError:  # TOML configs then fail with ConfigError
        tomllib = None

KINDS = ("spont", "is", "cp", "coupled")
DEFAULT_FILES = ("sim.toml", "sim.json")


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
        return value.lower() in ("true", "1", "yes")
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    raise ValueError(f"expected a boolean, got {value!r}")


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(f"expected an integer, got {value!r}")
    return int(value)


def _as_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _list_of(cast: Callable) -> Callable:
    def convert(value: Any) -> list:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"expected a list, got {value!r}")
        return [cast(item) for item in value]

    return convert


def _optional(cast: Callable) -> Callable:
    def convert(value: Any):
        return None if value is None else cast(value)

    return convert


def _read(data: dict, fields: Dict[str, Callable], section: str) -> dict:
    """Cast the known keys of ``data``; unknown keys are an error."""
    prefix = f"{section}." if section else ""
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown configuration key '{prefix}{unknown[0]}'")
    values = {}
    for key, cast in fields.items():
        if key not in data:
            continue
        try:
            values[key] = cast(data[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value for '{prefix}{key}': {e}") from e
    return values


def _require(ok: bool, key: str, message: str):
    if not ok:
        raise ConfigError(f"invalid value for '{key}': {message}")


class PolicyConfig:
    """How renewal runs decide the special property."""

    FIELDS = {
        "mode": _optional(str),
        "family_size": _as_int,
        "family_window_radius": _as_int,
        "L1": _optional(_as_int),
        "L2": _optional(_as_int),
        "alpha_hat": _optional(_as_float),
        "envelope_depth": _optional(_as_int),
        "calibrate": _as_bool,
        "quiet": _as_float,
    }

    def __init__(
        self,
        mode: Optional[str] = None,
        family_size: int = 8,
        family_window_radius: int = 30,
        L1: Optional[int] = None,
        L2: Optional[int] = None,
        alpha_hat: Optional[float] = None,
        envelope_depth: Optional[int] = None,
        calibrate: bool = False,
        quiet: float = 1.0,
    ):
        self.mode = mode
        self.family_size = family_size
        self.family_window_radius = family_window_radius
        self.L1 = L1
        self.L2 = L2
        self.alpha_hat = alpha_hat
        self.envelope_depth = envelope_depth
        self.calibrate = calibrate
        self.quiet = quiet

    def validate(self):
        if self.mode is not None:
            _require(
                self.mode in {mode.value for mode in PolicyMode},
                "policy.mode",
                f"'{self.mode}' is not one of {[mode.value for mode in PolicyMode]}",
            )
        _require(self.family_size >= 2, "policy.family_size", "must be at least 2")
        _require(self.family_window_radius >= 0, "policy.family_window_radius", "must be >= 0")
        _require(self.quiet > 0, "policy.quiet", "must be positive")
        if self.L1 is not None and self.L2 is not None:
            _require(self.L2 >= self.L1, "policy.L2", "must be at least L1")

    def resolve_mode(self, kind: str) -> PolicyMode:
        """Configured mode, or the default for ``kind``."""
        if self.mode is not None:
            return PolicyMode(self.mode)
        return PolicyMode.SPONT_EXTREMAL if kind == "spont" else PolicyMode.IS_SAMPLED_FAMILY

    def constants(self) -> Optional[CertificateConstants]:
        if None in (self.L1, self.L2, self.alpha_hat):
            return None
        return CertificateConstants(self.L1, self.L2, self.alpha_hat)

    def needs_calibration(self, kind: str) -> bool:
        return self.resolve_mode(kind) == PolicyMode.CERTIFICATE and (
            self.calibrate or self.constants() is None
        )

    def build(
        self,
        kind: str,
        window_cap: int = DEFAULT_WINDOW_CAP,
        constants: Optional[CertificateConstants] = None,
    ) -> PropertyPolicy:
        return PropertyPolicy(
            self.resolve_mode(kind),
            family_size=self.family_size,
            family_window_radius=self.family_window_radius,
            constants=constants if constants is not None else self.constants(),
            quiet=self.quiet,
            envelope_depth=self.envelope_depth,
            window_cap=window_cap,
        )

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        return cls(**_read(data, cls.FIELDS, "policy"))


class SweepConfig:
    """Grid of (lambda, p) cells for the sweep command."""

    FIELDS = {
        "lambdas": _list_of(_as_float),
        "ps": _list_of(_as_float),
        "kinds": _list_of(str),
        "coupled": _as_bool,
        "horizon": _optional(_as_float),
    }

    def __init__(
        self,
        lambdas: Optional[List[float]] = None,
        ps: Optional[List[float]] = None,
        kinds: Optional[List[str]] = None,
        coupled: bool = False,
        horizon: Optional[float] = None,
    ):
        self.lambdas = lambdas if lambdas is not None else [4.0]
        self.ps = ps if ps is not None else [0.9]
        self.kinds = kinds if kinds is not None else ["spont", "is", "cp"]
        self.coupled = coupled
        self.horizon = horizon

    def validate(self):
        _require(bool(self.lambdas), "sweep.lambdas", "the grid needs at least one lambda")
        _require(bool(self.ps), "sweep.ps", "the grid needs at least one p")
        _require(bool(self.kinds), "sweep.kinds", "the grid needs at least one kind")
        for value in self.lambdas:
            _require(value > 0 and math.isfinite(value), "sweep.lambdas", f"{value} is not positive")
        for value in self.ps:
            _require(0.0 <= value <= 1.0, "sweep.ps", f"{value} is outside [0, 1]")
        for kind in self.kinds:
            _require(kind in ("spont", "is", "cp"), "sweep.kinds", f"unknown kind '{kind}'")
        if self.horizon is not None:
            _require(self.horizon > 0, "sweep.horizon", "must be positive")

    def cells(self) -> List[tuple]:
        return [(lambda_, p) for lambda_ in self.lambdas for p in self.ps]

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        return cls(**_read(data, cls.FIELDS, "sweep"))


class AuditConfig:
    """Sizes of every structural audit, plus the fault-injection hook."""

    FIELDS = {
        "lambda": _as_float,
        "p": _as_float,
        "coupling_trials": _as_int,
        "coupling_horizon": _as_float,
        "path_trials": _as_int,
        "path_horizon": _as_float,
        "path_radius": _as_int,
        "discrepancy_trials": _as_int,
        "discrepancy_horizon": _as_float,
        "attractivity_trials": _as_int,
        "search_budget": _as_int,
        "monotonicity_trials": _as_int,
        "agreement_trials": _as_int,
        "truncation_radii": _list_of(_as_int),
        "check_radius": _as_int,
        "region_trials": _as_int,
        "region_horizon": _as_float,
        "renewal_trials": _as_int,
        "renewal_horizon": _as_float,
        "corrupt_replay": _as_bool,
    }

    def __init__(
        self,
        lambda_: float = 4.0,
        p: float = 0.9,
        coupling_trials: int = 1000,
        coupling_horizon: float = 20.0,
        path_trials: int = 200,
        path_horizon: float = 10.0,
        path_radius: int = 3,
        discrepancy_trials: int = 2000,
        discrepancy_horizon: float = 50.0,
        attractivity_trials: int = 1000,
        search_budget: int = 100_000,
        monotonicity_trials: int = 500,
        agreement_trials: int = 200,
        truncation_radii: Optional[List[int]] = None,
        check_radius: int = 5,
        region_trials: int = 200,
        region_horizon: float = 10.0,
        renewal_trials: int = 200,
        renewal_horizon: float = 30.0,
        corrupt_replay: bool = False,
    ):
        self.lambda_ = lambda_
        self.p = p
        self.coupling_trials = coupling_trials
        self.coupling_horizon = coupling_horizon
        self.path_trials = path_trials
        self.path_horizon = path_horizon
        self.path_radius = path_radius
        self.discrepancy_trials = discrepancy_trials
        self.discrepancy_horizon = discrepancy_horizon
        self.attractivity_trials = attractivity_trials
        self.search_budget = search_budget
        self.monotonicity_trials = monotonicity_trials
        self.agreement_trials = agreement_trials
        self.truncation_radii = truncation_radii if truncation_radii is not None else [20, 30, 40]
        self.check_radius = check_radius
        self.region_trials = region_trials
        self.region_horizon = region_horizon
        self.renewal_trials = renewal_trials
        self.renewal_horizon = renewal_horizon
        self.corrupt_replay = corrupt_replay

    def validate(self):
        _require(self.lambda_ > 0 and math.isfinite(self.lambda_), "audit.lambda", "must be positive")
        _require(0.0 <= self.p <= 1.0, "audit.p", "must lie in [0, 1]")
        for key, cast in self.FIELDS.items():
            value = self._get(key)
            if cast is _as_int:
                _require(value >= 0, f"audit.{key}", "must be >= 0")
            if cast is _as_float and key.endswith("horizon"):
                _require(value > 0, f"audit.{key}", "must be positive")
        _require(self.search_budget >= 1, "audit.search_budget", "must be at least 1")
        for n in self.truncation_radii:
            _require(n > self.check_radius, "audit.truncation_radii", f"box {n} does not contain the checked box")

    def set_trials(self, trials: int):
        """Use one trial count for every audit."""
        for key in self.FIELDS:
            if key.endswith("_trials"):
                setattr(self, key, trials)

    def _get(self, key: str):
        return getattr(self, "lambda_" if key == "lambda" else key)

    def to_dict(self) -> dict:
        return {key: self._get(key) for key in self.FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "AuditConfig":
        values = _read(data, cls.FIELDS, "audit")
        if "lambda" in values:
            values["lambda_"] = values.pop("lambda")
        return cls(**values)


class RunConfig:
    """Complete description of one command invocation.

    Args:
        kind: spont, is, cp or coupled
        lambda_: Infection rate
        p: Fertility probability
        initial: Initial configuration in its text form
        horizon: Final time T
        trials: Number of independent trials
        seed: Master seed every trial seed derives from
        guard: Renewals after horizon - guard are censored
        window_cap: Largest window any run may track
        output_dir: Directory receiving CSV, JSON and SVG files
        progress: Show progress bars
        workers: Worker processes for trial loops
        retain: full writes the first trial in full (trajectory, events, diagram); front writes summaries only
        diagram: Write an SVG space-time diagram from simulate
        horizons: Extra horizons for the speed convergence diagnostic
    """

    FIELDS = {
        "kind": str,
        "lambda": _as_float,
        "p": _as_float,
        "initial": str,
        "horizon": _as_float,
        "trials": _as_int,
        "seed": _as_int,
        "guard": _as_float,
        "window_cap": _as_int,
        "output_dir": str,
        "progress": _as_bool,
        "workers": _as_int,
        "retain": str,
        "diagram": _as_bool,
        "horizons": _list_of(_as_float),
    }
    SECTIONS = {"policy": PolicyConfig, "sweep": SweepConfig, "audit": AuditConfig}

    def __init__(
        self,
        kind: str = "spont",
        lambda_: float = 4.0,
        p: float = 0.95,
        initial: str = "single:0",
        horizon: float = 100.0,
        trials: int = 100,
        seed: int = 0,
        guard: float = 10.0,
        window_cap: int = DEFAULT_WINDOW_CAP,
        output_dir: str = "results",
        progress: bool = True,
        workers: int = 1,
        retain: str = "full",
        diagram: bool = False,
        horizons: Optional[List[float]] = None,
        policy: Optional[PolicyConfig] = None,
        sweep: Optional[SweepConfig] = None,
        audit: Optional[AuditConfig] = None,
    ):
        self.kind = kind
        self.lambda_ = lambda_
        self.p = p
        self.initial = initial
        self.horizon = horizon
        self.trials = trials
        self.seed = seed
        self.guard = guard
        self.window_cap = window_cap
        self.output_dir = output_dir
        self.progress = progress
        self.workers = workers
        self.retain = retain
        self.diagram = diagram
        self.horizons = horizons if horizons is not None else []
        self.policy = policy if policy is not None else PolicyConfig()
        self.sweep = sweep if sweep is not None else SweepConfig()
        self.audit = audit if audit is not None else AuditConfig()

    def validate(self) -> "RunConfig":
        """Check every field; raises ConfigError naming the first bad key."""
        _require(self.kind in KINDS, "kind", f"'{self.kind}' is not one of {list(KINDS)}")
        _require(self.lambda_ > 0 and math.isfinite(self.lambda_), "lambda", "must be positive and finite")
        _require(0.0 <= self.p <= 1.0, "p", "must lie in [0, 1]")
        _require(self.horizon >= 0 and math.isfinite(self.horizon), "horizon", "must be finite and >= 0")
        _require(self.trials >= 1, "trials", "must be at least 1")
        _require(0 <= self.seed < 1 << 64, "seed", "must be a 64-bit unsigned integer")
        _require(self.guard >= 0, "guard", "must be >= 0")
        _require(self.window_cap >= 1, "window_cap", "must be at least 1")
        _require(self.workers >= 1, "workers", "must be at least 1")
        _require(
            self.retain in {retain.value for retain in Retention},
            "retain",
            f"'{self.retain}' is not one of {[retain.value for retain in Retention]}",
        )
        for value in self.horizons:
            _require(value > 0, "horizons", f"{value} is not positive")
        try:
            InitialSpec.parse(self.initial)
        except SimulationError as e:
            raise ConfigError(f"invalid value for 'initial': {e}") from e
        self.policy.validate()
        self.sweep.validate()
        self.audit.validate()
        return self

    @property
    def process_kinds(self) -> List[ProcessKind]:
        if self.kind == "coupled":
            return list(ProcessKind)
        return [ProcessKind(self.kind)]

    def override(
        self,
        seed: Optional[int] = None,
        trials: Optional[int] = None,
        output_dir: Optional[str] = None,
    ) -> "RunConfig":
        """Apply command-line overrides and re-validate."""
        if seed is not None:
            self.seed = seed
        if trials is not None:
            self.trials = trials
        if output_dir is not None:
            self.output_dir = output_dir
        return self.validate()

    def to_dict(self) -> dict:
        data = {key: getattr(self, "lambda_" if key == "lambda" else key) for key in self.FIELDS}
        for name in self.SECTIONS:
            data[name] = getattr(self, name).to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a table of keys")
        flat = {key: value for key, value in data.items() if key not in cls.SECTIONS}
        values = _read(flat, cls.FIELDS, "")
        if "lambda" in values:
            values["lambda_"] = values.pop("lambda")
        for name, section in cls.SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"'{name}' must be a table")
            values[name] = section.from_dict(raw)
        return cls(**values).validate()

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"RunConfig({json.dumps(self.to_dict(), sort_keys=True)})"


def _parse_file(config_file: Path) -> dict:
    try:
        if config_file.suffix == ".json":
            with open(config_file, "r") as f:
                return json.load(f)
        if tomllib is None:
            raise ConfigError(f"cannot read {config_file}: TOML configs need the tomli package before Python 3.11")
        with open(config_file, "rb") as f:
            return tomllib.load(f)
    except ValueError as e:
        raise ConfigError(f"cannot parse {config_file}: {e}") from e


def load_config(config_path: Optional[str] = None) -> RunConfig:
    """
    Load a run configuration from a TOML or JSON file.

    Priority order:
    1. Specified config file path
    2. sim.toml, then sim.json, in the current directory
    3. Built-in defaults

    SIM_SEED, SIM_OUTPUT_DIR and SIM_WORKERS fill in fields the file leaves unset.

    Args:
        config_path: Optional path to config file

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing, unreadable or invalid
    """
    config_data: Dict[str, Any] = {}
    if config_path:
        config_file = Path(config_path)
        if not config_file.exists():
            raise ConfigError(f"config file {config_file} does not exist")
    else:
        config_file = next((Path(name) for name in DEFAULT_FILES if Path(name).exists()), None)

    if config_file is not None:
        config_data = _parse_file(config_file)
        logger.debug(f"Loaded configuration from {config_file}")
    else:
        logger.debug("No configuration file found, using defaults")

    for key, env_var in (("seed", "SIM_SEED"), ("output_dir", "SIM_OUTPUT_DIR"), ("workers", "SIM_WORKERS")):
        if config_data.get(key) is None and os.environ.get(env_var):
            config_data[key] = os.environ[env_var]

    return RunConfig.from_dict(config_data)
