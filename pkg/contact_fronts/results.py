"""CSV tables and summary JSON written by the commands."""

import csv
import json
import math
import os
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import Trajectory
from .errors import ConfigError
from .renewal import IncrementSample, RenewalRecord
from .runner import trial_seeds

SUMMARY_SCHEMA = "summary:1"

SCHEMAS = {
    "trajectory": (1, ("time", "site", "new_state")),
    "renewals": (1, ("run_id", "k", "sigma", "r_sigma", "censored")),
    "increments": (1, ("run_id", "k", "d_sigma", "d_r")),
    "sweep": (
        1,
        (
            "kind",
            "lambda",
            "p",
            "horizon",
            "trials",
            "n_surviving",
            "survival",
            "survival_lo",
            "survival_hi",
            "speed",
            "speed_se",
            "ordering_violations",
        ),
    ),
}


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: str, schema: str, rows: Iterable[Sequence]) -> int:
    """Write ``rows`` under the named schema.

    Args:
        path: Output file
        schema: Key of SCHEMAS
        rows: Sequences matching the schema header

    Returns:
        Number of data rows written
    """
    version, header = SCHEMAS[schema]
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"#schema={schema}:{version}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{schema} rows need {len(header)} columns, got {len(row)}")
            writer.writerow([_cell(value) for value in row])
            count += 1
    return count


def read_csv(path: str) -> Tuple[str, List[str], List[List[str]]]:
    """Schema tag, header and raw rows of a file written by :func:`write_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        first = f.readline().strip()
        if not first.startswith("#schema="):
            raise ValueError(f"{path} has no schema line")
        reader = csv.reader(f)
        header = next(reader)
        return first[len("#schema="):], header, list(reader)


def trajectory_rows(traj: Trajectory) -> List[tuple]:
    """Initial window at the start time followed by every delta."""
    if not traj.retained:
        raise ConfigError("trajectory output needs retain = 'full'")
    rows = [(traj.start, site, state) for site, state in sorted(traj.initial.as_dict().items())]
    rows += [(time, site, state) for time, site, state in traj.deltas]
    return rows


def renewal_rows(records: Iterable[RenewalRecord]) -> List[tuple]:
    return [row for record in records for row in record.rows()]


def increment_rows(samples: Iterable[IncrementSample]) -> List[tuple]:
    return [(s.run_id, s.index, s.d_sigma, s.d_r) for s in samples]


def json_safe(value: Any) -> Any:
    """Plain JSON types only; non-finite floats become None."""
    if hasattr(value, "to_dict"):
        return json_safe(value.to_dict())
    if isinstance(value, dict):
        return {str(key): json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return [json_safe(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def seed_manifest(master_seed: int, trials: int) -> dict:
    """Trial index to derived seed, as written into every summary."""
    return {str(i): seed for i, seed in enumerate(trial_seeds(master_seed, trials))}


class SummaryManager:
    """Builds and stores the summary JSON of one command."""

    def __init__(self, output_dir: str, filename: str = "summary.json"):
        self.output_dir = output_dir
        self.summary_file = os.path.join(output_dir, filename)
        self._summary: Optional[dict] = None

    def load(self) -> dict:
        """Load an existing summary, or start an empty one."""
        if os.path.exists(self.summary_file):
            with open(self.summary_file, "r") as f:
                self._summary = json.load(f)
            return self._summary

        self._summary = self._empty()
        return self._summary

    def start(self, params: dict, master_seed: int, trials: int) -> dict:
        """Begin a fresh summary for one run."""
        self._summary = self._empty()
        self._summary["params"] = params
        self._summary["seed_manifest"] = seed_manifest(master_seed, trials)
        return self._summary

    def get(self) -> dict:
        if self._summary is None:
            self.load()
        return self._summary

    def record(self, section: str, key: str, value: Any):
        """Store ``value`` under ``section`` ("estimates" or "diagnostics")."""
        self.get().setdefault(section, {})[key] = value

    def save(self):
        if self._summary is not None:
            os.makedirs(self.output_dir, exist_ok=True)
            with open(self.summary_file, "w") as f:
                json.dump(json_safe(self._summary), f, indent=2, sort_keys=True)
                f.write("\n")

    @staticmethod
    def _empty() -> dict:
        return {
            "params": {},
            "estimates": {},
            "diagnostics": {},
            "seed_manifest": {},
            "schema": SUMMARY_SCHEMA,
        }
