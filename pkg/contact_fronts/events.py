"""Harris graphical construction as keyed, reproducible Poisson streams.

Every lattice object (a directed nearest-neighbour arrow of either type, or a
healing mark of a site) owns one Poisson stream. A stream is a pure function of
``(master_seed, key)``: it is drawn from a Philox generator keyed by a hash of
both, so streams can be realised in any order, on demand, and always come out
bit-identical. This is what lets the lattice engine grow its window lazily
without changing the realisation.
"""

from __future__ import annotations

import json
import math
import threading
from enum import IntEnum
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Union

import numpy as np

from .errors import InvalidParameterError, OutOfHorizonError
from .utils import SEED_LIMIT, stream_key

_EMPTY = np.empty(0, dtype=np.float64)
_EMPTY.setflags(write=False)


class ArrowKind(IntEnum):
    """Kinds of marks in the graphical construction, in tie-break order."""

    FERTILE = 0
    BLOCKING = 1
    HEALING = 2


class ObjectKey(NamedTuple):
    """Identifies one Poisson stream; tuple order is the tie-break order."""

    kind: ArrowKind
    origin: int
    target: int

    @classmethod
    def healing(cls, site: int) -> "ObjectKey":
        return cls(ArrowKind.HEALING, site, site)

    @classmethod
    def fertile(cls, origin: int, target: int) -> "ObjectKey":
        return cls(ArrowKind.FERTILE, origin, target)

    @classmethod
    def blocking(cls, origin: int, target: int) -> "ObjectKey":
        return cls(ArrowKind.BLOCKING, origin, target)

    @classmethod
    def coerce(cls, key) -> "ObjectKey":
        """Build a checked key from an ObjectKey or a (kind, origin, target) tuple."""
        kind, origin, target = key
        checked = cls(ArrowKind(kind), int(origin), int(target))
        if checked.kind == ArrowKind.HEALING:
            if checked.origin != checked.target:
                raise InvalidParameterError(f"healing key must have origin == target: {key}")
        elif abs(checked.origin - checked.target) != 1:
            raise InvalidParameterError(f"arrow key must join nearest neighbours: {key}")
        return checked

    def label(self) -> str:
        return f"{self.kind.name.lower()}:{self.origin}->{self.target}"


def keys_into(site: int) -> List[ObjectKey]:
    """Keys of every mark that can change the state of ``site``."""
    keys = [ObjectKey.healing(site)]
    for neighbour in (site - 1, site + 1):
        keys.append(ObjectKey.fertile(neighbour, site))
        keys.append(ObjectKey.blocking(neighbour, site))
    return keys


def keys_touching(site: int) -> List[ObjectKey]:
    """Keys of every stream with ``site`` as origin or target."""
    keys = keys_into(site)
    for neighbour in (site - 1, site + 1):
        keys.append(ObjectKey.fertile(site, neighbour))
        keys.append(ObjectKey.blocking(site, neighbour))
    return keys


def _check_parameters(master_seed: int, lambda_: float, p: float, horizon: float):
    if not 0 <= master_seed < SEED_LIMIT:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {master_seed}")
    if not lambda_ > 0 or math.isinf(lambda_):
        raise InvalidParameterError(f"lambda must be positive and finite, got {lambda_}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    if not horizon >= 0 or math.isinf(horizon):
        raise InvalidParameterError(f"horizon must be finite and >= 0, got {horizon}")


class EventLog:
    """Lazily realised graphical construction for one trial on [0, horizon]."""

    start = 0.0

    def __init__(
        self,
        master_seed: int,
        lambda_: float,
        p: float,
        horizon: float,
        scripted: Optional[Dict[ObjectKey, np.ndarray]] = None,
    ):
        _check_parameters(master_seed, lambda_, p, horizon)
        self.master_seed = int(master_seed)
        self.lambda_ = float(lambda_)
        self.p = float(p)
        self.horizon = float(horizon)
        self.realized: Dict[ObjectKey, np.ndarray] = {}
        self._scripted = scripted
        self._lock = threading.Lock()

    @classmethod
    def scripted(
        cls,
        streams: Mapping,
        lambda_: float = 1.0,
        p: float = 1.0,
        horizon: float = 1.0,
        master_seed: int = 0,
    ) -> "EventLog":
        """Build a hand-written log: listed keys get the given times, all others none.

        Args:
            streams: Mapping of ObjectKey (or (kind, origin, target) tuple) to arrival times
            lambda_: Nominal lambda, only reported back through ``rate``
            p: Nominal p
            horizon: Log horizon; every given time must lie in [0, horizon]
            master_seed: Seed recorded on the log

        Returns:
            EventLog whose streams never touch a random generator
        """
        checked: Dict[ObjectKey, np.ndarray] = {}
        for raw_key, raw_times in streams.items():
            key = ObjectKey.coerce(raw_key)
            times = np.asarray(sorted(float(t) for t in raw_times), dtype=np.float64)
            if times.size and (times[0] < 0.0 or times[-1] > horizon):
                raise OutOfHorizonError(f"scripted arrivals of {key.label()} leave [0, {horizon}]")
            if np.any(np.diff(times) <= 0.0):
                raise InvalidParameterError(f"scripted arrivals of {key.label()} repeat a time")
            times.setflags(write=False)
            checked[key] = times
        return cls(master_seed, lambda_, p, horizon, scripted=checked)

    @property
    def is_scripted(self) -> bool:
        return self._scripted is not None

    def rate(self, kind: ArrowKind) -> float:
        """Intensity of one stream of the given kind."""
        if kind == ArrowKind.FERTILE:
            return self.lambda_ * self.p
        if kind == ArrowKind.BLOCKING:
            return self.lambda_ * (1.0 - self.p)
        return 1.0

    def stream(self, key) -> np.ndarray:
        """All arrivals of ``key`` in [0, horizon], realising the stream if needed."""
        key = ObjectKey.coerce(key) if not isinstance(key, ObjectKey) else key
        times = self.realized.get(key)
        if times is None:
            with self._lock:
                times = self.realized.get(key)
                if times is None:
                    times = self._generate(key)
                    self.realized[key] = times
        return times

    def _generate(self, key: ObjectKey) -> np.ndarray:
        if self._scripted is not None:
            return self._scripted.get(key, _EMPTY)

        rate = self.rate(key.kind)
        if rate <= 0.0 or self.horizon <= 0.0:
            return _EMPTY

        philox = np.random.Philox(key=stream_key(self.master_seed, int(key.kind), key.origin, key.target))
        generator = np.random.Generator(philox)
        mean = rate * self.horizon
        chunk = int(mean + 4.0 * math.sqrt(mean)) + 8

        pieces = []
        clock = 0.0
        while True:
            arrivals = clock + np.cumsum(generator.standard_exponential(chunk) / rate)
            if arrivals[-1] > self.horizon:
                pieces.append(arrivals[arrivals <= self.horizon])
                break
            pieces.append(arrivals)
            clock = arrivals[-1]

        times = np.concatenate(pieces)
        times.setflags(write=False)
        return times

    def _check_interval(self, a: float, b: float):
        if a < 0.0 or b > self.horizon:
            raise OutOfHorizonError(f"interval [{a}, {b}] leaves [0, {self.horizon}]")
        if a > b:
            raise InvalidParameterError(f"interval [{a}, {b}] is reversed")

    def arrivals(self, key, a: float, b: float, left_open: bool = False) -> np.ndarray:
        """Arrivals of ``key`` in [a, b], or (a, b] when ``left_open``."""
        self._check_interval(a, b)
        times = self.stream(key)
        lo = np.searchsorted(times, a, side="right" if left_open else "left")
        hi = np.searchsorted(times, b, side="right")
        return times[lo:hi]

    def first_arrival(self, key, a: float, b: float, left_open: bool = True) -> Optional[float]:
        """Earliest arrival of ``key`` in (a, b] (or [a, b]), None if there is none."""
        times = self.arrivals(key, a, b, left_open=left_open)
        return float(times[0]) if times.size else None

    def restrict(self, s: float) -> "RestrictedView":
        """View of the construction restricted to [s, horizon]."""
        if s < 0.0 or s > self.horizon:
            raise OutOfHorizonError(f"restriction time {s} leaves [0, {self.horizon}]")
        return RestrictedView(self, s)

    def extend_window(self, site: int):
        """Realise every stream touching ``site``; already realised streams are untouched."""
        for key in keys_touching(site):
            self.stream(key)

    def to_records(self) -> List[dict]:
        """Realised streams as JSON-ready records, in key order."""
        return [
            {
                "kind": key.kind.name.lower(),
                "origin": key.origin,
                "target": key.target,
                "times": [float(t) for t in self.realized[key]],
            }
            for key in sorted(self.realized)
        ]

    def dump(self, path: str):
        """Write the realised streams to a JSON file."""
        with open(path, "w") as f:
            json.dump(self.to_records(), f, indent=2)


class RestrictedView:
    """The construction with every arrival before ``start`` removed."""

    def __init__(self, base: EventLog, start: float):
        self.base = base
        self.start = float(start)

    @property
    def master_seed(self) -> int:
        return self.base.master_seed

    @property
    def lambda_(self) -> float:
        return self.base.lambda_

    @property
    def p(self) -> float:
        return self.base.p

    @property
    def horizon(self) -> float:
        return self.base.horizon

    @property
    def is_scripted(self) -> bool:
        return self.base.is_scripted

    def rate(self, kind: ArrowKind) -> float:
        return self.base.rate(kind)

    def stream(self, key) -> np.ndarray:
        times = self.base.stream(key)
        return times[np.searchsorted(times, self.start, side="left"):]

    def arrivals(self, key, a: float, b: float, left_open: bool = False) -> np.ndarray:
        self.base._check_interval(a, b)
        if b < self.start:
            return _EMPTY
        if a < self.start:
            a, left_open = self.start, False
        return self.base.arrivals(key, a, b, left_open=left_open)

    def first_arrival(self, key, a: float, b: float, left_open: bool = True) -> Optional[float]:
        times = self.arrivals(key, a, b, left_open=left_open)
        return float(times[0]) if times.size else None

    def restrict(self, s: float) -> "RestrictedView":
        if s < 0.0 or s > self.horizon:
            raise OutOfHorizonError(f"restriction time {s} leaves [0, {self.horizon}]")
        return RestrictedView(self.base, max(self.start, s))

    def extend_window(self, site: int):
        self.base.extend_window(site)


Events = Union[EventLog, RestrictedView]


def build_event_log(seed: int, lambda_: float, p: float, horizon: float) -> EventLog:
    """Create the lazily realised construction for one trial."""
    return EventLog(seed, lambda_, p, horizon)


def merged_arrivals(events: Events, keys: Iterable[ObjectKey], a: float, b: float):
    """Arrivals of several streams in (a, b], sorted by (time, key).

    Returns:
        Tuple of (times, key indices) arrays; indices refer to ``sorted(keys)``
    """
    keys = sorted(keys)
    chunks = [events.arrivals(key, a, b, left_open=True) for key in keys]
    if not chunks:
        return _EMPTY, np.empty(0, dtype=np.int64)
    times = np.concatenate(chunks)
    owners = np.repeat(np.arange(len(keys)), [chunk.size for chunk in chunks])
    order = np.lexsort((owners, times))
    return times[order], owners[order]
