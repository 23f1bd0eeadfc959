"""Event-driven replay of the Spont, inherited-sterility and contact dynamics.

A :class:`LatticeProcess` keeps a dense window of explicitly tracked sites
that always contains every occupied site and its two neighbours. Sites outside
the window cannot interact with anything: their state depends only on their
own healing marks and, for Spont, on the blocking arrows landing on them. When
the window has to grow at time ``u``, the new site's history on ``(start, u]``
is replayed from those marks, so the result does not depend on when or in
which order sites were added.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import OutOfHorizonError, PreconditionError, WindowOverflowError
from .events import ArrowKind, EventLog, Events, ObjectKey, keys_into, merged_arrivals
from .lattice import (
    BLOCKED,
    EMPTY,
    OCCUPIED,
    BoundaryPolicy,
    Configuration,
    InitialSpec,
    ProcessKind,
    TailKind,
    make_initial,
)

DEFAULT_WINDOW_CAP = 1_000_000

FERTILE = int(ArrowKind.FERTILE)
BLOCKING = int(ArrowKind.BLOCKING)
HEALING = int(ArrowKind.HEALING)

Delta = Tuple[float, int, int]


class Retention(str, Enum):
    """How much of a run is kept: every delta, or only the front paths."""

    FULL = "full"
    FRONT = "front"


def apply_rule(kind: ProcessKind, mark: int, source: int, target: int) -> Optional[int]:
    """New state of the target site after one mark, or None if nothing changes."""
    if mark == HEALING:
        return EMPTY if target != EMPTY else None
    if target != EMPTY:
        return None
    if mark == FERTILE:
        return OCCUPIED if source == OCCUPIED else None
    if kind == ProcessKind.SPONT:
        return BLOCKED
    if kind == ProcessKind.IS and source == OCCUPIED:
        return BLOCKED
    return None


class AutonomousTail:
    """States of sites a process never interacted with."""

    def __init__(self, kind: ProcessKind, events: Events, start: float, policy: BoundaryPolicy):
        self.kind = kind
        self.events = events
        self.start = start
        self.policy = policy

    def _keys(self, site: int) -> List[ObjectKey]:
        keys = [ObjectKey.healing(site)]
        if self.kind == ProcessKind.SPONT:
            keys += [ObjectKey.blocking(site - 1, site), ObjectKey.blocking(site + 1, site)]
        return keys

    def history(self, site: int, until: float) -> Tuple[int, List[Tuple[float, int]]]:
        """Initial state and the state changes of ``site`` on (start, until]."""
        initial = self.policy.tail_state(site)
        if self.policy.clamp is not None and site <= self.policy.clamp:
            return initial, []
        if until <= self.start:
            return initial, []

        keys = sorted(self._keys(site))
        times, owners = merged_arrivals(self.events, keys, self.start, until)
        state = initial
        changes = []
        for time, owner in zip(times.tolist(), owners.tolist()):
            new = apply_rule(self.kind, int(keys[owner].kind), EMPTY, state)
            if new is not None:
                state = new
                changes.append((time, new))
        return initial, changes

    def state_at(self, site: int, time: float) -> int:
        initial, changes = self.history(site, min(time, self.events.horizon))
        return changes[-1][1] if changes else initial


class FrozenTail:
    """Sites outside a truncated box keep one fixed state."""

    def __init__(self, state: int = EMPTY):
        self.state = state

    def state_at(self, site: int, time: float) -> int:
        return self.state


class Trajectory:
    """Immutable record of one run: initial configuration plus ordered deltas."""

    def __init__(
        self,
        kind: ProcessKind,
        initial: Configuration,
        deltas: Optional[List[Delta]],
        start: float,
        end: float,
        horizon: float,
        window: Tuple[int, int],
        front: Tuple[List[float], List[Optional[int]]],
        left_front: Tuple[List[float], List[Optional[int]]],
        extinction_time: Optional[float],
        tail,
        tie_count: int = 0,
    ):
        self.kind = ProcessKind(kind)
        self.initial = initial
        self.deltas = deltas
        self.start = start
        self.end = end
        self.horizon = horizon
        self.window = window
        self.front_times, self.front_sites = front
        self.left_times, self.left_sites = left_front
        self.extinction_time = extinction_time
        self.tail = tail
        self.tie_count = tie_count
        self._histories: Optional[Dict[int, Tuple[List[float], List[int]]]] = None

    @property
    def retained(self) -> bool:
        return self.deltas is not None

    def _require_deltas(self):
        if self.deltas is None:
            raise PreconditionError("this trajectory kept only its front paths")

    def _build_histories(self) -> Dict[int, Tuple[List[float], List[int]]]:
        self._require_deltas()
        if self._histories is None:
            histories: Dict[int, Tuple[List[float], List[int]]] = {}
            for time, site, state in self.deltas:
                if site not in histories:
                    histories[site] = ([self.start], [self.initial.state(site)])
                histories[site][0].append(time)
                histories[site][1].append(state)
            self._histories = histories
        return self._histories

    def in_window(self, site: int) -> bool:
        return self.window[0] <= site <= self.window[1]

    def site_history(self, site: int) -> Tuple[List[float], List[int]]:
        """Change times (starting with ``start``) and states of one site."""
        histories = self._build_histories()
        if site in histories:
            return histories[site]
        if self.in_window(site):
            return [self.start], [self.initial.state(site)]
        if isinstance(self.tail, AutonomousTail):
            initial, changes = self.tail.history(site, self.end)
            return [self.start] + [t for t, _ in changes], [initial] + [s for _, s in changes]
        return [self.start], [self.tail.state_at(site, self.start)]

    def state_at(self, site: int, time: float) -> int:
        """Right-continuous state of ``site`` at ``time``."""
        times, states = self.site_history(site)
        return states[max(bisect_right(times, time) - 1, 0)]

    def state_before(self, site: int, time: float) -> int:
        """Left limit of the state of ``site`` at ``time``."""
        times, states = self.site_history(site)
        return states[max(bisect_left(times, time) - 1, 0)]

    def change_times(self) -> List[float]:
        self._require_deltas()
        return sorted({time for time, _, _ in self.deltas})

    def rightmost_at(self, time: float) -> Optional[int]:
        return self.front_sites[max(bisect_right(self.front_times, time) - 1, 0)]

    def leftmost_at(self, time: float) -> Optional[int]:
        return self.left_sites[max(bisect_right(self.left_times, time) - 1, 0)]

    def rightmost_path(self) -> Tuple[List[float], List[Optional[int]]]:
        return list(self.front_times), list(self.front_sites)

    def occupied_at(self, time: float) -> List[int]:
        histories = self._build_histories()
        lo, hi = self.window
        return [
            x
            for x in range(lo, hi + 1)
            if (self.state_at(x, time) if x in histories else self.initial.state(x)) == OCCUPIED
        ]

    def configuration_at(self, time: float) -> Configuration:
        """Window snapshot at ``time``; the tail keeps the initial policy."""
        lo, hi = self.window
        return Configuration(
            lo, [self.state_at(x, time) for x in range(lo, hi + 1)], self.initial.policy
        )

    @property
    def extinct(self) -> bool:
        return self.extinction_time is not None


class ExtinctionReport:
    """First time without occupied sites, or censored at the horizon."""

    def __init__(self, tau: Optional[float], horizon: float):
        self.tau = tau
        self.horizon = horizon

    @property
    def censored(self) -> bool:
        return self.tau is None

    def __repr__(self) -> str:
        if self.censored:
            return f"ExtinctionReport(Censored({self.horizon}))"
        return f"ExtinctionReport(tau={self.tau})"


class LatticeProcess:
    """Steppable replay of one process over a lazily growing window."""

    def __init__(
        self,
        kind: ProcessKind,
        initial: Configuration,
        events: Events,
        start: Optional[float] = None,
        end: Optional[float] = None,
        window_cap: int = DEFAULT_WINDOW_CAP,
        retain: Retention = Retention.FULL,
    ):
        self.kind = ProcessKind(kind)
        self.events = events
        self.start = events.start if start is None else float(start)
        self.end = events.horizon if end is None else float(end)
        if self.start < 0.0 or self.end > events.horizon or self.start > self.end:
            raise OutOfHorizonError(
                f"interval [{self.start}, {self.end}] leaves [0, {events.horizon}]"
            )
        if self.kind == ProcessKind.CP and (
            initial.policy.kind == TailKind.BLOCKED or initial.states.min() < EMPTY
        ):
            raise PreconditionError("contact process configurations take values in {0, 1}")

        self.initial = initial
        self.policy = initial.policy
        self.window_cap = window_cap
        self.retain = Retention(retain)
        self._clamp = self.policy.clamp
        self._tail = AutonomousTail(self.kind, events, self.start, self.policy)
        self._marks = (
            (FERTILE, HEALING) if self.kind == ProcessKind.CP else (FERTILE, BLOCKING, HEALING)
        )

        self._buf: List[int] = [int(v) for v in initial.states]
        self._base = initial.lo
        self._lo = initial.lo
        self._hi = initial.hi
        self._heap: list = []
        self._arrivals: Dict[int, Tuple[List[float], List[int], List[int]]] = {}

        self.time = self.start
        self.tie_count = 0
        self.deltas: Optional[List[Delta]] = [] if self.retain == Retention.FULL else None

        occupied = [x for x in range(self._lo, self._hi + 1) if self._buf[x - self._base] == OCCUPIED]
        self._count = len(occupied)
        self._r = occupied[-1] if occupied else self._clamp
        self._l = occupied[0] if occupied and self._clamp is None else None
        self.front_times: List[float] = [self.start]
        self.front_sites: List[Optional[int]] = [self._r]
        self.left_times: List[float] = [self.start]
        self.left_sites: List[Optional[int]] = [self._l]
        self.extinction_time: Optional[float] = (
            self.start if self._count == 0 and self._clamp is None else None
        )

        for site in range(self._lo, self._hi + 1):
            self._register(site, self.start)
        if occupied:
            self._cover(occupied[0], self.start)
            self._cover(occupied[-1], self.start)

    # window management

    @property
    def window(self) -> Tuple[int, int]:
        return self._lo, self._hi

    @property
    def rightmost(self) -> Optional[int]:
        return self._r

    @property
    def leftmost(self) -> Optional[int]:
        return self._l

    @property
    def occupied_count(self) -> int:
        return self._count

    @property
    def alive(self) -> bool:
        return self._count > 0 or self._clamp is not None

    def _register(self, site: int, after: float):
        self.events.extend_window(site)
        keys = sorted(key for key in keys_into(site) if key.kind in self._marks)
        times, owners = merged_arrivals(self.events, keys, after, self.end)
        if not times.size:
            return
        marks = [int(keys[o].kind) for o in owners.tolist()]
        origins = [keys[o].origin for o in owners.tolist()]
        times = times.tolist()
        self._arrivals[site] = (times, marks, origins)
        heapq.heappush(self._heap, (times[0], marks[0], origins[0], site, 0))

    def _add_site(self, site: int, now: float) -> int:
        if self._hi - self._lo + 2 > self.window_cap:
            raise WindowOverflowError(
                f"window would exceed {self.window_cap} sites at time {now:.6g}"
            )
        initial, changes = self._tail.history(site, now)
        if self.deltas is not None:
            self.deltas.extend((time, site, state) for time, state in changes)
        return changes[-1][1] if changes else initial

    def _extend_right(self, now: float):
        site = self._hi + 1
        state = self._add_site(site, now)
        self._buf.append(state)
        self._hi = site
        self._register(site, now)

    def _extend_left(self, now: float):
        site = self._lo - 1
        state = self._add_site(site, now)
        if site < self._base:
            pad = max(len(self._buf), 16)
            self._buf[:0] = [EMPTY] * pad
            self._base -= pad
        self._buf[site - self._base] = state
        self._lo = site
        self._register(site, now)

    def _cover(self, site: int, now: float):
        """Make sure both neighbours of an occupied site are tracked."""
        while site + 1 > self._hi:
            self._extend_right(now)
        while site - 1 < self._lo and (self._clamp is None or site - 1 > self._clamp):
            self._extend_left(now)

    def _occupied(self, site: int) -> bool:
        if self._lo <= site <= self._hi:
            return self._buf[site - self._base] == OCCUPIED
        return self._clamp is not None and site <= self._clamp

    def state(self, site: int) -> int:
        """Current state of any site."""
        if self._lo <= site <= self._hi:
            return self._buf[site - self._base]
        return self._tail.state_at(site, self.time)

    # stepping

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def peek(self) -> Optional[Tuple[float, int, int, int]]:
        """Next arrival as (time, mark, origin, site) without applying it."""
        return self._heap[0][:4] if self._heap else None

    def step(self) -> Optional[Tuple[int, int, int, int]]:
        """Apply the next arrival.

        Returns:
            (mark, origin, site, new_state) when a state changed, otherwise None
        """
        time, mark, origin, site, index = heapq.heappop(self._heap)
        if time == self.time and time > self.start:
            self.tie_count += 1
        self.time = time

        times, marks, origins = self._arrivals[site]
        if index + 1 < len(times):
            heapq.heappush(
                self._heap, (times[index + 1], marks[index + 1], origins[index + 1], site, index + 1)
            )

        slot = site - self._base
        current = self._buf[slot]
        if mark == HEALING:
            if current == EMPTY:
                return None
            new = EMPTY
        elif current != EMPTY:
            return None
        elif mark == FERTILE:
            if not self._occupied(origin):
                return None
            new = OCCUPIED
        else:
            if self.kind == ProcessKind.IS and not self._occupied(origin):
                return None
            new = BLOCKED

        self._buf[slot] = new
        if self.deltas is not None:
            self.deltas.append((time, site, new))
        if new == OCCUPIED:
            self._gain(site, time)
        elif current == OCCUPIED:
            self._lose(site, time)
        return mark, origin, site, new

    def _gain(self, site: int, time: float):
        self._count += 1
        if self._r is None or site > self._r:
            self._r = site
            self.front_times.append(time)
            self.front_sites.append(site)
        if self._clamp is None and (self._l is None or site < self._l):
            self._l = site
            self.left_times.append(time)
            self.left_sites.append(site)
        self._cover(site, time)

    def _lose(self, site: int, time: float):
        self._count -= 1
        if site == self._r:
            self._r = self._scan(site - 1, self._lo - 1, -1)
            if self._r is None:
                self._r = self._clamp
            self.front_times.append(time)
            self.front_sites.append(self._r)
        if site == self._l:
            self._l = self._scan(site + 1, self._hi + 1, 1)
            self.left_times.append(time)
            self.left_sites.append(self._l)
        if self._count == 0 and self._clamp is None:
            self.extinction_time = time
            if self.retain == Retention.FRONT:
                self._heap.clear()

    def _scan(self, first: int, stop: int, step: int) -> Optional[int]:
        for x in range(first, stop, step):
            if self._buf[x - self._base] == OCCUPIED:
                return x
        return None

    def run(self, until: Optional[float] = None) -> "LatticeProcess":
        """Apply every arrival up to and including ``until``."""
        until = self.end if until is None else until
        heap = self._heap
        while heap and heap[0][0] <= until:
            self.step()
        return self

    def trajectory(self) -> Trajectory:
        deltas = None
        if self.deltas is not None:
            deltas = sorted(self.deltas, key=lambda delta: delta[0])
        return Trajectory(
            kind=self.kind,
            initial=self.initial,
            deltas=deltas,
            start=self.start,
            end=self.end,
            horizon=self.events.horizon,
            window=self.window,
            front=(list(self.front_times), list(self.front_sites)),
            left_front=(list(self.left_times), list(self.left_sites)),
            extinction_time=self.extinction_time,
            tail=self._tail,
            tie_count=self.tie_count,
        )


def evolve(
    kind: ProcessKind,
    c0: Configuration,
    events: Events,
    interval: Optional[Tuple[float, float]] = None,
    window_cap: int = DEFAULT_WINDOW_CAP,
    retain: Retention = Retention.FULL,
) -> Trajectory:
    """Replay the arrivals of ``events`` on ``interval`` starting from ``c0``.

    Args:
        kind: Which dynamics to apply
        c0: Configuration at the start of the interval
        events: Event log or restricted view
        interval: (s, t); defaults to (events.start, horizon)
        window_cap: Largest number of tracked sites
        retain: Keep every delta, or only front paths

    Returns:
        Trajectory of the run on [s, t]

    Raises:
        OutOfHorizonError: If the interval leaves [0, horizon]
        WindowOverflowError: If the window outgrows ``window_cap``
    """
    start, end = interval if interval is not None else (events.start, events.horizon)
    process = LatticeProcess(kind, c0, events, start, end, window_cap, retain)
    return process.run(end).trajectory()


def evolve_coupled(
    xi0: Configuration,
    eta0: Configuration,
    zeta0: Configuration,
    events: EventLog,
    interval: Optional[Tuple[float, float]] = None,
    window_cap: int = DEFAULT_WINDOW_CAP,
    retain: Retention = Retention.FULL,
) -> Tuple[Trajectory, Trajectory, Trajectory]:
    """Spont, inherited-sterility and contact runs on one shared log."""
    if zeta0.policy.kind == TailKind.BLOCKED or zeta0.states.min() < EMPTY:
        raise PreconditionError("the contact process start must take values in {0, 1}")
    if not xi0.dominated_by(eta0):
        raise PreconditionError("Spont start is not below the inherited-sterility start")
    if not eta0.dominated_by(zeta0):
        raise PreconditionError("inherited-sterility start is not below the contact start")
    return (
        evolve(ProcessKind.SPONT, xi0, events, interval, window_cap, retain),
        evolve(ProcessKind.IS, eta0, events, interval, window_cap, retain),
        evolve(ProcessKind.CP, zeta0, events, interval, window_cap, retain),
    )


def extinction_time(traj: Trajectory) -> ExtinctionReport:
    """First time the run had no occupied site, censored at its end."""
    return ExtinctionReport(traj.extinction_time, traj.end)


def front_paths(initial: Dict[int, int], deltas: Sequence[Delta], start: float):
    """Rightmost and leftmost paths and extinction time from an ordered delta list."""
    occupied = {x for x, state in initial.items() if state == OCCUPIED}
    right = max(occupied) if occupied else None
    left = min(occupied) if occupied else None
    front = ([start], [right])
    left_front = ([start], [left])
    extinct = start if not occupied else None
    for time, site, state in deltas:
        if state == OCCUPIED:
            occupied.add(site)
        elif site in occupied:
            occupied.discard(site)
        else:
            continue
        new_right = max(occupied) if occupied else None
        new_left = min(occupied) if occupied else None
        if new_right != right:
            right = new_right
            front[0].append(time)
            front[1].append(right)
        if new_left != left:
            left = new_left
            left_front[0].append(time)
            left_front[1].append(left)
        if not occupied and extinct is None:
            extinct = time
    return front, left_front, extinct


class TrialSpec:
    """Everything needed to rebuild one trial: rates, start and seed."""

    def __init__(
        self,
        lambda_: float,
        p: float,
        initial: InitialSpec,
        seed: int,
        window_cap: int = DEFAULT_WINDOW_CAP,
    ):
        self.lambda_ = lambda_
        self.p = p
        self.initial = initial
        self.seed = seed
        self.window_cap = window_cap

    def event_log(self, horizon: float) -> EventLog:
        return EventLog(self.seed, self.lambda_, self.p, horizon)

    def initial_configuration(self, horizon: float) -> Configuration:
        return make_initial(self.initial, self.lambda_, horizon)
