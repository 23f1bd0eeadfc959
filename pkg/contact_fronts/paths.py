"""Active infection paths, the leftmost active path and the never-healed frontier.

A path is a step function on [s, t] that never sits on a site through one of
its healing marks and only jumps along fertile arrows. It is *active* for a
trajectory when it never visits a Blocked site. Reachability is decided by a
forward sweep over the arrivals of a site range, keeping the set of sites
currently reachable from the source together with the node that reached them.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from .dynamics import Trajectory
from .errors import InvalidParameterError, NoOccupiedSiteError, OutOfHorizonError, PreconditionError
from .events import Events, ObjectKey, merged_arrivals
from .lattice import BLOCKED, OCCUPIED
from .truncation import fertile_reach

ARROW, BLOCK, HEAL = 0, 1, 2


class Segment(NamedTuple):
    t_start: float
    t_end: float
    site: int


class ArrowRef(NamedTuple):
    """One fertile arrival used by a path jump."""

    time: float
    origin: int
    target: int

    def label(self) -> str:
        return f"{ObjectKey.fertile(self.origin, self.target).label()}@{self.time!r}"


class PathWitness:
    """Piecewise-constant path with the arrows justifying its jumps."""

    def __init__(self, segments: List[Segment], jump_arrows: List[ArrowRef]):
        if not segments:
            raise InvalidParameterError("a path needs at least one segment")
        if len(jump_arrows) != len(segments) - 1:
            raise InvalidParameterError("every jump needs exactly one arrow")
        self.segments = [Segment(*segment) for segment in segments]
        self.jump_arrows = [ArrowRef(*arrow) for arrow in jump_arrows]

    @classmethod
    def constant(cls, site: int, s: float, t: float) -> "PathWitness":
        return cls([Segment(s, t, site)], [])

    @property
    def start(self) -> Tuple[int, float]:
        first = self.segments[0]
        return first.site, first.t_start

    @property
    def end(self) -> Tuple[int, float]:
        last = self.segments[-1]
        return last.site, last.t_end

    def site_at(self, time: float) -> int:
        """Right-continuous value of the path at ``time``."""
        starts = [segment.t_start for segment in self.segments]
        return self.segments[max(bisect_right(starts, time) - 1, 0)].site

    def is_left_of(self, other: "PathWitness") -> bool:
        """Whether this path is strictly left of ``other`` at their first divergence."""
        times = sorted({seg.t_start for seg in self.segments} | {seg.t_start for seg in other.segments})
        for time in times:
            mine, theirs = self.site_at(time), other.site_at(time)
            if mine != theirs:
                return mine < theirs
        return False

    def validate(self, traj: Optional[Trajectory], events: Events, active: bool = True) -> List[str]:
        """Check the path against the raw arrivals and, if active, the host trajectory.

        Returns:
            Human-readable problems; an empty list means the path is valid
        """
        problems = []
        for i, (a, b, site) in enumerate(self.segments):
            if b < a:
                problems.append(f"segment {i} runs backwards")
                continue
            heals = events.arrivals(ObjectKey.healing(site), a, b, left_open=True)
            if heals.size:
                problems.append(f"site {site} heals at {heals[0]!r} inside segment {i}")
            if active and traj is not None:
                if traj.state_at(site, a) == BLOCKED:
                    problems.append(f"site {site} is blocked at {a!r}")
                times, states = traj.site_history(site)
                for time, state in zip(times, states):
                    if a < time <= b and state == BLOCKED:
                        problems.append(f"site {site} becomes blocked at {time!r}")
        for i, arrow in enumerate(self.jump_arrows):
            before, after = self.segments[i], self.segments[i + 1]
            if before.t_end != arrow.time or after.t_start != arrow.time:
                problems.append(f"jump {i} does not happen at its arrow time")
            if (before.site, after.site) != (arrow.origin, arrow.target):
                problems.append(f"jump {i} does not follow its arrow")
            stream = events.stream(ObjectKey.fertile(arrow.origin, arrow.target))
            if not np.any(stream == arrow.time):
                problems.append(f"no fertile arrow {arrow.label()}")
        return problems

    def to_records(self) -> List[dict]:
        records = []
        for i, segment in enumerate(self.segments):
            records.append(
                {
                    "t_start": segment.t_start,
                    "t_end": segment.t_end,
                    "site": segment.site,
                    "arrow_ref": self.jump_arrows[i - 1].label() if i else None,
                }
            )
        return records

    def dump(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_records(), f, indent=2)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PathWitness)
            and self.segments == other.segments
            and self.jump_arrows == other.jump_arrows
        )

    def __repr__(self) -> str:
        steps = " -> ".join(f"{seg.site}@[{seg.t_start:.4g},{seg.t_end:.4g}]" for seg in self.segments)
        return f"PathWitness({steps})"


class Frontier(NamedTuple):
    """Least site right of ``anchor`` without a healing mark on [start, t]."""

    value: int
    anchor: int
    start: float
    time: float


class _Node(NamedTuple):
    site: int
    time: float
    parent: Optional["_Node"]


def _sweep_events(traj: Optional[Trajectory], events: Events, lo: int, hi: int, s: float, t: float):
    """Fertile arrows, healing marks and blocking changes of [lo, hi] on (s, t], time-ordered."""
    keys = []
    for z in range(lo, hi + 1):
        keys.append(ObjectKey.healing(z))
        if z > lo:
            keys.append(ObjectKey.fertile(z, z - 1))
        if z < hi:
            keys.append(ObjectKey.fertile(z, z + 1))
    keys.sort()
    times, owners = merged_arrivals(events, keys, s, t)

    items = []
    for time, owner in zip(times.tolist(), owners.tolist()):
        key = keys[owner]
        if key.origin == key.target:
            items.append((time, HEAL, key.origin, key.target))
        else:
            items.append((time, ARROW, key.origin, key.target))
    if traj is not None:
        for z in range(lo, hi + 1):
            changes, states = traj.site_history(z)
            for time, state in zip(changes[1:], states[1:]):
                if s < time <= t and state == BLOCKED:
                    items.append((time, BLOCK, z, z))
    items.sort(key=lambda item: (item[0], item[1]))
    return items


def _forward(
    traj: Optional[Trajectory],
    items: Iterable[tuple],
    sources: Dict[int, _Node],
    permanent: Optional[int] = None,
) -> Dict[int, _Node]:
    reached = dict(sources)
    for time, kind, z, w in items:
        if kind == ARROW:
            if w in reached or z not in reached:
                continue
            if traj is not None and traj.state_at(w, time) == BLOCKED:
                continue
            reached[w] = _Node(w, time, reached[z])
        elif z != permanent:
            reached.pop(z, None)
    return reached


def _witness(node: _Node, t: float) -> PathWitness:
    chain = []
    while node is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    segments = [
        Segment(here.time, chain[i + 1].time if i + 1 < len(chain) else t, here.site)
        for i, here in enumerate(chain)
    ]
    arrows = [ArrowRef(chain[i + 1].time, chain[i].site, chain[i + 1].site) for i in range(len(chain) - 1)]
    return PathWitness(segments, arrows)


def _check_times(traj: Trajectory, s: float, t: float):
    if s > t:
        raise InvalidParameterError(f"path start {s} is after its end {t}")
    if s < traj.start or t > traj.end:
        raise OutOfHorizonError(f"[{s}, {t}] leaves the trajectory interval [{traj.start}, {traj.end}]")


def active_reachable(
    traj: Trajectory, events: Events, source: Tuple[int, float], target: Tuple[int, float]
) -> Tuple[bool, Optional[PathWitness]]:
    """Decide whether an active path joins ``source`` to ``target``.

    Args:
        traj: Host trajectory deciding which sites are Blocked
        events: Event log the trajectory was built from
        source: (site, time) where the path starts
        target: (site, time) where the path must end

    Returns:
        (True, witness) when such a path exists, otherwise (False, None)
    """
    (x, s), (y, t) = source, target
    _check_times(traj, s, t)
    if traj.state_at(x, s) == BLOCKED:
        return False, None

    lo, hi = fertile_reach(events, x, x, s, t)
    if not lo <= y <= hi:
        return False, None
    items = _sweep_events(traj, events, lo, hi, s, t)
    reached = _forward(traj, items, {x: _Node(x, s, None)})
    if y not in reached:
        return False, None
    return True, _witness(reached[y], t)


def occupancy_mismatches(traj: Trajectory, events: Events, t: float) -> List[int]:
    """Sites where occupation at ``t`` and reachability from the initial 1s disagree."""
    _check_times(traj, traj.start, t)
    clamp = traj.initial.policy.clamp
    sources = {
        int(y): _Node(int(y), traj.start, None) for y in traj.initial.occupied_sites()
    }
    if clamp is not None:
        sources[clamp] = _Node(clamp, traj.start, None)
    lo, hi = traj.window
    lo = lo - 1 if clamp is None else clamp
    items = _sweep_events(traj, events, lo, hi + 1, traj.start, t)
    reached = set(_forward(traj, items, sources, permanent=clamp))
    reached.discard(clamp)
    occupied = set(traj.occupied_at(t))
    return sorted(reached ^ occupied)


def occupancy_path_equivalence(traj: Trajectory, events: Events, t: float) -> bool:
    """Whether the occupied sites at ``t`` are exactly those reached by active paths."""
    return not occupancy_mismatches(traj, events, t)


class _Membership:
    """Open time intervals during which a site can still reach the target."""

    def __init__(self):
        self.intervals: Dict[int, List[Tuple[float, float]]] = {}

    def add(self, site: int, a: float, b: float):
        if a < b:
            self.intervals.setdefault(site, []).append((a, b))

    def after(self, site: int, u: float) -> bool:
        return any(a <= u < b for a, b in self.intervals.get(site, ()))


def _backward(traj: Trajectory, items: List[tuple], target: int, s: float, t: float) -> _Membership:
    members = _Membership()
    opened = {target: t}
    for time, kind, z, w in reversed(items):
        if kind == ARROW:
            if w in opened and z not in opened and traj.state_before(z, time) != BLOCKED:
                opened[z] = time
        elif z in opened:
            members.add(z, time, opened.pop(z))
    for site, end in opened.items():
        members.add(site, s, end)
    return members


def leftmost_active_path(
    traj: Trajectory, events: Events, t: float, site: Optional[int] = None
) -> PathWitness:
    """Leftmost active path from an initial 1 to the leftmost 1 at ``t``.

    Paths are ordered by their value at the first time they differ. A backward
    sweep marks, per site, the times from which the target can still be
    reached; a forward pass then moves left whenever it can and right only
    when it must.

    Args:
        traj: Trajectory with full delta retention
        events: Event log the trajectory was built from
        t: End time of the path
        site: End site; defaults to the leftmost occupied site at ``t``

    Raises:
        NoOccupiedSiteError: If nothing is occupied at ``t``
        PreconditionError: If the trajectory has an occupied left clamp
    """
    if traj.initial.policy.clamp is not None:
        raise PreconditionError("a left-clamped trajectory has no leftmost occupied site")
    _check_times(traj, traj.start, t)
    s = traj.start
    if site is None:
        site = traj.leftmost_at(t)
        if site is None:
            raise NoOccupiedSiteError(f"no occupied site at time {t}")
    elif traj.state_at(site, t) != OCCUPIED:
        raise NoOccupiedSiteError(f"site {site} is not occupied at time {t}")
    if t == s:
        return PathWitness.constant(site, s, t)

    lo, hi = traj.window
    items = _sweep_events(traj, events, lo, hi, s, t)
    members = _backward(traj, items, site, s, t)

    starts = [int(y) for y in traj.initial.occupied_sites() if members.after(int(y), s)]
    if not starts:
        raise PreconditionError(f"no active path from the initial configuration reaches site {site}")

    here = min(starts)
    segment_start = s
    segments: List[Segment] = []
    arrows: List[ArrowRef] = []
    for time, kind, z, w in items:
        if kind != ARROW or z != here:
            continue
        if w < z:
            jump = members.after(w, time)
        else:
            jump = not members.after(z, time)
        if jump:
            segments.append(Segment(segment_start, time, z))
            arrows.append(ArrowRef(time, z, w))
            here, segment_start = w, time
    segments.append(Segment(segment_start, t, here))
    return PathWitness(segments, arrows)


def never_healed_frontier(events: Events, x: int, t: float, start: float = 1.0) -> Frontier:
    """Least site right of ``x`` without a healing mark on [start, t].

    Raises:
        InvalidParameterError: If ``t`` is before ``start``
    """
    if t < start:
        raise InvalidParameterError(f"frontier time {t} is before its start {start}")
    y = x + 1
    while events.first_arrival(ObjectKey.healing(y), start, t, left_open=False) is not None:
        y += 1
    return Frontier(y, x, start, t)
