"""Finite-box constructions used to define the infinite-volume processes.

The Spont process is run inside the fixed box [-n, n]. The inherited-sterility
process uses a growing box: the k-th accepted arrival must lie in the box of
radius n + k, so the region where arrivals count widens by one site per
accepted arrival. Both return ordinary :class:`Trajectory` objects, with
sites outside the box frozen Empty.
"""

from __future__ import annotations

from typing import List, Optional

from .dynamics import FrozenTail, Trajectory, apply_rule, front_paths
from .errors import InvalidParameterError, OutOfHorizonError
from .events import Events, ObjectKey, merged_arrivals
from .lattice import EMPTY, BoundaryPolicy, Configuration, ProcessKind
from .logger import logger


def _check(n: int, events: Events, T: float):
    if n < 0:
        raise InvalidParameterError(f"box radius must be >= 0, got {n}")
    if T < events.start or T > events.horizon:
        raise OutOfHorizonError(f"time {T} leaves [{events.start}, {events.horizon}]")


def spont_box_keys(n: int) -> List[ObjectKey]:
    """Streams acting on the Spont process in the box [-n, n].

    Fertile arrows need both endpoints in the box. Blocking arrows only need
    their target there, since Spont blocking ignores the origin.
    """
    keys = []
    for x in range(-n, n + 1):
        keys.append(ObjectKey.healing(x))
        for y in (x - 1, x + 1):
            keys.append(ObjectKey.blocking(y, x))
            if -n <= y <= n:
                keys.append(ObjectKey.fertile(y, x))
    return sorted(keys)


def _replay(kind, initial: Configuration, keys, events: Events, T: float, accept=None):
    times, owners = merged_arrivals(events, keys, events.start, T)
    state = initial.as_dict()
    deltas = []
    accepted = 0
    for time, owner in zip(times.tolist(), owners.tolist()):
        key = keys[owner]
        if accept is not None and not accept(key, accepted):
            continue
        accepted += 1
        target = key.target
        new = apply_rule(kind, int(key.kind), state.get(key.origin, EMPTY), state.get(target, EMPTY))
        if new is not None and target in state:
            state[target] = new
            deltas.append((time, target, new))
    return deltas, accepted


def _trajectory(kind, initial: Configuration, deltas, events: Events, T: float) -> Trajectory:
    front, left_front, extinct = front_paths(initial.as_dict(), deltas, events.start)
    return Trajectory(
        kind=kind,
        initial=initial,
        deltas=deltas,
        start=events.start,
        end=T,
        horizon=events.horizon,
        window=(initial.lo, initial.hi),
        front=front,
        left_front=left_front,
        extinction_time=extinct,
        tail=FrozenTail(EMPTY),
    )


def truncated_evolve_spont(n: int, xi0: Configuration, events: Events, T: float) -> Trajectory:
    """Spont process in the box [-n, n] started from ``xi0`` restricted to the box."""
    _check(n, events, T)
    initial = Configuration(
        -n, [xi0.state(x) for x in range(-n, n + 1)], BoundaryPolicy.empty_tail()
    )
    deltas, _ = _replay(ProcessKind.SPONT, initial, spont_box_keys(n), events, T)
    return _trajectory(ProcessKind.SPONT, initial, deltas, events, T)


def fertile_reach(events: Events, lo: int, hi: int, s: float, t: float):
    """Sites that fertile arrows can carry occupation to from [lo, hi] during (s, t].

    Returns:
        (left, right) bounds of the reachable range
    """
    right, clock = hi, s
    while True:
        hit = events.first_arrival(ObjectKey.fertile(right, right + 1), clock, t)
        if hit is None:
            break
        right, clock = right + 1, hit
    left, clock = lo, s
    while True:
        hit = events.first_arrival(ObjectKey.fertile(left, left - 1), clock, t)
        if hit is None:
            break
        left, clock = left - 1, hit
    return left, right


def fertile_cone(n: int, events: Events, T: float) -> int:
    """Radius beyond which no site of the box [-n, n] can send occupation by time T."""
    left, right = fertile_reach(events, -n, n, events.start, T)
    return max(abs(left), abs(right)) + 1


def _within(key: ObjectKey, radius: int) -> bool:
    return abs(key.origin) <= radius and abs(key.target) <= radius


def truncated_evolve_is(
    n: int, eta0: Configuration, events: Events, T: float, cap: Optional[int] = None
) -> Trajectory:
    """Inherited-sterility process built with the growing-box recursion.

    Args:
        n: Radius of the initial box
        eta0: Initial configuration, restricted to [-n, n]
        events: Event log
        T: Final time
        cap: Largest box radius tracked; defaults to the fertile light cone of
            the initial box, outside which every arrival is a no-op

    Returns:
        Trajectory over the window [-cap, cap]
    """
    _check(n, events, T)
    cap = max(n, fertile_cone(n, events, T)) if cap is None else max(n, cap)
    initial = Configuration(
        -cap,
        [eta0.state(x) if abs(x) <= n else EMPTY for x in range(-cap, cap + 1)],
        BoundaryPolicy.empty_tail(),
    )
    keys = []
    for x in range(-cap, cap + 1):
        keys.append(ObjectKey.healing(x))
        for y in (x - 1, x + 1):
            if abs(y) <= cap:
                keys.append(ObjectKey.fertile(y, x))
                keys.append(ObjectKey.blocking(y, x))
    keys.sort()

    deltas, accepted = _replay(
        ProcessKind.IS,
        initial,
        keys,
        events,
        T,
        accept=lambda key, k: _within(key, n + k),
    )
    logger.debug(f"growing box from radius {n}: {accepted} arrivals accepted, cap {cap}")
    return _trajectory(ProcessKind.IS, initial, deltas, events, T)

