"""Site states, tail policies and finite-window configurations."""

from __future__ import annotations

import math
from enum import Enum, IntEnum
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from .errors import InconsistentSpecError, InvalidParameterError, PreconditionError


class SiteState(IntEnum):
    """Ordered states: Blocked < Empty < Occupied."""

    BLOCKED = -1
    EMPTY = 0
    OCCUPIED = 1


BLOCKED = int(SiteState.BLOCKED)
EMPTY = int(SiteState.EMPTY)
OCCUPIED = int(SiteState.OCCUPIED)


class ProcessKind(str, Enum):
    """The three lattice dynamics sharing one graphical construction."""

    SPONT = "spont"
    IS = "is"
    CP = "cp"


class TailKind(str, Enum):
    EMPTY = "empty"
    BLOCKED = "blocked"
    OCCUPIED_LEFT_CLAMP = "occupied-left-clamp"


class BoundaryPolicy:
    """How a configuration continues outside its window."""

    def __init__(self, kind: TailKind, clamp: Optional[int] = None):
        self.kind = TailKind(kind)
        if self.kind == TailKind.OCCUPIED_LEFT_CLAMP and clamp is None:
            raise InvalidParameterError("an occupied left clamp needs its boundary site")
        self.clamp = int(clamp) if self.kind == TailKind.OCCUPIED_LEFT_CLAMP else None

    @classmethod
    def empty_tail(cls) -> "BoundaryPolicy":
        return cls(TailKind.EMPTY)

    @classmethod
    def blocked_tail(cls) -> "BoundaryPolicy":
        return cls(TailKind.BLOCKED)

    @classmethod
    def left_clamp(cls, site: int) -> "BoundaryPolicy":
        return cls(TailKind.OCCUPIED_LEFT_CLAMP, site)

    def tail_state(self, site: int) -> int:
        """State of an out-of-window site at the configuration's own time."""
        if self.kind == TailKind.BLOCKED:
            return BLOCKED
        if self.kind == TailKind.OCCUPIED_LEFT_CLAMP and site <= self.clamp:
            return OCCUPIED
        return EMPTY

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BoundaryPolicy)
            and self.kind == other.kind
            and self.clamp == other.clamp
        )

    def __repr__(self) -> str:
        if self.clamp is None:
            return f"BoundaryPolicy({self.kind.value})"
        return f"BoundaryPolicy({self.kind.value}, clamp={self.clamp})"


class Configuration:
    """Snapshot of a lattice state: a dense window plus a tail policy."""

    def __init__(self, lo: int, states: Iterable[int], policy: Optional[BoundaryPolicy] = None):
        values = np.array(list(states), dtype=np.int8)
        if values.size == 0:
            raise InvalidParameterError("a configuration window cannot be empty")
        if np.any((values < BLOCKED) | (values > OCCUPIED)):
            raise InvalidParameterError("site states must lie in {-1, 0, 1}")
        self.policy = policy if policy is not None else BoundaryPolicy.empty_tail()
        if self.policy.clamp is not None and lo <= self.policy.clamp:
            raise InvalidParameterError("the window must start right of the clamp boundary")
        values.setflags(write=False)
        self.lo = int(lo)
        self.states = values

    @classmethod
    def from_mapping(
        cls, states: Mapping[int, int], policy: Optional[BoundaryPolicy] = None
    ) -> "Configuration":
        """Window spanning the given sites; gaps take the tail state."""
        if not states:
            raise InvalidParameterError("a configuration window cannot be empty")
        policy = policy if policy is not None else BoundaryPolicy.empty_tail()
        lo, hi = min(states), max(states)
        return cls(
            lo,
            [int(states.get(x, policy.tail_state(x))) for x in range(lo, hi + 1)],
            policy,
        )

    @property
    def hi(self) -> int:
        return self.lo + self.states.size - 1

    def state(self, x: int) -> int:
        if self.lo <= x <= self.hi:
            return int(self.states[x - self.lo])
        return self.policy.tail_state(x)

    def occupied_sites(self) -> np.ndarray:
        return self.lo + np.flatnonzero(self.states == OCCUPIED)

    def rightmost(self) -> Optional[int]:
        occupied = self.occupied_sites()
        if occupied.size:
            return int(occupied[-1])
        return self.policy.clamp

    def leftmost_one(self) -> Optional[int]:
        # a left clamp has no finite leftmost site
        if self.policy.clamp is not None:
            return None
        occupied = self.occupied_sites()
        return int(occupied[0]) if occupied.size else None

    def in_class(self, x: int) -> bool:
        """Whether the rightmost occupied site is exactly ``x``."""
        return self.state(x) == OCCUPIED and self.rightmost() == x

    def as_dict(self) -> Dict[int, int]:
        return {self.lo + i: int(v) for i, v in enumerate(self.states)}

    def _span(self, other: "Configuration"):
        lows = [self.lo, other.lo]
        lows += [c for c in (self.policy.clamp, other.policy.clamp) if c is not None]
        return min(lows) - 1, max(self.hi, other.hi) + 1

    def dominated_by(self, other: "Configuration") -> bool:
        """Pointwise order self <= other on the whole lattice, tails included."""
        lo, hi = self._span(other)
        return all(self.state(x) <= other.state(x) for x in range(lo, hi + 1))

    def join(self, other: "Configuration") -> "Configuration":
        """Pointwise maximum of two {0, 1}-valued empty-tailed configurations."""
        for config in (self, other):
            if config.policy.kind != TailKind.EMPTY:
                raise PreconditionError("join needs empty-tailed configurations")
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return Configuration(
            lo, [max(self.state(x), other.state(x)) for x in range(lo, hi + 1)]
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration) or self.policy != other.policy:
            return False
        lo, hi = self._span(other)
        return all(self.state(x) == other.state(x) for x in range(lo, hi + 1))

    def __repr__(self) -> str:
        return f"Configuration(lo={self.lo}, states={self.states.tolist()}, {self.policy!r})"


class InitialSpec:
    """Named initial configuration: single, hostile, heaviside or explicit.

    The text form used in configuration files is ``single:0``, ``hostile:3``,
    ``heaviside:0`` or ``explicit:-3=1,1=-1,5=1`` (optionally ``explicit@5:...``
    to claim the rightmost occupied site, and ``explicit+blocked:...`` for a
    blocked tail).
    """

    KINDS = ("single", "hostile", "heaviside", "explicit")

    def __init__(
        self,
        kind: str,
        site: int = 0,
        states: Optional[Mapping[int, int]] = None,
        claim: Optional[int] = None,
        tail: TailKind = TailKind.EMPTY,
    ):
        if kind not in self.KINDS:
            raise InvalidParameterError(f"unknown initial configuration '{kind}'")
        if kind == "explicit" and not states:
            raise InvalidParameterError("explicit configurations need at least one site")
        self.kind = kind
        self.site = int(site)
        self.states = {int(k): int(v) for k, v in (states or {}).items()}
        self.claim = claim
        self.tail = TailKind(tail)

    @classmethod
    def single(cls, x: int) -> "InitialSpec":
        return cls("single", x)

    @classmethod
    def hostile(cls, x: int) -> "InitialSpec":
        return cls("hostile", x)

    @classmethod
    def heaviside(cls, x: int) -> "InitialSpec":
        return cls("heaviside", x)

    @classmethod
    def explicit(cls, states: Mapping[int, int], claim: Optional[int] = None, tail=TailKind.EMPTY):
        return cls("explicit", states=states, claim=claim, tail=tail)

    @classmethod
    def parse(cls, text: str) -> "InitialSpec":
        head, _, body = text.strip().partition(":")
        if not body:
            raise InvalidParameterError(f"initial spec '{text}' has no ':'")
        if head in ("single", "hostile", "heaviside"):
            try:
                return cls(head, int(body))
            except ValueError as e:
                raise InvalidParameterError(f"initial spec '{text}': {e}") from e

        tail = TailKind.EMPTY
        if head.endswith("+blocked"):
            head, tail = head[: -len("+blocked")], TailKind.BLOCKED
        claim = None
        if "@" in head:
            head, _, claimed = head.partition("@")
            claim = int(claimed)
        if head != "explicit":
            raise InvalidParameterError(f"unknown initial configuration '{text}'")
        states = {}
        for item in body.split(","):
            site, _, value = item.partition("=")
            try:
                states[int(site)] = int(value)
            except ValueError as e:
                raise InvalidParameterError(f"initial spec '{text}': {e}") from e
        return cls("explicit", states=states, claim=claim, tail=tail)

    def __str__(self) -> str:
        if self.kind != "explicit":
            return f"{self.kind}:{self.site}"
        head = "explicit"
        if self.claim is not None:
            head += f"@{self.claim}"
        if self.tail == TailKind.BLOCKED:
            head += "+blocked"
        body = ",".join(f"{site}={value}" for site, value in sorted(self.states.items()))
        return f"{head}:{body}"

    def __eq__(self, other) -> bool:
        return isinstance(other, InitialSpec) and str(self) == str(other)


def heaviside_depth(lambda_: Optional[float], horizon: Optional[float]) -> int:
    """Distance from x to the clamp boundary of a Heaviside start."""
    if lambda_ is None or horizon is None:
        return 64
    return math.ceil(3.0 * lambda_ * horizon) + 64


def make_initial(
    spec: InitialSpec,
    lambda_: Optional[float] = None,
    horizon: Optional[float] = None,
    depth: Optional[int] = None,
) -> Configuration:
    """Build the configuration named by ``spec``.

    Args:
        spec: Initial configuration description
        lambda_: Rate hint used to size a Heaviside clamp
        horizon: Time hint used to size a Heaviside clamp
        depth: Explicit clamp distance, overriding the hints

    Returns:
        Configuration at time zero of the run

    Raises:
        InconsistentSpecError: If an explicit spec contradicts its claimed rightmost site
    """
    if spec.kind == "single":
        return Configuration(spec.site, [OCCUPIED], BoundaryPolicy.empty_tail())
    if spec.kind == "hostile":
        return Configuration(spec.site, [OCCUPIED], BoundaryPolicy.blocked_tail())
    if spec.kind == "heaviside":
        depth = heaviside_depth(lambda_, horizon) if depth is None else int(depth)
        if depth < 1:
            raise InvalidParameterError("heaviside clamp depth must be at least 1")
        clamp = spec.site - depth
        return Configuration(
            clamp + 1, [OCCUPIED] * depth, BoundaryPolicy.left_clamp(clamp)
        )

    config = Configuration.from_mapping(spec.states, BoundaryPolicy(spec.tail))
    if spec.claim is not None and not config.in_class(spec.claim):
        raise InconsistentSpecError(
            f"explicit configuration does not have its rightmost 1 at {spec.claim}"
        )
    return config


def random_member(
    generator: np.random.Generator, x: int, radius: int, blocked_tail: Optional[bool] = None
) -> Configuration:
    """Random configuration whose rightmost occupied site is ``x``.

    Sites in [x - radius, x) take any state, sites in (x, x + radius] are
    Empty or Blocked, and the tail is Empty or Blocked.
    """
    left = generator.integers(BLOCKED, OCCUPIED + 1, size=radius)
    right = generator.integers(BLOCKED, EMPTY + 1, size=radius)
    if blocked_tail is None:
        blocked_tail = bool(generator.integers(0, 2))
    policy = BoundaryPolicy.blocked_tail() if blocked_tail else BoundaryPolicy.empty_tail()
    states = [*left.tolist(), OCCUPIED, *right.tolist()]
    return Configuration(x - radius, states, policy)
