"""The trees T_n: the unit interval (the spine) with simple triods attached.

A point is either ``Spine(t)`` with ``0 <= t <= 1`` or ``Leg(p, i, t)`` with
``0 < t <= 1``: the point at parameter ``t`` on leg ``i`` of the triod attached
at spine coordinate ``p``.  ``Leg(p, i, 0)`` is the same point as ``Spine(p)``
and is always rewritten to it.

Only the topology of T_n matters for the construction; distances use a
concrete metric in which the spine has length 1 and each leg at ``p`` has
length ``leg_length[p]`` (1 for the triods at 0 and 2/3, ``2**-(m+1)`` for
the triods at points of tent2^-m {1/3, 1}).  Any positive leg lengths would
do; swap them by passing ``leg_lengths`` to :class:`TreeLevel`.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from functools import lru_cache
from typing import NamedTuple, Union

from .exact_arith import ONE, TWO_THIRDS, ZERO, DomainError, Q, Rational, fmt, parse, preimage_union, tent2_preimages


class Spine(NamedTuple):
    t: Rational

    def __str__(self) -> str:
        return "S:" + fmt(self.t)


class Leg(NamedTuple):
    p: Rational
    i: int
    t: Rational

    def __str__(self) -> str:
        return f"L:{fmt(self.p)}:{self.i}:{fmt(self.t)}"


TreePoint = Union[Spine, Leg]

# Edge keys: the spine, or the (p, i) of a leg.
SPINE = "S"
EdgeKey = Union[str, tuple[Rational, int]]


class InvalidPoint(ValueError):
    """A point that does not belong to the tree it is used with."""


def make_point(edge: EdgeKey, pos: Rational) -> TreePoint:
    if edge == SPINE:
        return Spine(pos)
    p, i = edge
    if pos == 0:
        return Spine(p)
    return Leg(p, i, pos)


def edge_pos(x: TreePoint) -> tuple[EdgeKey, Rational]:
    if type(x) is Spine:
        return SPINE, x.t
    return (x.p, x.i), x.t


def common_edge(a: TreePoint, b: TreePoint) -> tuple[EdgeKey, Rational, Rational] | None:
    """A closed edge containing both points, with their positions on it."""
    if type(a) is Spine:
        if type(b) is Spine:
            return SPINE, a.t, b.t
        if a.t == b.p:
            return (b.p, b.i), ZERO, b.t
        return None
    if type(b) is Spine:
        if b.t == a.p:
            return (a.p, a.i), a.t, ZERO
        return None
    if a.p == b.p and a.i == b.i:
        return (a.p, a.i), a.t, b.t
    return None


def retract(x: TreePoint) -> Rational:
    """The retraction onto the spine: legs collapse to their attachment point."""
    if type(x) is Spine:
        return x.t
    return x.p


def base(x: TreePoint) -> Rational:
    return x.t if type(x) is Spine else x.p


def geodesic(a: TreePoint, b: TreePoint) -> list[TreePoint]:
    """Corner waypoints of the unique arc from ``a`` to ``b``."""
    if a == b:
        return [a]
    if common_edge(a, b) is not None:
        return [a, b]
    path = [a]
    if type(a) is Leg:
        path.append(Spine(a.p))
    if type(b) is Leg and (type(a) is Spine or a.p != b.p):
        path.append(Spine(b.p))
    path.append(b)
    return path


def parse_point(s: str) -> TreePoint:
    parts = s.split(":")
    if parts[0] == "S" and len(parts) == 2:
        return Spine(parse(parts[1]))
    if parts[0] == "L" and len(parts) == 4:
        return make_point((parse(parts[1]), int(parts[2])), parse(parts[3]))
    raise ValueError(f"malformed tree point {s!r}")


def attachment_points(n: int) -> list[Rational]:
    if n < 0:
        raise DomainError(f"level must be non-negative, got {n}")
    return sorted({ZERO, TWO_THIRDS} | set(preimage_union([Q(1, 3), ONE], n - 1)))


def triod_count(n: int) -> int:
    return len(attachment_points(n))


def default_leg_lengths(n: int) -> dict[Rational, Rational]:
    lengths = {ZERO: ONE, TWO_THIRDS: ONE}
    for m in range(n):
        for p in tent2_preimages([Q(1, 3), ONE], m):
            lengths[p] = Q(1, 2 ** (m + 1))
    return lengths


class TreeLevel:
    """The tree T_n.  Immutable after construction."""

    def __init__(self, n: int, leg_lengths: Mapping[Rational, Rational] | None = None):
        self.n = n
        self.attachments = attachment_points(n)
        self._attached = frozenset(self.attachments)
        if leg_lengths is None:
            leg_lengths = default_leg_lengths(n)
        self.leg_length = {p: Q(leg_lengths[p]) for p in self.attachments}
        if any(v <= 0 for v in self.leg_length.values()):
            raise ValueError("leg lengths must be positive")

    def __repr__(self) -> str:
        return f"TreeLevel({self.n})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TreeLevel)
            and self.n == other.n
            and self.leg_length == other.leg_length
        )

    def __hash__(self) -> int:
        return hash(("TreeLevel", self.n))

    def is_attached(self, p: Rational) -> bool:
        return p in self._attached

    def edges(self) -> list[EdgeKey]:
        return [SPINE] + [(p, i) for p in self.attachments for i in range(3)]

    def edge_length(self, edge: EdgeKey) -> Rational:
        return ONE if edge == SPINE else self.leg_length[edge[0]]

    def canonicalize(self, x: TreePoint) -> TreePoint:
        if type(x) is Spine:
            if not 0 <= x.t <= 1:
                raise InvalidPoint(f"{x}: spine parameter outside [0, 1]")
            return x
        if type(x) is not Leg:
            raise InvalidPoint(f"{x!r} is not a tree point")
        if x.i not in (0, 1, 2):
            raise InvalidPoint(f"{x}: leg index must be 0, 1 or 2")
        if not self.is_attached(x.p):
            raise InvalidPoint(f"{x}: no triod attached at {x.p} in T_{self.n}")
        if not 0 <= x.t <= 1:
            raise InvalidPoint(f"{x}: leg parameter outside [0, 1]")
        if x.t == 0:
            return Spine(x.p)
        return x

    def contains(self, x: TreePoint) -> bool:
        try:
            return self.canonicalize(x) == x
        except InvalidPoint:
            return False

    def distance(self, a: TreePoint, b: TreePoint) -> Rational:
        ll = self.leg_length
        if type(a) is Spine:
            if type(b) is Spine:
                return abs(a.t - b.t)
            return abs(a.t - b.p) + b.t * ll[b.p]
        if type(b) is Spine:
            return abs(b.t - a.p) + a.t * ll[a.p]
        if a.p == b.p and a.i == b.i:
            return abs(a.t - b.t) * ll[a.p]
        return a.t * ll[a.p] + abs(a.p - b.p) + b.t * ll[b.p]

    def geodesic(self, a: TreePoint, b: TreePoint) -> list[TreePoint]:
        return geodesic(a, b)

    def on_geodesic(self, x: TreePoint, a: TreePoint, b: TreePoint) -> bool:
        return self.distance(a, x) + self.distance(x, b) == self.distance(a, b)

    def point_along(self, a: TreePoint, b: TreePoint, s: Rational) -> TreePoint:
        """The point at distance ``s`` from ``a`` on the arc from ``a`` to ``b``."""
        corners = geodesic(a, b)
        for u, v in zip(corners, corners[1:]):
            d = self.distance(u, v)
            if s <= d:
                edge, pu, pv = common_edge(u, v)
                if s == d:
                    return v
                return make_point(edge, pu + (pv - pu) * s / d)
            s -= d
        if s == 0:
            return corners[-1]
        raise ValueError("distance along geodesic exceeds its length")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "attachments": [fmt(p) for p in self.attachments],
            "leg_lengths": {fmt(p): fmt(self.leg_length[p]) for p in self.attachments},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> TreeLevel:
        lengths = {parse(k): parse(v) for k, v in data["leg_lengths"].items()}
        level = cls(data["n"], lengths)
        if [fmt(p) for p in level.attachments] != list(data["attachments"]):
            raise ValueError("attachment list does not match the level")
        return level

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@lru_cache(maxsize=None)
def tree_level(n: int) -> TreeLevel:
    """Shared default-metric instance of T_n."""
    return TreeLevel(n)
