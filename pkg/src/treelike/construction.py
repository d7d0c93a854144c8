"""Recursive construction of the coincidence-curve sets Gamma_n and the map pairs (f_n, g_n).

Level n consists of a set Gamma_n of monotone arcs in T_n x T_n avoiding the
diagonal, and maps f_n, g_n : T_{n+1} -> T_n whose pair (f_n(x), g_n(x))
runs through Gamma_n.  The pair is pinned down on a finite ruled set R of
T_{n+1} (rows a-g below) and between adjacent ruled points follows the unique
monotone arc of Gamma_n joining their values.  Gamma_{n+1} is then traced
inside the coincidence set [g_n, f_n].
"""

from __future__ import annotations

import json
import logging
import os
import random
from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .exact_arith import (
    HALF,
    ONE,
    THIRD,
    TWO_THIRDS,
    ZERO,
    DomainError,
    Q,
    Rational,
    epsilon,
    fmt,
    parse,
    preimage_union,
    tent,
    tent2_preimages,
)
from .plmap import PLMap, PreconditionError, ProductArc, pos_on_edge, trace_coincidence_arc
from .tree import SPINE, EdgeKey, Leg, Spine, TreeLevel, TreePoint, common_edge, make_point, tree_level

log = logging.getLogger(__name__)

NINTHS_CYCLE = {Q(2, 9): 0, Q(4, 9): 1, Q(8, 9): 2}
NINTHS_ENTRY = (Q(1, 9), Q(5, 9), Q(7, 9))
THIRD_AND_ONE = (THIRD, ONE)

Pair = tuple[TreePoint, TreePoint]


class ConstructionError(RuntimeError):
    """The recursive construction cannot proceed; the message names the failing instance."""


class AmbiguityError(ConstructionError):
    pass


def j_index(x: Rational) -> int:
    """Leg index used for the detours of f_n and g_n near x."""
    x = Q(x)
    if x in NINTHS_CYCLE:
        return NINTHS_CYCLE[x]
    if not (0 <= x <= 1) or x.denominator % 9:
        raise DomainError(f"j is undefined at {x}")
    y = x
    for _ in range((x.denominator // 9).bit_length() + 1):
        if y in NINTHS_ENTRY:
            return NINTHS_CYCLE[tent(2, y)]
        y = tent(2, y)
    raise DomainError(f"j is undefined at {x}")


# -- Gamma sets --------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Tag:
    """Which condition an arc of Gamma_n realizes.

    ``part`` is the arc index 0-2 for C1 and the side (+1 / -1) for the C3
    arcs at 2/3; it is 0 otherwise.
    """

    cond: str
    p: Rational = ZERO
    i: int = 0
    part: int = 0

    def __str__(self) -> str:
        if self.cond == "C1":
            return f"C1[{self.part}]"
        side = {1: ",+", -1: ",-"}.get(self.part, "")
        return f"{self.cond}[p={fmt(self.p)},i={self.i}{side}]"

    def to_json(self) -> dict:
        return {"cond": self.cond, "p": fmt(self.p), "i": self.i, "part": self.part}

    @classmethod
    def from_json(cls, d: Mapping) -> Tag:
        return cls(d["cond"], parse(d["p"]), d["i"], d["part"])


BINS = 512


class _SegmentIndex:
    """Locates arc segments whose ``coord`` coordinate can pass through a given point."""

    def __init__(self, arcs: list[tuple[Tag, ProductArc]], coord: int = 0):
        self.leg: dict[EdgeKey, list[tuple[int, int]]] = defaultdict(list)
        self.spine: list[list[tuple[int, int]]] = [[] for _ in range(BINS)]
        for a, (_, arc) in enumerate(arcs):
            nodes = arc.nodes
            if len(nodes) == 1:
                self._add(a, -1, nodes[0][coord], nodes[0][coord])
            for k in range(len(nodes) - 1):
                self._add(a, k, nodes[k][coord], nodes[k + 1][coord])

    def _add(self, a, k, u, v):
        e, pu, pv = common_edge(u, v)
        if e != SPINE:
            self.leg[e].append((a, k))
            return
        lo, hi = min(pu, pv), max(pu, pv)
        for b in range(self._bin(lo), self._bin(hi) + 1):
            self.spine[b].append((a, k))

    @staticmethod
    def _bin(t: Rational) -> int:
        return min(BINS - 1, (t.numerator * BINS) // t.denominator)

    def near(self, x: TreePoint, attached=()) -> list[tuple[int, int]]:
        if type(x) is Leg:
            return self.leg.get((x.p, x.i), [])
        t = x.t
        out = list(self.spine[self._bin(t)])
        if t > 0 and (t * BINS).denominator == 1:
            out += self.spine[self._bin(t) - 1]
        if t in attached:
            for i in range(3):
                out += self.leg.get((t, i), [])
        return out


class GammaSet:
    """Gamma_n: tagged monotone arcs in T_n x T_n."""

    def __init__(self, n: int, arcs: list[tuple[Tag, ProductArc]], level: TreeLevel | None = None):
        self.n = n
        self.level = level or tree_level(n)
        self.arcs = list(arcs)
        self._index: _SegmentIndex | None = None
        self._index2: _SegmentIndex | None = None

    def __repr__(self) -> str:
        return f"GammaSet(n={self.n}, {len(self.arcs)} arcs, {self.node_count()} nodes)"

    def node_count(self) -> int:
        return sum(len(arc.nodes) for _, arc in self.arcs)

    def arc(self, tag: Tag) -> ProductArc:
        for t, arc in self.arcs:
            if t == tag:
                return arc
        raise KeyError(str(tag))

    def tagged(self, cond: str) -> list[tuple[Tag, ProductArc]]:
        return [(t, a) for t, a in self.arcs if t.cond == cond]

    def a_arcs(self) -> list[ProductArc]:
        return [a for _, a in sorted(self.tagged("C1"))]

    @property
    def index(self) -> _SegmentIndex:
        if self._index is None:
            self._index = _SegmentIndex(self.arcs)
        return self._index

    @property
    def index2(self) -> _SegmentIndex:
        if self._index2 is None:
            self._index2 = _SegmentIndex(self.arcs, 1)
        return self._index2

    def locate(self, pair: Pair) -> list[tuple[int, int]]:
        """(arc, segment) positions of ``pair``; segment -1 marks a one-point arc."""
        out = []
        for a, k in self.index.near(pair[0], self.level.attachments):
            arc = self.arcs[a][1]
            if k < 0:
                if arc.nodes[0] == pair:
                    out.append((a, k))
            elif arc.segment_params(k, pair) is not None:
                out.append((a, k))
        return out

    def contains(self, pair: Pair, arcs: set[int] | None = None) -> bool:
        """Whether ``pair`` lies on Gamma (or on the arcs with the given indices)."""
        return any(arcs is None or a in arcs for a, _ in self.locate(pair))

    def slice(self, coord: int, value: TreePoint, arcs: set[int]) -> list[Pair]:
        """Points of the given arcs whose ``coord`` coordinate equals ``value``."""
        index = self.index2 if coord else self.index
        out: dict[Pair, None] = {}
        for a, k in sorted(set(index.near(value, self.level.attachments))):
            if a not in arcs or k < 0:
                continue
            arc = self.arcs[a][1]
            u, v = arc.nodes[k][coord], arc.nodes[k + 1][coord]
            if u == v:
                if u == value:
                    out[arc.nodes[k]] = None
                    out[arc.nodes[k + 1]] = None
                continue
            e, pu, pv = common_edge(u, v)
            q = pos_on_edge(value, e)
            if q is not None and min(pu, pv) <= q <= max(pu, pv):
                out[arc.sample(k, (q - pu) / (pv - pu))] = None
        return list(out)

    def indices(self, cond: str) -> set[int]:
        return {a for a, (t, _) in enumerate(self.arcs) if t.cond == cond}

    def with_points(self, points: list[Pair]) -> GammaSet:
        """Same set with extra breakpoints inserted at the given points."""
        arcs = list(self.arcs)
        for pt in points:
            # arc indices are stable; segment indices shift, so insert() re-searches
            for a in {a for a, _ in self.locate(pt)}:
                tag, arc = arcs[a]
                arcs[a] = (tag, arc.insert(pt))
        return GammaSet(self.n, arcs, self.level)

    def to_json(self) -> list:
        return [{"tag": t.to_json(), "nodes": a.to_json()} for t, a in self.arcs]

    @classmethod
    def from_json(cls, n: int, data: list) -> GammaSet:
        level = tree_level(n)
        return cls(n, [(Tag.from_json(d["tag"]), ProductArc.from_json(level, d["nodes"])) for d in data], level)


def c2_points(n: int) -> list[Rational]:
    """Spine points p whose pair (p, tent2(p)) must lie on the C1 arcs."""
    return preimage_union(THIRD_AND_ONE, n)


def c5_points(n: int) -> list[Rational]:
    return preimage_union(THIRD_AND_ONE, n - 1)


def c6_points(n: int) -> list[Rational]:
    return tent2_preimages(THIRD_AND_ONE, n)


def build_gamma0() -> GammaSet:
    """Gamma_0 as polylines through exactly the mandated points."""
    lv = tree_level(0)
    eps = epsilon(0)
    S = Spine
    arcs: list[tuple[Tag, ProductArc]] = []

    def add(tag, *nodes):
        arcs.append((tag, ProductArc(lv, nodes)))

    mandated = [(p, tent(2, p)) for p in c2_points(0)]
    first = [(S(ZERO), S(eps))] + [(S(p), S(q)) for p, q in mandated if p < HALF] + [(S(HALF), S(ONE))]
    add(Tag("C1", part=0), *first)
    add(Tag("C1", part=1), (S(HALF), S(ONE)), (S(TWO_THIRDS), S(TWO_THIRDS + eps)))
    third = [(S(TWO_THIRDS), S(TWO_THIRDS - eps))] + [(S(p), S(q)) for p, q in mandated if p > TWO_THIRDS]
    add(Tag("C1", part=2), *third)
    for i in range(3):
        add(Tag("C3", ZERO, i), (S(ZERO), S(eps)), (Leg(ZERO, i, HALF), S(ZERO)))
    for i in range(3):
        for side in (1, -1):
            add(
                Tag("C3", TWO_THIRDS, i, side),
                (S(TWO_THIRDS), S(TWO_THIRDS + side * eps)),
                (Leg(TWO_THIRDS, i, HALF), S(TWO_THIRDS)),
            )
    for p in (ZERO, TWO_THIRDS):
        for i in range(3):
            add(Tag("C4", p, i), (Leg(p, i, HALF), S(p)), (Leg(p, i, ONE), Leg(p, (i + 1) % 3, ONE)))
    for p in c6_points(0):
        q = tent(2, p)
        for i in range(3):
            add(Tag("C6", p, i), (S(p), S(q)), (S(p), Leg(q, i, ONE)))
    return GammaSet(0, arcs, lv)


# -- the ruled set -----------------------------------------------------------------


@dataclass(frozen=True)
class RuledPoint:
    point: TreePoint
    row: str
    m: int | None = None


@dataclass
class RuledSet:
    """Ruled points of T_{n+1} and the adjacent pairs that cut it into open arcs."""

    n: int
    points: list[RuledPoint]
    adjacency: list[tuple[EdgeKey, Rational, Rational]]

    def by_point(self) -> dict[TreePoint, RuledPoint]:
        return {rp.point: rp for rp in self.points}

    def adjacent(self, a: TreePoint, b: TreePoint) -> bool:
        for edge, x1, x2 in self.adjacency:
            ends = {make_point(edge, x1), make_point(edge, x2)}
            if ends == {a, b}:
                return True
        return False


def ruled_set(n: int) -> RuledSet:
    if n < 0:
        raise DomainError(f"level must be non-negative, got {n}")
    eps1 = epsilon(n + 1)
    pts: dict[TreePoint, RuledPoint] = {}

    def add(point, row, m=None):
        if point in pts:
            raise ConstructionError(f"ruled point {point} listed under rows {pts[point].row} and {row}")
        pts[point] = RuledPoint(point, row, m)

    for x in (ZERO, TWO_THIRDS):
        add(Spine(x), "a")
    for x in (eps1, TWO_THIRDS - eps1, TWO_THIRDS + eps1):
        add(Spine(x), "b")
    for m in range(n + 2):
        for x in tent2_preimages(THIRD_AND_ONE, m):
            add(Spine(x), "c", m)
    for x in NINTHS_CYCLE:
        add(Spine(x), "d")
    for m in range(n + 1):
        for x in tent2_preimages(NINTHS_ENTRY, m):
            add(Spine(x), "e", m)
    for p in (ZERO, TWO_THIRDS):
        for i in range(3):
            add(Leg(p, i, HALF), "f")
            add(Leg(p, i, ONE), "f")
    for m in range(n + 1):
        for p in tent2_preimages(THIRD_AND_ONE, m):
            for i in range(3):
                add(Leg(p, i, ONE), "g", m)

    domain = tree_level(n + 1)
    on_edge: dict[EdgeKey, set[Rational]] = defaultdict(set)
    for pt in pts:
        if type(pt) is Spine:
            on_edge[SPINE].add(pt.t)
        else:
            on_edge[(pt.p, pt.i)].add(pt.t)
    for p in domain.attachments:
        if Spine(p) not in pts:
            raise ConstructionError(f"branch point {p} of T_{n + 1} is not ruled")
        for i in range(3):
            on_edge[(p, i)].add(ZERO)
    if not {ZERO, ONE} <= on_edge[SPINE]:
        raise ConstructionError("spine endpoints must be ruled")
    adjacency = []
    for edge in domain.edges():
        ts = sorted(on_edge[edge])
        if ts[-1] != ONE:
            raise ConstructionError(f"tip of leg {edge} is not ruled")
        adjacency += [(edge, a, b) for a, b in zip(ts, ts[1:])]
    order = {e: k for k, e in enumerate(domain.edges())}
    points = sorted(pts.values(), key=lambda rp: _sort_key(rp.point, order))
    return RuledSet(n, points, adjacency)


def _sort_key(x: TreePoint, order):
    if type(x) is Spine:
        return (0, x.t)
    return (order[(x.p, x.i)], x.t)


# -- ruled values ------------------------------------------------------------------


def _vertical_hit(gamma: GammaSet, x: Rational) -> Pair:
    """The point of the first C1 arc with first coordinate x."""
    first = {a for a, (t, _) in enumerate(gamma.arcs) if t == Tag("C1", part=0)}
    hits = gamma.slice(0, Spine(x), first)
    if len(hits) != 1:
        raise ConstructionError(f"first C1 arc of Gamma_{gamma.n} meets x = {x} in {len(hits)} points")
    return hits[0]


def _horizontal_hit(gamma: GammaSet, y: Rational, left: bool) -> Pair:
    hits = gamma.slice(1, Spine(y), gamma.indices("C1"))
    hits = sorted((pt for pt in hits if (pt[0].t < HALF) == left), key=lambda pt: pt[0].t)
    if len(hits) != 1:
        raise AmbiguityError(
            f"C1 arcs of Gamma_{gamma.n} meet y = {y} on the {'left' if left else 'right'} of 1/2 "
            f"in {len(hits)} points"
        )
    return hits[0]


def ruled_values(n: int, rp: RuledPoint, gamma: GammaSet) -> Pair:
    """(f_n(x), g_n(x)) for a ruled point x of T_{n+1}."""
    x = rp.point
    eps = epsilon(n)
    if rp.row == "a":
        return Spine(ZERO), Spine(eps)
    if rp.row == "b":
        pair = _vertical_hit(gamma, eps)
        t = pair[1].t
        if not eps < t < HALF:
            raise ConstructionError(f"row (b): value {t} not strictly between {eps} and 1/2")
        return pair
    if rp.row == "c":
        t3, t6 = tent(3, x.t), tent(6, x.t)
        if rp.m <= n:
            return Spine(t3), Spine(t6)
        return _horizontal_hit(gamma, t6, t3 < HALF)
    if rp.row == "d":
        j = j_index(x.t)
        return Leg(TWO_THIRDS, j, ONE), Leg(TWO_THIRDS, (j + 1) % 3, ONE)
    if rp.row == "e":
        j = j_index(x.t)
        t3, t6 = tent(3, x.t), tent(6, x.t)
        if rp.m <= n - 1:
            return Leg(t3, j, ONE), Leg(t6, j, ONE)
        return Spine(t3), Leg(t6, j, ONE)
    if rp.row == "f":
        if x.t == HALF:
            return Leg(ZERO, x.i, HALF), Spine(ZERO)
        return Leg(ZERO, x.i, ONE), Leg(ZERO, (x.i + 1) % 3, ONE)
    if rp.row == "g":
        t3, t6 = tent(3, x.p), tent(6, x.p)
        if rp.m <= n - 1:
            return Leg(t3, x.i, ONE), Leg(t6, x.i, ONE)
        return Spine(t3), Leg(t6, x.i, ONE)
    raise ValueError(f"unknown row {rp.row!r}")


# -- maps from Gamma ---------------------------------------------------------------


class _ArcGraph:
    def __init__(self, gamma: GammaSet):
        self.level = gamma.level
        adj: dict[Pair, dict[Pair, None]] = defaultdict(dict)
        for _, arc in gamma.arcs:
            for a, b in arc.segments():
                adj[a][b] = None
                adj[b][a] = None
        self.adj = adj

    def monotone_paths(self, start: Pair, goal: Pair, limit: int = 2) -> list[list[Pair]]:
        d = self.level.distance
        dx, dy = d(start[0], goal[0]), d(start[1], goal[1])
        found = []
        stack = [(start, [start], ZERO, ZERO)]
        while stack:
            node, path, sx, sy = stack.pop()
            if node == goal:
                found.append(path)
                if len(found) >= limit:
                    break
                continue
            for nb in self.adj.get(node, ()):
                nx = d(start[0], nb[0])
                if nx < sx or nx + d(nb[0], goal[0]) != dx:
                    continue
                ny = d(start[1], nb[1])
                if ny < sy or ny + d(nb[1], goal[1]) != dy:
                    continue
                stack.append((nb, path + [nb], nx, ny))
        return found


def build_maps(
    n: int,
    gamma: GammaSet,
    overrides: Mapping[TreePoint, Pair] | None = None,
    parameterization: str = "uniform",
) -> tuple[PLMap, PLMap]:
    """f_n, g_n : T_{n+1} -> T_n parameterizing Gamma_n between ruled points.

    ``overrides`` replaces the tabulated values at chosen ruled points; it
    exists to check that the verification passes notice a corrupted table.
    """
    rs = ruled_set(n)
    values: dict[TreePoint, Pair] = {}
    extra: list[Pair] = []
    for rp in rs.points:
        pair = ruled_values(n, rp, gamma)
        if overrides and rp.point in overrides:
            pair = overrides[rp.point]
        if rp.row in "bc":
            extra.append(pair)
        values[rp.point] = pair
    gamma = gamma.with_points(extra)
    for pt, pair in values.items():
        if not gamma.contains(pair):
            raise ConstructionError(f"value {_pair_str(pair)} at ruled point {pt} is not on Gamma_{n}")

    graph = _ArcGraph(gamma)
    cod = gamma.level
    f_tab: dict[EdgeKey, list] = defaultdict(list)
    g_tab: dict[EdgeKey, list] = defaultdict(list)
    for edge, x1, x2 in rs.adjacency:
        p1, p2 = make_point(edge, x1), make_point(edge, x2)
        a, b = values[p1], values[p2]
        paths = graph.monotone_paths(a, b)
        if not paths:
            raise ConstructionError(
                f"no monotone arc of Gamma_{n} joins {_pair_str(a)} to {_pair_str(b)} (ruled points {p1}, {p2})"
            )
        if len(paths) > 1:
            raise AmbiguityError(
                f"several monotone arcs of Gamma_{n} join {_pair_str(a)} to {_pair_str(b)} (ruled points {p1}, {p2})"
            )
        path = paths[0]
        if parameterization == "uniform":
            lengths = [ONE] * (len(path) - 1)
        else:
            lengths = [cod.distance(u[0], v[0]) + cod.distance(u[1], v[1]) for u, v in zip(path, path[1:])]
        total = sum(lengths, ZERO)
        run = ZERO
        ft, gt = f_tab[edge], g_tab[edge]
        if not ft:
            ft.append((x1, path[0][0]))
            gt.append((x1, path[0][1]))
        for node, length in zip(path[1:], lengths):
            run += length
            x = x1 + (x2 - x1) * run / total if total else x2
            ft.append((x, node[0]))
            gt.append((x, node[1]))
        if len(path) == 1:
            # both ends carry the same value: the pair map is constant here
            ft.append((x2, a[0]))
            gt.append((x2, a[1]))
    domain = tree_level(n + 1)
    f = PLMap(domain, cod, f_tab)
    g = PLMap(domain, cod, g_tab)
    return f, g


def _pair_str(pair: Pair) -> str:
    return f"({pair[0]}, {pair[1]})"


# -- the next Gamma ----------------------------------------------------------------


def next_gamma(n: int, f: PLMap, g: PLMap) -> GammaSet:
    """Gamma_{n+1} inside the coincidence set [g_n, f_n]."""
    eps1 = epsilon(n + 1)
    cod = f.codomain
    arcs: list[tuple[Tag, ProductArc]] = []

    def trace(tag: Tag, g_edge, g_from, g_to, f_edge, f_from, f_to) -> ProductArc:
        ga = g.restrict(g_edge, g_from, g_to)
        fa = f.restrict(f_edge, f_from, f_to)
        for end, gv, fv in (("start", ga.values[0], fa.values[0]), ("end", ga.values[-1], fa.values[-1])):
            if gv != fv:
                raise ConstructionError(
                    f"{tag} at level {n + 1}: {end} g_{n}({ga.start if end == 'start' else ga.end}) = {gv} "
                    f"but f_{n}({fa.start if end == 'start' else fa.end}) = {fv}"
                )
        try:
            return trace_coincidence_arc(ga, fa, cod)
        except PreconditionError as exc:
            raise ConstructionError(f"{tag} at level {n + 1}: {exc}") from exc

    rs = ruled_set(n)
    spine = [rp.point.t for rp in rs.points if type(rp.point) is Spine and rp.row != "b"]
    sides = [
        ([x for x in spine if x <= HALF], {ZERO: eps1}),
        ([x for x in spine if HALF <= x <= TWO_THIRDS], {TWO_THIRDS: TWO_THIRDS + eps1}),
        ([x for x in spine if x >= TWO_THIRDS], {TWO_THIRDS: TWO_THIRDS - eps1}),
    ]
    for k, (xs, special) in enumerate(sides):
        tag = Tag("C1", part=k)
        ys = [special.get(x, tent(2, x)) for x in xs]
        nodes: list[Pair] = []
        for x1, x2, y1, y2 in zip(xs, xs[1:], ys, ys[1:]):
            piece = trace(tag, SPINE, x1, x2, SPINE, y1, y2)
            nodes.extend(piece.nodes[1:] if nodes else piece.nodes)
        arcs.append((tag, ProductArc(f.domain, nodes)))
    for i in range(3):
        arcs.append((Tag("C3", ZERO, i), trace(Tag("C3", ZERO, i), (ZERO, i), ZERO, HALF, SPINE, eps1, ZERO)))
    for i in range(3):
        for side in (1, -1):
            tag = Tag("C3", TWO_THIRDS, i, side)
            arcs.append((tag, trace(tag, (TWO_THIRDS, i), ZERO, HALF, SPINE, TWO_THIRDS + side * eps1, TWO_THIRDS)))
    for p in (ZERO, TWO_THIRDS):
        for i in range(3):
            tag = Tag("C4", p, i)
            arcs.append((tag, trace(tag, (p, i), HALF, ONE, (p, (i + 1) % 3), ZERO, ONE)))
    for p in c5_points(n + 1):
        q = tent(2, p)
        for i in range(3):
            tag = Tag("C5", p, i)
            arcs.append((tag, trace(tag, (p, i), ZERO, ONE, (q, i), ZERO, ONE)))
    for p in c6_points(n + 1):
        q = tent(2, p)
        for i in range(3):
            tag = Tag("C6", p, i)
            arcs.append((tag, trace(tag, SPINE, p, p, (q, i), ZERO, ONE)))
    return GammaSet(n + 1, arcs, f.domain)


# -- verification of the Gamma conditions --------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"check": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class GammaReport:
    n: int
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, passed, detail))

    def to_json(self) -> dict:
        return {"n": self.n, "passed": self.passed, "checks": [c.to_json() for c in self.checks]}


# Region descriptors: ("spine",) or ("leg", p, i).
SPINE_REGION = ("spine",)


def _in_region(v: TreePoint, region) -> bool:
    if region[0] == "spine":
        return type(v) is Spine
    return pos_on_edge(v, (region[1], region[2])) is not None


ALL = "all"


def _coord_hits(u: TreePoint, v: TreePoint, region):
    """Segment fractions at which a coordinate moving u -> v lies in the region."""
    if u == v:
        return ALL if _in_region(u, region) else set()
    e, pu, pv = common_edge(u, v)
    if region[0] == "spine":
        if e == SPINE:
            return ALL
        return {lam for lam, q in ((ZERO, pu), (ONE, pv)) if q == 0}
    p, i = region[1], region[2]
    if e == (p, i):
        return ALL
    if e == SPINE:
        if min(pu, pv) <= p <= max(pu, pv):
            return {(p - pu) / (pv - pu)}
        return set()
    if e[0] == p:
        return {lam for lam, q in ((ZERO, pu), (ONE, pv)) if q == 0}
    return set()


def _segment_hits(a: Pair, b: Pair, rx, ry):
    hx = _coord_hits(a[0], b[0], rx)
    if not hx:
        return set()
    hy = _coord_hits(a[1], b[1], ry)
    if hx == ALL:
        return hy
    if hy == ALL:
        return hx
    return hx & hy


def _check_region(report: GammaReport, gamma: GammaSet, name: str, designated: list[int], rx, ry) -> None:
    """Every point of Gamma in rx x ry lies on the designated arcs."""
    arcs = gamma.arcs
    own = set(designated)

    def on_designated(pt):
        return gamma.contains(pt, own)

    if rx == SPINE_REGION:
        candidates = {(a, k) for a, (_, arc) in enumerate(arcs) for k in range(max(1, len(arc.nodes) - 1))}
    else:
        p, i = rx[1], rx[2]
        candidates = set(gamma.index.near(Leg(p, i, ONE))) | set(gamma.index.near(Spine(p), gamma.level.attachments))
    for a, k in sorted(candidates):
        if a in own:
            continue
        arc = arcs[a][1]
        if len(arc.nodes) == 1:
            pts = [arc.nodes[0]] if _in_region(arc.nodes[0][0], rx) and _in_region(arc.nodes[0][1], ry) else []
        else:
            seg_a, seg_b = arc.nodes[k], arc.nodes[k + 1]
            hits = _segment_hits(seg_a, seg_b, rx, ry)
            if hits == ALL:
                pts = [seg_a, arc.sample(k, HALF), seg_b]
            else:
                pts = [arc.sample(k, lam) for lam in sorted(hits)]
        for pt in pts:
            if not on_designated(pt):
                report.add(f"{name} exclusive", False, f"{arcs[a][0]} meets the region at {_pair_str(pt)}")
                return
    report.add(f"{name} exclusive", True)


def _check_arc(report, gamma, tag: Tag, start: Pair, end: Pair, rx, ry) -> int | None:
    idx = [k for k, (t, _) in enumerate(gamma.arcs) if t == tag]
    if len(idx) != 1:
        report.add(str(tag), False, f"expected exactly one arc tagged {tag}, found {len(idx)}")
        return None
    arc = gamma.arcs[idx[0]][1]
    problems = []
    if arc.start != start or arc.end != end:
        problems.append(f"endpoints {_pair_str(arc.start)} -> {_pair_str(arc.end)}, expected {_pair_str(start)} -> {_pair_str(end)}")
    if not arc.is_monotone():
        problems.append("not monotone")
    for k, (a, b) in enumerate(arc.segments()):
        if _segment_hits(a, b, rx, ry) != ALL:
            problems.append(f"segment {_pair_str(a)} -> {_pair_str(b)} leaves its region")
            break
    report.add(str(tag), not problems, "; ".join(problems))
    return idx[0]


def verify_gamma(gamma: GammaSet, n: int) -> GammaReport:
    """Check conditions C1-C6 and disjointness from the diagonal, instance by instance."""
    report = GammaReport(n)
    if gamma.n != n:
        report.add("level", False, f"Gamma is for level {gamma.n}, not {n}")
        return report
    eps = epsilon(n)
    S = Spine

    for tag, arc in gamma.arcs:
        d, where = arc.min_diagonal_distance()
        report.add(f"diagonal {tag}", d > 0, "" if d > 0 else f"meets the diagonal at {_pair_str(where)}")

    ends = [
        ((S(ZERO), S(eps)), (S(HALF), S(ONE))),
        ((S(HALF), S(ONE)), (S(TWO_THIRDS), S(TWO_THIRDS + eps))),
        ((S(TWO_THIRDS), S(TWO_THIRDS - eps)), (S(ONE), S(ZERO))),
    ]
    c1_idx = []
    if len(gamma.tagged("C1")) != 3:
        report.add("C1 count", False, f"{len(gamma.tagged('C1'))} arcs tagged C1")
    for k, (st, en) in enumerate(ends):
        c1_idx.append(_check_arc(report, gamma, Tag("C1", part=k), st, en, SPINE_REGION, SPINE_REGION))
    c1_idx = [k for k in c1_idx if k is not None]
    _check_region(report, gamma, "C1", c1_idx, SPINE_REGION, SPINE_REGION)

    for p in c2_points(n):
        pt = (S(p), S(tent(2, p)))
        ok = gamma.contains(pt, set(c1_idx))
        report.add(f"C2[p={fmt(p)}]", ok, "" if ok else f"{_pair_str(pt)} not on the C1 arcs")

    for i in range(3):
        region = ("leg", ZERO, i)
        k = _check_arc(report, gamma, Tag("C3", ZERO, i), (S(ZERO), S(eps)), (Leg(ZERO, i, HALF), S(ZERO)), region, SPINE_REGION)
        if k is not None:
            _check_region(report, gamma, str(Tag("C3", ZERO, i)), [k], region, SPINE_REGION)
        region = ("leg", TWO_THIRDS, i)
        ks = []
        for side in (1, -1):
            tag = Tag("C3", TWO_THIRDS, i, side)
            k = _check_arc(
                report, gamma, tag, (S(TWO_THIRDS), S(TWO_THIRDS + side * eps)), (Leg(TWO_THIRDS, i, HALF), S(TWO_THIRDS)),
                region, SPINE_REGION,
            )
            if k is not None:
                ks.append(k)
        _check_region(report, gamma, f"C3[p=2/3,i={i}]", ks, region, SPINE_REGION)

    for p in (ZERO, TWO_THIRDS):
        for i in range(3):
            tag = Tag("C4", p, i)
            rx, ry = ("leg", p, i), ("leg", p, (i + 1) % 3)
            k = _check_arc(report, gamma, tag, (Leg(p, i, HALF), S(p)), (Leg(p, i, ONE), Leg(p, (i + 1) % 3, ONE)), rx, ry)
            if k is not None:
                _check_region(report, gamma, str(tag), [k], rx, ry)

    for p in c5_points(n):
        q = tent(2, p)
        for i in range(3):
            tag = Tag("C5", p, i)
            rx, ry = ("leg", p, i), ("leg", q, i)
            k = _check_arc(report, gamma, tag, (S(p), S(q)), (Leg(p, i, ONE), Leg(q, i, ONE)), rx, ry)
            if k is not None:
                _check_region(report, gamma, str(tag), [k], rx, ry)

    for p in c6_points(n):
        q = tent(2, p)
        for i in range(3):
            tag = Tag("C6", p, i)
            idx = [k for k, (t, _) in enumerate(gamma.arcs) if t == tag]
            if len(idx) != 1:
                report.add(str(tag), False, f"expected exactly one arc tagged {tag}, found {len(idx)}")
                continue
            arc = gamma.arcs[idx[0]][1]
            want = [(S(p), S(q)), (S(p), Leg(q, i, ONE))]
            ok = arc.nodes == want
            report.add(str(tag), ok, "" if ok else f"nodes {[_pair_str(x) for x in arc.nodes]}")

    expected = {Tag("C1", part=k) for k in range(3)}
    expected |= {Tag("C3", ZERO, i) for i in range(3)}
    expected |= {Tag("C3", TWO_THIRDS, i, s) for i in range(3) for s in (1, -1)}
    expected |= {Tag("C4", p, i) for p in (ZERO, TWO_THIRDS) for i in range(3)}
    expected |= {Tag("C5", p, i) for p in c5_points(n) for i in range(3)}
    expected |= {Tag("C6", p, i) for p in c6_points(n) for i in range(3)}
    stray = [str(t) for t, _ in gamma.arcs if t not in expected]
    report.add("tags", not stray, f"unexpected arcs {stray}" if stray else "")
    return report


# -- the tower ---------------------------------------------------------------------


@dataclass
class Level:
    n: int
    gamma: GammaSet
    f: PLMap
    g: PLMap

    def to_json(self) -> dict:
        return {"n": self.n, "gamma": self.gamma.to_json(), "f": self.f.to_json(), "g": self.g.to_json(), "verified": True}

    @classmethod
    def from_json(cls, data: Mapping) -> Level:
        if not data.get("verified"):
            raise ValueError(f"cached level {data.get('n')} was never verified")
        n = data["n"]
        return cls(n, GammaSet.from_json(n, data["gamma"]), PLMap.from_json(data["f"]), PLMap.from_json(data["g"]))


CACHE_ENV = "TREELIKE_CACHE"


def default_cache_dir() -> Path | None:
    root = os.environ.get(CACHE_ENV)
    return Path(root) if root else None


def level_path(cache_dir: Path, n: int) -> Path:
    return Path(cache_dir) / f"level_{n}.json"


def write_level(cache_dir: Path, level: Level) -> None:
    path = level_path(cache_dir, level.n)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(level.to_json(), sort_keys=True, separators=(",", ":")), encoding="utf-8")
    tmp.replace(path)


def read_level(cache_dir: Path, n: int) -> Level | None:
    path = level_path(cache_dir, n)
    if not path.exists():
        return None
    return Level.from_json(json.loads(path.read_text(encoding="utf-8")))


def build_level(n: int, previous: Level | None, overrides: Mapping[TreePoint, Pair] | None = None) -> Level:
    if n == 0:
        gamma = build_gamma0()
    else:
        gamma = next_gamma(n - 1, previous.f, previous.g)
    report = verify_gamma(gamma, n)
    if not report.passed:
        bad = report.failures()[0]
        raise ConstructionError(f"Gamma_{n} fails {bad.name}: {bad.detail}")
    f, g = build_maps(n, gamma, overrides)
    return Level(n, gamma, f, g)


def build_tower(
    N: int,
    cache_dir: Path | str | None = None,
    overrides: Mapping[int, Mapping[TreePoint, Pair]] | None = None,
) -> list[Level]:
    """Levels 0..N of the construction, resuming from and writing to ``cache_dir``.

    ``overrides[n]`` replaces ruled values of f_n, g_n (see :func:`build_maps`);
    levels from the first overridden one upward are built in memory only.
    """
    if N < 0:
        raise DomainError(f"tower height must be non-negative, got {N}")
    overrides = dict(overrides or {})
    first_override = min(overrides, default=N + 1)
    cache = Path(cache_dir) if cache_dir is not None else None
    levels: list[Level] = []
    for n in range(N + 1):
        use_cache = cache is not None and n < first_override
        level = read_level(cache, n) if use_cache else None
        if level is None:
            log.info("building level %d", n)
            try:
                level = build_level(n, levels[-1] if levels else None, overrides.get(n))
            except ConstructionError as exc:
                raise ConstructionError(f"level {n}: {exc}") from exc
            if use_cache:
                write_level(cache, level)
        levels.append(level)
    return levels


def _linear_on(m: PLMap, u: TreePoint, v: TreePoint) -> bool:
    """Whether m moves at constant speed along one geodesic as x runs from u to v.

    u and v must share a domain edge.
    """
    if u == v:
        return True
    e, pu, pv = common_edge(u, v)
    arc = m.restrict(e, pu, pv)
    cod = m.codomain
    v0, v1 = arc.values[0], arc.values[-1]
    total = cod.distance(v0, v1)
    for x, val in zip(arc.params[1:-1], arc.values[1:-1]):
        lam = (x - pu) / (pv - pu)
        if val != cod.point_along(v0, v1, lam * total):
            return False
    return True


def check_containment(gamma: GammaSet, f: PLMap, g: PLMap, samples: int = 100, seed: int = 0) -> GammaReport:
    """Gamma_{n+1} lies in the coincidence set {(x, y) : g_n(x) = f_n(y)}.

    Every breakpoint is checked exactly and every segment is proved to stay
    in the set by the linearity of both sides on it; ``samples`` interior
    points per arc are evaluated directly on top of that.
    """
    rng = random.Random(seed)
    report = GammaReport(gamma.n)
    for tag, arc in gamma.arcs:
        bad = ""
        for x, y in arc.nodes:
            if g(x) != f(y):
                bad = f"breakpoint {_pair_str((x, y))}: g = {g(x)}, f = {f(y)}"
                break
        if not bad:
            for a, b in arc.segments():
                if not (_linear_on(g, a[0], b[0]) and _linear_on(f, a[1], b[1])):
                    bad = f"segment {_pair_str(a)} -> {_pair_str(b)} is not linear on both sides"
                    break
        segs = len(arc.nodes) - 1
        if not bad and segs:
            for _ in range(samples):
                k = rng.randrange(segs)
                lam = Q(rng.randrange(1, 1024), 1024)
                x, y = arc.sample(k, lam)
                if g(x) != f(y):
                    bad = f"sample {_pair_str((x, y))}: g = {g(x)}, f = {f(y)}"
                    break
        report.add(f"contained {tag}", not bad, bad)
    return report
