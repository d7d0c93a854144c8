"""Piecewise-geodesic maps between tree levels, and arcs in products of trees.

A :class:`PLMap` stores, for every edge of its domain tree (the spine, and
each leg ``(p, i)``), a list of breakpoints ``(param, value)``.  Between
consecutive breakpoints the value moves at constant speed along the codomain
geodesic.  Tables are normalized on construction so that consecutive values
always share a closed codomain edge; interpolation is then linear in the
edge coordinate and everything below is exact.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .exact_arith import ONE, ZERO, Rational, fmt, parse
from .tree import (
    SPINE,
    EdgeKey,
    InvalidPoint,
    Leg,
    Spine,
    TreeLevel,
    TreePoint,
    common_edge,
    edge_pos,
    geodesic,
    make_point,
    parse_point,
    tree_level,
)

Breakpoints = Sequence[tuple[Rational, TreePoint]]


class CompositionError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def pos_on_edge(x: TreePoint, edge: EdgeKey) -> Rational | None:
    """Coordinate of ``x`` on the closed edge, or None if ``x`` is not on it."""
    if edge == SPINE:
        return x.t if type(x) is Spine else None
    p, i = edge
    if type(x) is Spine:
        return ZERO if x.t == p else None
    if x.p == p and x.i == i:
        return x.t
    return None


def edge_key_str(edge: EdgeKey) -> str:
    if edge == SPINE:
        return "S"
    return f"{fmt(edge[0])}:{edge[1]}"


def parse_edge_key(s: str) -> EdgeKey:
    if s == "S":
        return SPINE
    p, i = s.split(":")
    return parse(p), int(i)


def _lerp_point(v0: TreePoint, v1: TreePoint, lam: Rational) -> TreePoint:
    if lam == 0 or v0 == v1:
        return v0
    if lam == 1:
        return v1
    edge, a, b = common_edge(v0, v1)
    return make_point(edge, a + (b - a) * lam)


def _split_corners(level: TreeLevel, x0, x1, v0: TreePoint, v1: TreePoint):
    """Interior (param, corner) pairs where the geodesic v0 -> v1 changes edge."""
    corners = geodesic(v0, v1)
    if len(corners) <= 2:
        return []
    total = level.distance(v0, v1)
    out = []
    run = ZERO
    for u, w in zip(corners[:-2], corners[1:-1]):
        run += level.distance(u, w)
        out.append((x0 + (x1 - x0) * run / total, w))
    return out


def _kinks(e_a, a0, a1, e_b, b0, b1) -> list[Rational]:
    """Fractions in (0, 1) where the distance between two linearly moving points may kink."""
    if e_a == SPINE and e_b == SPINE:
        c0, c1 = a0 - b0, a1 - b1
    elif e_a == SPINE:
        c0, c1 = a0 - e_b[0], a1 - e_b[0]
    elif e_b == SPINE:
        c0, c1 = b0 - e_a[0], b1 - e_a[0]
    elif e_a == e_b:
        c0, c1 = a0 - b0, a1 - b1
    else:
        return []
    if (c0 < 0 < c1) or (c1 < 0 < c0):
        return [c0 / (c0 - c1)]
    return []


class PLMap:
    """A piecewise-geodesic map from ``domain`` to ``codomain``.  Immutable."""

    def __init__(
        self,
        domain: TreeLevel,
        codomain: TreeLevel,
        tables: Mapping[EdgeKey, Breakpoints],
        check: bool = True,
    ):
        self.domain = domain
        self.codomain = codomain
        self.tables: dict[EdgeKey, tuple[list[Rational], list[TreePoint]]] = {}
        for edge in domain.edges():
            if edge not in tables:
                raise ValueError(f"no breakpoint table for domain edge {edge_key_str(edge)}")
            self.tables[edge] = self._normalize(edge, tables[edge])
        if len(tables) != len(self.tables):
            extra = set(tables) - set(self.tables)
            raise ValueError(f"tables for edges outside the domain: {sorted(map(edge_key_str, extra))}")
        if check:
            self._check()

    def _normalize(self, edge, bps: Breakpoints):
        xs: list[Rational] = []
        vs: list[TreePoint] = []
        for x, v in bps:
            if xs and x == xs[-1]:
                if v != vs[-1]:
                    raise ValueError(f"edge {edge_key_str(edge)}: two values at parameter {x}")
                continue
            if xs and x < xs[-1]:
                raise ValueError(f"edge {edge_key_str(edge)}: parameters must increase")
            if vs:
                for cx, cv in _split_corners(self.codomain, xs[-1], x, vs[-1], v):
                    xs.append(cx)
                    vs.append(cv)
            xs.append(x)
            vs.append(v)
        return xs, vs

    def _check(self) -> None:
        cod = self.codomain
        for edge, (xs, vs) in self.tables.items():
            if not xs or xs[0] != 0 or xs[-1] != 1:
                raise ValueError(f"edge {edge_key_str(edge)}: breakpoints must span [0, 1]")
            for v in vs:
                if cod.canonicalize(v) != v:
                    raise InvalidPoint(f"value {v} is not a canonical point of T_{cod.n}")
        for p in self.domain.attachments:
            at_p = self.eval(Spine(p))
            for i in range(3):
                if self.tables[(p, i)][1][0] != at_p:
                    raise ValueError(f"map is discontinuous at the base of leg ({p}, {i})")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def identity(cls, level: TreeLevel) -> PLMap:
        tables: dict[EdgeKey, list] = {SPINE: [(ZERO, Spine(ZERO)), (ONE, Spine(ONE))]}
        for p in level.attachments:
            for i in range(3):
                tables[(p, i)] = [(ZERO, Spine(p)), (ONE, Leg(p, i, ONE))]
        return cls(level, level, tables)

    @property
    def domain_level(self) -> int:
        return self.domain.n

    @property
    def codomain_level(self) -> int:
        return self.codomain.n

    def breakpoint_count(self) -> int:
        return sum(len(xs) for xs, _ in self.tables.values())

    def simplified(self) -> PLMap:
        """Same map with collinear consecutive pieces merged."""
        tables = {}
        for edge, (xs, vs) in self.tables.items():
            nx, nv = [xs[0]], [vs[0]]
            for k in range(1, len(xs)):
                if k + 1 < len(xs) and _collinear(nx[-1], xs[k], xs[k + 1], nv[-1], vs[k], vs[k + 1]):
                    continue
                nx.append(xs[k])
                nv.append(vs[k])
            tables[edge] = list(zip(nx, nv))
        return PLMap(self.domain, self.codomain, tables, check=False)

    # -- evaluation ----------------------------------------------------------

    def eval(self, x: TreePoint) -> TreePoint:
        x = self.domain.canonicalize(x)
        edge, pos = edge_pos(x)
        return self._eval_on(edge, pos)

    __call__ = eval

    def _eval_on(self, edge: EdgeKey, pos: Rational) -> TreePoint:
        xs, vs = self.tables[edge]
        k = bisect_right(xs, pos) - 1
        if k >= len(xs) - 1:
            return vs[-1]
        x0, x1 = xs[k], xs[k + 1]
        if pos == x0:
            return vs[k]
        return _lerp_point(vs[k], vs[k + 1], (pos - x0) / (x1 - x0))

    def restrict(self, edge: EdgeKey, start: Rational, end: Rational) -> ArcMap:
        """The map along the part of domain edge ``edge`` from ``start`` to ``end``."""
        xs, vs = self.tables[edge]
        lo, hi = min(start, end), max(start, end)
        i0 = bisect_right(xs, lo)
        i1 = bisect_left(xs, hi)
        params = [lo] + xs[i0:i1] + ([hi] if hi != lo else [])
        values = [self._eval_on(edge, lo)] + vs[i0:i1] + ([self._eval_on(edge, hi)] if hi != lo else [])
        if start > end:
            params.reverse()
            values.reverse()
        return ArcMap(self.domain, edge, params, values)

    def pieces(self):
        """Yield (edge, x0, x1, v0, v1) for every linear piece."""
        for edge, (xs, vs) in self.tables.items():
            for k in range(len(xs) - 1):
                yield edge, xs[k], xs[k + 1], vs[k], vs[k + 1]

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "domain_level": self.domain.n,
            "codomain_level": self.codomain.n,
            "edges": [
                {
                    "edge": edge_key_str(edge),
                    "breakpoints": [[fmt(x), str(v)] for x, v in zip(*self.tables[edge])],
                }
                for edge in self.domain.edges()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping, domain: TreeLevel | None = None, codomain: TreeLevel | None = None) -> PLMap:
        domain = domain or tree_level(data["domain_level"])
        codomain = codomain or tree_level(data["codomain_level"])
        tables = {
            parse_edge_key(e["edge"]): [(parse(x), parse_point(v)) for x, v in e["breakpoints"]]
            for e in data["edges"]
        }
        return cls(domain, codomain, tables)


def _collinear(x0, x1, x2, v0, v1, v2) -> bool:
    ce = common_edge(v0, v2)
    if ce is None:
        return False
    edge, a, c = ce
    b = pos_on_edge(v1, edge)
    if b is None:
        return False
    return (b - a) * (x2 - x0) == (c - a) * (x1 - x0)


def _eval_sorted(m: PLMap, edge: EdgeKey, params: Sequence[Rational]) -> list[TreePoint]:
    xs, vs = m.tables[edge]
    out = []
    k = 0
    last = len(xs) - 1
    for pos in params:
        while k < last - 1 and xs[k + 1] <= pos:
            k += 1
        if pos == xs[k]:
            out.append(vs[k])
        elif pos == xs[k + 1]:
            out.append(vs[k + 1])
        else:
            out.append(_lerp_point(vs[k], vs[k + 1], (pos - xs[k]) / (xs[k + 1] - xs[k])))
    return out


# -- algebra -------------------------------------------------------------------


def compose(outer: PLMap, inner: PLMap) -> PLMap:
    """Exact representation of ``outer o inner``."""
    if inner.codomain.n != outer.domain.n:
        raise CompositionError(
            f"cannot compose: inner maps into T_{inner.codomain.n}, outer is defined on T_{outer.domain.n}"
        )
    tables = {}
    for edge, (xs, vs) in inner.tables.items():
        out_x = [xs[0]]
        out_v = [outer._eval_on(*edge_pos(vs[0]))]
        for k in range(len(xs) - 1):
            x0, x1, v0, v1 = xs[k], xs[k + 1], vs[k], vs[k + 1]
            if v0 != v1:
                e, a, b = common_edge(v0, v1)
                oxs, ovs = outer.tables[e]
                if a < b:
                    idx = range(bisect_right(oxs, a), bisect_left(oxs, b))
                else:
                    idx = reversed(range(bisect_right(oxs, b), bisect_left(oxs, a)))
                for j in idx:
                    out_x.append(x0 + (x1 - x0) * (oxs[j] - a) / (b - a))
                    out_v.append(ovs[j])
            out_x.append(x1)
            out_v.append(outer._eval_on(*edge_pos(v1)))
        tables[edge] = list(zip(out_x, out_v))
    return PLMap(inner.domain, outer.codomain, tables, check=False)


def _same_levels(a: PLMap, b: PLMap) -> None:
    if a.domain != b.domain or a.codomain != b.codomain:
        raise ValueError(
            f"maps T_{a.domain.n}->T_{a.codomain.n} and T_{b.domain.n}->T_{b.codomain.n} are not comparable"
        )


def first_difference(a: PLMap, b: PLMap) -> tuple[TreePoint, TreePoint, TreePoint] | None:
    """A domain point where the maps differ, with both values; None if equal."""
    _same_levels(a, b)
    for edge in a.domain.edges():
        params = sorted(set(a.tables[edge][0]) | set(b.tables[edge][0]))
        for x, va, vb in zip(params, _eval_sorted(a, edge, params), _eval_sorted(b, edge, params)):
            if va != vb:
                return make_point(edge, x), va, vb
    return None


def equal(a: PLMap, b: PLMap) -> bool:
    """Exact equality via a common refinement of the breakpoint sets.

    Both maps are geodesic-linear between consecutive common breakpoints, so
    agreement at every common breakpoint is agreement everywhere.
    """
    return first_difference(a, b) is None


def min_map_distance(a: PLMap, b: PLMap) -> tuple[Rational, TreePoint]:
    """Exact minimum over the domain of d(a(x), b(x)) with an attaining point."""
    _same_levels(a, b)
    cod = a.codomain
    best: Rational | None = None
    witness: TreePoint | None = None
    for edge in a.domain.edges():
        params = sorted(set(a.tables[edge][0]) | set(b.tables[edge][0]))
        av = _eval_sorted(a, edge, params)
        bv = _eval_sorted(b, edge, params)
        for k in range(len(params)):
            d = cod.distance(av[k], bv[k])
            if best is None or d < best:
                best, witness = d, make_point(edge, params[k])
            if k + 1 == len(params):
                break
            ea = common_edge(av[k], av[k + 1])
            eb = common_edge(bv[k], bv[k + 1])
            for lam in _kinks(ea[0], ea[1], ea[2], eb[0], eb[1], eb[2]):
                pa = _lerp_point(av[k], av[k + 1], lam)
                pb = _lerp_point(bv[k], bv[k + 1], lam)
                d = cod.distance(pa, pb)
                if d < best:
                    best = d
                    witness = make_point(edge, params[k] + (params[k + 1] - params[k]) * lam)
    return best, witness


# -- preimages and valence -------------------------------------------------------


def _piece_preimage(x0, x1, v0, v1, y: TreePoint):
    """Sub-interval (lo, hi) of [x0, x1] mapped to y, or None."""
    if v0 == v1:
        return (x0, x1) if v0 == y else None
    e, a, b = common_edge(v0, v1)
    q = pos_on_edge(y, e)
    if q is None or not (min(a, b) <= q <= max(a, b)):
        return None
    x = x0 + (x1 - x0) * (q - a) / (b - a)
    return x, x


def _components(domain: TreeLevel, pieces: dict[EdgeKey, list[tuple[Rational, Rational]]]):
    """Connected components of a union of closed sub-intervals of domain edges."""
    merged: dict[EdgeKey, list[list[Rational]]] = {}
    for edge, ivs in pieces.items():
        ivs = sorted(ivs)
        out: list[list[Rational]] = []
        for lo, hi in ivs:
            if out and lo <= out[-1][1]:
                out[-1][1] = max(out[-1][1], hi)
            else:
                out.append([lo, hi])
        merged[edge] = out
    nodes = [(edge, lo, hi) for edge, ivs in merged.items() for lo, hi in ivs]
    parent = list(range(len(nodes)))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    spine_ivs = [(k, lo, hi) for k, (e, lo, hi) in enumerate(nodes) if e == SPINE]
    by_base: dict[Rational, list[int]] = defaultdict(list)
    for k, (e, lo, hi) in enumerate(nodes):
        if e != SPINE and lo == 0:
            by_base[e[0]].append(k)
    for p, legs in by_base.items():
        anchor = next((k for k, lo, hi in spine_ivs if lo <= p <= hi), None)
        group = legs + ([anchor] if anchor is not None else [])
        for k in group[1:]:
            parent[find(k)] = find(group[0])
    comps: dict[int, list] = defaultdict(list)
    for k, node in enumerate(nodes):
        comps[find(k)].append(node)
    return [comps[r] for r in sorted(comps)]


_BINS = 256


class _PieceIndex:
    """Linear pieces of a map bucketed by the codomain edge they run along."""

    def __init__(self, m: PLMap):
        self.bins: dict[EdgeKey, list[list]] = defaultdict(lambda: [[] for _ in range(_BINS)])
        self.flat: dict[TreePoint, list] = defaultdict(list)
        for piece in m.pieces():
            _, _, _, v0, v1 = piece
            if v0 == v1:
                self.flat[v0].append(piece)
                continue
            e, a, b = common_edge(v0, v1)
            lo, hi = (a, b) if a < b else (b, a)
            row = self.bins[e]
            for k in range(self._bin(lo), self._bin(hi) + 1):
                row[k].append(piece)

    @staticmethod
    def _bin(q: Rational) -> int:
        return min(int(q * _BINS), _BINS - 1)

    def candidates(self, y: TreePoint) -> list:
        out = list(self.flat.get(y, ()))
        for e in _edges_through(y):
            q = pos_on_edge(y, e)
            if e in self.bins:
                k = self._bin(q)
                out.extend(self.bins[e][k])
                if k > 0 and q * _BINS == k:
                    out.extend(self.bins[e][k - 1])
        return list(dict.fromkeys(out))


def _edges_through(y: TreePoint) -> list[EdgeKey]:
    if type(y) is Leg:
        return [(y.p, y.i)]
    return [SPINE] + [(y.t, i) for i in range(3)]


def _piece_index(m: PLMap) -> _PieceIndex:
    idx = m.__dict__.get("_piece_index")
    if idx is None:
        idx = m.__dict__["_piece_index"] = _PieceIndex(m)
    return idx


def preimage_components(m: PLMap, y: TreePoint) -> tuple[int, list]:
    """Number of connected components of m^-1(y), with the components.

    Each component is a list of ``(edge, lo, hi)`` closed sub-intervals of
    domain edges (``lo == hi`` for isolated points).
    """
    y = m.codomain.canonicalize(y)
    pieces: dict[EdgeKey, list] = defaultdict(list)
    for edge, x0, x1, v0, v1 in _piece_index(m).candidates(y):
        iv = _piece_preimage(x0, x1, v0, v1, y)
        if iv is not None:
            pieces[edge].append(iv)
    comps = _components(m.domain, pieces)
    return len(comps), comps


def _critical_points(m: PLMap) -> dict[EdgeKey, list[Rational]]:
    cod = m.codomain
    crit: dict[EdgeKey, set[Rational]] = defaultdict(set)
    crit[SPINE] |= {ZERO, ONE, *cod.attachments}
    for p in cod.attachments:
        for i in range(3):
            crit[(p, i)] |= {ZERO, ONE}
    for _, vs in m.tables.values():
        for v in vs:
            e, q = edge_pos(v)
            crit[e].add(q)
    for p in cod.attachments:
        for i in range(3):
            crit[(p, i)].add(ZERO)
    return {e: sorted(s) for e, s in crit.items()}


def component_profile(m: PLMap) -> list[tuple[TreePoint, int]]:
    """Preimage component counts at every critical value and one generic
    point between each pair of adjacent critical values on each codomain edge.

    Counts only change at critical values (breakpoint values and vertices of
    the codomain), so this list determines the count at every point.
    """
    crit = _critical_points(m)
    generic: dict[EdgeKey, list[int]] = {e: [0] * (len(c) + 1) for e, c in crit.items()}
    buckets: dict[TreePoint, list] = defaultdict(list)
    for edge, x0, x1, v0, v1 in m.pieces():
        if v0 == v1:
            buckets[v0].append((edge, x0, x1, v0, v1))
            continue
        e, a, b = common_edge(v0, v1)
        lo, hi = (a, b) if a < b else (b, a)
        c = crit[e]
        i0, i1 = bisect_left(c, lo), bisect_right(c, hi)
        for j in range(i0, i1):
            buckets[make_point(e, c[j])].append((edge, x0, x1, v0, v1))
        generic[e][i0] += 1
        generic[e][i1 - 1] -= 1
    out: list[tuple[TreePoint, int]] = []
    for e, c in crit.items():
        run = 0
        for j in range(len(c) - 1):
            run += generic[e][j]
            out.append((make_point(e, (c[j] + c[j + 1]) / 2), run))
    seen = set()
    for e, c in crit.items():
        for q in c:
            y = make_point(e, q)
            if y in seen:
                continue
            seen.add(y)
            pieces: dict[EdgeKey, list] = defaultdict(list)
            for edge, x0, x1, v0, v1 in buckets.get(y, ()):
                iv = _piece_preimage(x0, x1, v0, v1, y)
                if iv is not None:
                    pieces[edge].append(iv)
            out.append((y, len(_components(m.domain, pieces))))
    return out


def valence(m: PLMap) -> tuple[int, TreePoint]:
    """Maximum number of preimage components, with a point attaining it."""
    best, witness = -1, None
    for y, count in component_profile(m):
        if count > best or (count == best and _point_order(y) < _point_order(witness)):
            best, witness = count, y
    return best, witness


def _point_order(x: TreePoint | None):
    if x is None:
        return (2,)
    if type(x) is Spine:
        return (0, x.t)
    return (1, x.p, x.i, x.t)


# -- arcs ----------------------------------------------------------------------


@dataclass(frozen=True)
class ArcMap:
    """A map restricted to a sub-arc of one domain edge, listed in traversal order."""

    domain: TreeLevel
    edge: EdgeKey
    params: list[Rational]
    values: list[TreePoint]

    def point(self, param: Rational) -> TreePoint:
        return make_point(self.edge, param)

    @property
    def start(self) -> TreePoint:
        return self.point(self.params[0])

    @property
    def end(self) -> TreePoint:
        return self.point(self.params[-1])


def _geodesic_positions(level: TreeLevel, values: Sequence[TreePoint], what: str) -> list[Rational]:
    """Arclength positions of values along the geodesic from the first to the last.

    Raises PreconditionError unless the values traverse that geodesic without
    backtracking.
    """
    first, last = values[0], values[-1]
    total = level.distance(first, last)
    out = []
    prev = ZERO
    for v in values:
        s = level.distance(first, v)
        if s + level.distance(v, last) != total:
            raise PreconditionError(f"{what} leaves the geodesic {first} -> {last} at {v}")
        if s < prev:
            raise PreconditionError(f"{what} backtracks at {v}")
        out.append(s)
        prev = s
    return out


def _level_sets(params: Sequence[Rational], s: Sequence[Rational], targets: Sequence[Rational]):
    """For nondecreasing s(param) given at breakpoints: (first, last) param of each level set."""
    out = []
    k = 0
    n = len(s)
    for t in targets:
        while k < n - 1 and s[k + 1] < t:
            k += 1
        if s[k] == t:
            j = k
            while j + 1 < n and s[j + 1] == t:
                j += 1
            out.append((params[k], params[j]))
        elif k + 1 < n and s[k] < t < s[k + 1]:
            x = params[k] + (params[k + 1] - params[k]) * (t - s[k]) / (s[k + 1] - s[k])
            out.append((x, x))
        elif k + 1 < n and s[k + 1] == t:
            j = k + 1
            while j + 1 < n and s[j + 1] == t:
                j += 1
            out.append((params[k + 1], params[j]))
        else:
            raise PreconditionError(f"level {t} not attained")
    return out


def trace_coincidence_arc(g: ArcMap, f: ArcMap, codomain: TreeLevel) -> ProductArc:
    """Monotone arc in {(x, y) : g(x) = f(y)} from (start g, start f) to (end g, end f).

    Both restricted maps must run monotonically along the same codomain
    geodesic, from a common start value to a common end value.  Where both are
    flat at the same value the first coordinate is advanced first.
    """
    if g.values[0] != f.values[0] or g.values[-1] != f.values[-1]:
        raise PreconditionError(
            f"endpoint values disagree: g runs {g.values[0]} -> {g.values[-1]}, "
            f"f runs {f.values[0]} -> {f.values[-1]}"
        )
    sg = _geodesic_positions(codomain, g.values, "first map")
    sf = _geodesic_positions(codomain, f.values, "second map")
    levels = sorted(set(sg) | set(sf))
    xs = _level_sets(g.params, sg, levels)
    ys = _level_sets(f.params, sf, levels)
    nodes: list[tuple[TreePoint, TreePoint]] = []
    for (xlo, xhi), (ylo, yhi) in zip(xs, ys):
        nodes.append((g.point(xlo), f.point(ylo)))
        if xhi != xlo:
            nodes.append((g.point(xhi), f.point(ylo)))
        if yhi != ylo:
            nodes.append((g.point(xhi), f.point(yhi)))
    return ProductArc(g.domain, nodes)


class ProductArc:
    """An arc in T x T given by breakpoint pairs.

    Between consecutive pairs both coordinates move at constant speed along
    their geodesics, driven by one common parameter.  Construction inserts
    breakpoints so that within a segment each coordinate stays on one edge.
    """

    __slots__ = ("level", "nodes")

    def __init__(self, level: TreeLevel, nodes: Iterable[tuple[TreePoint, TreePoint]]):
        self.level = level
        out: list[tuple[TreePoint, TreePoint]] = []
        for node in nodes:
            if out and node == out[-1]:
                continue
            if out:
                out.extend(self._corners(out[-1], node))
            out.append(node)
        self.nodes = out

    def _corners(self, a, b):
        fracs: dict[Rational, None] = {}
        for c in (0, 1):
            if a[c] == b[c]:
                continue
            corners = geodesic(a[c], b[c])
            if len(corners) > 2:
                total = self.level.distance(a[c], b[c])
                run = ZERO
                for u, w in zip(corners[:-2], corners[1:-1]):
                    run += self.level.distance(u, w)
                    fracs[run / total] = None
        out = []
        for lam in sorted(fracs):
            out.append((self.level.point_along(a[0], b[0], lam * self.level.distance(a[0], b[0])),
                        self.level.point_along(a[1], b[1], lam * self.level.distance(a[1], b[1]))))
        return out

    def __repr__(self) -> str:
        return f"ProductArc({len(self.nodes)} nodes, {self.nodes[0]} -> {self.nodes[-1]})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ProductArc) and self.nodes == other.nodes

    @property
    def start(self):
        return self.nodes[0]

    @property
    def end(self):
        return self.nodes[-1]

    def segments(self):
        return zip(self.nodes, self.nodes[1:])

    def reversed(self) -> ProductArc:
        return ProductArc(self.level, self.nodes[::-1])

    def sample(self, k: int, lam: Rational) -> tuple[TreePoint, TreePoint]:
        """Point at fraction ``lam`` of segment ``k``."""
        a, b = self.nodes[k], self.nodes[k + 1]
        return _lerp_point(a[0], b[0], lam), _lerp_point(a[1], b[1], lam)

    def is_monotone(self) -> bool:
        try:
            _geodesic_positions(self.level, [n[0] for n in self.nodes], "first coordinate")
            _geodesic_positions(self.level, [n[1] for n in self.nodes], "second coordinate")
        except PreconditionError:
            return False
        return True

    def segment_params(self, k: int, point: tuple[TreePoint, TreePoint]) -> tuple[Rational, Rational] | None:
        """Closed range of segment fractions at which segment ``k`` passes through ``point``."""
        a, b = self.nodes[k], self.nodes[k + 1]
        lo, hi = ZERO, ONE
        for c in (0, 1):
            if a[c] == b[c]:
                if point[c] != a[c]:
                    return None
                continue
            e, pa, pb = common_edge(a[c], b[c])
            q = pos_on_edge(point[c], e)
            if q is None:
                return None
            lam = (q - pa) / (pb - pa)
            if lam < lo or lam > hi:
                return None
            lo = hi = lam
        return lo, hi

    def contains(self, point: tuple[TreePoint, TreePoint]) -> bool:
        return any(self.segment_params(k, point) is not None for k in range(len(self.nodes) - 1)) or (
            len(self.nodes) == 1 and self.nodes[0] == point
        )

    def slice(self, coord: int, value: TreePoint) -> list[tuple[TreePoint, TreePoint]]:
        """Points of the arc whose coordinate ``coord`` equals ``value`` (segment
        endpoints for flat runs)."""
        out = []
        for k, (a, b) in enumerate(self.segments()):
            if a[coord] == b[coord]:
                if a[coord] == value:
                    out.extend([a, b])
                continue
            e, pa, pb = common_edge(a[coord], b[coord])
            q = pos_on_edge(value, e)
            if q is None or not (min(pa, pb) <= q <= max(pa, pb)):
                continue
            out.append(self.sample(k, (q - pa) / (pb - pa)))
        return list(dict.fromkeys(out))

    def insert(self, point: tuple[TreePoint, TreePoint]) -> ProductArc:
        """Same arc with ``point`` (which must lie on it) added as a breakpoint."""
        if point in self.nodes:
            return self
        for k in range(len(self.nodes) - 1):
            if self.segment_params(k, point) is not None:
                nodes = self.nodes[: k + 1] + [point] + self.nodes[k + 1:]
                arc = ProductArc.__new__(ProductArc)
                arc.level = self.level
                arc.nodes = nodes
                return arc
        raise ValueError(f"{point} is not on {self!r}")

    def min_diagonal_distance(self) -> tuple[Rational, tuple[TreePoint, TreePoint]]:
        """Exact minimum of d(x, y) over points (x, y) of the arc."""
        lv = self.level
        best = None
        where = None
        for k, (a, b) in enumerate(self.segments()):
            cands = [ZERO, ONE]
            ea = common_edge(a[0], b[0])
            eb = common_edge(a[1], b[1])
            cands += _kinks(ea[0], ea[1], ea[2], eb[0], eb[1], eb[2])
            for lam in cands:
                pt = self.sample(k, lam)
                d = lv.distance(*pt)
                if best is None or d < best:
                    best, where = d, pt
        if best is None:
            return lv.distance(*self.nodes[0]), self.nodes[0]
        return best, where

    def to_json(self) -> list:
        return [[str(x), str(y)] for x, y in self.nodes]

    @classmethod
    def from_json(cls, level: TreeLevel, data) -> ProductArc:
        return cls(level, [(parse_point(x), parse_point(y)) for x, y in data])
