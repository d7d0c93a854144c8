from __future__ import annotations

import random

import pytest

from treelike.construction import (
    AmbiguityError,
    ConstructionError,
    GammaSet,
    Level,
    ProductArc,
    RuledPoint,
    Tag,
    build_gamma0,
    build_maps,
    build_tower,
    c2_points,
    c5_points,
    check_containment,
    j_index,
    level_path,
    next_gamma,
    ruled_set,
    ruled_values,
    verify_gamma,
)
from treelike.exact_arith import DomainError, Q, epsilon, tent
from treelike.plmap import compose, equal, min_map_distance
from treelike.tree import SPINE, Leg, Spine, make_point, retract, tree_level

S = Spine


def L(p, i, t=Q(1)):
    return Leg(Q(p), i, Q(t))


def random_point(level, rng, den=1009):
    return level.canonicalize(make_point(rng.choice(level.edges()), Q(rng.randrange(den + 1), den)))


# Values of (f_0, g_0) at the ruled spine points of T_1, computed by hand from the
# polyline Gamma_0 and the value rows, then frozen.
LEVEL0_TABLE = {
    Q(0): (S(Q(0)), S(Q(1, 9))),
    Q(1, 18): (S(Q(1, 9)), S(Q(8, 27))),
    Q(1, 9): (S(Q(1, 3)), L(Q(2, 3), 0)),
    Q(1, 6): (S(Q(1, 2)), S(Q(1))),
    Q(2, 9): (L(Q(2, 3), 0), L(Q(2, 3), 1)),
    Q(1, 3): (S(Q(1)), S(Q(0))),
    Q(4, 9): (L(Q(2, 3), 1), L(Q(2, 3), 2)),
    Q(1, 2): (S(Q(1, 2)), S(Q(1))),
    Q(5, 9): (S(Q(1, 3)), L(Q(2, 3), 2)),
    Q(11, 18): (S(Q(1, 9)), S(Q(8, 27))),
    Q(2, 3): (S(Q(0)), S(Q(1, 9))),
    Q(13, 18): (S(Q(1, 9)), S(Q(8, 27))),
    Q(7, 9): (S(Q(1, 3)), L(Q(2, 3), 1)),
    Q(5, 6): (S(Q(1, 2)), S(Q(1))),
    Q(8, 9): (L(Q(2, 3), 2), L(Q(2, 3), 0)),
    Q(1): (S(Q(1)), S(Q(0))),
}


def test_j_index():
    assert j_index(Q(2, 9)) == 0
    assert j_index(Q(4, 9)) == 1
    assert j_index(Q(8, 9)) == 2
    for x in (Q(2, 9), Q(4, 9), Q(8, 9)):
        assert j_index(tent(2, x)) == (j_index(x) + 1) % 3
    assert j_index(Q(1, 9)) == 0
    assert j_index(Q(5, 9)) == 2
    assert j_index(Q(7, 9)) == 1
    # preimages inherit the index of their image under tent2
    for x in (Q(1, 18), Q(17, 18), Q(5, 18), Q(7, 18), Q(1, 36)):
        assert j_index(x) == j_index(tent(2, x))
    for bad in (Q(1, 3), Q(1, 2), Q(3, 9), Q(10, 9)):
        with pytest.raises(DomainError):
            j_index(bad)


def test_gamma0_examples():
    g0 = build_gamma0()
    first = g0.arc(Tag("C1", part=0))
    assert first.start == (S(Q(0)), S(Q(1, 9)))
    assert first.end == (S(Q(1, 2)), S(Q(1)))
    assert first.contains((S(Q(1, 3)), S(Q(2, 3))))
    assert verify_gamma(g0, 0).passed
    for _, arc in g0.arcs:
        assert all(x != y for x, y in arc.nodes)
        assert arc.min_diagonal_distance()[0] > 0
        assert arc.is_monotone()


def test_gamma0_arc_inventory():
    g0 = build_gamma0()
    counts = {c: len(g0.tagged(c)) for c in ("C1", "C3", "C4", "C5", "C6")}
    # C5 needs legs over tent2^-m {1/3, 1} with m < 0: none at level 0
    assert counts == {"C1": 3, "C3": 9, "C4": 6, "C5": 0, "C6": 6}


def test_verify_gamma_flags_diagonal():
    g0 = build_gamma0()
    arcs = list(g0.arcs)
    k = next(k for k, (t, _) in enumerate(arcs) if t == Tag("C1", part=1))
    arcs[k] = (arcs[k][0], ProductArc(g0.level, [(S(Q(1, 2)), S(Q(1))), (S(Q(2, 3)), S(Q(2, 3)))]))
    report = verify_gamma(GammaSet(0, arcs), 0)
    assert not report.passed
    names = [c.name for c in report.failures()]
    assert "diagonal C1[1]" in names
    diag = next(c for c in report.failures() if c.name == "diagonal C1[1]")
    assert "(S:2/3, S:2/3)" in diag.detail


def test_verify_gamma_flags_missing_arc():
    g0 = build_gamma0()
    arcs = [(t, a) for t, a in g0.arcs if t != Tag("C4", Q(0), 1)]
    report = verify_gamma(GammaSet(0, arcs), 0)
    assert [c.name for c in report.failures()] == ["C4[p=0/1,i=1]"]
    assert not verify_gamma(g0, 1).passed


def test_c2_points_at_level_one(tower):
    assert Q(1, 6) in c2_points(1)
    assert tent(2, Q(1, 6)) == Q(1, 3)
    g1 = tower[1].gamma
    assert g1.contains((S(Q(1, 6)), S(Q(1, 3))), g1.indices("C1"))
    report = verify_gamma(g1, 1)
    assert any(c.name == "C2[p=1/6]" and c.passed for c in report.checks)


def test_ruled_set_level0():
    rs = ruled_set(0)
    spine = {rp.point.t for rp in rs.points if type(rp.point) is Spine}
    expected = {Q(0), Q(2, 3), Q(1, 18), Q(2, 3) - Q(1, 18), Q(2, 3) + Q(1, 18), Q(1, 3), Q(1), Q(1, 6),
                Q(5, 6), Q(1, 2), Q(2, 9), Q(4, 9), Q(8, 9), Q(1, 9), Q(5, 9), Q(7, 9)}
    assert spine == expected
    pts = rs.by_point()
    for i in range(3):
        assert pts[L(0, i, Q(1, 2))].row == "f"
        assert pts[L(0, i)].row == "f"
        assert pts[L(Q(1, 3), i)].row == "g"
    assert rs.adjacent(S(Q(0)), S(Q(1, 18)))
    assert rs.adjacent(S(Q(2, 3)), S(Q(11, 18)))
    assert rs.adjacent(S(Q(2, 3)), S(Q(13, 18)))
    assert not rs.adjacent(S(Q(0)), S(Q(1, 9)))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_ruled_set_cuts_tree_into_arcs(n):
    rs = ruled_set(n)
    domain = tree_level(n + 1)
    pts = {rp.point for rp in rs.points}
    for p in domain.attachments:
        assert S(p) in pts
    edges = {e for e, _, _ in rs.adjacency}
    assert edges == set(domain.edges())
    for edge, a, b in rs.adjacency:
        assert a < b
        inner = [x for x in pts if type(x) is Spine and edge == SPINE and a < x.t < b]
        assert not inner
    eps1 = epsilon(n + 1)
    assert rs.adjacent(S(Q(0)), S(eps1))
    assert rs.adjacent(S(Q(2, 3)), S(Q(2, 3) - eps1))
    assert rs.adjacent(S(Q(2, 3)), S(Q(2, 3) + eps1))


def test_ruled_values_examples():
    g0 = build_gamma0()
    rs = ruled_set(0).by_point()
    assert ruled_values(0, rs[S(Q(2, 3))], g0) == (S(Q(0)), S(Q(1, 9)))
    assert ruled_values(0, rs[S(Q(8, 9))], g0) == (L(Q(2, 3), 2), L(Q(2, 3), 0))
    assert ruled_values(0, rs[L(Q(1, 3), 1)], g0) == (S(Q(1)), L(0, 1))
    assert ruled_values(0, rs[L(0, 2, Q(1, 2))], g0) == (L(0, 2, Q(1, 2)), S(Q(0)))
    assert ruled_values(0, rs[L(Q(2, 3), 2)], g0) == (L(0, 2), L(0, 0))


def test_ruled_values_lie_on_gamma(tower):
    for n in range(3):
        gamma = tower[n].gamma
        for rp in ruled_set(n).points:
            assert gamma.contains(ruled_values(n, rp, gamma)), rp


def test_row_b_requires_a_hit():
    g0 = build_gamma0()
    arcs = [(t, a) for t, a in g0.arcs if t != Tag("C1", part=0)]
    with pytest.raises(ConstructionError):
        ruled_values(0, RuledPoint(S(Q(1, 18)), "b"), GammaSet(0, arcs))


def test_frozen_level0_table(tower):
    f, g = tower[0].f, tower[0].g
    rs = ruled_set(0)
    g0 = build_gamma0()
    for rp in rs.points:
        if type(rp.point) is Spine:
            want = LEVEL0_TABLE[rp.point.t]
            assert ruled_values(0, rp, g0) == want
            assert (f.eval(rp.point), g.eval(rp.point)) == want


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_map_endpoint_facts(tower, n):
    f, g = tower[n].f, tower[n].g
    assert f.eval(S(Q(0))) == f.eval(S(Q(2, 3))) == S(Q(0))
    assert f.eval(S(Q(1, 3))) == f.eval(S(Q(1))) == S(Q(1))
    eps = epsilon(n)
    assert g.eval(S(Q(0))) == g.eval(S(Q(2, 3))) == S(eps)
    assert g.eval(S(Q(1, 3))) == g.eval(S(Q(1))) == S(Q(0))
    for x in (Q(1, 6), Q(1, 2), Q(5, 6)):
        assert g.eval(S(x)) == S(Q(1))


def _monotone(seq):
    return all(a <= b for a, b in zip(seq, seq[1:])) or all(a >= b for a, b in zip(seq, seq[1:]))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_retracted_maps_are_monotone_between_turns(tower, n):
    f, g = tower[n].f, tower[n].g
    for m, turns in ((f, [0, Q(1, 3), Q(2, 3), 1]), (g, [0, Q(1, 6), Q(1, 3), Q(1, 2), Q(2, 3), Q(5, 6), 1])):
        xs, vs = m.tables[SPINE]
        for lo, hi in zip(turns, turns[1:]):
            run = [retract(v) for x, v in zip(xs, vs) if lo <= x <= hi]
            assert _monotone(run), (lo, hi)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_pointwise_commutativity(tower, n):
    rng = random.Random(100 + n)
    lo, hi = tower[n - 1], tower[n]
    for _ in range(1000):
        x = random_point(hi.f.domain, rng)
        assert lo.g.eval(hi.f.eval(x)) == lo.f.eval(hi.g.eval(x))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_pair_containment(tower, n):
    rng = random.Random(200 + n)
    lv = tower[n]
    for _ in range(1000):
        x = random_point(lv.f.domain, rng)
        assert lv.gamma.contains((lv.f.eval(x), lv.g.eval(x)))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_maps_coincidence_free(tower, n):
    d, x = min_map_distance(tower[n].f, tower[n].g)
    assert d > 0
    assert tower[n].f.codomain.distance(tower[n].f.eval(x), tower[n].g.eval(x)) == d


def test_next_gamma_endpoints(tower):
    for n in range(3):
        f, g = tower[n].f, tower[n].g
        for x in (Q(1, 3), Q(1)):
            assert g.eval(S(x)) == S(Q(0)) == f.eval(S(tent(2, x)))
        for p in c5_points(n + 1):
            for i in range(3):
                want = Leg(tent(6, p), i, Q(1))
                assert g.eval(Leg(p, i, Q(1))) == want == f.eval(Leg(tent(2, p), i, Q(1)))


def test_next_gamma_verifies_and_is_contained(tower):
    for n in range(3):
        lv = tower[n]
        nxt = next_gamma(n, lv.f, lv.g)
        assert verify_gamma(nxt, n + 1).passed
        assert check_containment(nxt, lv.f, lv.g, samples=100).passed
        assert nxt.to_json() == tower[n + 1].gamma.to_json()


def test_next_gamma_names_broken_instance(tower):
    lv = tower[0]
    f, _ = build_maps(0, lv.gamma)
    # g replaced by f: the C2 endpoint at x = 1/3 no longer matches
    with pytest.raises(ConstructionError, match=r"C1\[0\]"):
        next_gamma(0, f, f)


def test_build_maps_rejects_values_off_gamma():
    g0 = build_gamma0()
    with pytest.raises(ConstructionError, match="not on Gamma_0"):
        build_maps(0, g0, overrides={S(Q(2, 9)): (S(Q(1, 2)), S(Q(1, 2)))})


def test_build_maps_reports_missing_path():
    g0 = build_gamma0()
    # (1, 0) is on Gamma_0, but reaching the value at 1/18 from it means backtracking
    with pytest.raises(ConstructionError, match="no monotone arc"):
        build_maps(0, g0, overrides={S(Q(0)): (S(Q(1)), S(Q(0)))})


def test_ambiguity_error_is_a_construction_error():
    assert issubclass(AmbiguityError, ConstructionError)


def test_arclength_parameterization_agrees_on_ruled_points(tower):
    g0 = build_gamma0()
    f_u, g_u = build_maps(0, g0)
    f_a, g_a = build_maps(0, g0, parameterization="arclength")
    for rp in ruled_set(0).points:
        assert f_u.eval(rp.point) == f_a.eval(rp.point)
        assert g_u.eval(rp.point) == g_a.eval(rp.point)
    assert f_u.breakpoint_count() == f_a.breakpoint_count()
    assert min_map_distance(f_a, g_a)[0] > 0


def test_tower_commutes_at_level_one(tower):
    lv0, lv1 = tower.upto(1)
    assert equal(compose(lv0.f, lv1.g), compose(lv0.g, lv1.f))


def test_cache_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    build_tower(2, a)
    build_tower(2, b)
    for n in range(3):
        assert level_path(a, n).read_bytes() == level_path(b, n).read_bytes()
    again = build_tower(2, a)
    assert [lv.to_json() for lv in again] == [lv.to_json() for lv in build_tower(2, b)]


def test_cache_requires_verified_flag(tmp_path):
    lv = build_tower(0, tmp_path)[0]
    data = lv.to_json()
    assert Level.from_json(data).f.tables == lv.f.tables
    data["verified"] = False
    with pytest.raises(ValueError):
        Level.from_json(data)


def test_tower_rejects_negative_height():
    with pytest.raises(DomainError):
        build_tower(-1)
