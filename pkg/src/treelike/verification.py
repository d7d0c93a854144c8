"""Verification passes over a built tower, as used by ``treelike verify``."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from .construction import Level, check_containment, verify_gamma
from .exact_arith import fmt
from .plmap import compose, first_difference, min_map_distance, valence

CHECKS = ("commute", "coincidence", "gamma", "valence")

# valence claimed by the construction for every level
F_VALENCE = 6
G_VALENCE = 12


@dataclass
class PassResult:
    check: str
    n: int
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"check": self.check, "n": self.n, "passed": self.passed, "detail": self.detail}


def check_commute(levels: Sequence[Level], n: int) -> PassResult:
    """f_{n-1} o g_n = g_{n-1} o f_n, exactly."""
    a = compose(levels[n - 1].f, levels[n].g)
    b = compose(levels[n - 1].g, levels[n].f)
    diff = first_difference(a, b)
    if diff is None:
        return PassResult("commute", n, True, f"{a.breakpoint_count()} breakpoints compared")
    x, va, vb = diff
    return PassResult("commute", n, False, f"at {x}: f_{n - 1}(g_{n}(x)) = {va}, g_{n - 1}(f_{n}(x)) = {vb}")


def check_coincidence(levels: Sequence[Level], n: int) -> PassResult:
    d, x = min_map_distance(levels[n].f, levels[n].g)
    return PassResult("coincidence", n, d > 0, f"min distance {fmt(d)} at {x}")


def check_gamma(levels: Sequence[Level], n: int) -> list[PassResult]:
    out = []
    report = verify_gamma(levels[n].gamma, n)
    bad = report.failures()
    detail = f"{len(report.checks)} instances" if not bad else f"{bad[0].name}: {bad[0].detail}"
    out.append(PassResult("gamma", n, not bad, detail))
    if n > 0:
        report = check_containment(levels[n].gamma, levels[n - 1].f, levels[n - 1].g)
        bad = report.failures()
        detail = f"{len(report.checks)} arcs" if not bad else f"{bad[0].name}: {bad[0].detail}"
        out.append(PassResult("containment", n, not bad, detail))
    return out


def check_valence(levels: Sequence[Level], n: int) -> list[PassResult]:
    out = []
    for name, m, want in (("f", levels[n].f, F_VALENCE), ("g", levels[n].g, G_VALENCE)):
        v, y = valence(m)
        out.append(PassResult(f"valence {name}", n, v == want, f"valence {v} at {y} (expected {want})"))
    return out


def run_checks(levels: Sequence[Level], which: str = "all") -> list[PassResult]:
    if which != "all" and which not in CHECKS:
        raise ValueError(f"unknown check {which!r}")
    wanted = CHECKS if which == "all" else (which,)
    out: list[PassResult] = []
    for n in range(len(levels)):
        if "commute" in wanted and n > 0:
            out.append(check_commute(levels, n))
        if "coincidence" in wanted:
            out.append(check_coincidence(levels, n))
        if "gamma" in wanted:
            out += check_gamma(levels, n)
        if "valence" in wanted:
            out += check_valence(levels, n)
    return out
