"""Finite truncations of the inverse limit of (T_n, f_n) and the self-map induced by the g_n.

A thread (x_0, ..., x_N) has x_n in T_n and f_n(x_{n+1}) = x_n.  The induced
step sends it to (g_0(x_1), ..., g_{N-1}(x_N)), which is again a thread
because f_n o g_{n+1} = g_n o f_{n+1}.  Its displacement in coordinate 0 is
d(f_0(x_1), g_0(x_1)), so min_x d(f_0(x), g_0(x)) bounds the displacement of
every point from below.
"""

from __future__ import annotations

import random
from collections.abc import Sequence
from dataclasses import dataclass

from .construction import Level
from .exact_arith import ZERO, DomainError, Q, Rational, fmt
from .plmap import PLMap, min_map_distance
from .tree import TreePoint, make_point, tree_level

DEFAULT_DENOMINATOR = 9 * 2**12


class ThreadError(ValueError):
    pass


@dataclass(frozen=True)
class Thread:
    points: tuple[TreePoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def top(self) -> int:
        """Index N of the last coordinate."""
        return len(self.points) - 1

    def first(self) -> TreePoint:
        return self.points[0]

    def truncate(self, top: int) -> Thread:
        return Thread(self.points[: top + 1])

    def __str__(self) -> str:
        return "(" + ", ".join(map(str, self.points)) + ")"


def _bonds(levels: Sequence[Level], top: int) -> list[PLMap]:
    if top > len(levels):
        raise DomainError(f"threads of height {top} need levels 0..{top - 1}; only {len(levels)} built")
    return [levels[n].f for n in range(top)]


def check_thread(levels: Sequence[Level], t: Thread) -> None:
    """Raise ThreadError unless f_n(x_{n+1}) = x_n for all n < N."""
    for n, f in enumerate(_bonds(levels, t.top)):
        if f(t.points[n + 1]) != t.points[n]:
            raise ThreadError(f"f_{n}({t.points[n + 1]}) = {f(t.points[n + 1])}, but x_{n} = {t.points[n]}")


def extend_down(levels: Sequence[Level], N: int, top: TreePoint) -> Thread:
    """The thread with x_N = top."""
    bonds = _bonds(levels, N)
    top = tree_level(N).canonicalize(top)
    pts = [top]
    for n in reversed(range(N)):
        pts.append(bonds[n](pts[-1]))
    return Thread(tuple(reversed(pts)))


def induced_step(levels: Sequence[Level], t: Thread) -> Thread:
    if len(t) < 2:
        raise DomainError("the induced step needs a thread with at least two coordinates")
    if t.top > len(levels):
        raise DomainError(f"thread of height {t.top} exceeds the {len(levels)} built levels")
    return Thread(tuple(levels[n].g(t.points[n + 1]) for n in range(t.top)))


def thread_distance(a: Thread, b: Thread) -> Rational:
    """Sum over n of 2^-n d_n(x_n, y_n)."""
    if len(a) != len(b):
        raise ThreadError(f"threads of lengths {len(a)} and {len(b)} are not comparable")
    total = ZERO
    for n, (x, y) in enumerate(zip(a.points, b.points)):
        total += tree_level(n).distance(x, y) / 2**n
    return total


def random_point(N: int, rng: random.Random, denominator: int = DEFAULT_DENOMINATOR) -> TreePoint:
    """Uniform edge of T_N, then a uniform parameter k/denominator on it."""
    edges = tree_level(N).edges()
    edge = edges[rng.randrange(len(edges))]
    return make_point(edge, Q(rng.randrange(denominator + 1), denominator))


def random_thread(levels: Sequence[Level], N: int, rng: random.Random, denominator: int = DEFAULT_DENOMINATOR) -> Thread:
    return extend_down(levels, N, random_point(N, rng, denominator))


@dataclass
class Certificate:
    level: int
    delta0: Rational
    witness: TreePoint
    samples: int
    min_sampled: Rational | None
    seed: int
    argmin_sampled: Thread | None = None

    @property
    def passed(self) -> bool:
        return self.delta0 > 0 and (self.min_sampled is None or self.min_sampled >= self.delta0)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "delta0": fmt(self.delta0),
            "witness": str(self.witness),
            "samples": self.samples,
            "min_sampled": None if self.min_sampled is None else fmt(self.min_sampled),
            "seed": self.seed,
            "passed": self.passed,
        }


def displacement_certificate(levels: Sequence[Level], N: int, samples: int, seed: int = 0) -> Certificate:
    """Exact lower bound on the coordinate-0 displacement, confirmed on random threads."""
    if N < 1:
        raise DomainError("the certificate needs threads with at least two coordinates")
    delta0, witness = min_map_distance(levels[0].f, levels[0].g)
    rng = random.Random(seed)
    lv0 = tree_level(0)
    best: Rational | None = None
    arg = None
    for _ in range(samples):
        t = random_thread(levels, N, rng)
        d = lv0.distance(t.first(), induced_step(levels, t).first())
        if best is None or d < best:
            best, arg = d, t
    return Certificate(N, delta0, witness, samples, best, seed, arg)
