"""Exact rationals and the tent-map algebra used throughout the package.

Rationals are ``gmpy2.mpq`` values: always in lowest terms, hash-compatible
with ``fractions.Fraction`` and several times faster on the long
breakpoint sweeps.  Use :func:`Q` to build them from ints, strings or
Fractions.
"""

from __future__ import annotations

from collections.abc import Iterable
from fractions import Fraction

from gmpy2 import mpq

Rational = type(mpq())

ZERO = mpq(0)
ONE = mpq(1)
HALF = mpq(1, 2)
THIRD = mpq(1, 3)
TWO_THIRDS = mpq(2, 3)


class DomainError(ValueError):
    """Argument lies outside the domain of an exact operation."""


def Q(num: int | str | Fraction | Rational, den: int = 1) -> Rational:
    if den == 1:
        return mpq(num)
    return mpq(num, den)


def fmt(x: Rational) -> str:
    """Serialize as ``p/q`` in lowest terms (``q`` is always written)."""
    return f"{x.numerator}/{x.denominator}"


def parse(s: str) -> Rational:
    if "/" not in s:
        raise ValueError(f"rational {s!r} is not in p/q form")
    return mpq(s)


def tent(k: int, x: Rational) -> Rational:
    """The k-fold tent map on [0, 1]."""
    if k < 1:
        raise DomainError(f"tent map order must be positive, got {k}")
    if x < 0 or x > 1:
        raise DomainError(f"tent({k}, {x}): argument outside [0, 1]")
    y = k * x
    i = y.numerator // y.denominator
    if i == k:
        i = k - 1
    if i % 2 == 0:
        return y - i
    return i + 1 - y


def tent2_preimages(points: Iterable[Rational], m: int) -> list[Rational]:
    """Sorted, deduplicated set of x in [0, 1] with tent(2, .)^m (x) in ``points``."""
    if m < 0:
        raise DomainError(f"preimage depth must be non-negative, got {m}")
    current: set[Rational] = set()
    for y in points:
        y = mpq(y)
        if y < 0 or y > 1:
            raise DomainError(f"preimage target {y} outside [0, 1]")
        current.add(y)
    for _ in range(m):
        current = {z for y in current for z in (y / 2, 1 - y / 2)}
    return sorted(current)


def preimage_union(points: Iterable[Rational], m_max: int) -> list[Rational]:
    """Union of tent2_preimages(points, m) over 0 <= m <= m_max (empty if m_max < 0)."""
    points = list(points)
    out: set[Rational] = set()
    layer = set(tent2_preimages(points, 0))
    for _ in range(m_max + 1):
        out |= layer
        layer = {z for y in layer for z in (y / 2, 1 - y / 2)}
    return sorted(out)


def epsilon(n: int) -> Rational:
    if n < 0:
        raise DomainError(f"level must be non-negative, got {n}")
    return mpq(1, 9 * 2**n)


def iterate_tent2(x: Rational, m: int) -> Rational:
    for _ in range(m):
        x = tent(2, x)
    return x
