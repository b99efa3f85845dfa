"""Seeded random sample points.

Coordinates are rationals n/d with |n| <= 20 and 1 <= d <= 20, so exact
arithmetic stays cheap and any seed reproduces the same sample.
"""
from __future__ import annotations

import random
from fractions import Fraction

from .expr import Point5
from .field import Field

BOUND = 20


def random_rational(rng: random.Random, positive: bool = False) -> Fraction:
    lo = 1 if positive else -BOUND
    return Fraction(rng.randint(lo, BOUND), rng.randint(1, BOUND))


def random_points(count: int, seed: int, field: Field, positive_q: bool = False) -> list:
    """`count` points; with `positive_q` the q coordinate is drawn from (0, 20]."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        x, y, p = (random_rational(rng) for _ in range(3))
        q = random_rational(rng, positive_q)
        z = random_rational(rng)
        out.append(Point5.of(x, y, p, q, z, field=field))
    return out


def parse_tu_grid(text: str) -> tuple:
    """``"1,0;1,1;2,1/3"`` -> ((1, 0), (1, 1), (2, 1/3))."""
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ValueError(f"bad (t,u) pair {chunk!r}")
        t, u = (Fraction(s.strip()) for s in parts)
        if t <= 0:
            raise ValueError("t must be positive")
        pairs.append((t, u))
    if not pairs:
        raise ValueError("empty (t,u) grid")
    return tuple(pairs)
