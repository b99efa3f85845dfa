"""Loaders for the plain-text expression tables in ``g2ambient/data``.

All tables share one line format: ``key tokens : expression``.  A line that
starts with whitespace continues the previous entry, ``#`` starts a comment.
Coframes are INI files (one section per one-form) read with configparser.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

from .expr import Div, Expr, Mul, Neg, Pow, constant_value, diff_expr, free_symbols, parse_expr
from .field import Field, FieldError

FIXTURE_PACKAGE = "g2ambient.data"


class FixtureError(ValueError):
    pass


def read_text(name: str) -> str:
    return resources.files(FIXTURE_PACKAGE).joinpath(name).read_text()


def _entries(text: str):
    """Yield (key_tokens, body) pairs, joining indented continuation lines."""
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if raw[:1].isspace():
            if current is None:
                raise FixtureError(f"continuation line without an entry: {raw!r}")
            current[1] += " " + line.strip()
            continue
        if current is not None:
            yield current[0], current[1]
        if ":" not in line:
            raise FixtureError(f"missing ':' in {raw!r}")
        key, body = line.split(":", 1)
        current = [tuple(key.split()), body.strip()]
    if current is not None:
        yield current[0], current[1]


def load_table(name: str, params=()) -> list:
    """Parse a ``key : expr`` table into [(key_tokens, Expr)]."""
    return [(key, parse_expr(body, params)) for key, body in _entries(read_text(name))]


def load_index_matrix(name: str, n: int, params=()) -> dict:
    """Sparse ``{(i, j): Expr}`` from a table keyed by integer index pairs."""
    out = {}
    for key, e in load_table(name, params):
        i, j = (int(k) for k in key)
        if not (0 <= i < n and 0 <= j < n):
            raise FixtureError(f"index pair {key} out of range for n={n}")
        out[(i, j)] = e
    return out


def load_connection(name: str, n: int = 7, params=()) -> dict:
    """``{(i, j): [coefficient Expr of theta_k for k < n]}``.

    Entries are linear in the symbols theta0..theta{n-1}; the coefficients
    are read off by differentiating in each of them.
    """
    thetas = tuple(f"theta{k}" for k in range(n))
    out = {}
    for (i, j), e in load_index_matrix(name, n, tuple(params) + thetas).items():
        coeffs = [diff_expr(e, th) for th in thetas]
        for c in coeffs:
            if any(s.startswith("theta") for s in free_symbols(c)):
                raise FixtureError(f"entry {i} {j} is not linear in the coframe")
        out[(i, j)] = coeffs
    return out


def load_two_forms(name: str, params=()) -> dict:
    """``{key: [(coefficient Expr, a, b)]}`` for rows like ``i : c @ a b ; ...``."""
    out = {}
    for key, body in _entries(read_text(name)):
        terms = []
        for part in body.split(";"):
            if "@" not in part:
                raise FixtureError(f"two-form term without '@': {part!r}")
            coef, idx = part.split("@")
            a, b = (int(k) for k in idx.split())
            terms.append((parse_expr(coef, params), a, b))
        out[tuple(int(k) for k in key)] = terms
    return out


# -- coframes ---------------------------------------------------------------

@dataclass(frozen=True)
class CoframeTable:
    """One-forms as (scale, {coordinate: Expr}) pairs, read from a fixture."""

    forms: tuple
    names: tuple = dc_field(default=())


def load_coframe(name: str, params=()) -> CoframeTable:
    cp = configparser.ConfigParser()
    cp.read_string(read_text(name))
    forms = []
    for section in cp.sections():
        entries = dict(cp[section])
        scale = RadicalConst.parse(entries.pop("scale", "1"))
        comps = {}
        for key, body in entries.items():
            if not key.startswith("d") or len(key) != 2:
                raise FixtureError(f"unexpected key {key!r} in [{section}]")
            comps[key[1]] = parse_expr(body, params)
        forms.append((scale, comps))
    return CoframeTable(tuple(forms), tuple(cp.sections()))


# -- exact radical constants --------------------------------------------------

def _factor(n: int) -> dict:
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class RadicalConst:
    """c * prod(prime**e) with rational c and exponents 0 <= e < 1.

    Enough to carry normalisation constants such as 2^(4/3)/sqrt(3) exactly,
    so that products which happen to be rational stay exact.
    """

    coef: Fraction
    radicals: tuple = ()  # sorted ((prime, exponent), ...)

    @classmethod
    def make(cls, coef, radicals: dict):
        coef = Fraction(coef)
        rad = {}
        for p, e in radicals.items():
            whole = math.floor(e)
            if whole:
                coef *= Fraction(p) ** whole
            frac = e - whole
            if frac:
                rad[p] = frac
        return cls(coef, tuple(sorted(rad.items())))

    @classmethod
    def parse(cls, text: str) -> "RadicalConst":
        return cls.from_expr(parse_expr(text))

    @classmethod
    def from_expr(cls, e: Expr) -> "RadicalConst":
        v = constant_value(e)
        if v is not None:
            return cls(Fraction(v))
        if isinstance(e, Neg):
            return cls.from_expr(e.arg) * cls(Fraction(-1))
        if isinstance(e, Mul):
            return cls.from_expr(e.left) * cls.from_expr(e.right)
        if isinstance(e, Div):
            return cls.from_expr(e.left) / cls.from_expr(e.right)
        if isinstance(e, Pow):
            base = cls.from_expr(e.base)
            return base ** e.exponent
        raise FixtureError(f"not a radical constant: {e}")

    def __mul__(self, other):
        if not isinstance(other, RadicalConst):
            other = RadicalConst(Fraction(other))
        rad = dict(self.radicals)
        for p, e in other.radicals:
            rad[p] = rad.get(p, 0) + e
        return RadicalConst.make(self.coef * other.coef, rad)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, RadicalConst):
            other = RadicalConst(Fraction(other))
        return self * other ** -1

    def __pow__(self, r):
        r = Fraction(r)
        c = self.coef
        if c == 0:
            if r <= 0:
                raise ZeroDivisionError("zero to a nonpositive power")
            return RadicalConst(Fraction(0))
        if r.denominator != 1 and c < 0:
            raise FixtureError("fractional power of a negative constant")
        rad = {p: e * r for p, e in self.radicals}
        if r.denominator == 1:
            out = c ** int(r)
        else:
            out = Fraction(1 if c > 0 else -1)
            for p, k in _factor(abs(c.numerator)).items():
                rad[p] = rad.get(p, 0) + k * r
            for p, k in _factor(c.denominator).items():
                rad[p] = rad.get(p, 0) - k * r
        return RadicalConst.make(out, rad)

    @property
    def is_rational(self) -> bool:
        return not self.radicals

    def to_field(self, fld: Field):
        if self.is_rational:
            return fld(self.coef)
        if fld.exact:
            raise FieldError(f"{self} is irrational")
        with fld.context():
            v = fld(self.coef)
            for p, e in self.radicals:
                v = v * fld.power(fld(p), e)
        return v

    def __str__(self):
        parts = [str(self.coef)] + [f"{p}^({e})" for p, e in self.radicals]
        return "*".join(parts)


@lru_cache(maxsize=None)
def cached_table(name: str, params: tuple = ()):
    return tuple(load_table(name, params))
