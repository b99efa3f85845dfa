"""Scalar fields: exact rationals (gmpy2.mpq) or big floats (gmpy2.mpfr)."""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq, mpz


class FieldError(ValueError):
    """Raised when a value cannot be represented in the requested field."""


@dataclass(frozen=True)
class Field:
    """Either the exact rationals or binary floats of a fixed precision."""

    kind: str = "exact"
    prec: int = 256

    def __post_init__(self):
        if self.kind not in ("exact", "float"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "float" and self.prec < 64:
            raise ValueError("float mode needs at least 64 bits of precision")

    @property
    def exact(self) -> bool:
        return self.kind == "exact"

    @property
    def zero(self):
        return self(0)

    @property
    def one(self):
        return self(1)

    def __call__(self, x):
        if self.exact:
            if isinstance(x, (float, type(mpfr(0)))):
                raise FieldError("float value in exact mode")
            if isinstance(x, str):
                return parse_rational(x)
            if isinstance(x, Fraction):
                return mpq(x.numerator, x.denominator)
            return mpq(x)
        if isinstance(x, str):
            x = parse_rational(x)
        if isinstance(x, Fraction):
            x = mpq(x.numerator, x.denominator)
        return mpfr(x, self.prec)

    def context(self):
        """Arithmetic context; a no-op for exact mode."""
        if self.exact:
            return contextlib.nullcontext()
        ctx = gmpy2.get_context().copy()
        ctx.precision = self.prec
        return ctx

    def power(self, x, r: Fraction):
        """Real power ``x**r`` of a positive scalar (any nonzero x for integer r)."""
        r = Fraction(r)
        if r.denominator == 1:
            if x == 0 and r < 0:
                raise ZeroDivisionError("zero to a negative power")
            return self(x) ** int(r)
        if x <= 0:
            raise FieldError(f"fractional power of nonpositive value {x}")
        if not self.exact:
            with self.context():
                return mpfr(x) ** (mpfr(r.numerator) / r.denominator)
        root = rational_root(mpq(x), r.denominator)
        if root is None:
            raise FieldError(f"{x}^(1/{r.denominator}) is irrational")
        return root ** r.numerator

    def tolerance(self):
        """Default zero test threshold: exactly zero, or 2^(-3 prec / 4)."""
        if self.exact:
            return 0
        return mpfr(2, self.prec) ** (-(3 * self.prec) // 4)

    def is_zero(self, x, tol=None) -> bool:
        if self.exact:
            return x == 0
        return abs(x) <= (self.tolerance() if tol is None else tol)

    def describe(self) -> str:
        return "exact" if self.exact else f"float{self.prec}"


EXACT = Field("exact")


def float_field(prec: int = 256) -> Field:
    return Field("float", prec)


def parse_rational(text: str):
    """Parse ``"n"`` or ``"n/d"`` (optionally signed) into an mpq."""
    s = text.strip()
    try:
        if "/" in s:
            n, d = s.split("/")
            d = int(d)
            if d == 0:
                raise ZeroDivisionError
            return mpq(int(n), d)
        return mpq(int(s))
    except (ValueError, ZeroDivisionError):
        raise FieldError(f"malformed rational literal {text!r}") from None


def rational_root(x, k: int):
    """Exact real k-th root of a nonnegative rational, or None if irrational."""
    x = mpq(x)
    if x < 0:
        return None
    rn, ok_n = gmpy2.iroot(mpz(x.numerator), k)
    rd, ok_d = gmpy2.iroot(mpz(x.denominator), k)
    if ok_n and ok_d:
        return mpq(rn, rd)
    return None


def to_text(x) -> str:
    """Stable text form: ``n/d`` for rationals, scientific notation for floats."""
    if isinstance(x, type(mpq(0))):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if x == 0:
        return "0"
    digits, exp, _ = gmpy2.mpfr(x).digits(10, 7)
    sign = "-" if digits.startswith("-") else ""
    digits = digits.lstrip("-")
    return f"{sign}{digits[0]}.{digits[1:]}e{exp - 1:+d}"


def magnitude(x):
    """Absolute value usable in max-norms for either field."""
    return abs(x)
