"""Truncated multivariate Taylor series ("jets") at a base point.

A :class:`Jet` stores Taylor coefficients (partial derivative divided by the
multi-index factorial) of a scalar or of every component of a tensor.  The
coefficient table is dense and graded: coefficients of total degree 0 come
first, then degree 1, and so on, so truncating to a lower order is a prefix
slice.  Coefficients live in a numpy object array of shape ``(ncoef, *shape)``
holding ``gmpy2.mpq`` (exact mode) or ``gmpy2.mpfr`` (float mode) values.

The hot loop is truncated multiplication.  It gathers every pair of
coefficients whose degrees add up to at most the result order, multiplies the
gathered blocks with one vectorised ``einsum`` and sums the products per
output monomial with ``np.add.reduceat``.  Pairs involving an all-zero
coefficient block are dropped first; the example metrics depend on two or
three coordinates only, so this skips most of the work.
"""
from __future__ import annotations

import itertools
import math
import string
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .field import Field, FieldError
from . import linalg


class JetError(ValueError):
    """Incompatible operands, insufficient order, or a singular operation."""


def ncoef(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


@lru_cache(maxsize=None)
def monomials(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of total degree <= order, graded, lex within a degree."""
    out = []
    for deg in range(order + 1):
        level = [
            c for c in itertools.product(range(deg, -1, -1), repeat=nvars)
            if sum(c) == deg
        ]
        out.extend(level)
    return tuple(out)


@lru_cache(maxsize=None)
def _index(nvars: int, order: int) -> dict:
    return {m: i for i, m in enumerate(monomials(nvars, order))}


@lru_cache(maxsize=None)
def _degrees(nvars: int, order: int) -> np.ndarray:
    return np.array([sum(m) for m in monomials(nvars, order)], dtype=np.intp)


@lru_cache(maxsize=None)
def _mul_table(nvars: int, order: int):
    """Index triples (i, j, k) with mono[i] + mono[j] = mono[k], sorted by k."""
    mons = monomials(nvars, order)
    idx = _index(nvars, order)
    starts = [ncoef(nvars, d) for d in range(order + 1)]
    rows = []
    for i, a in enumerate(mons):
        room = order - sum(a)
        for j in range(starts[room]):
            b = mons[j]
            rows.append((idx[tuple(x + y for x, y in zip(a, b))], i, j))
    rows.sort()
    arr = np.array(rows, dtype=np.intp)
    return arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 0].copy()


@lru_cache(maxsize=None)
def _diff_table(nvars: int, order: int, v: int):
    """Source indices and integer factors mapping an order-`order` jet to its
    order-(order-1) derivative in variable `v`."""
    idx = _index(nvars, order)
    src, fac = [], []
    for m in monomials(nvars, order - 1):
        up = list(m)
        up[v] += 1
        src.append(idx[tuple(up)])
        fac.append(up[v])
    return np.array(src, dtype=np.intp), np.array(fac, dtype=object)


def _letters(n: int, used: str = "") -> str:
    pool = [c for c in string.ascii_letters if c not in used and c != "P"]
    return "".join(pool[:n])


class Jet:
    """Truncated Taylor expansion of a scalar or tensor field at a point."""

    __slots__ = ("coef", "nvars", "order", "field")

    def __init__(self, coef: np.ndarray, nvars: int, order: int, field: Field):
        if coef.shape[0] != ncoef(nvars, order):
            raise JetError("coefficient count does not match nvars/order")
        self.coef = coef
        self.nvars = nvars
        self.order = order
        self.field = field

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, nvars, order, field, shape=()):
        coef = np.empty((ncoef(nvars, order),) + tuple(shape), dtype=object)
        coef.fill(field.zero)
        return cls(coef, nvars, order, field)

    @classmethod
    def constant(cls, value, nvars, order, field, shape=()):
        out = cls.zeros(nvars, order, field, shape)
        if shape:
            val = np.asarray(value, dtype=object)
            out.coef[0] = np.vectorize(field, otypes=[object])(val)
        else:
            out.coef[0] = field(value)
        return out

    @classmethod
    def variable(cls, i, value, nvars, order, field):
        """The coordinate function x_i expanded around x_i = value."""
        out = cls.constant(value, nvars, order, field)
        if order >= 1:
            e = [0] * nvars
            e[i] = 1
            out.coef[_index(nvars, order)[tuple(e)]] = field.one
        return out

    @classmethod
    def stack(cls, jets, shape):
        """Assemble scalar jets (flat, row-major) into one tensor jet."""
        jets = list(jets)
        first = jets[0]
        order = min(j.order for j in jets)
        for j in jets:
            first._compatible(j)
        coef = np.empty((ncoef(first.nvars, order), len(jets)), dtype=object)
        for k, j in enumerate(jets):
            coef[:, k] = j.truncate(order).coef
        return cls(coef.reshape((coef.shape[0],) + tuple(shape)), first.nvars, order, first.field)

    # -- basic accessors --------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.coef.shape[1:]

    @property
    def value(self):
        """Constant term (a scalar, or an object array for tensors)."""
        return self.coef[0]

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coef[(slice(None),) + key], self.nvars, self.order, self.field)

    def component_jets(self):
        """Flat list of scalar jets, row-major."""
        flat = self.coef.reshape(self.coef.shape[0], -1)
        return [Jet(flat[:, k].copy(), self.nvars, self.order, self.field)
                for k in range(flat.shape[1])]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coef[: ncoef(self.nvars, order)], self.nvars, order, self.field)

    def transpose(self, *axes) -> "Jet":
        return Jet(self.coef.transpose((0,) + tuple(a + 1 for a in axes)),
                   self.nvars, self.order, self.field)

    def map_tensor(self, fn) -> "Jet":
        """Apply a shape-level numpy function (acting on axes 1..) to coefficients."""
        return Jet(fn(self.coef), self.nvars, self.order, self.field)

    def coefficient(self, exponent):
        return self.coef[_index(self.nvars, self.order)[tuple(exponent)]]

    def partial(self, idx):
        """Raw partial derivative at the base point for multi-index `idx`."""
        idx = tuple(idx)
        if len(idx) != self.nvars:
            raise JetError("multi-index length must equal nvars")
        if sum(idx) > self.order:
            raise JetError(f"derivative of degree {sum(idx)} exceeds jet order {self.order}")
        fact = 1
        for k in idx:
            fact *= math.factorial(k)
        return self.coefficient(idx) * fact

    def nonzero_mask(self) -> np.ndarray:
        flat = self.coef.reshape(self.coef.shape[0], -1)
        return (flat != 0).any(axis=1)

    def max_abs(self):
        if self.coef.size == 0:
            return self.field.zero
        return max(abs(v) for v in self.coef.ravel())

    def is_zero(self, tol=None) -> bool:
        if self.field.exact and tol is None:
            return not self.nonzero_mask().any()
        return self.field.is_zero(self.max_abs(), tol)

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, shape={self.shape}, field={self.field.describe()})"

    # -- ring operations --------------------------------------------------
    def _compatible(self, other: "Jet"):
        if not isinstance(other, Jet):
            raise JetError(f"expected a Jet, got {type(other).__name__}")
        if other.nvars != self.nvars:
            raise JetError(f"jets over {self.nvars} and {other.nvars} variables are incompatible")
        if other.field != self.field:
            raise JetError("jets in different field modes are incompatible")

    def _lift(self, other):
        if isinstance(other, Jet):
            self._compatible(other)
            return other
        return Jet.constant(other, self.nvars, self.order, self.field)

    def __add__(self, other):
        other = self._lift(other)
        order = min(self.order, other.order)
        with self.field.context():
            return Jet(self.truncate(order).coef + other.truncate(order).coef,
                       self.nvars, order, self.field)

    __radd__ = __add__

    def __neg__(self):
        with self.field.context():
            return Jet(-self.coef, self.nvars, self.order, self.field)

    def __sub__(self, other):
        other = self._lift(other)
        order = min(self.order, other.order)
        with self.field.context():
            return Jet(self.truncate(order).coef - other.truncate(order).coef,
                       self.nvars, order, self.field)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Jet":
        c = self.field(c)
        with self.field.context():
            return Jet(self.coef * c, self.nvars, self.order, self.field)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        a_sh, b_sh = self.shape, other.shape
        if a_sh and b_sh and a_sh != b_sh:
            raise JetError(f"elementwise product of shapes {a_sh} and {b_sh}")
        la = _letters(len(a_sh))
        lb = _letters(len(b_sh))
        out = la if len(a_sh) >= len(b_sh) else lb
        return einsum(f"{la},{lb}->{out}", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.inv()
        c = self.field(other)
        if c == 0:
            raise ZeroDivisionError("jet divided by zero")
        with self.field.context():
            return self.scale(self.field.one / c)

    def __rtruediv__(self, other):
        return self.inv() * other

    def __pow__(self, r):
        return power(self, r)

    def inv(self) -> "Jet":
        if self.shape:
            raise JetError("inv() is for scalar jets; use matrix_inverse for tensors")
        a0 = self.coef[0]
        if a0 == 0:
            raise JetError("cannot invert a jet with zero constant term")
        with self.field.context():
            c = self.field.one / a0
            derivs = []
            val = c
            for k in range(self.order + 1):
                derivs.append(val * math.factorial(k) * (-1) ** k)
                val = val * c
        return compose(self, derivs)

    # -- differentiation --------------------------------------------------
    def deriv(self, v: int) -> "Jet":
        """Partial derivative in variable v; the result has order - 1."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        src, fac = _diff_table(self.nvars, self.order, v)
        shape_pad = (slice(None),) + (None,) * len(self.shape)
        with self.field.context():
            coef = self.coef[src] * fac[shape_pad]
        return Jet(coef, self.nvars, self.order - 1, self.field)

    def grad(self) -> "Jet":
        """All first partials, appended as a trailing axis."""
        parts = [self.deriv(v).coef for v in range(self.nvars)]
        return Jet(np.stack(parts, axis=-1), self.nvars, self.order - 1, self.field)


def einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Truncated product of two jets with a tensor contraction.

    `subscripts` describes the tensor axes only, e.g. ``"il,ljk->ijk"``;
    the series convolution over the jet axis is implicit.
    """
    a._compatible(b)
    order = min(a.order, b.order)
    field = a.field
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    full = f"P{sa},P{sb}->P{out}"
    I, J, K = _mul_table(a.nvars, order)
    nz_a = a.truncate(order).nonzero_mask()
    nz_b = b.truncate(order).nonzero_mask()
    keep = nz_a[I] & nz_b[J]
    I, J, K = I[keep], J[keep], K[keep]
    result = Jet.zeros(a.nvars, order, field, _out_shape(sa, sb, out, a.shape, b.shape))
    if len(K) == 0:
        return result
    with field.context():
        prod = np.einsum(full, a.coef[I], b.coef[J])
        starts = np.r_[0, np.flatnonzero(np.diff(K)) + 1]
        sums = np.add.reduceat(prod, starts, axis=0)
    result.coef[K[starts]] = sums
    return result


def _out_shape(sa, sb, out, shape_a, shape_b):
    dims = {}
    for letters, shape in ((sa, shape_a), (sb, shape_b)):
        if len(letters) != len(shape):
            raise JetError(f"subscripts {letters!r} do not match tensor shape {shape}")
        for c, n in zip(letters, shape):
            if dims.setdefault(c, n) != n:
                raise JetError(f"index {c} has inconsistent sizes")
    return tuple(dims[c] for c in out)


def contract(subscripts: str, a: Jet) -> Jet:
    """Pointwise (no convolution) einsum on a single jet, e.g. traces."""
    lhs, out = subscripts.split("->")
    with a.field.context():
        coef = np.einsum(f"P{lhs}->P{out}", a.coef)
    return Jet(np.asarray(coef, dtype=object), a.nvars, a.order, a.field)


def compose(a: Jet, derivs) -> Jet:
    """f(a) for a scalar jet, given f and its derivatives at a's constant term.

    Uses f(a0 + n) = sum_k f^(k)(a0) n^k / k! with n = a - a0 nilpotent.
    """
    field = a.field
    with field.context():
        nil = Jet(a.coef.copy(), a.nvars, a.order, field)
        nil.coef[0] = field.zero
        out = Jet.constant(derivs[0], a.nvars, a.order, field)
        term = None
        for k in range(1, a.order + 1):
            term = nil if term is None else term * nil
            c = derivs[k] / math.factorial(k)
            if c != 0:
                out = out + term.scale(c)
    return out


def power(a: Jet, r) -> Jet:
    """a**r for a rational exponent r (binomial series around the constant term)."""
    if a.shape:
        raise JetError("power() is for scalar jets")
    r = Fraction(r)
    field = a.field
    a0 = a.coef[0]
    if r.denominator == 1 and r >= 0:
        m = int(r)
        result = Jet.constant(1, a.nvars, a.order, field)
        base = a
        while m:
            if m & 1:
                result = result * base
            m >>= 1
            if m:
                base = base * base
        return result
    if r.denominator == 1:
        return power(a, -r).inv()
    if a0 <= 0:
        raise JetError(f"fractional power of a jet with nonpositive constant term {a0}")
    try:
        base = field.power(a0, r)
    except FieldError as exc:
        raise JetError(str(exc)) from None
    with field.context():
        inv_a0 = field.one / a0
        derivs = []
        coeff = base
        for k in range(a.order + 1):
            derivs.append(coeff)
            coeff = coeff * field(r - k) * inv_a0
    return compose(a, derivs)


def _analytic(a: Jet, name: str) -> Jet:
    import gmpy2

    field = a.field
    if field.exact:
        raise JetError(f"{name} is only available in float mode")
    a0 = a.coef[0]
    n = a.order
    with field.context():
        if name == "exp":
            e = gmpy2.exp(a0)
            derivs = [e] * (n + 1)
        elif name == "log":
            if a0 <= 0:
                raise JetError("log of a jet with nonpositive constant term")
            derivs = [gmpy2.log(a0)] + [
                field((-1) ** (k - 1) * math.factorial(k - 1)) / a0 ** k for k in range(1, n + 1)
            ]
        elif name in ("sin", "cos"):
            s, c = gmpy2.sin(a0), gmpy2.cos(a0)
            cycle = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
            derivs = [cycle[k % 4] for k in range(n + 1)]
        else:
            raise JetError(f"unknown function {name}")
    return compose(a, derivs)


def exp(a):
    return _analytic(a, "exp")


def log(a):
    return _analytic(a, "log")


def sin(a):
    return _analytic(a, "sin")


def cos(a):
    return _analytic(a, "cos")


def identity(n, nvars, order, field) -> Jet:
    eye = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return Jet.constant(eye, nvars, order, field, (n, n))


def matrix_inverse(g: Jet) -> Jet:
    """Inverse of a square matrix of jets.

    The constant term is inverted exactly by Gauss-Jordan elimination; higher
    orders follow from the Newton step Y <- Y + Y(I - gY), which doubles the
    number of correct orders per step.
    """
    n = g.shape[0]
    if g.shape != (n, n):
        raise JetError("matrix_inverse needs a square matrix jet")
    field = g.field
    try:
        y0 = linalg.inverse(g.value, field)
    except linalg.SingularMatrixError:
        raise JetError("matrix has a singular constant term") from None
    y = Jet.constant(y0, g.nvars, g.order, field, (n, n))
    eye = identity(n, g.nvars, g.order, field)
    correct = 1
    while correct <= g.order:
        resid = eye - einsum("ij,jk->ik", g, y)
        y = y + einsum("ij,jk->ik", y, resid)
        correct *= 2
    return y


def embed(a: Jet, nvars: int, var_map, order: int | None = None) -> Jet:
    """Re-express a jet in a larger variable set; variable i becomes var_map[i]."""
    order = a.order if order is None else min(order, a.order)
    src = monomials(a.nvars, order)
    idx = _index(nvars, order)
    out = Jet.zeros(nvars, order, a.field, a.shape)
    for k, mono in enumerate(src):
        e = [0] * nvars
        for i, d in enumerate(mono):
            e[var_map[i]] = d
        out.coef[idx[tuple(e)]] = a.coef[k]
    return out
