"""Scalar expressions in the coordinates (x, y, p, q, z).

Grammar (whitespace is ignored between tokens)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" exponent)?          right associative
    exponent:= "-" exponent | "+" exponent | power
    atom    := INT | INT "/" INT | NAME | FUNC "(" expr ")" | "(" expr ")"

``n/d`` written without spaces is one rational literal, so ``q^1/3`` is
``q^(1/3)``.  Exponents must fold to a rational constant.  Names are
``[a-z][a-z0-9]*`` and must be a coordinate, a declared parameter or one of
the float-only functions ``exp log sin cos``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .field import EXACT, Field
from .jet import Jet, JetError, power as jet_power
from . import jet as _jet

COORDS = ("x", "y", "p", "q", "z")
FUNCTIONS = ("exp", "log", "sin", "cos")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class MalformedLiteral(ExprError):
    def __init__(self, text: str, offset: int):
        super().__init__(f"malformed rational literal {text!r} at offset {offset}")
        self.offset = offset


class EvaluationError(ExprError):
    """Evaluation impossible in the requested field (e.g. irrational root)."""


# -- AST ------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def _is_num(e, v=None):
    return isinstance(e, Num) and (v is None or e.value == v)


# light constant folding keeps derivative trees from ballooning
def add(a, b):
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_num(b, 0):
        raise ZeroDivisionError("division by literal zero")
    if _is_num(a, 0):
        return ZERO
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value / b.value)
    return Div(a, b)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_(a, r):
    r = Fraction(r)
    if r == 0:
        return ONE
    if r == 1:
        return a
    if _is_num(a) and r.denominator == 1 and not (a.value == 0 and r < 0):
        return Num(a.value ** int(r))
    return Pow(a, r)


# -- parsing --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)(?P<bad>\.\d*)?|(?P<name>[a-z][a-z0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            off = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[off]!r}", off)
        start = m.start(m.lastgroup) if m.lastgroup != "bad" else m.start("num")
        if m.group("bad") is not None:
            raise MalformedLiteral(m.group("num") + m.group("bad"), m.start("num"))
        if m.group("num") is not None:
            lit = m.group("num")
            if "/" in lit:
                n, d = lit.split("/")
                if int(d) == 0:
                    raise MalformedLiteral(lit, start)
                out.append(("num", Fraction(int(n), int(d)), start))
            else:
                out.append(("num", Fraction(int(lit)), start))
        elif m.group("name") is not None:
            out.append(("name", m.group("name"), start))
        else:
            out.append(("op", m.group("op"), start))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text, params):
        self.toks = _tokenize(text)
        self.i = 0
        self.params = set(params)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, off = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)

    def is_op(self, *ops):
        kind, val, _ = self.peek()
        return kind == "op" and val in ops

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        kind, _, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError("unexpected token", off)
        return e

    def expr(self):
        e = self.term()
        while self.is_op("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.is_op("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.is_op("-"):
            self.take()
            return Neg(self.unary())
        if self.is_op("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.is_op("^"):
            off = self.take()[2]
            ex = self.exponent()
            value = constant_value(ex)
            if value is None:
                raise ExprSyntaxError("exponent must be a rational constant", off)
            return Pow(base, value)
        return base

    def exponent(self):
        if self.is_op("-"):
            self.take()
            return Neg(self.exponent())
        if self.is_op("+"):
            self.take()
            return self.exponent()
        return self.power()

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(val)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in COORDS or val in self.params:
                return Sym(val)
            raise UnknownIdentifier(val, off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected {val!r}", off)


def parse_expr(text: str, params=()) -> Expr:
    """Parse `text` into an AST; `params` lists the allowed parameter names."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, params).parse()


def constant_value(e):
    """Rational value of a variable-free expression, else None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg):
        v = constant_value(e.arg)
        return None if v is None else -v
    if isinstance(e, (Add, Sub, Mul, Div)):
        a, b = constant_value(e.left), constant_value(e.right)
        if a is None or b is None:
            return None
        if isinstance(e, Add):
            return a + b
        if isinstance(e, Sub):
            return a - b
        if isinstance(e, Mul):
            return a * b
        return None if b == 0 else a / b
    if isinstance(e, Pow):
        b = constant_value(e.base)
        if b is None or e.exponent.denominator != 1:
            return None
        if b == 0 and e.exponent < 0:
            return None
        return b ** int(e.exponent)
    return None


# -- printing -------------------------------------------------------------

def _prec(e):
    if isinstance(e, (Add, Sub)):
        return 1
    if isinstance(e, (Mul, Div)):
        return 2
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    if isinstance(e, Num):
        if e.value < 0:
            return 3
        if e.value.denominator != 1:
            return 2
    return 5


def _num_text(v: Fraction):
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def to_text(e: Expr) -> str:
    """Render with the minimal parentheses that re-parse to the same tree shape."""
    def wrap(sub, need):
        s = to_text(sub)
        return f"({s})" if _prec(sub) < need else s

    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        return f"{wrap(e.left, 1)} + {wrap(e.right, 2)}"
    if isinstance(e, Sub):
        return f"{wrap(e.left, 1)} - {wrap(e.right, 2)}"
    if isinstance(e, Mul):
        return f"{wrap(e.left, 2)}*{wrap(e.right, 3)}"
    if isinstance(e, Div):
        return f"{wrap(e.left, 2)}/{wrap(e.right, 3)}"
    if isinstance(e, Neg):
        return f"-{wrap(e.arg, 3)}"
    if isinstance(e, Pow):
        ex = _num_text(e.exponent)
        if e.exponent < 0 or e.exponent.denominator != 1:
            ex = f"({ex})"
        return f"{wrap(e.base, 5)}^{ex}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


# -- symbolic operations --------------------------------------------------

def free_symbols(e: Expr) -> set:
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Sym):
            out.add(n.name)
        elif isinstance(n, (Add, Sub, Mul, Div)):
            stack += [n.left, n.right]
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Call):
            stack.append(n.arg)
    return out


def diff_expr(e: Expr, v: str, _memo=None) -> Expr:
    """Partial derivative with respect to the symbol `v`."""
    memo = {} if _memo is None else _memo
    key = id(e)
    if key in memo:
        return memo[key][1]
    d = lambda s: diff_expr(s, v, memo)  # noqa: E731
    if isinstance(e, Num):
        r = ZERO
    elif isinstance(e, Sym):
        r = ONE if e.name == v else ZERO
    elif isinstance(e, Add):
        r = add(d(e.left), d(e.right))
    elif isinstance(e, Sub):
        r = sub(d(e.left), d(e.right))
    elif isinstance(e, Mul):
        r = add(mul(d(e.left), e.right), mul(e.left, d(e.right)))
    elif isinstance(e, Div):
        da, db = d(e.left), d(e.right)
        if _is_num(db, 0):
            r = div(da, e.right)
        else:
            r = div(sub(mul(da, e.right), mul(e.left, db)), pow_(e.right, 2))
    elif isinstance(e, Neg):
        r = neg(d(e.arg))
    elif isinstance(e, Pow):
        db = d(e.base)
        r = mul(mul(Num(e.exponent), pow_(e.base, e.exponent - 1)), db) if not _is_num(db, 0) else ZERO
    elif isinstance(e, Call):
        da = d(e.arg)
        if _is_num(da, 0):
            r = ZERO
        elif e.func == "exp":
            r = mul(e, da)
        elif e.func == "log":
            r = div(da, e.arg)
        elif e.func == "sin":
            r = mul(Call("cos", e.arg), da)
        else:
            r = neg(mul(Call("sin", e.arg), da))
    else:
        raise TypeError(f"not an expression: {e!r}")
    memo[key] = (e, r)  # keep e alive so its id stays unique
    return r


def total_diff(e: Expr, F: Expr) -> Expr:
    """D e = e_x + p e_y + q e_p + F e_z."""
    x, y, p, q = (Sym(c) for c in "xypq")
    return add(add(diff_expr(e, "x"), mul(p, diff_expr(e, "y"))),
               add(mul(q, diff_expr(e, "p")), mul(F, diff_expr(e, "z"))))


def substitute(e: Expr, mapping: dict, _memo=None) -> Expr:
    """Replace symbols by expressions (shared subtrees stay shared)."""
    memo = {} if _memo is None else _memo
    key = id(e)
    if key in memo:
        return memo[key][1]
    s = lambda n: substitute(n, mapping, memo)  # noqa: E731
    if isinstance(e, Sym):
        r = mapping.get(e.name, e)
    elif isinstance(e, Num):
        r = e
    elif isinstance(e, (Add, Sub, Mul, Div)):
        r = type(e)(s(e.left), s(e.right))
    elif isinstance(e, Neg):
        r = Neg(s(e.arg))
    elif isinstance(e, Pow):
        r = Pow(s(e.base), e.exponent)
    elif isinstance(e, Call):
        r = Call(e.func, s(e.arg))
    else:
        raise TypeError(f"not an expression: {e!r}")
    memo[key] = (e, r)
    return r


# -- evaluation -----------------------------------------------------------

@dataclass(frozen=True)
class Point5:
    """A point (x, y, p, q, z) with the field its values live in."""

    x: object
    y: object
    p: object
    q: object
    z: object
    field: Field = EXACT

    @classmethod
    def of(cls, x=0, y=0, p=0, q=0, z=0, field: Field = EXACT):
        vals = [field(v) for v in (x, y, p, q, z)]
        if not field.exact:
            import gmpy2
            if not all(gmpy2.is_finite(v) for v in vals):
                raise ValueError("point coordinates must be finite")
        return cls(*vals, field=field)

    @property
    def coords(self) -> tuple:
        return (self.x, self.y, self.p, self.q, self.z)

    def with_field(self, field: Field) -> "Point5":
        if field.exact and not self.field.exact:
            raise ValueError("cannot convert a float point to exact mode")
        return Point5.of(*self.coords, field=field)

    def as_dict(self) -> dict:
        return dict(zip(COORDS, self.coords))


def coordinate_jets(at: Point5, order: int):
    return {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}


def evaluate(e: Expr, env: dict, nvars: int, order: int, field: Field, _memo=None):
    """Evaluate to a Jet; `env` maps symbol names to Jets or scalars."""
    memo = {} if _memo is None else _memo
    key = id(e)
    if key in memo:
        return memo[key][1]
    ev = lambda n: evaluate(n, env, nvars, order, field, memo)  # noqa: E731

    def const(v):
        return Jet.constant(v, nvars, order, field)

    try:
        if isinstance(e, Num):
            r = const(e.value)
        elif isinstance(e, Sym):
            if e.name not in env:
                raise EvaluationError(f"no value bound for {e.name!r}")
            val = env[e.name]
            r = val if isinstance(val, Jet) else const(val)
        elif isinstance(e, Add):
            r = ev(e.left) + ev(e.right)
        elif isinstance(e, Sub):
            r = ev(e.left) - ev(e.right)
        elif isinstance(e, Mul):
            r = ev(e.left) * ev(e.right)
        elif isinstance(e, Div):
            r = ev(e.left) * ev(e.right).inv()
        elif isinstance(e, Neg):
            r = -ev(e.arg)
        elif isinstance(e, Pow):
            r = jet_power(ev(e.base), e.exponent)
        elif isinstance(e, Call):
            r = getattr(_jet, e.func)(ev(e.arg))
        else:
            raise TypeError(f"not an expression: {e!r}")
    except JetError as exc:
        raise EvaluationError(str(exc)) from None
    memo[key] = (e, r)
    return r


def eval_jet(e: Expr, at: Point5, order: int, params=None) -> Jet:
    """Taylor jet of `e` at `at`, truncated at total degree `order`."""
    if order < 0:
        raise ValueError("order must be non-negative")
    env = coordinate_jets(at, order)
    for name, val in (params or {}).items():
        env[name] = at.field(val)
    return evaluate(e, env, 5, order, at.field)


def eval_scalar(e: Expr, at: Point5, params=None):
    return eval_jet(e, at, 0, params).value
