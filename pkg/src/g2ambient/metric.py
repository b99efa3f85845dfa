"""Metric jets: the (3,2) metric of an ODE z' = F(x, y, p, q, z), the two
explicit example families, coframes and simple comparisons between metrics.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import linalg
from .expr import (COORDS, Expr, Point5, diff_expr, eval_jet, evaluate, free_symbols,
                   parse_expr, substitute, total_diff)
from .field import Field, FieldError
from .fixtures import CoframeTable, RadicalConst, load_coframe, load_table
from .jet import Jet, JetError, einsum, embed, identity

EX2_PARAMS = ("a0", "a1", "a2", "a3", "a4", "a5", "a6", "b")


class MetricError(ValueError):
    pass


class DegeneratePointError(MetricError):
    pass


@dataclass(frozen=True)
class MetricJet:
    """Symmetric n x n matrix of jets at a base point.

    `budget` is the jet order of the components: how many more derivatives
    the curvature chain may take.
    """

    g: Jet
    base: tuple = ()
    label: str = ""

    def __post_init__(self):
        n = self.g.shape[0] if self.g.shape else 0
        if self.g.shape != (n, n) or n == 0:
            raise MetricError(f"metric must be a square matrix jet, got shape {self.g.shape}")
        if not self.is_symmetric():
            raise MetricError("metric components are not symmetric")

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def budget(self) -> int:
        return self.g.order

    @property
    def field(self) -> Field:
        return self.g.field

    @property
    def value(self):
        return self.g.value

    def is_symmetric(self) -> bool:
        c = self.g.coef
        return bool((c == np.swapaxes(c, 1, 2)).all())

    def truncate(self, order: int) -> "MetricJet":
        return MetricJet(self.g.truncate(order), self.base, self.label)

    def scaled(self, c) -> "MetricJet":
        return MetricJet(self.g.scale(c), self.base, self.label)

    def component(self, i, j) -> Jet:
        return self.g[i, j]


def _metric(rows, at: Point5, order: int, label: str) -> MetricJet:
    n = len(rows)
    flat = [rows[i][j] for i in range(n) for j in range(n)]
    return MetricJet(Jet.stack(flat, (n, n)), at.coords, label)


def _zero(at, order):
    return Jet.zeros(5, order, at.field)


# -- coordinate tables ------------------------------------------------------

def _coord_index(tok: str) -> int:
    if tok not in COORDS:
        raise MetricError(f"unknown coordinate slot {tok!r}")
    return COORDS.index(tok)


def _table_matrix(entries, index, jets, at, order):
    """Sum table entries into a symmetric matrix, halving off-diagonal slots."""
    n = 5
    m = [[None] * n for _ in range(n)]
    half = Fraction(1, 2)
    for (a, b), jet in zip((tuple(index(k) for k in key) for key, _ in entries), jets):
        if a == b:
            parts = [((a, a), jet)]
        else:
            h = jet.scale(half)
            parts = [((a, b), h), ((b, a), h)]
        for (i, j), v in parts:
            m[i][j] = v if m[i][j] is None else m[i][j] + v
    return [[m[i][j] if m[i][j] is not None else _zero(at, order) for j in range(n)] for i in range(n)]


# -- the general metric ------------------------------------------------------

_DERIV_LETTERS = {"x": "x", "y": "y", "p": "p", "q": "q", "z": "z"}


def _factor_expr(name: str, F: Expr, cache: dict) -> Expr:
    """Expression for a factor name such as ``fqqp`` or ``ddfqq``."""
    if name in cache:
        return cache[name]
    if name.startswith("d"):
        r = total_diff(_factor_expr(name[1:], F, cache), F)
    elif name.startswith("f"):
        r = F
        for ch in name[1:]:
            if ch not in _DERIV_LETTERS:
                raise MetricError(f"bad factor name {name!r}")
            r = diff_expr(r, ch)
    else:
        raise MetricError(f"bad factor name {name!r}")
    cache[name] = r
    return r


@lru_cache(maxsize=None)
def _general_table():
    entries = load_table("general.metric", _general_names())
    return entries


def _general_names():
    return ("fq", "fqq", "fqqq", "fqqqq", "fp", "fz", "fy", "fpp", "fqp", "fqz", "fpz",
            "fzz", "fqqp", "fqqz", "fqy", "dfq", "dfz", "dfp", "dfqq", "dfqqq", "dfqp",
            "dfqz", "ddfq", "ddfqq")


def tilde_coframe(F: Expr, at: Point5, order: int, params=None) -> Jet:
    """Components (5 x 5, form by coordinate) of the tilded coframe w1..w5."""
    cj = {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}
    Fj = eval_jet(F, at, order, params)
    Fq = eval_jet(diff_expr(F, "q"), at, order, params)
    one = Jet.constant(1, 5, order, at.field)
    zero = _zero(at, order)
    x, y, p, q, z = range(5)
    rows = [[zero] * 5 for _ in range(5)]
    rows[0][x], rows[0][y] = -cj["p"], one
    rows[1][x], rows[1][z], rows[1][p] = -Fj + cj["q"] * Fq, one, -Fq
    rows[2][x], rows[2][p] = -cj["q"], one
    rows[3][q] = one
    rows[4][x] = one
    return Jet.stack([rows[a][m] for a in range(5) for m in range(5)], (5, 5))


def _check_params(F: Expr, params):
    extra = free_symbols(F) - set(COORDS) - set(params or {})
    if extra:
        raise MetricError(f"unbound parameters in F: {sorted(extra)}")


def build_general_metric(F: Expr, at: Point5, forder: int, params=None) -> MetricJet:
    """The (3,2) metric of z' = F from the stored term table.

    `forder` counts derivatives of F: the table uses up to four, so the
    returned jet has order ``forder - 4``.
    """
    if forder < 4:
        raise MetricError("forder must be at least 4 (the metric uses fourth derivatives of F)")
    _check_params(F, params)
    order = forder - 4
    cache: dict = {}
    fqq = eval_jet(_factor_expr("fqq", F, cache), at, 0, params).value
    if at.field.is_zero(fqq):
        raise DegeneratePointError("degenerate ODE point: F_qq = 0")
    env = {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}
    for k, v in (params or {}).items():
        env[k] = at.field(v)
    memo: dict = {}
    fenv = dict(env)
    for name in _general_names():
        fenv[name] = evaluate(_factor_expr(name, F, cache), env, 5, order, at.field, memo)
    entries = _general_table()
    jets = [evaluate(e, fenv, 5, order, at.field) for _, e in entries]
    M = _table_matrix(entries, lambda k: int(k) - 1, jets, at, order)
    Mj = Jet.stack([M[i][j] for i in range(5) for j in range(5)], (5, 5))
    W = tilde_coframe(F, at, order, params)
    g = einsum("am,bn->abmn", W, W)
    g = einsum("ab,abmn->mn", Mj, g)
    if not at.field.exact:
        # float summation order breaks the exact symmetry of the pullback
        g = (g + g.transpose(1, 0)).scale(Fraction(1, 2))
    return MetricJet(g, at.coords, "general")


# -- example 1: z' = F(y'') ---------------------------------------------------

def _q_only(Fq: Expr):
    if free_symbols(Fq) - {"q"}:
        raise MetricError("F must depend on q only")


def q_derivatives(Fq: Expr, k: int) -> list:
    out = [Fq]
    for _ in range(k):
        out.append(diff_expr(out[-1], "q"))
    return out


def example1_factor(Fq: Expr, at: Point5, order: int) -> Jet:
    """-15 (F'')^(10/3): the bracket representative divided by g_F."""
    f2 = eval_jet(q_derivatives(Fq, 2)[2], at, order)
    return f2 ** Fraction(10, 3) * -15


def build_example1_metric(Fq: Expr, at: Point5, order: int, representative: str = "bracket") -> MetricJet:
    """Metric for z' = F(y'').

    ``representative="bracket"`` is the polynomial form -15 (F'')^(10/3) g_F,
    exact for polynomial F; ``"gf"`` is g_F itself, which needs a real
    (F'')^(1/3) and therefore F'' > 0 in exact mode or float mode.
    """
    _q_only(Fq)
    if representative not in ("bracket", "gf"):
        raise MetricError(f"unknown representative {representative!r}")
    fs = q_derivatives(Fq, 4)
    f2 = eval_jet(fs[2], at, 0).value
    if at.field.is_zero(f2):
        raise DegeneratePointError("degenerate ODE point: F'' = 0")
    entries = load_table("example1.metric", ("f0", "f1", "f2", "f3", "f4"))
    mapping = {f"f{k}": fs[k] for k in range(5)}
    memo: dict = {}
    env = {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}
    emo: dict = {}
    jets = [evaluate(substitute(e, mapping, memo), env, 5, order, at.field, emo) for _, e in entries]
    M = _table_matrix(entries, lambda k: _coord_index(k), jets, at, order)
    g = Jet.stack([M[i][j] for i in range(5) for j in range(5)], (5, 5))
    if representative == "gf":
        try:
            fac = example1_factor(Fq, at, order)
        except JetError as exc:
            raise MetricError(f"cannot form g_F here: {exc}") from None
        g = g * fac.inv()
    return MetricJet(g, at.coords, f"example1-{representative}")


# -- example 2 -----------------------------------------------------------------

@dataclass(frozen=True)
class Example2Params:
    a0: Fraction = Fraction(0)
    a1: Fraction = Fraction(0)
    a2: Fraction = Fraction(0)
    a3: Fraction = Fraction(0)
    a4: Fraction = Fraction(0)
    a5: Fraction = Fraction(0)
    a6: Fraction = Fraction(0)
    b: Fraction = Fraction(0)

    @classmethod
    def of(cls, **kw):
        bad = set(kw) - set(EX2_PARAMS)
        if bad:
            raise MetricError(f"unknown parameters {sorted(bad)}")
        return cls(**{k: Fraction(v) for k, v in kw.items()})

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in EX2_PARAMS}

    def defining_function(self) -> str:
        return ("q^2 + a6*p^6 + a5*p^5 + a4*p^4 + a3*p^3 + a2*p^2 + a1*p + a0 + b*z")


# 15 * 2^(-2/3): the polynomial representative divided by g_F.
EXAMPLE2_FACTOR = RadicalConst.parse("15*2^(-2/3)")
# General metric of example 2 divided by the polynomial representative.
EXAMPLE2_GENERAL_RATIO = Fraction(-16)


def build_example2_metric(params: Example2Params, at: Point5, order: int) -> MetricJet:
    entries = load_table("example2.metric", EX2_PARAMS)
    env = {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}
    for k, v in params.as_dict().items():
        env[k] = at.field(v)
    memo: dict = {}
    jets = [evaluate(e, env, 5, order, at.field, memo) for _, e in entries]
    M = _table_matrix(entries, _coord_index, jets, at, order)
    return MetricJet(Jet.stack([M[i][j] for i in range(5) for j in range(5)], (5, 5)), at.coords, "example2")


def direct_metric(components, at: Point5, order: int, params=None, nvars: int = 5) -> MetricJet:
    """Metric from a matrix of expressions (or of strings) in x, y, p, q, z."""
    n = len(components)
    rows = []
    for row in components:
        if len(row) != n:
            raise MetricError("metric component matrix must be square")
        rows.append([c if isinstance(c, Expr) else parse_expr(str(c), tuple(params or ())) for c in row])
    jets = [eval_jet(rows[i][j], at, order, params) for i in range(n) for j in range(n)]
    return MetricJet(Jet.stack(jets, (n, n)), at.coords, "direct")


# -- comparisons -------------------------------------------------------------------

def signature_of(g: MetricJet):
    try:
        return linalg.signature(g.value, g.field)
    except linalg.SingularMatrixError:
        raise MetricError("degenerate metric at the base point") from None


@dataclass
class Proportionality:
    ok: bool
    lam: Jet | None = None
    witness: tuple | None = None

    @property
    def constant_value(self):
        return None if self.lam is None else self.lam.value


def proportionality_check(g1: MetricJet, g2: MetricJet, tol=None) -> Proportionality:
    """Find a scalar jet lam with g1 = lam * g2, or a witness pair of slots."""
    if g1.n != g2.n:
        raise MetricError("metrics of different dimension")
    order = min(g1.budget, g2.budget)
    a, b = g1.g.truncate(order), g2.g.truncate(order)
    fld = g1.field
    n = g1.n
    pivot = None
    for i in range(n):
        for j in range(i, n):
            if not fld.is_zero(b.value[i][j], tol):
                pivot = (i, j)
                break
        if pivot:
            break
    if pivot is None:
        return Proportionality(g1.g.is_zero(tol), None, None)
    lam = a[pivot] * b[pivot].inv()
    diff = a - b * lam
    for i in range(n):
        for j in range(i, n):
            if not diff[i, j].is_zero(tol):
                return Proportionality(False, lam, (pivot, (i, j)))
    return Proportionality(True, lam, None)


# -- coframes ----------------------------------------------------------------------

@dataclass(frozen=True)
class Coframe:
    """n one-forms as a (form, coordinate) matrix of jets, with constant scales.

    The scales are kept apart so that exact comparisons survive irrational
    normalisation constants which cancel in products.
    """

    components: Jet
    scales: tuple = dc_field(default=())

    def __post_init__(self):
        n = self.components.shape[0]
        if self.components.shape != (n, n):
            raise MetricError("coframe must be a square matrix of jets")
        if not self.scales:
            object.__setattr__(self, "scales", tuple(RadicalConst(Fraction(1)) for _ in range(n)))
        try:
            linalg.inverse(self.components.value, self.field)
        except linalg.SingularMatrixError:
            raise MetricError("degenerate coframe at the base point") from None
        if any(s.coef == 0 for s in self.scales):
            raise MetricError("degenerate coframe: zero scale")

    @property
    def n(self):
        return self.components.shape[0]

    @property
    def field(self):
        return self.components.field

    def scaled(self) -> Jet:
        """Components with the scales multiplied in (may need float mode)."""
        fld = self.field
        s = [c.to_field(fld) for c in self.scales]
        diag = Jet.constant([[s[i] if i == j else 0 for j in range(self.n)] for i in range(self.n)],
                            self.components.nvars, self.components.order, fld, (self.n, self.n))
        return einsum("ab,bm->am", diag, self.components)

    @classmethod
    def coordinate(cls, n, nvars, order, fld) -> "Coframe":
        return cls(identity(n, nvars, order, fld))


def coframe_from_fixture(table: CoframeTable, at: Point5, order: int, env_exprs: dict, params=None) -> Coframe:
    """Evaluate a coframe fixture; `env_exprs` substitutes names such as f0."""
    env = {c: Jet.variable(i, v, 5, order, at.field) for i, (c, v) in enumerate(zip(COORDS, at.coords))}
    for k, v in (params or {}).items():
        env[k] = at.field(v)
    memo: dict = {}
    for k, e in env_exprs.items():
        env[k] = evaluate(e, env, 5, order, at.field, memo)
    rows = []
    zero = _zero(at, order)
    emo: dict = {}
    for _, comps in table.forms:
        row = [zero] * 5
        for c, e in comps.items():
            try:
                row[_coord_index(c)] = evaluate(e, env, 5, order, at.field, emo)
            except Exception as exc:  # noqa: BLE001 - rewrap evaluation problems
                raise MetricError(f"cannot evaluate coframe component d{c}: {exc}") from None
        rows.append(row)
    comps = Jet.stack([rows[a][m] for a in range(5) for m in range(5)], (5, 5))
    return Coframe(comps, tuple(s for s, _ in table.forms))


def example1_coframe(Fq: Expr, at: Point5, order: int) -> Coframe:
    _q_only(Fq)
    fs = q_derivatives(Fq, 4)
    table = load_coframe("example1.coframe", ("f0", "f1", "f2", "f3", "f4"))
    return coframe_from_fixture(table, at, order, {f"f{k}": fs[k] for k in range(5)})


def example2_coframe(params: Example2Params, at: Point5, order: int) -> Coframe:
    F = parse_expr(params.defining_function(), EX2_PARAMS)
    table = load_coframe("example2.coframe", ("f0",) + EX2_PARAMS)
    return coframe_from_fixture(table, at, order, {"f0": F}, params.as_dict())


def g2_quadratic_form(n: int = 5):
    """Constant matrix Q with g = Q_ab theta^a theta^b = 2 th1 th5 - 2 th2 th4 + th3^2."""
    Q = [[Fraction(0)] * n for _ in range(n)]
    Q[0][4] = Q[4][0] = Fraction(1)
    Q[1][3] = Q[3][1] = Fraction(-1)
    Q[2][2] = Fraction(1)
    return Q


def coframe_metric(theta: Coframe, factor=1, Q=None) -> Jet:
    """factor * Q_ab theta^a theta^b, combining radical constants exactly."""
    Q = Q or g2_quadratic_form(theta.n)
    factor = factor if isinstance(factor, RadicalConst) else RadicalConst(Fraction(factor))
    fld = theta.field
    n = theta.n
    C = [[(factor * theta.scales[a] * theta.scales[b] * Q[a][b]).to_field(fld) if Q[a][b] else 0
          for b in range(n)] for a in range(n)]
    Cj = Jet.constant(C, theta.components.nvars, theta.components.order, fld, (n, n))
    T = theta.components
    return einsum("ab,abmn->mn", Cj, einsum("am,bn->abmn", T, T))


def coframe_check(g: MetricJet, theta: Coframe, factor=1):
    """Max-norm of g - factor * (2 th1 th5 - 2 th2 th4 + th3^2)."""
    if g.n != 5 or theta.n != 5:
        raise MetricError("coframe_check is for 5-dimensional metrics")
    try:
        h = coframe_metric(theta, factor)
    except FieldError as exc:
        raise MetricError(f"normalisation constants are irrational here: {exc}") from None
    order = min(g.budget, h.order)
    return (g.g.truncate(order) - h.truncate(order)).max_abs()


def extend_flat(g: MetricJet, signs, nvars: int | None = None) -> MetricJet:
    """Block sum of g with a constant diagonal metric; jets move to more variables."""
    n = g.n + len(signs)
    nv = nvars or n
    if nv < g.g.nvars:
        raise MetricError("cannot drop variables")
    inner = embed(g.g, nv, list(range(g.g.nvars)))
    out = Jet.zeros(nv, g.budget, g.field, (n, n))
    out.coef[:, :g.n, :g.n] = inner.coef
    for k, s in enumerate(signs):
        out.coef[0, g.n + k, g.n + k] = g.field(s)
    return MetricJet(out, g.base, g.label + "+flat")
