"""Secondary checks: C-space obstruction, the conformal-scale ODE, connections
in non-coordinate coframes, the example-1 connection fixtures and the
infinitesimal holonomy span.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from . import linalg
from .ambient import build_ambient
from .curvature import BudgetError, Curvature
from .expr import Expr, Point5, eval_jet, eval_scalar, evaluate, parse_expr, substitute
from .field import Field, to_text
from .fixtures import load_connection, load_index_matrix, load_table, load_two_forms
from .jet import Jet, einsum, embed, matrix_inverse
from .metric import (EX2_PARAMS, DegeneratePointError, MetricError, MetricJet, build_example1_metric,
                     example1_coframe, q_derivatives)


# -- C-space ----------------------------------------------------------------------

@dataclass
class CSpaceResult:
    kind: str                      # "solution", "none" or "degenerate"
    K: list | None = None
    solution_dim: int = 0
    rank_w: int = 0
    rank_augmented: int = 0
    residual: object = 0

    def as_json(self) -> dict:
        out = {"kind": self.kind, "rank_w": self.rank_w, "rank_augmented": self.rank_augmented,
               "solution_dim": self.solution_dim, "residual": to_text(self.residual)}
        if self.K is not None:
            out["K"] = [to_text(k) for k in self.K]
        return out


def cspace_test(g: MetricJet, tol=None) -> CSpaceResult:
    """Solve C_ijk + K^l W_lijk = 0 over constant terms.

    "none" comes with a rank certificate: rank [W | C] > rank W.
    """
    if g.budget < 3:
        raise BudgetError("cspace_test needs metric jet order >= 3")
    c = Curvature(g)
    fld = g.field
    W = c.weyl.jet.value
    C = c.cotton.jet.value
    n = g.n
    tol = fld.tolerance() if tol is None else tol
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                rows.append([W[l][i][j][k] for l in range(n)])
                rhs.append(-C[i][j][k])
    if all(fld.is_zero(v, tol) for r in rows for v in r) and all(fld.is_zero(v, tol) for v in rhs):
        return CSpaceResult("degenerate", solution_dim=n)
    rw = linalg.rank(rows, fld, tol)
    aug = [r + [b] for r, b in zip(rows, rhs)]
    red, piv = linalg.rref(aug, fld, tol)
    ra = len(piv)
    if n in piv:
        return CSpaceResult("none", rank_w=rw, rank_augmented=ra)
    K = [fld.zero] * n
    for row, p in zip(red, piv):
        K[p] = row[n]
    with fld.context():
        res = max(abs(sum(r[l] * K[l] for l in range(n)) - b) for r, b in zip(rows, rhs))
    return CSpaceResult("solution", K, n - rw, rw, ra, res)


# -- conformal scale ODE --------------------------------------------------------------

@dataclass(frozen=True)
class UpsilonJet:
    """Values of Upsilon, Upsilon' and Upsilon'' at the abscissa q."""

    q: object
    u0: object
    u1: object
    u2: object


def _fderivs(Fq: Expr, q, fld: Field, k: int = 4):
    at = Point5.of(q=q, field=fld)
    return [eval_jet(e, at, 0).value for e in q_derivatives(Fq, k)]


def upsilon_ode_residual(Fq: Expr, U: UpsilonJet, fld: Field) -> object:
    """90 F''^2 (U'' - U'^2) - 60 F'' F''' U' + 3 F'' F'''' - 4 F'''^2 at U.q."""
    _, _, f2, f3, f4 = _fderivs(Fq, U.q, fld)
    if fld.is_zero(f2):
        raise DegeneratePointError("F'' = 0")
    with fld.context():
        u1, u2 = fld(U.u1), fld(U.u2)
        return 90 * f2 ** 2 * (u2 - u1 ** 2) - 60 * f2 * f3 * u1 + 3 * f2 * f4 - 4 * f3 ** 2


def upsilon_second(Fq: Expr, q, u1, fld: Field):
    """U'' forced by the ODE for given q and U'."""
    _, _, f2, f3, f4 = _fderivs(Fq, q, fld)
    if fld.is_zero(f2):
        raise DegeneratePointError("F'' = 0")
    with fld.context():
        return u1 ** 2 + (60 * f2 * f3 * u1 - 3 * f2 * f4 + 4 * f3 ** 2) / (90 * f2 ** 2)


def integrate_upsilon(Fq: Expr, q0, u0, u1, q1, fld: Field, step=Fraction(1, 10000)) -> list:
    """Classical fourth-order Runge-Kutta for (U, U'); returns UpsilonJets on the grid.

    q0, q1 and step are rationals so the step count is exact.
    """
    if fld.exact:
        raise ValueError("integration runs in float mode")
    with fld.context():
        q, y, v = fld(q0), fld(u0), fld(u1)
        h = fld(step)
        end = fld(q1)
        if end < q:
            h = -h
        nsteps = round(abs((Fraction(q1) - Fraction(q0)) / Fraction(step)))

        def f(qq, vv):
            return upsilon_second(Fq, qq, vv, fld)

        out = [UpsilonJet(q, y, v, f(q, v))]
        for _ in range(nsteps):
            k1y, k1v = v, f(q, v)
            k2y, k2v = v + h / 2 * k1v, f(q + h / 2, v + h / 2 * k1v)
            k3y, k3v = v + h / 2 * k2v, f(q + h / 2, v + h / 2 * k2v)
            k4y, k4v = v + h * k3v, f(q + h, v + h * k3v)
            y = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            q = q + h
            out.append(UpsilonJet(q, y, v, f(q, v)))
    return out


def rescaled_ricci(g: MetricJet, U: UpsilonJet, qvar: int = 3) -> list:
    """Ricci tensor of exp(2U) g at the base point, U a function of one coordinate.

    Ric' = Ric - (n-2)(Hess U - dU dU) - (Lap U + (n-2)|dU|^2) g.
    """
    if g.budget < 2:
        raise BudgetError("rescaled_ricci needs metric jet order >= 2")
    c = Curvature(g)
    fld = g.field
    n = g.n
    Ric = c.ricci.jet.value
    Gam = c.christoffel.jet.value
    gv = g.value
    gi = c.ginv.value
    with fld.context():
        u1, u2 = fld(U.u1), fld(U.u2)
        dU = [u1 if i == qvar else fld.zero for i in range(n)]
        H = [[(u2 if i == j == qvar else fld.zero) - Gam[qvar][i][j] * u1 for j in range(n)] for i in range(n)]
        lap = sum(gi[i][j] * H[i][j] for i in range(n) for j in range(n))
        norm = gi[qvar][qvar] * u1 * u1
        return [[Ric[i][j] - (n - 2) * (H[i][j] - dU[i] * dU[j]) - (lap + (n - 2) * norm) * gv[i][j]
                 for j in range(n)] for i in range(n)]


def rescaled_ricci_check(g: MetricJet, U: UpsilonJet, qvar: int = 3):
    R = rescaled_ricci(g, U, qvar)
    return max(abs(v) for row in R for v in row)


# -- connections in a coframe ----------------------------------------------------------

@dataclass
class ConnectionMatrix:
    """Levi-Civita connection one-forms omega^i_j in a coframe.

    ``omega[i, j, a]`` is omega^i_j(e_a) for the frame e_a dual to theta.
    """

    omega: Jet
    theta: Jet
    frame: Jet               # [mu, a] components of e_a
    dtheta: Jet              # [c, a, b] = dtheta^c(e_a, e_b)
    frame_metric: Jet

    @property
    def n(self):
        return self.omega.shape[0]

    def along(self, f: Jet) -> Jet:
        """Frame derivatives e_a(f), appended as a trailing axis."""
        ax = "abcdefgh"[:len(f.shape)]
        return einsum(f"{ax}y,yz->{ax}z", f.grad(), self.frame)

    def torsion(self) -> Jet:
        """T[i, a, b] = (dtheta^i + omega^i_j ^ theta^j)(e_a, e_b)."""
        return torsion_of(self.omega, self.dtheta)

    def curvature(self) -> Jet:
        """Omega[i, j, a, b] = (d omega + omega ^ omega)^i_j (e_a, e_b)."""
        w = self.omega
        ew = self.along(w)   # [i, j, b, a] = e_a(omega^i_j(e_b))
        br = einsum("ijd,dab->ijab", w, self.dtheta)    # omega^i_j([e_a, e_b]) with a sign
        ww = einsum("ika,kjb->ijab", w, w)
        return ew.transpose(0, 1, 3, 2) - ew + br + ww - ww.transpose(0, 1, 3, 2)

    def compatibility(self) -> Jet:
        """e_a(G_bc) - omega_cb(e_a) - omega_bc(e_a), stored [b, c, a]; zero for Levi-Civita."""
        G = self.frame_metric
        low = einsum("cd,dba->cba", G, self.omega)   # omega_cb(e_a)
        return self.along(G) - low.transpose(1, 0, 2) - low


def torsion_of(omega: Jet, dtheta: Jet) -> Jet:
    order = min(omega.order, dtheta.order)
    w = omega.truncate(order)
    return dtheta.truncate(order) + w.transpose(0, 2, 1) - w


def frame_connection(g: MetricJet, theta: Jet) -> ConnectionMatrix:
    """Koszul formula in the frame dual to `theta` ([form, coordinate] jets).

    With e_a dual to theta^a, [e_a, e_b] = -dtheta^c(e_a, e_b) e_c and
    2 g(nabla_a e_b, e_c) = e_a g_bc + e_b g_ac - e_c g_ab
                             + g([e_a,e_b],e_c) - g([e_a,e_c],e_b) - g([e_b,e_c],e_a).
    """
    n = g.n
    if theta.shape != (n, n):
        raise MetricError("coframe and metric dimensions differ")
    order = min(g.budget, theta.order)
    if order < 1:
        raise BudgetError("frame_connection needs order >= 1")
    th = theta.truncate(order)
    try:
        E = matrix_inverse(th)
    except Exception:  # noqa: BLE001
        raise MetricError("degenerate coframe") from None
    dth = th.grad()                                 # [c, nu, mu] = d_mu theta^c_nu
    X = dth - dth.transpose(0, 2, 1)                # d_mu th_nu - d_nu th_mu at [c, nu, mu]
    D = einsum("cnm,ma->can", X, E)
    D = einsum("can,nb->cab", D, E)                 # dtheta^c(e_a, e_b)
    G = einsum("ma,mn->an", E, g.g.truncate(order))
    G = einsum("an,nb->ab", G, E)
    Cs = -D                                         # [e_a, e_b] = Cs^c_ab e_c
    eG = einsum("bcm,ma->bca", G.grad(), E)         # e_a(G_bc) at [b, c, a]
    L = einsum("dab,dc->abc", Cs, G)                # g([e_a, e_b], e_c)
    K = (eG.transpose(2, 0, 1) + eG.transpose(0, 2, 1) - eG
         + L - L.transpose(0, 2, 1) - L.transpose(2, 0, 1))
    low = K.transpose(2, 0, 1).scale(Fraction(1, 2))    # [c, a, b] = g(nabla_a e_b, e_c)
    Gi = matrix_inverse(G)
    up = einsum("cd,dab->cab", Gi, low)
    omega = up.transpose(0, 2, 1)                       # [i, j, a] = Gamma^i_{a j}
    o = omega.order
    return ConnectionMatrix(omega, th.truncate(o), E.truncate(o), D.truncate(o), G.truncate(o))


# -- example-1 connection fixtures ---------------------------------------------------------

_FNAMES = ("f0", "f1", "f2", "f3", "f4", "f5", "f6")
P_EXPR = "(4*f3^2 - 3*f2*f4)/(90*f2^(10/3))"
Q_EXPR = "(40*f3^3 - 45*f2*f3*f4 + 9*f2^2*f5)/(90*f2^5)"
A5_EXPR = ("(-224*f3^4 + 336*f2*f3^2*f4 - 51*f2^2*f4^2 - 80*f2^2*f3*f5 + 10*f2^3*f6)"
           "/(100*f2^(20/3))")


def example1_scalar(which: str, Fq: Expr, at: Point5, order: int = 0) -> Jet:
    """The scalars P, Q, A5 of example 1 as jets at `at`."""
    text = {"P": P_EXPR, "Q": Q_EXPR, "A5": A5_EXPR}[which]
    fs = q_derivatives(Fq, 6)
    e = substitute(parse_expr(text, _FNAMES), {f"f{k}": fs[k] for k in range(7)})
    return eval_jet(e, at, order)


# 2 (F'')^(4/3) P with the powers of F'' cancelled, so it is rational.
ALPHA_QQ_EXPR = "(4*f3^2 - 3*f2*f4)/(45*f2^2)"


def example1_alpha_residual(alpha, Fq: Expr, at: Point5):
    """max |alpha - 2 (F'')^(4/3) P dq^2| over components, for alpha of g_F."""
    fs = q_derivatives(Fq, 4)
    e = substitute(parse_expr(ALPHA_QQ_EXPR, _FNAMES[:5]), {f"f{k}": fs[k] for k in range(5)})
    want = eval_jet(e, at, 0).value
    A = alpha.value
    fld = at.field
    with fld.context():
        return max(abs(A[i][j] - (want if i == j == 3 else fld.zero)) for i in range(5) for j in range(5))


def ambient_coframe(theta5: Jet) -> Jet:
    """(dt, theta^1..theta^5, du) as 7-variable jets in (t, x, y, p, q, z, u)."""
    order = theta5.order
    fld = theta5.field
    inner = embed(theta5, 7, [1, 2, 3, 4, 5], order)
    out = Jet.zeros(7, order, fld, (7, 7))
    out.coef[:, 1:6, 1:6] = inner.coef
    out.coef[0, 0, 0] = fld.one
    out.coef[0, 6, 6] = fld.one
    return out


def _fixture_array(entries: dict, env: dict, n: int, fld: Field):
    """Dense [i][j][a] nested list from a connection fixture."""
    out = [[[fld.zero] * n for _ in range(n)] for _ in range(n)]
    for (i, j), coeffs in entries.items():
        for a, e in enumerate(coeffs):
            out[i][j][a] = _const(e, env, fld)
    return out


def _const(e: Expr, env: dict, fld: Field):
    return evaluate(e, env, 1, 0, fld).value


def _two_form_array(terms: dict, env: dict, n: int, fld: Field, rank: int):
    zero = fld.zero
    if rank == 1:
        out = [[[zero] * n for _ in range(n)] for _ in range(n)]
    else:
        out = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for key, items in terms.items():
        slot = out
        for k in key:
            slot = slot[k]
        for e, a, b in items:
            v = _const(e, env, fld)
            slot[a][b] = slot[a][b] + v
            slot[b][a] = slot[b][a] - v
    return out


def _maxdiff(a, b):
    if isinstance(a, list):
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    return abs(a - b)


@dataclass
class FixturePointReport:
    coords: tuple
    omega_matches_g2: bool
    omega_matches_lc_fixture: bool
    torsion_matches: bool
    curvature_tu_independent: bool
    curvature_matches_a5: bool
    residuals: dict = dc_field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all((self.omega_matches_g2, self.omega_matches_lc_fixture, self.torsion_matches,
                    self.curvature_tu_independent, self.curvature_matches_a5))

    def as_json(self) -> dict:
        return {"coords": [to_text(c) for c in self.coords],
                "omega_matches_g2": self.omega_matches_g2,
                "omega_matches_lc_fixture": self.omega_matches_lc_fixture,
                "torsion_matches": self.torsion_matches,
                "curvature_tu_independent": self.curvature_tu_independent,
                "curvature_matches_a5": self.curvature_matches_a5,
                "residuals": {k: to_text(v) for k, v in self.residuals.items()}}


def example1_fixture_point(Fq: Expr, at: Point5, tu_list=((1, 0), (2, 1)), tol=None) -> FixturePointReport:
    """Compare the computed ambient connection of example 1 with the stored fixtures."""
    with at.field.context():
        return _fixture_point(Fq, at, tu_list, tol)


def _fixture_point(Fq, at, tu_list, tol):
    fld = at.field
    tol = fld.tolerance() if tol is None else fld(tol)
    g = build_example1_metric(Fq, at, 6, representative="gf")
    A = build_ambient(g, with_gamma=False)
    th5 = example1_coframe(Fq, at, 2).scaled()
    th7 = ambient_coframe(th5)
    pc = example1_scalar("P", Fq, at).value
    qc = example1_scalar("Q", Fq, at).value
    a5 = example1_scalar("A5", Fq, at).value
    params = ("pc", "qc", "t", "u")
    g2 = load_connection("omega_g2.conn", 7, params)
    lc = load_connection("omega_lc.conn", 7, params)
    tors = load_two_forms("torsion_g2.forms", ("pc",))
    curv = load_two_forms("curvature_g2.forms", ("a5c",))
    res = {}
    curvatures = []
    g2_ok = lc_ok = tors_ok = True
    for t, u in tu_list:
        env = {"pc": pc, "qc": qc, "t": fld(t), "u": fld(u)}
        conn = frame_connection(A.evaluate(t, u, 2), th7)
        om = conn.omega.value.tolist()
        lc_fix = _fixture_array(lc, env, 7, fld)
        d = _maxdiff(om, lc_fix)
        res[f"omega_lc_fixture@{t},{u}"] = d
        lc_ok &= d <= tol
        if (fld(t), fld(u)) == (fld(1), fld(0)):
            g2_fix = _fixture_array(g2, env, 7, fld)
            d = max(abs(om[i][j][a] - g2_fix[i][j][a]) for i in range(7) for j in range(7) for a in range(1, 6))
            res["omega_g2"] = d
            g2_ok &= d <= tol
            # torsion of the pulled-back G2 connection
            Dv = conn.dtheta.value.tolist()
            Tg = [[[Dv[i][a][b] + g2_fix[i][b][a] - g2_fix[i][a][b] for b in range(7)]
                   for a in range(7)] for i in range(7)]
            Tfix = _two_form_array(tors, env, 7, fld, 1)
            d = _maxdiff(Tg, Tfix)
            res["torsion"] = d
            tors_ok &= d <= tol
            if not all(abs(v) <= tol for v in _flat(conn.torsion().value.tolist())):
                tors_ok = False
        curvatures.append(conn.curvature().value.tolist())
    d = max((_maxdiff(curvatures[0], c) for c in curvatures[1:]), default=fld.zero)
    res["curvature_tu"] = d
    indep = d <= tol
    cfix = _two_form_array(curv, {"a5c": a5}, 7, fld, 2)
    d = _maxdiff(curvatures[0], cfix)
    res["curvature_a5"] = d
    return FixturePointReport(at.coords, g2_ok, lc_ok, tors_ok, indep, d <= tol, res)


def _flat(x):
    if isinstance(x, list):
        for y in x:
            yield from _flat(y)
    else:
        yield x


def example1_fixture_checks(Fq: Expr, points, tu_list=((1, 0), (2, 1)), tol=None) -> list:
    return [example1_fixture_point(Fq, pt, tu_list, tol) for pt in points]


# -- holonomy -------------------------------------------------------------------------------

@dataclass
class HolonomySpan:
    basis: list
    dimension: int
    depth: int
    closure_rounds: int

    def as_json(self) -> dict:
        return {"dimension": self.dimension, "depth": self.depth, "closure_rounds": self.closure_rounds}


def _bracket(X, Y, n):
    return [[sum(X[i][k] * Y[k][j] - Y[i][k] * X[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _reduce(mats, n, fld, tol):
    rows = [[m[i][j] for i in range(n) for j in range(n)] for m in mats]
    red, piv = linalg.rref(rows, fld, tol) if rows else ([], [])
    return [[r[i * n:(i + 1) * n] for i in range(n)] for r in red]


def holonomy_span(g: MetricJet, depth: int = 2, tol=None) -> HolonomySpan:
    """Span of R(e_a, e_b), its covariant derivatives up to `depth`, closed under brackets.

    Endomorphisms are R^i_j(., .) in the coordinate basis at the base point.
    """
    if g.budget < 2 + depth:
        raise BudgetError(f"holonomy_span at depth {depth} needs metric jet order >= {2 + depth}")
    fld = g.field
    tol = fld.tolerance() if tol is None else tol
    n = g.n
    c = Curvature(g)
    T = c.riemann
    mats = []
    for level in range(depth + 1):
        if level:
            T = c.nabla(T)
        arr = T.jet.value
        extra = T.rank - 2
        for idx in itertools.product(range(n), repeat=extra):
            if level == 0 and idx[0] >= idx[1]:
                continue
            m = [[arr[(i, j) + idx] for j in range(n)] for i in range(n)]
            mats.append(m)
    with fld.context():
        basis = _reduce(mats, n, fld, tol)
        rounds = 0
        while True:
            new = [_bracket(basis[a], basis[b], n) for a in range(len(basis)) for b in range(a + 1, len(basis))]
            nb = _reduce(basis + new, n, fld, tol)
            rounds += 1
            if len(nb) == len(basis):
                break
            basis = nb
    return HolonomySpan(basis, len(basis), depth, rounds)


def antisymmetry_residual(X, G, fld: Field):
    n = len(G)
    with fld.context():
        return max(abs(sum(X[k][i] * G[k][j] + G[i][k] * X[k][j] for k in range(n)))
                   for i in range(n) for j in range(n))


def example2_table_coefficients(params, pt: Point5) -> dict:
    """Stored alpha and beta 5x5 matrices of the example-2 ambient metric at pt.

    Slots not listed in the table are zero.
    """
    fld = pt.field
    out = {"alpha": [[fld.zero] * 5 for _ in range(5)], "beta": [[fld.zero] * 5 for _ in range(5)]}
    for key, e in load_table("example2_ambient.table", EX2_PARAMS):
        i, j = "xypqz".index(key[1]), "xypqz".index(key[2])
        v = eval_scalar(e, pt, params.as_dict())
        out[key[0]][i][j] = out[key[0]][j][i] = v
    return out
