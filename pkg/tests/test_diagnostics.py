import random
from fractions import Fraction

import mpmath
import pytest

from g2ambient import linalg
from g2ambient.ambient import build_ambient
from g2ambient.curvature import BudgetError, Curvature
from g2ambient.diagnostics import (UpsilonJet, ambient_coframe, antisymmetry_residual, cspace_test,
                                   example1_fixture_checks, example1_fixture_point, example1_scalar,
                                   frame_connection, holonomy_span, integrate_upsilon, rescaled_ricci_check,
                                   upsilon_ode_residual, upsilon_second)
from g2ambient.expr import Point5, parse_expr
from g2ambient.field import EXACT
from g2ambient.jet import Jet
from g2ambient.metric import (DegeneratePointError, Example2Params, MetricError, build_example1_metric,
                              build_example2_metric, direct_metric, example1_coframe, extend_flat)

from conftest import FLOAT, SPLIT_FLAT, sample
from fd_oracle import ORIGIN, FDCurvature

EX2_GENERIC = Example2Params.of(a3=1, a6=1)
TIGHT = FLOAT(10) ** -60


# -- C-space -----------------------------------------------------------------------------

def test_cspace_flat_degenerate(flat):
    assert cspace_test(flat.truncate(3)).kind == "degenerate"


def test_cspace_example2_none():
    for pt in sample(5):
        res = cspace_test(build_example2_metric(EX2_GENERIC, pt, 3))
        assert res.kind == "none"
        assert res.rank_augmented > res.rank_w


def test_cspace_example1_solution():
    F = parse_expr("q^3")
    for pt in sample(5, positive_q=True):
        g = build_example1_metric(F, pt, 3)
        res = cspace_test(g)
        assert res.kind == "solution" and res.residual == 0
        c = Curvature(g)
        W, C = c.weyl.value, c.cotton.value
        for i in range(5):
            for j in range(5):
                for k in range(5):
                    assert C[i][j][k] + sum(res.K[l] * W[l][i][j][k] for l in range(5)) == 0


def test_cspace_budget(pt):
    with pytest.raises(BudgetError):
        cspace_test(build_example2_metric(EX2_GENERIC, pt, 2))


def test_cspace_rank_independent_of_row_order(pt):
    c = Curvature(build_example2_metric(EX2_GENERIC, pt, 3))
    W, C = c.weyl.value, c.cotton.value
    rows = [[W[l][i][j][k] for l in range(5)] + [-C[i][j][k]] for i in range(5) for j in range(5) for k in range(5)]
    want = linalg.rank(rows, EXACT)
    rng = random.Random(0)
    for _ in range(3):
        rng.shuffle(rows)
        assert linalg.rank(rows, EXACT) == want


# -- conformal scale -----------------------------------------------------------------------

def test_upsilon_residual_examples():
    assert upsilon_ode_residual(parse_expr("q^2"), UpsilonJet(EXACT(3), 0, 0, 0), EXACT) == 0
    assert upsilon_ode_residual(parse_expr("q^3"), UpsilonJet(EXACT(1), 0, 0, 0), EXACT) == -144
    with pytest.raises(DegeneratePointError):
        upsilon_ode_residual(parse_expr("q^3"), UpsilonJet(EXACT(0), 0, 0, 0), EXACT)


def test_upsilon_integration():
    F = parse_expr("q^3")
    traj = integrate_upsilon(F, 1, 0, Fraction(1, 5), Fraction(11, 10), FLOAT)
    assert len(traj) == 1001
    with FLOAT.context():
        worst = max(abs(upsilon_ode_residual(F, U, FLOAT)) for U in traj)
    assert worst < 1e-8
    with pytest.raises(ValueError):
        integrate_upsilon(F, 1, 0, 0, 2, EXACT)


def test_rescaled_ricci_trivial(flat):
    assert rescaled_ricci_check(flat.truncate(2), UpsilonJet(EXACT(0), 0, 0, 0)) == 0


def test_rescaled_ricci_q2(fpt):
    g = build_example1_metric(parse_expr("q^2"), fpt, 2, "gf")
    assert rescaled_ricci_check(g, UpsilonJet(fpt.q, 0, 0, 0)) < FLOAT(10) ** -40


def test_rescaled_ricci_q3():
    F = parse_expr("q^3")
    for pt in sample(3, field=FLOAT, positive_q=True):
        g = build_example1_metric(F, pt, 2, "gf")
        u1 = FLOAT("1/3")
        U = UpsilonJet(pt.q, 0, u1, upsilon_second(F, pt.q, u1, FLOAT))
        assert rescaled_ricci_check(g, U) < 1e-8
        bad = UpsilonJet(pt.q, 0, u1, U.u2 + 1)
        assert rescaled_ricci_check(g, bad) > 1e-3


# -- connections ----------------------------------------------------------------------------

def test_frame_connection_flat_coordinate(flat):
    conn = frame_connection(flat.truncate(2), Jet.constant([[int(i == j) for j in range(5)] for i in range(5)],
                                                            5, 2, EXACT, (5, 5)))
    assert conn.omega.is_zero()


POLAR = [["1", 0, 0, 0, 0], [0, "x^2", 0, 0, 0], [0, 0, "1", 0, 0], [0, 0, 0, "-1", 0], [0, 0, 0, 0, "-1"]]


def polar_coframe(pt, order):
    x = Jet.variable(0, pt.x, 5, order, pt.field)
    one = Jet.constant(1, 5, order, pt.field)
    zero = Jet.zeros(5, order, pt.field)
    rows = [[one if i == j else zero for j in range(5)] for i in range(5)]
    rows[1][1] = x
    return Jet.stack([rows[a][m] for a in range(5) for m in range(5)], (5, 5))


def test_frame_connection_polar():
    pt = Point5.of(2, Fraction(1, 3))
    g = direct_metric(POLAR, pt, 2)
    conn = frame_connection(g, polar_coframe(pt, 2))
    w = conn.omega.value
    # omega^1_2 = -dphi = -(1/r) theta^2
    assert w[0][1][1] == Fraction(-1, 2) and w[1][0][1] == Fraction(1, 2)
    nz = {(i, j, a) for i in range(5) for j in range(5) for a in range(5) if w[i][j][a] != 0}
    assert nz == {(0, 1, 1), (1, 0, 1)}
    assert conn.torsion().is_zero() and conn.compatibility().is_zero()


def test_frame_connection_matches_fd_oracle():
    comps = [["1 + x*q/5", "y/7", 0, 0, 0], ["y/7", "x^2", 0, 0, "p/3"], [0, 0, "1", "z/4", 0],
             [0, 0, "z/4", "-1", 0], [0, "p/3", 0, 0, "-1 - x*y/9"]]
    pt = Point5.of(2, Fraction(1, 3), Fraction(-1, 2), Fraction(1, 5), 1)
    conn = frame_connection(direct_metric(comps, pt, 2), polar_coframe(pt, 2))
    fd = FDCurvature([[str(c) for c in row] for row in comps], [mpmath.mpf(2), mpmath.mpf(1) / 3, mpmath.mpf(-1) / 2, mpmath.mpf(1) / 5, mpmath.mpf(1)])
    G = fd.gamma(ORIGIN)
    r = mpmath.mpf(2)
    # e_a = frame dual to theta; theta^2 = x dy so e_2 = (1/x) d_y
    E = [[mpmath.mpf(int(i == j)) for j in range(5)] for i in range(5)]
    E[1][1] = 1 / r
    Th = [[mpmath.mpf(int(i == j)) for j in range(5)] for i in range(5)]
    Th[1][1] = r
    dE = [[[mpmath.mpf(0)] * 5 for _ in range(5)] for _ in range(5)]   # d_nu e_j^mu
    dE[0][1][1] = -1 / r ** 2
    w = conn.omega.value
    for i in range(5):
        for j in range(5):
            for a in range(5):
                ref = sum(Th[i][m] * (sum(E[n][a] * dE[n][m][j] for n in range(5))
                                      + sum(G[m][n][l] * E[n][a] * E[l][j] for n in range(5) for l in range(5)))
                          for m in range(5))
                got = mpmath.mpf(w[i][j][a].numerator) / w[i][j][a].denominator
                assert abs(got - ref) < 1e-8


def test_frame_connection_errors(pt):
    g = direct_metric(POLAR, Point5.of(2), 1)
    with pytest.raises(MetricError):
        frame_connection(g, Jet.zeros(5, 1, EXACT, (4, 4)))
    with pytest.raises(MetricError):
        frame_connection(g, Jet.zeros(5, 1, EXACT, (5, 5)))


def test_ambient_coframe_torsion_free():
    F = parse_expr("q^3")
    pt = sample(1, field=FLOAT, positive_q=True)[0]
    A = build_ambient(build_example1_metric(F, pt, 6, "gf"), with_gamma=False)
    th7 = ambient_coframe(example1_coframe(F, pt, 2).scaled())
    conn = frame_connection(A.evaluate(1, 0, 2), th7)
    with FLOAT.context():
        assert conn.torsion().max_abs() < TIGHT
        assert conn.compatibility().max_abs() < TIGHT


# -- example-1 fixtures -------------------------------------------------------------------------

def test_a5_value_for_q3():
    pt = Point5.of(0, 0, 0, 1, 0, field=FLOAT)
    a5 = example1_scalar("A5", parse_expr("q^3"), pt).value
    with FLOAT.context():
        want = FLOAT(-290304) / (100 * FLOAT(6) ** (FLOAT(20) / 3))
        assert abs(a5 - want) < FLOAT(10) ** -70


def test_fixtures_q2_zero_curvature():
    F = parse_expr("q^2")
    for rep in example1_fixture_checks(F, sample(2, field=FLOAT, positive_q=True)):
        assert rep.ok
        assert rep.residuals["curvature_a5"] < TIGHT


def test_fixtures_q3_at_q1():
    pt = Point5.of(Fraction(1, 2), 3, -1, 1, 2, field=FLOAT)
    rep = example1_fixture_point(parse_expr("q^3"), pt, tu_list=((1, 0), (2, 1)))
    assert rep.ok, rep.residuals
    assert rep.residuals["curvature_a5"] < FLOAT(10) ** -50
    assert rep.curvature_tu_independent


@pytest.mark.parametrize("text", ["q^4", "q^5 + q^3", "q^2 + q^4/3"])
def test_fixtures_other_f(text):
    pt = sample(1, field=FLOAT, positive_q=True)[0]
    rep = example1_fixture_point(parse_expr(text), pt)
    assert rep.omega_matches_g2 and rep.curvature_tu_independent and rep.curvature_matches_a5


# -- holonomy ---------------------------------------------------------------------------------

SPHERE = [["4/(1+x^2+y^2)^2", 0, 0, 0, 0], [0, "4/(1+x^2+y^2)^2", 0, 0, 0],
          [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]]


def test_holonomy_flat(flat):
    g7 = extend_flat(flat.truncate(4), [1, -1])
    for depth in (0, 1, 2):
        assert holonomy_span(g7, depth).dimension == 0


def test_holonomy_sphere_product():
    g = direct_metric(SPHERE, Point5.of(Fraction(1, 3), Fraction(1, 2)), 4)
    g7 = extend_flat(g, [1, -1])
    dims = [holonomy_span(g7, d).dimension for d in (0, 1, 2)]
    assert dims == [1, 1, 1]


def test_holonomy_budget(flat):
    with pytest.raises(BudgetError):
        holonomy_span(extend_flat(flat.truncate(2), [1, -1]), 1)


def test_holonomy_example2_ambient_depth1():
    params = Example2Params.of(a0=1, a1=1, a2=1, a3=1, a4=1, a5=1, a6=1)
    pt = Point5.of(Fraction(1, 3), Fraction(1, 2), Fraction(-5, 7), Fraction(3, 2), 4)
    gb = build_ambient(build_example2_metric(params, pt, 7), with_gamma=False).evaluate(1, Fraction(1, 2))
    h0 = holonomy_span(gb, 0)
    h1 = holonomy_span(gb, 1)
    assert h0.dimension <= h1.dimension <= 21
    G = gb.value.tolist()
    assert all(antisymmetry_residual(X, G, EXACT) == 0 for X in h1.basis)
    print(f"example-2 ambient holonomy span: depth 0 -> {h0.dimension}, depth 1 -> {h1.dimension}")
