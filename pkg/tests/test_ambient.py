import json
import random
from fractions import Fraction

import pytest

from g2ambient.ambient import (DEFAULT_TU_GRID, UNIQUENESS_NOTE, AmbientMetric, ambient_ricci, assemble_ambient,
                               build_ambient, graham_coefficients, run_strategy)
from g2ambient.curvature import BudgetError, Conventions, Curvature
from g2ambient.expr import Point5, parse_expr
from g2ambient.field import EXACT
from g2ambient.jet import einsum
from g2ambient.metric import Example2Params, build_example1_metric, build_example2_metric, build_general_metric, direct_metric
from g2ambient.metric import signature_of

from conftest import FLOAT, GENERIC_EX2, SPLIT_FLAT, sample


def is_zero(T):
    return T.jet.truncate(0).is_zero()


def test_flat_coefficients_vanish(flat):
    gc = graham_coefficients(flat)
    assert is_zero(gc.alpha) and is_zero(gc.beta) and is_zero(gc.gamma)


def test_budget_required(pt):
    with pytest.raises(BudgetError):
        graham_coefficients(build_example2_metric(GENERIC_EX2, pt, 5))
    graham_coefficients(build_example2_metric(GENERIC_EX2, pt, 4), with_gamma=False)


def test_example1_q3_at_q1():
    pt = Point5.of(Fraction(2, 3), -1, Fraction(1, 4), 1, 3, field=FLOAT)
    gc = graham_coefficients(build_example1_metric(parse_expr("q^3"), pt, 6, "gf"))
    tol = FLOAT(10) ** -60
    with FLOAT.context():
        A = gc.alpha.value
        for i in range(5):
            for j in range(5):
                assert abs(A[i][j] - (FLOAT(4) / 45 if i == j == 3 else 0)) < tol
        assert gc.beta.max_abs() < tol and gc.gamma.max_abs() < tol


def test_example1_alpha_exact_where_root_is_rational():
    # F'' = 27 at q = 9/2, so g_F is rational there
    pt = Point5.of(1, 2, 3, Fraction(9, 2), 5)
    gc = graham_coefficients(build_example1_metric(parse_expr("q^3"), pt, 4, "gf"), with_gamma=False)
    assert gc.alpha.value[3][3] == Fraction(16, 3645)
    assert gc.beta.jet.truncate(0).is_zero()


def test_example2_spot_values():
    pt = Point5.of(Fraction(1, 3), 2, 0, Fraction(3, 2), 4)
    gc = graham_coefficients(build_example2_metric(Example2Params.of(a4=10), pt, 4), with_gamma=False)
    assert gc.alpha.value[1][1] == -18
    assert gc.beta.value[1][1] == 0
    gc = graham_coefficients(build_example2_metric(Example2Params.of(a6=1), pt, 4), with_gamma=False)
    assert gc.beta.value[1][1] == Fraction(27, 20)


def test_assemble_flat(flat):
    A = build_ambient(flat)
    gb = A.evaluate(1, 0, 0).value
    assert gb[0][6] == gb[6][0] == -1 and gb[0][0] == gb[6][6] == 0
    assert [[gb[i + 1][j + 1] for j in range(5)] for i in range(5)] == SPLIT_FLAT
    assert signature_of(A.evaluate(1, 0, 0)) == (4, 3)


def test_assemble_q2_is_cone(pt):
    g = build_example1_metric(parse_expr("q^2"), pt, 6)
    A = build_ambient(g)
    gb = A.evaluate(2, Fraction(1, 3), 2)
    inner = gb.g.coef[:, 1:6, 1:6]
    t2g = g.g.coef[0] * 4
    assert (inner[0] == t2g).all()


def test_evaluate_rejects_nonpositive_t(flat):
    A = build_ambient(flat)
    with pytest.raises(ValueError):
        A.evaluate(0, 1)
    with pytest.raises(ValueError):
        A.evaluate(-1, 0)


def test_assemble_field_mismatch(flat, fpt):
    gc = graham_coefficients(build_example2_metric(GENERIC_EX2, fpt, 4), with_gamma=False)
    with pytest.raises(ValueError):
        assemble_ambient(flat, gc.alpha, gc.beta)


def test_flat_cone_ricci_flat(flat):
    A = build_ambient(flat)
    for t, u in DEFAULT_TU_GRID + ((3, -2),):
        assert ambient_ricci(A, t, u).is_zero()


def test_ambient_ricci_budget(pt):
    A = build_ambient(build_example2_metric(GENERIC_EX2, pt, 5), with_gamma=False)
    with pytest.raises(BudgetError):
        ambient_ricci(A, 1, 0)


def test_example1_q3_float_ricci():
    F = parse_expr("q^3")
    for pt in sample(5, field=FLOAT, positive_q=True):
        A = build_ambient(build_example1_metric(F, pt, 6, "gf"), with_gamma=False)
        for t in (1, 2):
            for u in (0, Fraction(1, 2)):
                with FLOAT.context():
                    assert ambient_ricci(A, t, u).max_abs() < FLOAT(10) ** -60


def test_example2_exact_ricci():
    for pt in sample(5, seed=9):
        A = build_ambient(build_example2_metric(GENERIC_EX2, pt, 6))
        assert is_zero(A.gamma)
        for t, u in ((1, 0), (Fraction(3, 2), Fraction(-2, 7))):
            assert ambient_ricci(A, t, u).is_zero()


@pytest.mark.parametrize("c", [4, 9])
def test_constant_rescale_covariance(c):
    for pt in sample(2, seed=4):
        g = build_example2_metric(Example2Params.of(a2=1, a3=2, a5=-1, a6=3), pt, 6)
        # a generic non-example metric so that beta and gamma are nonzero
        h = direct_metric([[f"({v}) + x*q/7" if i == j else v for j, v in enumerate(row)]
                           for i, row in enumerate(SPLIT_FLAT)], pt, 6)
        for metric in (g, h):
            a, b = graham_coefficients(metric), graham_coefficients(metric.scaled(c))
            assert (a.alpha.jet.coef == b.alpha.jet.coef).all()
            assert (a.beta.jet.scale(Fraction(1, c)).coef == b.beta.jet.coef).all()
            assert (a.gamma.jet.scale(Fraction(1, c * c)).coef == b.gamma.jet.coef).all()
        assert not graham_coefficients(h).gamma.jet.truncate(0).is_zero()


def test_einstein_input():
    s = "4/(1+x^2+y^2+p^2+q^2+z^2)^2"
    rows = [[s if i == j else 0 for j in range(5)] for i in range(5)]
    g = direct_metric(rows, Point5.of(Fraction(1, 2), 0, Fraction(-1, 3), 1, Fraction(1, 4)), 6)
    A = build_ambient(g)
    assert is_zero(A.gamma)
    # Ric = 4 g: P = g/2, alpha = g, beta = P.P = g/4
    assert (A.alpha.jet - g.g).is_zero()
    assert (A.beta.jet.truncate(0) - g.g.truncate(0).scale(Fraction(1, 4))).is_zero()
    for t, u in DEFAULT_TU_GRID:
        assert ambient_ricci(A, t, u).is_zero()


def test_strategy_q2_certified():
    F = parse_expr("q^2")
    rep = run_strategy(lambda p: build_example1_metric(F, p, 6), sample(3), EXACT, "q^2")
    assert rep.verdict == "certified-truncated-ambient"
    assert UNIQUENESS_NOTE in rep.notes
    js = rep.as_json()
    assert js["schema"] == 1 and set(js) >= {"input", "mode", "precision", "points", "verdict"}
    assert all(p["gamma_norm"] == "0" and all(r["norm"] == "0" for r in p["ricci_norms"]) for p in js["points"])


def test_strategy_q4_float():
    F = parse_expr("q^4")
    rep = run_strategy(lambda p: build_general_metric(F, p, 10), sample(2, field=FLOAT, positive_q=True), FLOAT, "q^4")
    assert rep.verdict == "certified-truncated-ambient"
    assert rep.precision == 256


def test_strategy_report_only_q2_plus_y2():
    F = parse_expr("q^2 + y^2")
    rep = run_strategy(lambda p: build_general_metric(F, p, 10), sample(2), EXACT, "q^2+y^2")
    assert rep.verdict in ("certified-truncated-ambient", "gamma-nonzero", "ricci-nonzero")


def test_strategy_skips_degenerate_points():
    F = parse_expr("q^3")
    pts = [Point5.of(q=0), Point5.of(q=1)]
    rep = run_strategy(lambda p: build_example1_metric(F, p, 6), pts, EXACT, "q^3")
    assert rep.points[0].error and rep.points[1].error is None
    assert any("skipped" in n for n in rep.notes)
    rep = run_strategy(lambda p: build_example1_metric(F, p, 6), pts[:1], EXACT, "q^3")
    assert rep.verdict == "error"


def test_strategy_ricci_nonzero_detected():
    h = lambda p: direct_metric([[f"({v}) + x*q/7" if i == j else v for j, v in enumerate(row)]  # noqa: E731
                                 for i, row in enumerate(SPLIT_FLAT)], p, 6)
    rep = run_strategy(h, sample(1), EXACT, "perturbed flat")
    assert rep.verdict in ("gamma-nonzero", "ricci-nonzero")


def test_strategy_order_independent_and_scale_invariant():
    pts = sample(3, seed=12)
    build = lambda p: build_example2_metric(GENERIC_EX2, p, 6)  # noqa: E731
    a = run_strategy(build, pts, EXACT, "ex2")
    shuffled = list(pts)
    random.Random(1).shuffle(shuffled)
    b = run_strategy(build, shuffled, EXACT, "ex2")
    key = lambda d: d["coords"]  # noqa: E731
    ja, jb = a.as_json(), b.as_json()
    assert ja["verdict"] == jb["verdict"]
    assert json.dumps(sorted(ja["points"], key=key)) == json.dumps(sorted(jb["points"], key=key))
    c = run_strategy(lambda p: build(p).scaled(9), pts, EXACT, "ex2")
    assert c.verdict == a.verdict == "certified-truncated-ambient"
    assert a.to_json() == run_strategy(build, pts, EXACT, "ex2").to_json()


# -- convention sensitivity -----------------------------------------------------------------

FLIP = Conventions(riemann_sign=-1)


def test_riemann_sign_flip_detected_example1():
    F = parse_expr("q^3")
    pt = sample(1, field=FLOAT, positive_q=True)[0]
    A = build_ambient(build_example1_metric(F, pt, 6, "gf"), FLIP, with_gamma=False)
    with FLOAT.context():
        assert ambient_ricci(A, 1, 1, FLIP).max_abs() > 1


def test_riemann_sign_flip_detected_example2(pt):
    A = build_ambient(build_example2_metric(GENERIC_EX2, pt, 6), FLIP, with_gamma=False)
    assert ambient_ricci(A, 1, 1, FLIP).max_abs() > 1


def test_symmetrisation_weight_changes_gamma_on_generic_metric(fpt):
    h = build_general_metric(parse_expr("q^2 + x*q^3 + z*p^2"), fpt, 10)
    a = graham_coefficients(h).gamma.jet.truncate(0)
    b = graham_coefficients(h, Conventions(sym_weight=Fraction(1))).gamma.jet.truncate(0)
    with FLOAT.context():
        assert (a - b).max_abs() > FLOAT(10) ** -20
