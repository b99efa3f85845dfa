from fractions import Fraction

import numpy as np
import pytest

from g2ambient.curvature import (BudgetError, Curvature, TensorJet, bach, christoffel, cotton,
                                 covariant_derivative, metric_inverse, ricci, riemann, schouten, weyl)
from g2ambient.expr import Point5, parse_expr
from g2ambient.field import float_field
from g2ambient.jet import Jet, einsum
from g2ambient.metric import build_example1_metric, build_example2_metric, direct_metric

from conftest import FLOAT, GENERIC_EX2, SPLIT_FLAT, sample


def zero(j):
    return j.is_zero()


@pytest.fixture(scope="module")
def ex2_curvatures():
    return [Curvature(build_example2_metric(GENERIC_EX2, pt, 4)) for pt in sample(5, seed=5)]


def test_inverse_diag():
    g = direct_metric([[2, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]],
                      Point5.of(), 1)
    gi = metric_inverse(g).value
    assert [gi[i][i] for i in range(5)] == [Fraction(1, 2), 1, 1, -1, -1]
    with pytest.raises(ValueError):
        Curvature(direct_metric([[0] * 5] * 5, Point5.of(), 1)).ginv


def test_inverse_example2_multiplies_back():
    g = build_example2_metric(GENERIC_EX2.__class__(), Point5.of(), 2)
    c = Curvature(g)
    prod = einsum("ij,jk->ik", g.g, c.ginv)
    assert prod.value.tolist() == [[int(i == j) for j in range(5)] for i in range(5)]
    assert c.ginv.value[2][2] == Fraction(1, 20)


def test_flat_everything_vanishes(flat):
    c = Curvature(flat)
    for T in (c.christoffel, c.riemann, c.ricci, c.schouten, c.weyl, c.cotton, c.bach):
        assert T.is_zero()


def test_christoffel_example():
    g = direct_metric([["(1+x)^2", 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]],
                      Point5.of(), 2)
    assert christoffel(g).value[0][0][0] == 1


def test_budget_errors(pt):
    g = build_example2_metric(GENERIC_EX2, pt, 3)
    with pytest.raises(BudgetError):
        bach(g)
    with pytest.raises(BudgetError):
        riemann(g.truncate(1))
    with pytest.raises(BudgetError):
        cotton(g.truncate(2))


def test_sphere_block_scalar_curvature():
    g = direct_metric([["4/(1+x^2+y^2)^2", 0, 0, 0, 0], [0, "4/(1+x^2+y^2)^2", 0, 0, 0],
                       [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]],
                      Point5.of(Fraction(1, 3), Fraction(-1, 2)), 2)
    assert Curvature(g).scalar.value == 2


def test_riemann_symmetries(ex2_curvatures):
    for c in ex2_curvatures:
        R = c.riemann_down.jet
        assert zero(R + R.transpose(1, 0, 2, 3))
        assert zero(R + R.transpose(0, 1, 3, 2))
        assert zero(R - R.transpose(2, 3, 0, 1))
        # first Bianchi: R_ijkl + R_iklj + R_iljk = 0
        assert zero(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2))


def test_contracted_second_bianchi(ex2_curvatures):
    for c in ex2_curvatures[:3]:
        dRic = c.nabla(c.ricci).jet          # R_ij;k
        div = einsum("jk,ijk->i", c.ginv, dRic)
        assert zero(div - c.scalar.grad().scale(Fraction(1, 2)))


def test_trace_identities(ex2_curvatures):
    for c in ex2_curvatures:
        W = c.weyl.jet
        for sub in ("ik,ijkl->jl", "jl,ijkl->ik", "il,ijkl->jk"):
            assert zero(einsum(sub, c.ginv, W))
        C = c.cotton.jet
        assert zero(C + C.transpose(0, 2, 1))
        assert zero(C + C.transpose(1, 2, 0) + C.transpose(2, 0, 1))
        assert zero(einsum("ij,ijk->k", c.ginv, C))
        assert zero(einsum("ij,ij->", c.ginv, c.bach.jet))
        assert not C.is_zero()


def test_bach_antisymmetric_part_reported(ex2_curvatures):
    B = ex2_curvatures[0].bach.jet
    assert (B - B.transpose(1, 0)).max_abs() == 0


def test_metric_compatibility(ex2_curvatures):
    c = ex2_curvatures[0]
    assert zero(c.nabla(TensorJet(c.g, "dd")).jet)
    up = c.nabla(TensorJet(c.ginv, "uu")).jet
    assert zero(up)


def test_covariant_derivative_of_scalar(pt):
    g = build_example2_metric(GENERIC_EX2, pt, 2)
    f = Jet.variable(0, 3, 5, 2, pt.field) * Jet.variable(3, 1, 5, 2, pt.field)
    d = covariant_derivative(TensorJet(f, ""), christoffel(g))
    assert (d.jet.coef == f.grad().coef).all()


def test_raise_lower_roundtrip(ex2_curvatures):
    c = ex2_curvatures[1]
    P = c.schouten
    back = c.lower_index(c.raise_index(P, 0), 0)
    assert (back.jet.coef == P.jet.coef).all()
    assert back.budget == P.budget


@pytest.mark.parametrize("c", [4, 9, 7])
def test_scaling_laws(c, pt):
    g = build_example2_metric(GENERIC_EX2, pt, 4)
    a, b = Curvature(g), Curvature(g.scaled(c))
    same = lambda x, y: (x.coef == y.coef).all()  # noqa: E731
    assert same(a.christoffel.jet, b.christoffel.jet)
    assert same(a.riemann.jet, b.riemann.jet)
    assert same(a.ricci.jet, b.ricci.jet)
    assert same(a.scalar.scale(Fraction(1, c)), b.scalar)
    assert same(a.schouten.jet, b.schouten.jet)
    assert same(a.weyl.jet.scale(c), b.weyl.jet)
    assert same(a.cotton.jet, b.cotton.jet)
    assert same(a.bach.jet.scale(Fraction(1, c)), b.bach.jet)


def test_example1_schouten_at_q1():
    pt = Point5.of(Fraction(1, 2), -1, 3, 1, 2, field=FLOAT)
    P = schouten(build_example1_metric(parse_expr("q^3"), pt, 2, "gf")).value
    with FLOAT.context():
        for i in range(5):
            for j in range(5):
                want = FLOAT(2) / 45 if i == j == 3 else 0
                assert abs(P[i][j] - want) < FLOAT(10) ** -60


def test_example1_bach_equals_p_squared(fpt):
    g = build_example1_metric(parse_expr("q^3"), fpt, 4, "gf")
    c = Curvature(g)
    PP = einsum("ik,kj->ij", c.schouten.jet, einsum("ka,aj->kj", c.ginv, c.schouten.jet)).value
    B = c.bach.value
    with FLOAT.context():
        assert max(abs(B[i][j] - PP[i][j]) for i in range(5) for j in range(5)) < FLOAT(10) ** -60
        # P lives in the qq slot only and g^qq = 0, so P_i^k P_jk and B both vanish
        assert abs(c.ginv.value[3][3]) < FLOAT(10) ** -60
        assert abs(c.schouten.value[3][3]) > FLOAT(10) ** -3
        assert c.bach.max_abs() < FLOAT(10) ** -60


def test_conformally_flat_weyl_vanishes():
    f = float_field(256)
    rows = [[f"exp(2*x)*({v})" if v else 0 for v in row] for row in SPLIT_FLAT]
    g = direct_metric(rows, Point5.of(Fraction(1, 3), field=f), 2)
    with f.context():
        assert weyl(g).max_abs() < f(10) ** -60
        assert ricci(g).max_abs() > 0


def test_einstein_jet_has_zero_cotton():
    # round 5-sphere in stereographic coordinates is Einstein
    s = "4/(1+x^2+y^2+p^2+q^2+z^2)^2"
    rows = [[s if i == j else 0 for j in range(5)] for i in range(5)]
    c = Curvature(direct_metric(rows, Point5.of(Fraction(1, 2), Fraction(-1, 3), 0, Fraction(1, 5), 1), 3))
    assert c.cotton.is_zero()
    assert c.weyl.is_zero()
    assert (c.schouten.jet - c.g.scale(Fraction(1, 2))).is_zero()
