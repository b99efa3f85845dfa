"""Levi-Civita curvature chain on metric jets.

Conventions (pinned by the Ricci-flatness and vanishing-gamma checks on the
example metrics):

    Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk)
    R^i_jkl    = d_k Gamma^i_jl - d_l Gamma^i_jk + Gamma^i_km Gamma^m_jl - Gamma^i_lm Gamma^m_jk
    R_ij       = R^k_ikj,   R = g^ij R_ij
    P          = (Ric - R g / (2(n-1))) / (n-2)
    W_ijkl     = R_ijkl - (P_ik g_jl - P_il g_jk - P_jk g_il + P_jl g_ik)
    C_ijk      = P_ij;k - P_ik;j
    B_ij       = g^kl C_ijk;l - P^kl W_kijl

Covariant derivatives append their index last, so ``T_ij;k`` is stored at
``[i, j, k]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .jet import Jet, JetError, contract, einsum, matrix_inverse
from .metric import MetricJet


class BudgetError(ValueError):
    """The metric jet is not deep enough for the requested quantity."""


@dataclass(frozen=True)
class Conventions:
    """Knobs used to show that the example checks detect convention changes.

    `riemann_sign` multiplies the Riemann tensor; `sym_weight` is the weight
    of round-bracket symmetrisation in the gamma coefficient (1/2 is the
    usual normalised convention).
    """

    riemann_sign: int = 1
    sym_weight: Fraction = Fraction(1, 2)


STANDARD = Conventions()


@dataclass(frozen=True)
class TensorJet:
    """Component jets of a tensor; `indices` is a string of 'u'/'d' per slot."""

    jet: Jet
    indices: str

    def __post_init__(self):
        if len(self.jet.shape) != len(self.indices):
            raise JetError(f"index signature {self.indices!r} does not match shape {self.jet.shape}")
        if set(self.indices) - {"u", "d"}:
            raise JetError("index signature uses 'u' and 'd' only")

    @property
    def rank(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.jet.shape[0] if self.jet.shape else 0

    @property
    def budget(self) -> int:
        return self.jet.order

    @property
    def value(self):
        return self.jet.value

    def __getitem__(self, key):
        return self.jet[key]

    def is_zero(self, tol=None) -> bool:
        return self.jet.is_zero(tol)

    def max_abs(self):
        return self.jet.max_abs()


_LET = "abcdefghopqrstvwxyz"


def covariant_derivative(T: TensorJet, gamma: TensorJet) -> TensorJet:
    """nabla T with the derivative index appended (budget drops by one)."""
    if T.budget < 1:
        raise BudgetError("covariant derivative needs budget >= 1")
    r = T.rank
    out = T.jet.grad()
    idx = _LET[:r]
    m, c = "m", "n"
    for pos, kind in enumerate(T.indices):
        src = idx[:pos] + c + idx[pos + 1:]
        if kind == "u":
            term = einsum(f"{idx[pos]}{m}{c},{src}->{idx}{m}", gamma.jet, T.jet)
            out = out + term
        else:
            term = einsum(f"{c}{m}{idx[pos]},{src}->{idx}{m}", gamma.jet, T.jet)
            out = out - term
    return TensorJet(out, T.indices + "d")


class Curvature:
    """Lazily computed curvature quantities of one metric jet."""

    def __init__(self, g: MetricJet, conventions: Conventions = STANDARD):
        self.metric = g
        self.conv = conventions
        self.n = g.n
        self.field = g.field

    def _need(self, budget: int, what: str):
        if self.metric.budget < budget:
            raise BudgetError(f"{what} needs metric jet order >= {budget}, have {self.metric.budget}")

    # -- basic objects ----------------------------------------------------------
    @property
    def g(self) -> Jet:
        return self.metric.g

    @cached_property
    def ginv(self) -> Jet:
        try:
            return matrix_inverse(self.g)
        except JetError as exc:
            raise ValueError(f"degenerate metric: {exc}") from None

    @cached_property
    def christoffel(self) -> TensorJet:
        self._need(1, "Christoffel symbols")
        dg = self.g.grad()  # [l, k, j] = d_j g_lk
        low = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
        # low[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
        return TensorJet(einsum("il,ljk->ijk", self.ginv, low).scale(Fraction(1, 2)), "udd")

    def nabla(self, T: TensorJet) -> TensorJet:
        return covariant_derivative(T, self.christoffel)

    @cached_property
    def riemann(self) -> TensorJet:
        """R^i_jkl."""
        self._need(2, "Riemann tensor")
        G = self.christoffel.jet
        dG = G.grad()  # [i, j, k, l] = d_l Gamma^i_jk
        quad = einsum("ikm,mjl->ijkl", G, G)
        R = dG.transpose(0, 1, 3, 2) - dG + quad - quad.transpose(0, 1, 3, 2)
        if self.conv.riemann_sign != 1:
            R = R.scale(self.conv.riemann_sign)
        return TensorJet(R, "uddd")

    @cached_property
    def riemann_down(self) -> TensorJet:
        return TensorJet(einsum("im,mjkl->ijkl", self.g, self.riemann.jet), "dddd")

    @cached_property
    def ricci(self) -> TensorJet:
        return TensorJet(contract("kikj->ij", self.riemann.jet), "dd")

    @cached_property
    def scalar(self) -> Jet:
        return einsum("ij,ij->", self.ginv, self.ricci.jet)

    @cached_property
    def schouten(self) -> TensorJet:
        n = self.n
        if n <= 2:
            raise ValueError("Schouten tensor needs dimension > 2")
        R = self.scalar
        P = self.ricci.jet - einsum(",ij->ij", R, self.g).scale(Fraction(1, 2 * (n - 1)))
        return TensorJet(P.scale(Fraction(1, n - 2)), "dd")

    @cached_property
    def schouten_trace(self) -> Jet:
        """J = P^k_k."""
        return einsum("ij,ij->", self.ginv, self.schouten.jet)

    @cached_property
    def weyl(self) -> TensorJet:
        P, g = self.schouten.jet, self.g
        pg = einsum("ik,jl->ijkl", P, g)
        # P_ik g_jl - P_il g_jk - P_jk g_il + P_jl g_ik
        kn = pg - pg.transpose(0, 1, 3, 2) - pg.transpose(1, 0, 2, 3) + pg.transpose(1, 0, 3, 2)
        return TensorJet(self.riemann_down.jet - kn, "dddd")

    @cached_property
    def nabla_schouten(self) -> TensorJet:
        self._need(3, "covariant derivative of Schouten")
        return self.nabla(self.schouten)

    @cached_property
    def cotton(self) -> TensorJet:
        dP = self.nabla_schouten.jet
        return TensorJet(dP - dP.transpose(0, 2, 1), "ddd")

    @cached_property
    def schouten_up(self) -> Jet:
        """P^kl."""
        return einsum("ka,al->kl", self.ginv, einsum("ab,bl->al", self.schouten.jet, self.ginv))

    @cached_property
    def nabla_cotton(self) -> TensorJet:
        self._need(4, "covariant derivative of Cotton")
        return self.nabla(self.cotton)

    @cached_property
    def bach(self) -> TensorJet:
        div_c = einsum("kl,ijkl->ij", self.ginv, self.nabla_cotton.jet)
        pw = einsum("kl,kijl->ij", self.schouten_up, self.weyl.jet)
        return TensorJet(div_c - pw, "dd")

    @cached_property
    def nabla_bach(self) -> TensorJet:
        self._need(5, "covariant derivative of Bach")
        return self.nabla(self.bach)

    @cached_property
    def nabla2_bach(self) -> TensorJet:
        self._need(6, "second covariant derivative of Bach")
        return self.nabla(self.nabla_bach)

    def raise_index(self, T: TensorJet, pos: int) -> TensorJet:
        if T.indices[pos] != "d":
            raise ValueError("index is already up")
        idx = _LET[:T.rank]
        src = idx[:pos] + "m" + idx[pos + 1:]
        out = einsum(f"{idx[pos]}m,{src}->{idx}", self.ginv, T.jet)
        return TensorJet(out, T.indices[:pos] + "u" + T.indices[pos + 1:])

    def lower_index(self, T: TensorJet, pos: int) -> TensorJet:
        if T.indices[pos] != "u":
            raise ValueError("index is already down")
        idx = _LET[:T.rank]
        src = idx[:pos] + "m" + idx[pos + 1:]
        out = einsum(f"{idx[pos]}m,{src}->{idx}", self.g, T.jet)
        return TensorJet(out, T.indices[:pos] + "d" + T.indices[pos + 1:])


def curvature(g: MetricJet, conventions: Conventions = STANDARD) -> Curvature:
    return Curvature(g, conventions)


def metric_inverse(g: MetricJet) -> TensorJet:
    return TensorJet(Curvature(g).ginv, "uu")


def christoffel(g: MetricJet) -> TensorJet:
    return Curvature(g).christoffel


def riemann(g: MetricJet) -> TensorJet:
    return Curvature(g).riemann


def ricci(g: MetricJet) -> TensorJet:
    return Curvature(g).ricci


def scalar_curv(g: MetricJet) -> Jet:
    return Curvature(g).scalar


def schouten(g: MetricJet) -> TensorJet:
    return Curvature(g).schouten


def weyl(g: MetricJet) -> TensorJet:
    return Curvature(g).weyl


def cotton(g: MetricJet) -> TensorJet:
    return Curvature(g).cotton


def bach(g: MetricJet) -> TensorJet:
    return Curvature(g).bach
