"""Ambient metric coefficients, the truncated 7-dimensional ambient metric and
the certification strategy built on them.

For a 5-dimensional metric g the truncated ambient metric is

    gbar = -2 dt du + t^2 g - u t alpha + u^2 beta

in coordinates (t, x, y, p, q, z, u).  If gamma vanishes and gbar is Ricci
flat, uniqueness of the odd-dimensional ambient expansion means gbar is the
ambient metric itself (all higher coefficients vanish).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable

from .curvature import STANDARD, BudgetError, Conventions, Curvature, TensorJet
from .expr import Point5
from .field import Field, to_text
from .jet import Jet, einsum, embed
from .metric import MetricJet

SCHEMA_VERSION = 1
DEFAULT_TU_GRID = ((Fraction(1), Fraction(0)), (Fraction(1), Fraction(1)), (Fraction(2), Fraction(1, 3)))
T_INDEX, U_INDEX = 0, 6

VERDICTS = ("certified-truncated-ambient", "gamma-nonzero", "ricci-nonzero", "error")


@dataclass
class GrahamCoefficients:
    alpha: TensorJet
    beta: TensorJet
    gamma: TensorJet | None


def _sym(T: Jet, w) -> Jet:
    """w * (T_ij + T_ji): round-bracket symmetrisation with weight w."""
    return (T + T.transpose(1, 0)).scale(w)


def _clean(T: Jet) -> Jet:
    """Symmetric part in float mode, where summation order breaks exact symmetry."""
    if T.field.exact:
        return T
    return (T + T.transpose(1, 0)).scale(Fraction(1, 2))


def graham_coefficients(g: MetricJet, conventions: Conventions = STANDARD, with_gamma: bool = True,
                        curv: Curvature | None = None) -> GrahamCoefficients:
    """alpha = 2P, beta = -B + P_i^k P_jk and gamma (see module docs).

    3 gamma_ij = B_ij;k^k - 2 W_kijl B^kl + 4 P_k(i B_j)^k - 4 J B_ij
                 + 4 P^kl C_(ij)k;l - 2 C^k_i^l C_ljk + C_i^kl C_jkl
                 + 2 J_;l C_(ij)^l - 2 W_kijl P^k_m P^ml
    with J = P^k_k and (ij) the weighted symmetrisation.
    """
    need = 6 if with_gamma else 4
    if g.budget < need:
        raise BudgetError(f"Graham coefficients need metric jet order >= {need}, have {g.budget}")
    c = curv or Curvature(g, conventions)
    w = conventions.sym_weight
    gi = c.ginv
    P = c.schouten.jet
    B = c.bach.jet
    alpha = P.scale(2)
    PP = einsum("ik,kj->ij", P, einsum("ka,aj->kj", gi, P))   # P_i^k P_jk
    beta = PP - B
    if not with_gamma:
        return GrahamCoefficients(TensorJet(_clean(alpha), "dd"), TensorJet(_clean(beta), "dd"), None)

    W = c.weyl.jet
    C = c.cotton.jet
    J = c.schouten_trace
    Pu = c.schouten_up                                   # P^kl
    Bu = einsum("ka,al->kl", gi, einsum("ab,bl->al", B, gi))   # B^kl
    t1 = einsum("kl,ijkl->ij", gi, c.nabla2_bach.jet)
    t2 = einsum("kijl,kl->ij", W, Bu).scale(-2)
    Bmix = einsum("ka,ja->jk", gi, B)                    # B_j^k stored [j, k]
    PB = einsum("ki,jk->ij", P, Bmix)                    # P_ki B_j^k
    t3 = _sym(PB, w).scale(4)
    t4 = einsum(",ij->ij", J, B).scale(-4)
    N = einsum("kl,ijkl->ij", Pu, c.nabla_cotton.jet)    # P^kl C_ijk;l
    t5 = _sym(N, w).scale(4)
    # C^k_i^l = g^ka g^lb C_aib
    Cup = einsum("ka,aib->kib", gi, C)
    Cup = einsum("kib,bl->kil", Cup, gi)
    t6 = einsum("kil,ljk->ij", Cup, C).scale(-2)
    Cdd = einsum("iab,ka->ikb", C, gi)
    Cdd = einsum("ikb,bl->ikl", Cdd, gi)                 # C_i^kl
    t7 = einsum("ikl,jkl->ij", Cdd, C)
    dJ = J.grad()                                        # J_;l
    CijU = einsum("ijb,bl->ijl", C, gi)                  # C_ij^l
    t8 = _sym(einsum("l,ijl->ij", dJ, CijU), w).scale(2)
    X = einsum("ka,al->kl", gi, einsum("am,ml->al", P, Pu))  # P^k_m P^ml
    t9 = einsum("kijl,kl->ij", W, X).scale(-2)
    three_gamma = t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8 + t9
    return GrahamCoefficients(TensorJet(_clean(alpha), "dd"), TensorJet(_clean(beta), "dd"),
                              TensorJet(_clean(three_gamma.scale(Fraction(1, 3))), "dd"))


# -- assembly -------------------------------------------------------------------

@dataclass
class AmbientMetric:
    """gbar = -2 dt du + t^2 g - u t alpha + u^2 beta, polynomial in (t, u).

    gamma is carried for the vanishing check only and never assembled.
    """

    g: MetricJet
    alpha: TensorJet
    beta: TensorJet
    gamma: TensorJet | None = None

    @property
    def field(self) -> Field:
        return self.g.field

    @property
    def budget(self) -> int:
        return min(self.g.budget, self.alpha.budget, self.beta.budget)

    def evaluate(self, t, u, order: int | None = None) -> MetricJet:
        """The 7x7 metric jet at (t, u) over the base point, in 7 variables."""
        fld = self.field
        t, u = fld(t), fld(u)
        if t <= 0:
            raise ValueError("the ambient metric is evaluated at t > 0 only")
        order = self.budget if order is None else min(order, self.budget)
        vm = [1, 2, 3, 4, 5]
        G = embed(self.g.g, 7, vm, order)
        A = embed(self.alpha.jet, 7, vm, order)
        B = embed(self.beta.jet, 7, vm, order)
        tj = Jet.variable(T_INDEX, t, 7, order, fld)
        uj = Jet.variable(U_INDEX, u, 7, order, fld)
        block = (einsum(",ij->ij", tj * tj, G) - einsum(",ij->ij", uj * tj, A)
                 + einsum(",ij->ij", uj * uj, B))
        full = Jet.zeros(7, order, fld, (7, 7))
        full.coef[:, 1:6, 1:6] = block.coef
        full.coef[0, T_INDEX, U_INDEX] = full.coef[0, U_INDEX, T_INDEX] = fld(-1)
        return MetricJet(full, self.g.base + (t, u), "ambient")


def assemble_ambient(g: MetricJet, alpha: TensorJet, beta: TensorJet, gamma: TensorJet | None = None) -> AmbientMetric:
    if g.field != alpha.jet.field or g.field != beta.jet.field:
        raise ValueError("coefficients live in different fields")
    return AmbientMetric(g, alpha, beta, gamma)


def build_ambient(g: MetricJet, conventions: Conventions = STANDARD, with_gamma: bool = True) -> AmbientMetric:
    gc = graham_coefficients(g, conventions, with_gamma)
    return assemble_ambient(g, gc.alpha, gc.beta, gc.gamma)


def ambient_ricci(A: AmbientMetric, t, u, conventions: Conventions = STANDARD) -> TensorJet:
    """Ricci tensor (constant term) of the assembled metric at (t, u)."""
    if A.budget < 2:
        raise BudgetError("ambient Ricci needs alpha and beta to jet order 2 (metric order 6)")
    gbar = A.evaluate(t, u, 2)
    return Curvature(gbar, conventions).ricci


# -- strategy ---------------------------------------------------------------------

@dataclass
class PointRecord:
    coords: tuple
    gamma_norm: object = None
    ricci_norms: list = dc_field(default_factory=list)
    error: str | None = None

    def as_json(self) -> dict:
        out = {"coords": [to_text(c) for c in self.coords]}
        if self.error is not None:
            out["error"] = self.error
            return out
        out["gamma_norm"] = to_text(self.gamma_norm)
        out["ricci_norms"] = [{"t": to_text(t), "u": to_text(u), "norm": to_text(n)}
                              for (t, u), n in self.ricci_norms]
        return out


UNIQUENESS_NOTE = (
    "In odd dimension the Ricci-flat ambient expansion is unique; the truncated metric "
    "has vanishing gamma and Ricci tensor at every sampled point, so it agrees there with "
    "the ambient metric and all higher coefficients vanish. This is a pointwise "
    "certificate at the sampled points, not a proof of the identity."
)


@dataclass
class StrategyReport:
    input: str
    mode: str
    precision: int | None
    points: list
    verdict: str
    tolerance: object = 0
    notes: list = dc_field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.verdict == VERDICTS[0]

    def as_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "input": self.input,
            "mode": self.mode,
            "precision": self.precision,
            "tolerance": to_text(self.tolerance),
            "points": [p.as_json() for p in self.points],
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_json(), indent=2, sort_keys=True)


def _tensor_norm(T: TensorJet):
    return T.jet.truncate(0).max_abs()


def analyse_point(g: MetricJet, tu_grid=DEFAULT_TU_GRID, conventions: Conventions = STANDARD) -> PointRecord:
    A = build_ambient(g, conventions)
    rec = PointRecord(g.base, _tensor_norm(A.gamma))
    for t, u in tu_grid:
        rec.ricci_norms.append(((g.field(t), g.field(u)), _tensor_norm(ambient_ricci(A, t, u, conventions))))
    return rec


def verdict_of(records, tol) -> str:
    good = [r for r in records if r.error is None]
    if not good:
        return "error"
    if any(r.gamma_norm > tol for r in good):
        return "gamma-nonzero"
    if any(n > tol for r in good for _, n in r.ricci_norms):
        return "ricci-nonzero"
    return VERDICTS[0]


def run_strategy(build: Callable[[Point5], MetricJet], points, field: Field, label: str,
                 tu_grid=DEFAULT_TU_GRID, tol=None, conventions: Conventions = STANDARD) -> StrategyReport:
    """Run the certification at each point; `build(point)` returns a metric of order >= 6.

    Points where the builder fails (degenerate ODE points, irrational roots)
    are recorded as errors and skipped.
    """
    tol = field.tolerance() if tol is None else tol
    records = []
    for pt in points:
        try:
            records.append(analyse_point(build(pt), tu_grid, conventions))
        except (ValueError, ArithmeticError) as exc:
            records.append(PointRecord(pt.coords, error=str(exc)))
    verdict = verdict_of(records, tol)
    notes = []
    if verdict == VERDICTS[0]:
        notes.append(UNIQUENESS_NOTE)
    bad = sum(r.error is not None for r in records)
    if bad:
        notes.append(f"{bad} of {len(records)} points skipped")
    return StrategyReport(label, field.kind, None if field.exact else field.prec, records, verdict, tol, notes)
