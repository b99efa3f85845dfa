"""Command line entry point: ``g2ambient <command> [options]``.

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 invalid
input or unmet preconditions.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .ambient import DEFAULT_TU_GRID, build_ambient, graham_coefficients, run_strategy
from .curvature import BudgetError, Curvature
from .diagnostics import (antisymmetry_residual, cspace_test, example1_alpha_residual, example2_table_coefficients,
                          example1_fixture_point, holonomy_span, upsilon_ode_residual, UpsilonJet)
from .expr import ExprError, Point5, constant_value, diff_expr, free_symbols, parse_expr
from .field import EXACT, Field, FieldError, float_field, to_text
from .metric import (EX2_PARAMS, DegeneratePointError, Example2Params, MetricError, build_example1_metric,
                     build_example2_metric, build_general_metric, direct_metric, extend_flat)
from .sampling import parse_tu_grid, random_points

OK, FAILED, INVALID = 0, 1, 2


class UsageError(Exception):
    """Invalid input or an unmet precondition (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    f: str | None = None
    example: str | None = None
    params: Example2Params = dc_field(default_factory=Example2Params)
    mode: str = "exact"
    prec: int = 256
    points: int = 5
    seed: int = 0
    order: int | None = None
    tu_grid: tuple = DEFAULT_TU_GRID
    depth: int = 2
    json: bool = False
    out: str | None = None

    @property
    def field(self) -> Field:
        return EXACT if self.mode == "exact" else float_field(self.prec)


# -- argument handling ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--f", help="defining function F(x, y, p, q, z) of z' = F")
    sel = common.add_mutually_exclusive_group()
    sel.add_argument("--example1", action="store_true", help="z' = F(y''), F given by --f")
    sel.add_argument("--example2", action="store_true", help="the polynomial family with a0..a6, b")
    for name in EX2_PARAMS:
        common.add_argument(f"--{name}", default="0", help=f"example-2 parameter {name} (rational)")
    common.add_argument("--points", type=int, default=None, help="number of random sample points")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mode", choices=("exact", "float"), default="exact")
    common.add_argument("--prec", type=int, default=256, help="float precision in bits")
    common.add_argument("--order", type=int, default=None, help="metric jet order")
    common.add_argument("--tu-grid", default=None, help='(t,u) pairs such as "1,0;1,1;2,1/3"')
    common.add_argument("--depth", type=int, default=2, help="holonomy derivative depth")
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--out", default=None, help="write the report to this path")

    p = argparse.ArgumentParser(prog="g2ambient", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("verify-example1", "ambient metric checks for z' = F(y'')"),
                       ("verify-example2", "ambient metric checks for the polynomial family"),
                       ("strategy", "certify a truncated ambient metric at sample points"),
                       ("cspace", "conformal C-space test"),
                       ("holonomy", "infinitesimal holonomy span of the ambient metric"),
                       ("selftest", "run the built-in trivial oracles")):
        sub.add_parser(name, parents=[common], help=text)
    return p


_DEFAULT_POINTS = {"verify-example1": 25, "verify-example2": 25, "strategy": 10,
                   "cspace": 5, "holonomy": 1, "selftest": 0}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    example = "example1" if ns.example1 else "example2" if ns.example2 else None
    if ns.command == "verify-example1":
        example = "example1"
    elif ns.command == "verify-example2":
        example = "example2"
    try:
        params = Example2Params.of(**{k: Fraction(getattr(ns, k)) for k in EX2_PARAMS})
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad example-2 parameter: {exc}") from None
    try:
        tu = DEFAULT_TU_GRID if ns.tu_grid is None else parse_tu_grid(ns.tu_grid)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --tu-grid: {exc}") from None
    points = _DEFAULT_POINTS[ns.command] if ns.points is None else ns.points
    if points < 0 or (points == 0 and ns.command != "selftest"):
        raise UsageError("--points must be positive")
    if ns.prec < 64:
        raise UsageError("--prec must be at least 64")
    if ns.depth < 0:
        raise UsageError("--depth must be nonnegative")
    return RunConfig(ns.command, ns.f, example, params, ns.mode, ns.prec, points, ns.seed,
                     ns.order, tu, ns.depth, ns.json, ns.out)


def _order(cfg: RunConfig, minimum: int) -> int:
    if cfg.order is None:
        return minimum
    if cfg.order < minimum:
        raise UsageError(f"{cfg.command} needs --order >= {minimum}")
    return cfg.order


def _parse_f(cfg: RunConfig, q_only: bool = False):
    if not cfg.f:
        raise UsageError("--f is required")
    try:
        F = parse_expr(cfg.f)
    except ExprError as exc:
        raise UsageError(f"cannot parse F: {exc}") from None
    if q_only and free_symbols(F) - {"q"}:
        raise UsageError("F must depend on q only")
    return F


def _params_label(P: Example2Params) -> str:
    return f"example2 {json.dumps({k: str(v) for k, v in P.as_dict().items()})}"


def metric_builder(cfg: RunConfig, order: int):
    """(label, build(point) -> MetricJet) for the selected input."""
    if cfg.example == "example2":
        if cfg.f:
            raise UsageError("--f and --example2 are exclusive")
        P = cfg.params
        return _params_label(P), lambda pt: build_example2_metric(P, pt, order)
    if cfg.example == "example1":
        F = _parse_f(cfg, q_only=True)
        return f"example1 F={cfg.f}", lambda pt: build_example1_metric(F, pt, order, "bracket")
    F = _parse_f(cfg)
    return f"F={cfg.f}", lambda pt: build_general_metric(F, pt, order + 4)


def _sample(cfg: RunConfig, field: Field | None = None):
    return random_points(cfg.points, cfg.seed, field or cfg.field, positive_q=cfg.example == "example1")


def _tol(fld: Field):
    return fld.tolerance()


def _norm(T):
    return T.jet.truncate(0).max_abs()


# -- commands ----------------------------------------------------------------------------

def cmd_verify_example1(cfg: RunConfig):
    F = _parse_f(cfg, q_only=True)
    order = _order(cfg, 6)
    fld = cfg.field
    tol = _tol(fld)
    f3_zero = constant_value(diff_expr(diff_expr(diff_expr(F, "q"), "q"), "q")) == 0
    ffld = float_field(cfg.prec)
    ftol = _tol(ffld)
    rep = "bracket" if fld.exact else "gf"
    records, notes, failed = [], [], False
    for pt in _sample(cfg):
        rec = {"coords": [to_text(c) for c in pt.coords], "representative": rep}
        try:
            g = build_example1_metric(F, pt, order, rep)
            A = build_ambient(g)
        except (MetricError, FieldError, ArithmeticError) as exc:
            rec["error"] = str(exc)
            records.append(rec)
            continue
        with fld.context():
            gamma, beta = _norm(A.gamma), _norm(A.beta)
            ricci = [_norm(Curvature(A.evaluate(t, u, 2)).ricci) for t, u in cfg.tu_grid]
        rec["gamma_norm"], rec["beta_norm"] = to_text(gamma), to_text(beta)
        rec["ricci_norms"] = [to_text(r) for r in ricci]
        ok = all(v <= tol for v in [gamma, beta] + ricci)
        # alpha = 2 (F'')^(4/3) P dq^2 is stated for g_F itself
        if rep == "gf":
            ares = example1_alpha_residual(A.alpha, F, pt)
        elif f3_zero:
            ares = _norm(A.alpha)
        else:
            try:
                ag = graham_coefficients(build_example1_metric(F, pt, 4, "gf"), with_gamma=False).alpha
                ares = example1_alpha_residual(ag, F, pt)
            except (MetricError, FieldError):
                ares = None
        if ares is None:
            rec["alpha_residual"] = "skipped (irrational (F'')^(1/3))"
        else:
            rec["alpha_residual"] = to_text(ares)
            ok &= ares <= tol
        try:
            fx = example1_fixture_point(F, pt.with_field(ffld), tol=ftol)
            rec["fixtures"] = fx.as_json()
            ok &= fx.ok
        except (MetricError, FieldError, ArithmeticError) as exc:
            rec["fixtures"] = {"error": str(exc)}
        rec["passed"] = bool(ok)
        failed |= not ok
        records.append(rec)
    good = [r for r in records if "error" not in r]
    if not good:
        raise UsageError("no usable sample point (F'' vanishes or is negative everywhere sampled)")
    if len(good) < len(records):
        notes.append(f"{len(records) - len(good)} of {len(records)} points skipped")
    if fld.exact:
        notes.append(f"connection fixtures are compared in {cfg.prec}-bit float: the coframe contains (F'')^(1/3)")
    return (FAILED if failed else OK), _report(cfg, f"example1 F={cfg.f}", records, not failed, notes)


def cmd_verify_example2(cfg: RunConfig):
    if cfg.f:
        raise UsageError("verify-example2 takes --a0..--a6, --b, not --f")
    order = _order(cfg, 6)
    fld = cfg.field
    tol = _tol(fld)
    P = cfg.params
    records, notes, failed = [], [], False
    kinds = set()
    for pt in _sample(cfg):
        rec = {"coords": [to_text(c) for c in pt.coords]}
        g = build_example2_metric(P, pt, order)
        A = build_ambient(g)
        with fld.context():
            gamma = _norm(A.gamma)
            ricci = [_norm(Curvature(A.evaluate(t, u, 2)).ricci) for t, u in cfg.tu_grid]
            want = example2_table_coefficients(P, pt)
            diffs = {}
            for name, T in (("alpha", A.alpha), ("beta", A.beta)):
                V = T.value
                for i in range(5):
                    for j in range(i, 5):
                        d = abs(V[i][j] - want[name][i][j])
                        if d > tol:
                            diffs[f"{name}[{'xypqz'[i]}{'xypqz'[j]}]"] = {
                                "computed": to_text(V[i][j]), "table": to_text(want[name][i][j])}
        cs = cspace_test(g.truncate(3))
        kinds.add(cs.kind)
        rec.update({"gamma_norm": to_text(gamma), "ricci_norms": [to_text(r) for r in ricci],
                    "table_mismatch": diffs, "cspace": cs.as_json()})
        ok = gamma <= tol and all(r <= tol for r in ricci) and not diffs
        rec["passed"] = bool(ok)
        failed |= not ok
        records.append(rec)
    if kinds - {"none"}:
        notes.append(f"C-space test gave {sorted(kinds)}: parameters are not generic")
    if P.b != 0:
        notes.append("b != 0: the checks are run, but this case is outside the transcribed analysis")
    return (FAILED if failed else OK), _report(cfg, _params_label(P), records, not failed, notes)


def cmd_strategy(cfg: RunConfig):
    label, build = metric_builder(cfg, _order(cfg, 6))
    rep = run_strategy(build, _sample(cfg), cfg.field, label, cfg.tu_grid)
    if rep.verdict == "error":
        return INVALID, rep.as_json()
    return (OK if rep.certified else FAILED), rep.as_json()


def cmd_cspace(cfg: RunConfig):
    label, build = metric_builder(cfg, _order(cfg, 3))
    fld = cfg.field
    records, failed = [], False
    for pt in _sample(cfg):
        rec = {"coords": [to_text(c) for c in pt.coords]}
        try:
            res = cspace_test(build(pt))
        except (MetricError, FieldError, ArithmeticError) as exc:
            rec["error"] = str(exc)
            records.append(rec)
            continue
        rec.update(res.as_json())
        if res.kind == "solution" and res.residual > _tol(fld):
            failed = True
        records.append(rec)
    if all("error" in r for r in records):
        raise UsageError("no usable sample point")
    return (FAILED if failed else OK), _report(cfg, label, records, not failed, [])


def cmd_holonomy(cfg: RunConfig):
    order = _order(cfg, 6 + cfg.depth)
    label, build = metric_builder(cfg, order)
    fld = cfg.field
    t, u = cfg.tu_grid[0]
    records, failed = [], False
    for pt in _sample(cfg):
        rec = {"coords": [to_text(c) for c in pt.coords], "t": to_text(fld(t)), "u": to_text(fld(u))}
        try:
            gbar = build_ambient(build(pt), with_gamma=False).evaluate(t, u)
        except (MetricError, FieldError, ArithmeticError) as exc:
            rec["error"] = str(exc)
            records.append(rec)
            continue
        h = holonomy_span(gbar, cfg.depth)
        G = gbar.value.tolist()
        anti = max((antisymmetry_residual(X, G, fld) for X in h.basis), default=fld.zero)
        rec.update(h.as_json())
        rec["antisymmetry_residual"] = to_text(anti)
        failed |= anti > _tol(fld) or h.dimension > 21
        records.append(rec)
    if all("error" in r for r in records):
        raise UsageError("no usable sample point")
    return (FAILED if failed else OK), _report(cfg, label, records, not failed, [])


def selftest_checks():
    """[(name, passed)] for the trivial oracles."""
    out = []
    pt = Point5.of(Fraction(1, 3), Fraction(-1, 2), Fraction(2), Fraction(3, 2), Fraction(1, 5))
    flat = direct_metric([[0, 0, 0, 0, 1], [0, 0, 0, 1, 0], [0, 0, 1, 0, 0], [0, 1, 0, 0, 0], [1, 0, 0, 0, 0]],
                         pt, 6)
    A = build_ambient(flat)
    out.append(("flat metric: alpha = beta = gamma = 0",
                all(T.is_zero() for T in (A.alpha, A.beta, A.gamma))))
    out.append(("flat cone: ambient Ricci = 0",
                all(Curvature(A.evaluate(t, u, 2)).ricci.is_zero() for t, u in DEFAULT_TU_GRID)))
    out.append(("flat metric: C-space test degenerate", cspace_test(flat.truncate(3)).kind == "degenerate"))
    flat7 = extend_flat(flat.truncate(2), [1, -1])
    out.append(("flat 7D metric: holonomy span 0", holonomy_span(flat7, 0).dimension == 0))
    sphere = direct_metric([["4/(1+x^2+y^2)^2", 0, 0, 0, 0], [0, "4/(1+x^2+y^2)^2", 0, 0, 0],
                            [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]], pt, 3)
    out.append(("2-sphere times flat: holonomy span 1", holonomy_span(extend_flat(sphere, [1, -1]), 1).dimension == 1))
    q2 = parse_expr("q^2")
    out.append(("conformal scale ODE, F = q^2, Upsilon = 0: residual 0",
                upsilon_ode_residual(q2, UpsilonJet(EXACT(1), 0, 0, 0), EXACT) == 0))
    out.append(("conformal scale ODE, F = q^3 at q = 1: residual -144",
                upsilon_ode_residual(parse_expr("q^3"), UpsilonJet(EXACT(1), 0, 0, 0), EXACT) == -144))
    try:
        _parse_f(RunConfig("verify-example1", f="q*p"), q_only=True)
        rejected = False
    except UsageError:
        rejected = True
    out.append(("F = q*p rejected for example 1", rejected))
    try:
        build_example1_metric(q2, Point5.of(0, 0, 0, 0, 0), 2)
        deg = True
    except DegeneratePointError:
        deg = False
    out.append(("F = q^2 has F'' != 0 everywhere", deg))
    return out


def cmd_selftest(cfg: RunConfig):
    checks = selftest_checks()
    ok = all(p for _, p in checks)
    report = {"schema": 1, "command": "selftest", "passed": ok,
              "checks": [{"name": n, "passed": p} for n, p in checks]}
    return (OK if ok else FAILED), report


def _report(cfg: RunConfig, label: str, records: list, passed: bool, notes: list) -> dict:
    fld = cfg.field
    return {"schema": 1, "command": cfg.command, "input": label, "mode": cfg.mode,
            "precision": None if fld.exact else fld.prec, "seed": cfg.seed,
            "tolerance": to_text(fld.tolerance()), "points": records,
            "passed": passed, "notes": notes}


COMMANDS = {"verify-example1": cmd_verify_example1, "verify-example2": cmd_verify_example2,
            "strategy": cmd_strategy, "cspace": cmd_cspace, "holonomy": cmd_holonomy,
            "selftest": cmd_selftest}


# -- output ------------------------------------------------------------------------------

def render_text(report: dict) -> str:
    lines = [f"command: {report.get('command', 'strategy')}"]
    for key in ("input", "mode", "precision", "seed", "tolerance", "verdict", "passed"):
        if key in report:
            lines.append(f"{key}: {report[key]}")
    for chk in report.get("checks", []):
        lines.append(f"  [{'PASS' if chk['passed'] else 'FAIL'}] {chk['name']}")
    for i, rec in enumerate(report.get("points", [])):
        parts = [f"point {i}: ({', '.join(rec['coords'])})"]
        for key, val in rec.items():
            if key == "coords":
                continue
            if key == "fixtures" and "error" not in val:
                bad = [k for k, v in val.items() if v is False]
                worst = max(val["residuals"].values(), key=lambda r: abs(float(r)))
                val = f"{'pass' if not bad else 'fail ' + ','.join(bad)} (max residual {worst})"
            parts.append(f"{key}={json.dumps(val, sort_keys=True)}")
        lines.append("  " + " ".join(parts))
    for n in report.get("notes", []):
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        code, report = COMMANDS[cfg.command](cfg)
    except (UsageError, MetricError, BudgetError, FieldError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    text = json.dumps(report, indent=2, sort_keys=True) + "\n" if cfg.json else render_text(report)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
