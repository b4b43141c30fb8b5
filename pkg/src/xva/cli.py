"""Command-line front end: ``xva <command> <scenario.json>``.

Exit codes: 0 success, 2 invalid scenario or violated rate conditions,
3 numerical failure, 4 cross-check tolerance breach.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import bsde, closed_form, mc
from .analytic import public_value
from .closed_form import XvaBreakdown
from .market import (IntensityError, MarketParams, NonFiniteParameterError, risk_neutral_intensities,
                     validate)
from .scenario import (ScenarioConfig, ScenarioError, apply_point, load_scenario,
                       parse_axis, sweep_points)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_BREACH = 0, 2, 3, 4

XVA_COLUMNS = ("t", "S", "engine", "total", "funding_leg", "dva_leg", "cva_leg", "collateral_leg", "factor", "vhat")
HEDGE_COLUMNS = ("t", "S", "xi_stock", "xi_bond_I", "xi_bond_C", "psi_repo", "xi_funding")
INTERVAL_COLUMNS = ("V0_minus", "V0_plus", "width")
CROSSCHECK_COLUMNS = ("t", "S", "quantity", "engine_a", "engine_b", "value_a", "value_b", "delta", "se",
                      "tolerance", "pass")
SWEEP_EXTRA = ("xi_stock", "xi_bond_I", "xi_bond_C", "width")

NUMERICAL_ERRORS = (bsde.ConvergenceError, bsde.GridDomainError, closed_form.ExclusionError,
                    closed_form.RateRegimeError, mc.ResourceError, ArithmeticError)


class ValidationFailure(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("XVA_THREADS", "1")))
    except ValueError:
        return 1


def _check(market: MarketParams, force: bool, label: str = "") -> list[str]:
    report = validate(market)
    try:
        risk_neutral_intensities(market)
    except IntensityError as exc:
        raise ValidationFailure(f"{label}{exc}") from exc
    lines = [f"{label}{v.id}: {v.message}" for v in report.violations]
    if lines and not force:
        raise ValidationFailure("\n".join(lines))
    return lines


@dataclass
class _Engines:
    cfg: ScenarioConfig
    _pde: bsde.GridSolution | None = None
    _mc: mc.McBreakdown | None = None

    def pde(self) -> bsde.GridSolution:
        if self._pde is None:
            self._pde = bsde.solve(self.cfg.claim, self.cfg.market, bsde.SELLER, self.cfg.grid)
        return self._pde

    def mc(self) -> mc.McBreakdown:
        if self._mc is None:
            m = self.cfg.mc
            bundle = mc.simulate(self.cfg.market, self.cfg.claim, m.n_paths, m.n_steps, m.seed,
                                 antithetic=m.antithetic, cell_cap=m.resource_cap, workers=_threads())
            self._mc = mc.estimate_representation(bundle, self.cfg.market, self.cfg.claim)
        return self._mc

    def closed(self, t, S) -> XvaBreakdown:
        if self.cfg.market.default_free:
            return closed_form.piterbarg_xva(self.cfg.market, self.cfg.claim, t, S)
        return closed_form.default_xva(self.cfg.market, self.cfg.claim, t, S)

    def pde_row(self, t, S) -> XvaBreakdown:
        sol = self.pde()
        v = sol.value_at(t, S)
        p = self.cfg.market
        vh = float(public_value(self.cfg.claim, p.rates.r_D, p.equity.sigma, t, S))
        nan = float("nan")
        factor = v / vh if vh else nan
        return XvaBreakdown(t, S, v - vh, nan, nan, nan, nan, factor, vh, engine="pde")

    def mc_row(self) -> XvaBreakdown:
        est = self.mc()
        vh = est.reference_value
        legs = [est.funding_leg.mean, est.dva_leg.mean, est.cva_leg.mean, est.collateral_leg.mean]
        value = sum(legs)
        S0 = self.cfg.market.equity.S0
        return XvaBreakdown(0.0, S0, est.total.mean, *legs, value / vh if vh else float("nan"), vh, engine="mc")

    def hedge(self, t, S, engine: str):
        p, c = self.cfg.market, self.cfg.claim
        if engine == "pde":
            return bsde.extract_hedge(self.pde(), p, t, S)
        if p.default_free:
            return closed_form.piterbarg_hedge(p, c, t, S)
        return closed_form.default_hedge(p, c, t, S)


def _engines_for(mode: str) -> tuple[str, ...]:
    return {"closed_form": ("closed_form",), "pde": ("pde",), "mc": ("mc",),
            "crosscheck": ("closed_form", "pde", "mc")}[mode]


def _xva_rows(eng: _Engines, engines) -> list[XvaBreakdown]:
    rows = []
    S0 = eng.cfg.market.equity.S0
    for t, S in eng.cfg.eval_points():
        for e in engines:
            if e == "closed_form":
                rows.append(eng.closed(t, S))
            elif e == "pde":
                rows.append(eng.pde_row(t, S))
            elif e == "mc" and t == 0.0 and S == S0:
                rows.append(eng.mc_row())
    return rows


def _xva_record(b: XvaBreakdown) -> list:
    return [b.t, b.S, b.engine, b.total, b.funding_leg, b.dva_leg, b.cva_leg, b.collateral_leg,
            b.adjustment_factor, b.reference_value]


def _hedge_record(h) -> list:
    return [h.t, h.S, h.xi_stock, h.xi_bond_I, h.xi_bond_C, h.psi_repo, h.xi_funding]


def crosscheck_rows(eng: _Engines) -> list[list]:
    """Pairwise engine comparisons with their tolerances and verdicts."""
    cfg = eng.cfg
    rows = []
    rel = cfg.run.rel_tol
    k = cfg.run.se_multiple
    S0 = cfg.market.equity.S0
    symmetric = cfg.market.rates.is_piterbarg
    for t, S in cfg.eval_points():
        if not symmetric:
            rows.append([t, S, "value", "closed_form", "pde", "", "", "", "", "", "skipped"])
            continue
        cf = eng.closed(t, S)
        pde = eng.pde_row(t, S)
        a, b = cf.value, pde.total + pde.reference_value
        tol = rel * max(abs(a), 1e-12)
        rows.append([t, S, "value", "closed_form", "pde", a, b, a - b, "", tol, abs(a - b) <= tol])
        if t == 0.0 and S == S0:
            est = eng.mc()
            for leg in ("funding_leg", "dva_leg", "cva_leg", "collateral_leg", "total"):
                m = getattr(est, leg)
                ref = getattr(cf, leg)
                tol = k * m.se
                ok = abs(m.mean - ref) <= tol if m.se > 0 else abs(m.mean - ref) <= 1e-12 + rel * abs(ref)
                rows.append([t, S, leg, "mc", "closed_form", m.mean, ref, m.mean - ref, m.se, tol, ok])
            if not cfg.market.default_free:
                # the alternative DVA prefactor, reported but never a verdict
                alt = closed_form.default_xva(cfg.market, cfg.claim, t, S, printed_prefactors=True)
                rows.append([t, S, "dva_leg", "closed_form_alt", "closed_form", alt.dva_leg, cf.dva_leg,
                             alt.dva_leg - cf.dva_leg, "", "", "informational"])
            m = est.total
            ref = pde.total
            tol = k * m.se + rel * abs(pde.reference_value + pde.total)
            rows.append([t, S, "total", "mc", "pde", m.mean, ref, m.mean - ref, m.se, tol,
                         abs(m.mean - ref) <= tol])
    return rows


def _sweep_row(cfg: ScenarioConfig, point: dict, engine: str, force: bool) -> list:
    sub = apply_point(cfg, point)
    _check(sub.market, force, label=f"{point}: ")
    eng = _Engines(sub)
    t, S = 0.0, sub.market.equity.S0
    if engine == "pde":
        b = eng.pde_row(t, S)
        width = bsde.interval(sub.claim, sub.market, sub.grid).width
        h = eng.hedge(t, S, "pde")
    elif engine == "mc":
        b = eng.mc_row()
        width = float("nan")
        h = None
    else:
        b = eng.closed(t, S)
        width = 0.0  # linear driver: buyer and seller prices coincide
        try:
            h = eng.hedge(t, S, "closed_form")
        except ValueError:
            h = eng.hedge(t, S, "pde")
    hedge = [h.xi_stock, h.xi_bond_I, h.xi_bond_C] if h else [float("nan")] * 3
    return [point[k] for k in point] + _xva_record(b) + hedge + [width]


def _write(out_dir: str, artifacts: list[tuple[str, tuple, list]]) -> list[str]:
    written = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        for name, header, rows in artifacts:
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                written.append(path)
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(_fmt(r) for r in rows)
    except OSError:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise
    return written


def _fmt(row):
    return [repr(float(v)) if isinstance(v, float) else v for v in row]


def _cmd_validate(cfg, args):
    report = validate(cfg.market)
    try:
        h = risk_neutral_intensities(cfg.market)
        print(f"risk-neutral intensities: h_I_Q={h[0]:.6g} h_C_Q={h[1]:.6g}")
    except IntensityError as exc:
        print(exc)
        return EXIT_INVALID
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def _cmd_price(cfg, args):
    eng = _Engines(cfg)
    rows = _xva_rows(eng, _engines_for(cfg.run.mode))
    return [("xva.csv", XVA_COLUMNS, [_xva_record(b) for b in rows])], EXIT_OK


def _cmd_interval(cfg, args):
    rep = bsde.interval(cfg.claim, cfg.market, cfg.grid)
    return [("interval.csv", INTERVAL_COLUMNS, [[rep.V0_minus, rep.V0_plus, rep.width]])], EXIT_OK


def _cmd_hedge(cfg, args):
    eng = _Engines(cfg)
    engine = "pde" if cfg.run.mode == "pde" or not cfg.market.rates.is_piterbarg else "closed_form"
    rows = []
    for t, S in cfg.eval_points():
        try:
            h = eng.hedge(t, S, engine)
        except ValueError:
            if engine == "pde":
                raise
            h = eng.hedge(t, S, "pde")
        rows.append(_hedge_record(h))
    return [("hedge.csv", HEDGE_COLUMNS, rows)], EXIT_OK


def _cmd_crosscheck(cfg, args):
    eng = _Engines(cfg)
    rows = crosscheck_rows(eng)
    xva = _xva_rows(eng, ("closed_form", "pde", "mc") if cfg.market.rates.is_piterbarg else ("pde",))
    status = EXIT_OK if all(r[-1] in (True, "skipped", "informational") for r in rows) else EXIT_BREACH
    return [("xva.csv", XVA_COLUMNS, [_xva_record(b) for b in xva]),
            ("crosscheck.csv", CROSSCHECK_COLUMNS, rows)], status


def _cmd_sweep(cfg, args):
    axes = list(cfg.run.sweep)
    if args.axis:
        axes = [parse_axis(a) for a in args.axis]
    if not axes:
        raise ScenarioError("sweep needs at least one axis (--axis or run.sweep)")
    points = sweep_points(axes)
    engine = {"crosscheck": "closed_form"}.get(cfg.run.mode, cfg.run.mode)
    force = cfg.run.force or args.force
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda p: _sweep_row(cfg, p, engine, force), points))
    header = tuple(a.name for a in axes) + XVA_COLUMNS + SWEEP_EXTRA
    return [("sweep.csv", header, rows)], EXIT_OK


SCHEMA = """# Scenario file schema

A scenario is one JSON object. Unknown keys anywhere are rejected, and NaN or
Infinity literals are refused. Every rate and intensity is a decimal per-year
continuously compounded number: write 0.05 for five percent, never 5.

## rates (all seven required)
| key | meaning |
|---|---|
| r_f_plus | funding rate earned on positive treasury balances |
| r_f_minus | funding rate paid on negative treasury balances |
| r_r_plus | repo rate earned when lending cash against stock |
| r_r_minus | repo rate paid when borrowing cash against stock |
| r_c_plus | collateral rate applied when the hedger posts collateral |
| r_c_minus | collateral rate applied when the hedger receives collateral |
| r_D | public discount rate used by the valuation agent |

## credit
| key | meaning |
|---|---|
| h_I_P, h_C_P | physical default intensities of investor and counterparty (per year, >= 0) |
| r_I, r_C | bond return rates; risk-neutral intensity is r + h_P - r_D |
| h_I_Q, h_C_Q | optional risk-neutral intensities; when given, r is back-solved as r_D + h_Q - h_P and h_P defaults to h_Q |
| L_I, L_C | loss rates at default, in [0, 1] |
| default_free | true switches defaults off (no risky bonds) |

## equity
| key | meaning |
|---|---|
| S0 | spot price (> 0) |
| sigma | volatility (per sqrt-year, > 0 for the grid solver) |
| mu | physical drift (used only by hedge simulations) |

## collateral
| key | meaning |
|---|---|
| alpha | collateralization level in [0, 1]: collateral = alpha * public value |

## claim
| key | meaning |
|---|---|
| kind | call, put or custom |
| maturity | years (> 0) |
| strike | required for call and put (>= 0) |
| knots | custom only: list of [S, payoff] pairs, S strictly increasing; linear between and beyond knots |
| quantity | position size; negative for the opposite side (default 1) |

## grid (optional)
n_time (200), n_space (400, even), width_sigmas (6.0), picard_tol (1e-10), picard_max (50), rannacher_steps (2).

## mc (optional)
n_paths (100000), n_steps (250), seed, antithetic (false), resource_cap (maximum n_paths * n_steps).

## run (optional)
| key | meaning |
|---|---|
| mode | closed_form, pde, mc or crosscheck (default) |
| points | list of [t, S] evaluation points (default [[0, S0]]) |
| sweep | list of {"name": axis, "values": [...]} |
| force | run even if rate conditions are violated |
| rel_tol | relative tolerance between closed form and grid solver (5e-3) |
| se_multiple | Monte Carlo tolerance in standard errors (3) |

Sweep axis names: any rates, credit or equity key, alpha, r_f / r_r / r_c
(both sides at once), strike, maturity or quantity. At most 10000 points.
"""


def _cmd_schema(args):
    path = os.path.join(args.out, "schema.md")
    os.makedirs(args.out, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(SCHEMA)
    print(path)
    return EXIT_OK


COMMANDS = {
    "price": _cmd_price,
    "interval": _cmd_interval,
    "hedge": _cmd_hedge,
    "sweep": _cmd_sweep,
    "crosscheck": _cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xva", description="Valuation adjustments under funding and default risk.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("validate",) + tuple(COMMANDS):
        p = sub.add_parser(name)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory for CSV artifacts")
        p.add_argument("--force", action="store_true", help="run despite violated rate conditions")
        if name == "sweep":
            p.add_argument("--axis", action="append", default=[], help="name=a:b:step or name=v1,v2")
    p = sub.add_parser("schema", help="write schema.md describing the scenario format")
    p.add_argument("--out", default=".")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        return _cmd_schema(args)
    try:
        cfg = load_scenario(args.scenario)
        if args.command == "validate":
            return _cmd_validate(cfg, args)
        force = args.force or cfg.run.force
        if args.command != "sweep":
            warnings = _check(cfg.market, force)
            for line in warnings:
                print(f"warning: {line}", file=sys.stderr)
        artifacts, status = COMMANDS[args.command](cfg, args)
    except (ScenarioError, ValidationFailure, NonFiniteParameterError, IntensityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        written = _write(args.out, artifacts)
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in written:
        print(path)
    if status == EXIT_BREACH:
        print("cross-check tolerance breached", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
