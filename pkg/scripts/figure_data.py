"""Tabulate the curves behind the standard plots as CSV.

    python scripts/figure_data.py nodef --out results/
    python scripts/figure_data.py all --out results/

Each table is built from the scenario files in ``scenarios/`` so the plotted
numbers and the CLI runs share one parameter set.
"""

import argparse
import csv
import os
from pathlib import Path

import numpy as np

from xva.bsde import solve
from xva.closed_form import default_hedge, default_xva, piterbarg_xva
from xva.scenario import apply_point, load_scenario

ROOT = Path(__file__).resolve().parent.parent / "scenarios"
ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def nodef():
    cfg = load_scenario(ROOT / "fig_nodef.json")
    rows = []
    for r_f in np.round(np.arange(0.05, 0.1001, 0.005), 4):
        for alpha in (0.0, 0.5, 1.0):
            p = apply_point(cfg, {"r_f": float(r_f), "alpha": alpha}).market
            b = piterbarg_xva(p, cfg.claim, 0.0, p.equity.S0)
            rows.append([r_f, alpha, b.value, b.reference_value, b.total])
    return ["r_f", "alpha", "value", "public_value", "xva"], rows


def defxva():
    rows = []
    for name in ("fig_defxva.json", "fig_defxvarisk.json"):
        cfg = load_scenario(ROOT / name)
        for alpha in ALPHAS:
            p = apply_point(cfg, {"alpha": alpha}).market
            b = default_xva(p, cfg.claim, 0.0, p.equity.S0)
            pde = solve(cfg.claim, p, grid=cfg.grid)
            rows.append([p.credit.h_I_Q, p.credit.h_C_Q, alpha, b.value, pde.v0, b.total,
                         b.funding_leg, b.dva_leg, b.cva_leg, b.collateral_leg])
    header = ["h_I", "h_C", "alpha", "value_closed_form", "value_pde", "xva",
              "funding_leg", "dva_leg", "cva_leg", "collateral_leg"]
    return header, rows


def defxvarisk():
    rows = []
    for name in ("fig_defxva.json", "fig_defxvarisk.json"):
        cfg = load_scenario(ROOT / name)
        for alpha in ALPHAS:
            p = apply_point(cfg, {"alpha": alpha}).market
            h = default_hedge(p, cfg.claim, 0.0, p.equity.S0)
            rows.append([p.credit.h_I_Q, p.credit.h_C_Q, alpha, h.xi_stock, h.xi_bond_I, h.xi_bond_C,
                         h.xi_funding, h.psi_collateral])
    return ["h_I", "h_C", "alpha", "stock", "own_bonds", "counterparty_bonds", "funding", "collateral"], rows


def pricedec():
    cfg = load_scenario(ROOT / "fig_defxva.json")
    rows = []
    for S in np.linspace(60.0, 140.0, 17):
        b = default_xva(cfg.market, cfg.claim, 0.0, float(S))
        rows.append([S, b.reference_value, b.funding_leg, b.dva_leg, b.cva_leg, b.collateral_leg, b.value])
    return ["S", "public_value", "funding_leg", "dva_leg", "cva_leg", "collateral_leg", "value"], rows


TABLES = {"nodef": nodef, "defxva": defxva, "defxvarisk": defxvarisk, "pricedec": pricedec}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("table", choices=[*TABLES, "all"])
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for name in TABLES if args.table == "all" else [args.table]:
        header, rows = TABLES[name]()
        path = os.path.join(args.out, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[f"{x + 0.0:.10g}" for x in r] for r in rows])
        print(f"{path}: {len(rows)} rows")


if __name__ == "__main__":
    main()
