"""Valuation adjustments for European claims under funding, collateral and default risk."""

from .analytic import ClaimSpec, compound_theta, public_delta, public_value
from .bsde import GridConfig, GridSolution, IntervalReport, extract_hedge, interval, solve
from .closed_form import (HedgeReport, XvaBreakdown, default_hedge, default_xva, first_default_functional,
                          piterbarg_hedge, piterbarg_xva, survival_expectation)
from .closeout import CloseoutInputs, closeout_value, collateral, theta_party
from .market import CreditParams, EquityParams, MarketParams, RateSet, risk_neutral_intensities, validate
from .mc import McEstimate, PathBundle, estimate_cva_dva, estimate_representation, simulate

__all__ = [
    "ClaimSpec", "CloseoutInputs", "CreditParams", "EquityParams", "GridConfig", "GridSolution",
    "HedgeReport", "IntervalReport", "MarketParams", "McEstimate", "PathBundle", "RateSet",
    "XvaBreakdown", "closeout_value", "collateral", "compound_theta", "default_hedge", "default_xva",
    "estimate_cva_dva", "estimate_representation", "extract_hedge", "first_default_functional",
    "interval", "piterbarg_hedge", "piterbarg_xva", "public_delta", "public_value",
    "risk_neutral_intensities", "simulate", "solve", "survival_expectation", "theta_party", "validate",
]
