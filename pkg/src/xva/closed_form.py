"""Closed-form total valuation adjustments under symmetric funding/collateral rates.

Two regimes are covered: no defaults, and independent exponential defaults of
both parties. The replication value is split into a funding leg (no default
before maturity), a DVA-type leg (investor defaults first), a CVA-type leg
(counterparty defaults first) and a collateral-remuneration leg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import ClaimSpec, _theta_split, public_delta, public_value
from .closeout import theta_counterparty, theta_investor
from .market import MarketParams, risk_neutral_intensities

SINGULAR_GAP = 1e-12
EXCLUSION_TOL = 1e-10


class RateRegimeError(ValueError):
    """Closed forms need symmetric funding/collateral rates and repo = discount rate."""


class ExclusionError(ValueError):
    """The default-time functional is evaluated at an excluded rate."""


@dataclass(frozen=True)
class XvaBreakdown:
    t: float
    S: float
    total: float
    funding_leg: float
    dva_leg: float
    cva_leg: float
    collateral_leg: float
    adjustment_factor: float
    reference_value: float
    engine: str = "closed_form"

    @property
    def value(self) -> float:
        return self.funding_leg + self.dva_leg + self.cva_leg + self.collateral_leg


@dataclass(frozen=True)
class HedgeReport:
    """Replicating positions at ``(t, S)``; ``value`` and ``collateral`` are the
    wealth and posted collateral they are built from."""

    t: float
    S: float
    xi_stock: float
    xi_bond_I: float
    xi_bond_C: float
    psi_repo: float
    xi_funding: float
    psi_collateral: float
    value: float
    collateral: float


def _growth_integral(k: float, horizon: float) -> float:
    """``int_0^horizon exp(k s) ds`` with its limit when ``k`` is tiny."""
    if abs(k) < SINGULAR_GAP:
        return horizon
    return math.expm1(k * horizon) / k


def _require_symmetric(params: MarketParams) -> None:
    if not params.rates.is_piterbarg:
        raise RateRegimeError(
            "closed forms need r_f_plus == r_f_minus, r_c_plus == r_c_minus and "
            "r_r_plus == r_r_minus == r_D; use the grid solver (bsde.solve) for asymmetric rates"
        )


def hedge_from_value(params: MarketParams, t: float, S: float, value: float, xi: float,
                     xi_I: float, xi_C: float, vhat: float, P_I: float, P_C: float) -> HedgeReport:
    """Fill the repo, funding and collateral accounts from the risky positions."""
    # account rates follow the sign of the current balance
    r = params.rates
    C = params.alpha * vhat
    r_repo = r.r_r_minus if xi > 0 else r.r_r_plus
    psi_repo = -xi * S / math.exp(r_repo * t)
    balance = value - xi_I * P_I - xi_C * P_C - C
    r_fund = r.r_f_plus if balance >= 0 else r.r_f_minus
    funding = balance / math.exp(r_fund * t)
    r_coll = r.r_c_plus if C >= 0 else r.r_c_minus
    psi_c = -C / math.exp(r_coll * t)
    return HedgeReport(t, S, xi, xi_I, xi_C, psi_repo, funding, psi_c, value, C)


def piterbarg_factor(params: MarketParams, horizon: float) -> float:
    r = params.rates
    k = r.r_r_plus - r.r_f_plus
    return math.exp(k * horizon) + params.alpha * (r.r_f_plus - r.r_c_plus) * _growth_integral(k, horizon)


def piterbarg_xva(params: MarketParams, claim: ClaimSpec, t: float, S: float) -> XvaBreakdown:
    """No-default adjustment: value is a deterministic multiple of the public value."""
    _require_symmetric(params)
    r = params.rates
    horizon = claim.maturity - t
    vhat = float(public_value(claim, r.r_D, params.equity.sigma, t, S))
    k = r.r_r_plus - r.r_f_plus
    funding = math.exp(k * horizon) * vhat
    coll = params.alpha * (r.r_f_plus - r.r_c_plus) * _growth_integral(k, horizon) * vhat
    factor = piterbarg_factor(params, horizon)
    return XvaBreakdown(t, S, funding + coll - vhat, funding, 0.0, 0.0, coll, factor, vhat)


def piterbarg_hedge(params: MarketParams, claim: ClaimSpec, t: float, S: float) -> HedgeReport:
    _require_symmetric(params)
    r = params.rates
    factor = piterbarg_factor(params, claim.maturity - t)
    vhat = float(public_value(claim, r.r_D, params.equity.sigma, t, S))
    delta = float(public_delta(claim, r.r_D, params.equity.sigma, t, S))
    return hedge_from_value(params, t, S, factor * vhat, factor * delta, 0.0, 0.0, vhat, 0.0, 0.0)


def survival_expectation(h_I_Q: float, h_C_Q: float, t: float, s: float) -> float:
    """Probability that neither party defaults in ``[t, s]`` given survival to ``t``."""
    if s < t:
        raise ValueError(f"s={s} precedes t={t}")
    if h_I_Q < 0 or h_C_Q < 0:
        raise ValueError("intensities must be non-negative")
    return math.exp(-(h_I_Q + h_C_Q) * (s - t))


def first_default_functional(lam: float, h_first: float, h_other: float, horizon: float) -> float:
    """``E[exp(lam * y) 1{y < z, y < horizon}]`` for independent exponential
    default delays ``y ~ h_first`` and ``z ~ h_other``."""
    if h_first == 0.0 or horizon == 0.0:
        return 0.0
    for excluded, name in ((h_first, "h_first"), (h_other, "h_other"), (h_first + h_other, "h_first + h_other")):
        if abs(lam - excluded) < EXCLUSION_TOL:
            raise ExclusionError(
                f"lambda={lam} coincides with {name}={excluded}; perturb the rates or use the grid solver"
            )
    kappa = lam - h_first - h_other
    bracket = (h_other / kappa) * math.expm1(kappa * horizon) - 1.0 + math.exp(-h_other * horizon + (lam - h_first) * horizon)
    return h_first / (lam - h_first) * bracket


def _functional_exclusions(lam, h_I, h_C):
    for h, name in ((h_I, "h_I_Q"), (h_C, "h_C_Q")):
        if abs(lam - h) < EXCLUSION_TOL:
            raise ExclusionError(
                f"lambda = r_f - r_D = {lam} equals {name}; the closed form is undefined there, use the grid solver"
            )


def _setup(params: MarketParams, claim: ClaimSpec, t: float):
    _require_symmetric(params)
    r = params.rates
    h_I, h_C = risk_neutral_intensities(params)
    lam = r.r_f_plus - r.r_D
    _functional_exclusions(lam, h_I, h_C)
    return r, h_I, h_C, lam, claim.maturity - t


def _collateral_coefficient(params, lam, h, horizon):
    r = params.rates
    return params.alpha * (r.r_f_plus - r.r_c_plus) * _growth_integral(lam - h, horizon)


def default_factor(params: MarketParams, horizon: float, sign: int = 1, printed_prefactors: bool = False) -> float:
    """Adjustment factor ``V / Vhat`` for a payoff of constant ``sign``."""
    r = params.rates
    h_I, h_C = risk_neutral_intensities(params)
    lam = r.r_f_plus - r.r_D
    _functional_exclusions(lam, h_I, h_C)
    legs = _sign_definite_legs(params, lam, h_I, h_C, horizon, sign, 1.0, printed_prefactors)
    return sum(legs)


def _sign_definite_legs(params, lam, h_I, h_C, horizon, sign, vhat, printed_prefactors):
    a = params.alpha
    c = params.credit
    theta_plus, theta_minus = (vhat, 0.0) if sign >= 0 else (0.0, vhat)
    F_I = first_default_functional(lam, h_I, h_C, horizon) if h_I > 0 else 0.0
    F_C = first_default_functional(lam, h_C, h_I, horizon) if h_C > 0 else 0.0
    g_I = 1.0 - lam / h_I
    g_C = 1.0 - lam / h_C
    g_I_neg = g_C if printed_prefactors else g_I
    funding = math.exp((lam - h_I - h_C) * horizon) * vhat
    dva = ((1.0 - (1.0 - a) * c.L_I) * g_I * theta_plus + g_I_neg * theta_minus) * F_I
    cva = ((1.0 - (1.0 - a) * c.L_C) * g_C * theta_minus + g_C * theta_plus) * F_C
    coll = _collateral_coefficient(params, lam, h_I + h_C, horizon) * vhat
    return funding, dva, cva, coll


def default_xva(params: MarketParams, claim: ClaimSpec, t: float, S: float,
                printed_prefactors: bool = False, nodes: int = 200) -> XvaBreakdown:
    """Adjustment with bilateral default risk and symmetric rates.

    Sign-definite payoffs use the default-time functional directly. Mixed-sign
    payoffs integrate the compound-option split over the default time with
    ``nodes`` Gauss-Legendre points. ``printed_prefactors`` reproduces a
    published variant of the investor-default negative-exposure coefficient
    that uses the counterparty intensity.
    """
    r, h_I, h_C, lam, horizon = _setup(params, claim, t)
    sigma = params.equity.sigma
    vhat = float(public_value(claim, r.r_D, sigma, t, S))
    sign = claim.sign()
    if sign != 0 or horizon <= 0:
        legs = _sign_definite_legs(params, lam, h_I, h_C, horizon, sign if sign else 1, vhat, printed_prefactors)
        factor = sum(_sign_definite_legs(params, lam, h_I, h_C, horizon, sign if sign else 1, 1.0, printed_prefactors))
    else:
        legs = _mixed_legs(params, claim, t, S, vhat, lam, h_I, h_C, horizon, nodes, printed_prefactors)
        factor = sum(legs) / vhat if vhat != 0 else float("nan")
    funding, dva, cva, coll = legs
    return XvaBreakdown(t, S, funding + dva + cva + coll - vhat, funding, dva, cva, coll, factor, vhat)


def theta_curve(claim: ClaimSpec, r_D: float, sigma: float, t: float, S: float, horizons) -> np.ndarray:
    """Compound-option split at each ``t + y``: array of shape ``(len(horizons), 2)``."""
    out = np.empty((len(horizons), 2))
    for i, y in enumerate(horizons):
        s = min(t + y, claim.maturity)
        if y <= 0:
            v = float(public_value(claim, r_D, sigma, t, S))
            out[i] = (v, 0.0) if v >= 0 else (0.0, v)
        else:
            out[i] = _theta_split(claim, r_D, sigma, S, t, s, 48)
    return out


def _mixed_legs(params, claim, t, S, vhat, lam, h_I, h_C, horizon, nodes, printed_prefactors):
    c = params.credit
    a = params.alpha
    x, w = np.polynomial.legendre.leggauss(nodes)
    y = 0.5 * horizon * (x + 1.0)
    w = 0.5 * horizon * w
    th = theta_curve(claim, params.rates.r_D, params.equity.sigma, t, S, y)
    kernel = np.exp((lam - h_I - h_C) * y) * w
    g_I = 1.0 - lam / h_I
    g_C = 1.0 - lam / h_C
    g_I_neg = g_C if printed_prefactors else g_I
    dva = h_I * float(np.dot(kernel, (1.0 - (1.0 - a) * c.L_I) * g_I * th[:, 0] + g_I_neg * th[:, 1]))
    cva = h_C * float(np.dot(kernel, (1.0 - (1.0 - a) * c.L_C) * g_C * th[:, 1] + g_C * th[:, 0]))
    funding = math.exp((lam - h_I - h_C) * horizon) * vhat
    coll = _collateral_coefficient(params, lam, h_I + h_C, horizon) * vhat
    return funding, dva, cva, coll


def representation_value(params: MarketParams, claim: ClaimSpec, t: float, S: float, nodes: int = 200) -> float:
    """Replication value assembled as one integral over the first-default time.

    Independent of :func:`default_xva`'s leg formulas: the integrand is the
    density of the first default times its weighted settlement, plus the
    collateral carry, integrated by Gauss-Legendre.
    """
    r, h_I, h_C, lam, horizon = _setup(params, claim, t)
    c = params.credit
    a = params.alpha
    sigma = params.equity.sigma
    vhat = float(public_value(claim, r.r_D, sigma, t, S))
    if horizon <= 0:
        return vhat
    x, w = np.polynomial.legendre.leggauss(nodes)
    y = 0.5 * horizon * (x + 1.0)
    w = 0.5 * horizon * w
    if claim.sign() != 0:
        plus = np.full_like(y, max(vhat, 0.0))
        minus = np.full_like(y, min(vhat, 0.0))
    else:
        th = theta_curve(claim, r.r_D, sigma, t, S, y)
        plus, minus = th[:, 0], th[:, 1]
    # expected discounted settlement at each default time
    settle_I = plus + minus - c.L_I * (1.0 - a) * plus
    settle_C = plus + minus + c.L_C * (1.0 - a) * (-minus)
    carry = a * (r.r_f_plus - r.r_c_plus) * (plus + minus)
    weight = np.exp((lam - h_I - h_C) * y)
    integrand = weight * ((h_I - lam) * settle_I + (h_C - lam) * settle_C + carry)
    return math.exp((lam - h_I - h_C) * horizon) * vhat + float(np.dot(w, integrand))


def default_hedge(params: MarketParams, claim: ClaimSpec, t: float, S: float) -> HedgeReport:
    """Stock and bond positions for a sign-definite payoff with defaults."""
    r, h_I, h_C, lam, horizon = _setup(params, claim, t)
    sign = claim.sign()
    if sign == 0:
        raise ValueError("default_hedge needs a sign-definite payoff; use the grid solver hedge")
    sigma = params.equity.sigma
    c = params.credit
    vhat = float(public_value(claim, r.r_D, sigma, t, S))
    delta = float(public_delta(claim, r.r_D, sigma, t, S))
    if horizon <= 0:
        return hedge_from_value(params, t, S, vhat, delta, 0.0, 0.0, vhat, 1.0, 1.0)
    A = default_factor(params, horizon, sign)
    P_I = math.exp(-(r.r_D + h_I) * horizon)
    P_C = math.exp(-(r.r_D + h_C) * horizon)
    V = A * vhat
    xi_I = (V - float(theta_investor(vhat, params.alpha, c.L_I))) / P_I
    xi_C = (V - float(theta_counterparty(vhat, params.alpha, c.L_C))) / P_C
    return hedge_from_value(params, t, S, V, A * delta, xi_I, xi_C, vhat, P_I, P_C)
