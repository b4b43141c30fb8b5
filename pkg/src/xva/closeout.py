"""Collateral rule and the settlement paid at the first default."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INVESTOR = "investor"
COUNTERPARTY = "counterparty"
NONE = "none"
PARTIES = (INVESTOR, COUNTERPARTY)


def collateral(alpha, vhat):
    """Posted collateral ``alpha * vhat``; positive means the hedger posts."""
    return np.multiply(alpha, vhat)


def _pos(x):
    return np.maximum(x, 0.0)


def _neg(x):
    return np.maximum(-np.asarray(x, dtype=float), 0.0)


@dataclass(frozen=True)
class CloseoutInputs:
    vhat: float
    collateral: float
    L_I: float
    L_C: float
    alpha: float
    first_defaulter: str

    def __post_init__(self):
        if self.first_defaulter not in (INVESTOR, COUNTERPARTY, NONE):
            raise ValueError(f"unknown first_defaulter {self.first_defaulter!r}")


def closeout_value(inputs: CloseoutInputs):
    """Settlement value under risk-free closeout, in indicator form."""
    if inputs.first_defaulter == NONE:
        raise ValueError("closeout needs a defaulting party")
    exposure = np.subtract(inputs.vhat, inputs.collateral)
    c_first = inputs.first_defaulter == COUNTERPARTY
    i_first = inputs.first_defaulter == INVESTOR
    return inputs.vhat + c_first * inputs.L_C * _neg(exposure) - i_first * inputs.L_I * _pos(exposure)


def closeout_value_minmax(inputs: CloseoutInputs):
    """Same settlement written with min/max: recovery applies only to the
    uncollateralized part owed by the defaulting party."""
    v, c = inputs.vhat, inputs.collateral
    if inputs.first_defaulter == INVESTOR:
        return np.minimum((1.0 - inputs.L_I) * (v - c) + c, v)
    if inputs.first_defaulter == COUNTERPARTY:
        return np.maximum((1.0 - inputs.L_C) * (v - c) + c, v)
    raise ValueError("closeout needs a defaulting party")


def theta_investor(vhat, alpha, L_I):
    vhat = np.asarray(vhat, dtype=float)
    return vhat - L_I * _pos(vhat - collateral(alpha, vhat))


def theta_counterparty(vhat, alpha, L_C):
    vhat = np.asarray(vhat, dtype=float)
    return vhat + L_C * _neg(vhat - collateral(alpha, vhat))


def theta_party(party: str, vhat, alpha, L):
    """Settlement at default of ``party`` with collateral ``alpha * vhat``."""
    if party == INVESTOR:
        return theta_investor(vhat, alpha, L)
    if party == COUNTERPARTY:
        return theta_counterparty(vhat, alpha, L)
    raise ValueError(f"party must be one of {PARTIES}, got {party!r}")


def first_defaulter(tau_I, tau_C, horizon, ties_to_counterparty: bool = True):
    """Label array: 1 investor first, 2 counterparty first, 0 no default before ``horizon``.

    Exact ties are assigned to the counterparty unless ``ties_to_counterparty`` is False.
    """
    tau_I = np.asarray(tau_I, dtype=float)
    tau_C = np.asarray(tau_C, dtype=float)
    tau = np.minimum(tau_I, tau_C)
    if ties_to_counterparty:
        i_first = tau_I < tau_C
    else:
        i_first = tau_I <= tau_C
    label = np.where(i_first, 1, 2)
    return np.where(tau < horizon, label, 0)
