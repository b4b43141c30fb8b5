"""Discrete hedging experiment under the physical measure.

The lattice strategy (stock, both bonds, repo, funding and collateral
accounts) is rebalanced on a fine time grid along simulated paths with
physical drift and physical default intensities. Wealth accrues interest
on each account and is compared with the contractual payoff at maturity or
the settlement at the first default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import ClaimSpec
from .bsde import GridSolution
from .closeout import theta_counterparty, theta_investor
from .market import MarketParams, risk_neutral_intensities
from .mc import _block_stream, _public_value_at


@dataclass(frozen=True)
class ReplicationResult:
    errors: np.ndarray
    defaulted: np.ndarray
    initial_value: float
    vhat0: float

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.errors ** 2)))

    @property
    def relative_rms(self) -> float:
        return self.rms / abs(self.vhat0)


def _rate(x, lend, borrow):
    return np.where(x >= 0, lend, borrow)


def replicate(solution: GridSolution, params: MarketParams, claim: ClaimSpec, n_paths: int = 1000,
              n_steps: int = 10_000, seed: int = 7) -> ReplicationResult:
    """Run the self-financing strategy read off ``solution`` along physical paths."""
    r = params.rates
    c = params.credit
    eq = params.equity
    T = claim.maturity
    dt = T / n_steps
    h_I, h_C = risk_neutral_intensities(params)
    hp_I = 0.0 if params.default_free else c.h_I_P
    hp_C = 0.0 if params.default_free else c.h_C_P
    rng = _block_stream(seed, 0)
    u = rng.random((n_paths, 2))
    with np.errstate(divide="ignore"):
        tau_I = -np.log1p(-u[:, 0]) / hp_I if hp_I > 0 else np.full(n_paths, np.inf)
        tau_C = -np.log1p(-u[:, 1]) / hp_C if hp_C > 0 else np.full(n_paths, np.inf)
    alpha = params.alpha
    sigma = eq.sigma

    def bond(h, t):
        return math.exp(-(r.r_D + h) * (T - t))

    S = np.full(n_paths, eq.S0)
    V = np.full(n_paths, solution.value_at(0.0, eq.S0))
    alive = np.ones(n_paths, dtype=bool)
    err = np.zeros(n_paths)
    defaulted = np.zeros(n_paths, dtype=bool)
    drift = (eq.mu - 0.5 * sigma * sigma) * dt
    for k in range(n_steps):
        t0 = k * dt
        t1 = t0 + dt
        xi = solution.interp_many(solution.Z, t0, S) / (sigma * S)
        vhat = solution.interp_many(solution.vhat, t0, S)
        C = alpha * vhat
        if params.default_free:
            xi_I = xi_C = np.zeros(n_paths)
            PI0 = PC0 = 0.0
        else:
            PI0, PC0 = bond(h_I, t0), bond(h_C, t0)
            xi_I = -solution.interp_many(solution.Z_I, t0, S) / PI0
            xi_C = -solution.interp_many(solution.Z_C, t0, S) / PC0
        balance = V - xi_I * PI0 - xi_C * PC0 - C
        r_f = _rate(balance, r.r_f_plus, r.r_f_minus)
        r_r = _rate(-xi, r.r_r_plus, r.r_r_minus)
        r_c = _rate(C, r.r_c_plus, r.r_c_minus)

        z = rng.standard_normal(n_paths)
        zb = rng.standard_normal(n_paths)
        S1 = S * np.exp(drift + sigma * math.sqrt(dt) * z)
        tau = np.minimum(tau_I, tau_C)
        hit = alive & (tau <= t1)
        # step length and end-of-step spot; defaults end the step early
        h = np.where(hit, tau - t0, dt)
        frac = h / dt
        logS = (1 - frac) * np.log(S) + frac * np.log(S1)
        logS += np.sqrt(np.maximum(sigma * sigma * h * (dt - h) / dt, 0.0)) * zb * hit
        Send = np.where(hit, np.exp(logS), S1)
        tend = t0 + h
        PI1 = np.where(hit & (tau_I < tau_C), 0.0, np.exp(-(r.r_D + h_I) * (T - tend))) if not params.default_free else 0.0
        PC1 = np.where(hit & (tau_C <= tau_I), 0.0, np.exp(-(r.r_D + h_C) * (T - tend))) if not params.default_free else 0.0
        V_new = (
            V + xi * (Send - S) - xi * S * np.expm1(r_r * h)
            + xi_I * (PI1 - PI0) + xi_C * (PC1 - PC0)
            + balance * np.expm1(r_f * h) + C * np.expm1(r_c * h)
        )
        if hit.any():
            idx = np.nonzero(hit)[0]
            vh = _public_value_at(claim, r.r_D, sigma, tend[idx], Send[idx])
            inv = tau_I[idx] < tau_C[idx]
            target = np.where(inv, theta_investor(vh, alpha, c.L_I), theta_counterparty(vh, alpha, c.L_C))
            err[idx] = V_new[idx] - target
            defaulted[idx] = True
            alive[idx] = False
        V = np.where(alive, V_new, V)
        S = np.where(alive, S1, S)
        if not alive.any():
            break
    live = alive
    err[live] = V[live] - claim.payoff(S[live])
    return ReplicationResult(err, defaulted, solution.value_at(0.0, eq.S0), solution.vhat0)
