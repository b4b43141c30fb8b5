"""Monte Carlo oracle: stock paths and default times under the valuation measure.

Paths are generated in fixed-size blocks, each from its own counter-derived
substream, so results are bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .analytic import ClaimSpec, public_value
from .closed_form import RateRegimeError
from .closeout import first_defaulter, theta_counterparty, theta_investor
from .market import MarketParams, risk_neutral_intensities

DEFAULT_CELL_CAP = 50_000_000
BLOCK_SIZE = 4096

NO_DEFAULT, INVESTOR_FIRST, COUNTERPARTY_FIRST = 0, 1, 2


class ResourceError(ValueError):
    """Raised when a simulation request exceeds the configured size cap."""


@dataclass(frozen=True)
class PathBundle:
    n_paths: int
    n_steps: int
    seed: int
    antithetic: bool
    times: np.ndarray
    S: np.ndarray
    tau_I: np.ndarray
    tau_C: np.ndarray
    S_tau: np.ndarray
    label: np.ndarray
    tau: np.ndarray
    maturity: float


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    n_effective: int


@dataclass(frozen=True)
class McBreakdown:
    total: McEstimate
    funding_leg: McEstimate
    dva_leg: McEstimate
    cva_leg: McEstimate
    collateral_leg: McEstimate
    reference_value: float


def _block_stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(seed, block, n, M, dt, S0, r_D, sigma, h_I, h_C, antithetic):
    rng = _block_stream(seed, block)
    if antithetic:
        half = (n + 1) // 2
        z = rng.standard_normal((half, M))
        z = np.concatenate([z, -z])[:n]
        zb = rng.standard_normal(half)
        zb = np.concatenate([zb, -zb])[:n]
        u = rng.random((half, 2))
        u = np.concatenate([u, u])[:n]
    else:
        z = rng.standard_normal((n, M))
        zb = rng.standard_normal(n)
        u = rng.random((n, 2))
    # default times by inversion; zero intensity never defaults
    with np.errstate(divide="ignore"):
        tau_I = -np.log1p(-u[:, 0]) / h_I if h_I > 0 else np.full(n, np.inf)
        tau_C = -np.log1p(-u[:, 1]) / h_C if h_C > 0 else np.full(n, np.inf)
    incr = (r_D - 0.5 * sigma * sigma) * dt + sigma * math.sqrt(dt) * z
    logS = np.empty((n, M + 1))
    logS[:, 0] = math.log(S0)
    np.cumsum(incr, axis=1, out=logS[:, 1:])
    logS[:, 1:] += math.log(S0)
    return logS, tau_I, tau_C, zb


def simulate(params: MarketParams, claim: ClaimSpec, n_paths: int, n_steps: int, seed: int,
             antithetic: bool = False, cell_cap: int = DEFAULT_CELL_CAP, workers: int = 1,
             ties_to_counterparty: bool = True) -> PathBundle:
    """Exact log-normal stock paths and exponential default times."""
    if n_paths < 2 or n_steps < 1:
        raise ValueError("need n_paths >= 2 and n_steps >= 1")
    if n_paths * n_steps > cell_cap:
        raise ResourceError(f"n_paths * n_steps = {n_paths * n_steps} exceeds the cap {cell_cap}")
    T = claim.maturity
    dt = T / n_steps
    r_D = params.rates.r_D
    sigma = params.equity.sigma
    S0 = params.equity.S0
    h_I, h_C = risk_neutral_intensities(params)
    sizes = [min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE) for b in range(math.ceil(n_paths / BLOCK_SIZE))]

    def run(b):
        return _simulate_block(seed, b, sizes[b], n_steps, dt, S0, r_D, sigma, h_I, h_C, antithetic)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    logS = np.concatenate([p[0] for p in parts])
    tau_I = np.concatenate([p[1] for p in parts])
    tau_C = np.concatenate([p[2] for p in parts])
    zb = np.concatenate([p[3] for p in parts])
    times = np.linspace(0.0, T, n_steps + 1)

    label = first_defaulter(tau_I, tau_C, T, ties_to_counterparty)
    tau = np.where(label > 0, np.minimum(tau_I, tau_C), T)
    # Brownian bridge between the grid points around the default time
    k = np.minimum((tau / dt).astype(int), n_steps - 1)
    rows = np.arange(n_paths)
    t0 = times[k]
    a = (tau - t0) / dt
    mean = (1 - a) * logS[rows, k] + a * logS[rows, k + 1]
    var = sigma * sigma * (tau - t0) * (times[k + 1] - tau) / dt
    log_tau = mean + np.sqrt(np.maximum(var, 0.0)) * zb
    S_tau = np.where(label > 0, np.exp(log_tau), np.exp(logS[:, -1]))
    S = np.exp(logS)
    for arr in (times, S, tau_I, tau_C, S_tau, label, tau):
        arr.setflags(write=False)
    return PathBundle(n_paths, n_steps, seed, antithetic, times, S, tau_I, tau_C, S_tau, label, tau, T)


def _estimate(samples: np.ndarray, antithetic: bool) -> McEstimate:
    x = np.asarray(samples, dtype=float)
    if antithetic:
        n = len(x)
        # pair each path with its mirror; blocks are mirrored independently
        pairs = []
        start = 0
        while start < n:
            size = min(BLOCK_SIZE, n - start)
            h = (size + 1) // 2
            blk = x[start:start + size]
            m = size - h
            pairs.append(0.5 * (blk[:m] + blk[h:h + m]))
            if h > m:
                pairs.append(blk[m:h])
            start += size
        x = np.concatenate(pairs)
    n = len(x)
    return McEstimate(float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)), n)


def _require_symmetric(params: MarketParams) -> None:
    if not params.rates.is_piterbarg:
        raise RateRegimeError(
            "the representation estimator needs symmetric funding/collateral rates and repo = discount rate; "
            "use the grid solver (bsde.solve) for the general case"
        )


def representation_samples(bundle: PathBundle, params: MarketParams, claim: ClaimSpec) -> dict:
    """Per-path discounted contributions of the four legs at time zero."""
    _require_symmetric(params)
    r = params.rates
    r_D, r_f, r_c = r.r_D, r.r_f_plus, r.r_c_plus
    lam = r_f - r_D
    sigma = params.equity.sigma
    alpha = params.alpha
    c = params.credit
    default_free = params.default_free
    h_I, h_C = risk_neutral_intensities(params)
    T = bundle.maturity
    label = bundle.label
    tau = bundle.tau

    # deterministic part of the weight: one exp(lam s) per name while alive
    growth = 0.0 if default_free else 2.0 * lam

    def weight(s):
        return np.exp((growth - r_f) * s)

    alive_T = label == NO_DEFAULT
    funding = np.where(alive_T, weight(T) * claim.payoff(bundle.S[:, -1]), 0.0)
    dva = np.zeros(bundle.n_paths)
    cva = np.zeros(bundle.n_paths)
    if not default_free:
        vh_tau = np.zeros(bundle.n_paths)
        hit = label > 0
        # exact revaluation at each default time
        vh_tau[hit] = _public_value_at(claim, r_D, sigma, tau[hit], bundle.S_tau[hit])
        inv = label == INVESTOR_FIRST
        cpt = label == COUNTERPARTY_FIRST
        dva[inv] = (1.0 - lam / h_I) * weight(tau[inv]) * theta_investor(vh_tau[inv], alpha, c.L_I)
        cva[cpt] = (1.0 - lam / h_C) * weight(tau[cpt]) * theta_counterparty(vh_tau[cpt], alpha, c.L_C)
    coll = np.zeros(bundle.n_paths)
    if alpha != 0.0 and r_f != r_c:
        coll = alpha * (r_f - r_c) * _collateral_integral(bundle, claim, r_D, sigma, weight)
    return {"funding": funding, "dva": dva, "cva": cva, "collateral": coll}


def _public_value_at(claim, r_D, sigma, t, S):
    """Public value at per-path times ``t`` (vectorized over paths)."""
    a, b, K, w = claim.decomposition()
    tau = np.maximum(claim.maturity - np.asarray(t, dtype=float), 0.0)
    S = np.asarray(S, dtype=float)
    df = np.exp(-r_D * tau)
    out = a * df + b * S
    vol = sigma * np.sqrt(tau)
    for k, wk in zip(K, w):
        if k <= 0:
            out = out + wk * (S - k * df)
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = (np.log(S / k) + (r_D + 0.5 * sigma * sigma) * tau) / vol
            call = S * ndtr(d1) - k * df * ndtr(d1 - vol)
        call = np.where(vol > 0, call, np.maximum(S - k * df, 0.0))
        out = out + wk * call
    out = claim.quantity * out
    # cancellation in the decomposition can leave a sign-definite value a hair on the wrong side
    sign = claim.sign()
    if sign > 0:
        return np.maximum(out, 0.0)
    if sign < 0:
        return np.minimum(out, 0.0)
    return out


def _collateral_integral(bundle, claim, r_D, sigma, weight):
    """Trapezoid rule for ``int_0^tau weight(s) Vhat(s, S_s) ds`` along each path,
    closing the last panel at the default time with the bridged spot."""
    times = bundle.times
    tau = bundle.tau
    n = bundle.n_paths
    total = np.zeros(n)
    prev = weight(0.0) * public_value(claim, r_D, sigma, 0.0, bundle.S[:, 0])
    for k in range(1, len(times)):
        t0, t1 = times[k - 1], times[k]
        active = tau > t0
        if not active.any():
            break
        full = tau >= t1
        cur = weight(t1) * public_value(claim, r_D, sigma, t1, bundle.S[:, k])
        total += np.where(full, 0.5 * (t1 - t0) * (prev + cur), 0.0)
        part = active & ~full
        if part.any():
            end = weight(tau[part]) * _public_value_at(claim, r_D, sigma, tau[part], bundle.S_tau[part])
            total[part] += 0.5 * (tau[part] - t0) * (prev[part] + end)
        prev = cur
    return total


def estimate_representation(bundle: PathBundle, params: MarketParams, claim: ClaimSpec) -> McBreakdown:
    """Time-zero replication value split into its four legs, with standard errors."""
    legs = representation_samples(bundle, params, claim)
    r_D = params.rates.r_D
    vhat = float(public_value(claim, r_D, params.equity.sigma, 0.0, params.equity.S0))
    # the discounted payoff has mean vhat, so subtracting it pathwise keeps the
    # estimator unbiased and cancels the common noise
    control = math.exp(-r_D * bundle.maturity) * claim.payoff(bundle.S[:, -1])
    total = legs["funding"] + legs["dva"] + legs["cva"] + legs["collateral"] - control
    est = lambda x: _estimate(x, bundle.antithetic)  # noqa: E731
    return McBreakdown(est(total), est(legs["funding"]), est(legs["dva"]), est(legs["cva"]),
                       est(legs["collateral"]), vhat)


def cva_dva_samples(bundle: PathBundle, params: MarketParams, claim: ClaimSpec):
    r = params.rates
    rates = (r.r_f_plus, r.r_f_minus, r.r_r_plus, r.r_r_minus, r.r_c_plus, r.r_c_minus, r.r_D)
    if len(set(rates)) != 1:
        raise RateRegimeError("CVA/DVA recovery needs all rates equal")
    rate = r.r_D
    c = params.credit
    alpha = params.alpha
    dva = np.zeros(bundle.n_paths)
    cva = np.zeros(bundle.n_paths)
    hit = bundle.label > 0
    if hit.any() and not params.default_free:
        vh = _public_value_at(claim, rate, params.equity.sigma, bundle.tau[hit], bundle.S_tau[hit])
        exposure = vh - alpha * vh
        disc = np.exp(-rate * bundle.tau[hit])
        inv = bundle.label[hit] == INVESTOR_FIRST
        cpt = bundle.label[hit] == COUNTERPARTY_FIRST
        dva[hit] = np.where(inv, disc * c.L_I * np.maximum(exposure, 0.0), 0.0)
        cva[hit] = np.where(cpt, disc * c.L_C * np.maximum(-exposure, 0.0), 0.0)
    return cva, dva


def estimate_cva_dva(bundle: PathBundle, params: MarketParams, claim: ClaimSpec) -> tuple[McEstimate, McEstimate]:
    """Bilateral credit and debit adjustments when every rate is the same."""
    cva, dva = cva_dva_samples(bundle, params, claim)
    return _estimate(cva, bundle.antithetic), _estimate(dva, bundle.antithetic)
