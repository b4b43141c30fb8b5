"""Public (risk-free closeout) valuation: value, delta and compound-option splits.

The public value discounts the payoff at ``r_D`` under the valuation measure,
where the stock drifts at ``r_D``. Calls and puts use Black-Scholes; custom
piecewise-linear payoffs are decomposed exactly into a bond, a forward and a
strip of calls, so no quadrature is needed for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

KINDS = ("call", "put", "custom")


class DomainError(ValueError):
    """Raised for evaluation times or horizons outside the contract life."""


@dataclass(frozen=True)
class ClaimSpec:
    """European claim ``quantity * payoff(S_T)``.

    ``knots`` is a sequence of ``(S, payoff)`` pairs with strictly increasing
    ``S >= 0``; the payoff is linear between knots and continues the first and
    last segments beyond them. A negative ``quantity`` is the opposite side.
    """

    kind: str
    maturity: float
    strike: float | None = None
    knots: tuple[tuple[float, float], ...] = ()
    quantity: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if not math.isfinite(self.quantity):
            raise ValueError("quantity must be finite")
        if self.kind in ("call", "put"):
            if self.strike is None or not math.isfinite(self.strike) or self.strike < 0:
                raise ValueError(f"{self.kind} needs a finite strike >= 0, got {self.strike}")
        else:
            knots = tuple((float(x), float(y)) for x, y in self.knots)
            if len(knots) < 2:
                raise ValueError("custom payoff needs at least two knots")
            xs = [k[0] for k in knots]
            if xs[0] < 0 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("knot abscissae must be >= 0 and strictly increasing")
            if not all(math.isfinite(v) for k in knots for v in k):
                raise ValueError("knots must be finite")
            object.__setattr__(self, "knots", knots)

    @classmethod
    def call(cls, strike: float, maturity: float, quantity: float = 1.0) -> "ClaimSpec":
        return cls("call", maturity, strike=strike, quantity=quantity)

    @classmethod
    def put(cls, strike: float, maturity: float, quantity: float = 1.0) -> "ClaimSpec":
        return cls("put", maturity, strike=strike, quantity=quantity)

    @classmethod
    def custom(cls, knots, maturity: float, quantity: float = 1.0) -> "ClaimSpec":
        return cls("custom", maturity, knots=tuple(map(tuple, knots)), quantity=quantity)

    def scaled(self, gamma: float) -> "ClaimSpec":
        return ClaimSpec(self.kind, self.maturity, self.strike, self.knots, self.quantity * gamma)

    def negated(self) -> "ClaimSpec":
        return self.scaled(-1.0)

    def decomposition(self) -> tuple[float, float, np.ndarray, np.ndarray]:
        """Unit payoff as ``a + b*S + sum_k w_k (S - K_k)^+``: returns ``(a, b, K, w)``."""
        if self.kind == "call":
            return 0.0, 0.0, np.array([self.strike]), np.array([1.0])
        if self.kind == "put":
            # (K - S)^+ = K - S + (S - K)^+
            return self.strike, -1.0, np.array([self.strike]), np.array([1.0])
        return _custom_decomposition(self.knots)

    def payoff(self, S):
        S = np.asarray(S, dtype=float)
        a, b, K, w = self.decomposition()
        out = a + b * S
        for k, wk in zip(K, w):
            out = out + wk * np.maximum(S - k, 0.0)
        return self.quantity * out

    def sign(self) -> int:
        """+1 if the payoff is nonnegative everywhere, -1 if nonpositive, 0 if mixed.

        The zero payoff reports +1.
        """
        a, b, K, w = self.decomposition()
        xs = np.concatenate(([0.0], K))
        vals = [a + b * x + float(np.sum(w * np.maximum(x - K, 0.0))) for x in xs]
        tail = b + float(np.sum(w))
        lo, hi = min(vals), max(vals)
        q = self.quantity
        if q == 0 or (lo == 0 and hi == 0 and tail == 0):
            return 1
        if lo >= 0 and tail >= 0:
            return 1 if q > 0 else -1
        if hi <= 0 and tail <= 0:
            return -1 if q > 0 else 1
        return 0


@lru_cache(maxsize=256)
def _custom_decomposition(knots):
    xs = np.array([k[0] for k in knots])
    ys = np.array([k[1] for k in knots])
    slopes = np.diff(ys) / np.diff(xs)
    b = slopes[0]
    a = ys[0] - b * xs[0]
    K = xs[1:-1]
    w = np.diff(slopes)
    keep = w != 0
    return float(a), float(b), K[keep], w[keep]


def _check_time(claim: ClaimSpec, t) -> float:
    tau = claim.maturity - t
    if np.any(np.asarray(tau) < -1e-14):
        raise DomainError(f"evaluation time {t} is after maturity {claim.maturity}")
    return np.maximum(tau, 0.0)


def _call_parts(S, K, r_D, sigma, tau):
    """Undiscounted-strike call value and delta, vectorized; handles tau = 0 and K = 0."""
    S = np.asarray(S, dtype=float)
    df = math.exp(-r_D * tau)
    if K <= 0:
        return S - K * df, np.ones_like(S)
    vol = sigma * math.sqrt(tau)
    if vol <= 0:
        fwd_gap = S - K * df
        val = np.maximum(fwd_gap, 0.0)
        delta = np.where(fwd_gap > 0, 1.0, np.where(fwd_gap < 0, 0.0, 0.5))
        return val, delta
    with np.errstate(divide="ignore"):
        d1 = (np.log(S / K) + (r_D + 0.5 * sigma * sigma) * tau) / vol
    d2 = d1 - vol
    n1 = ndtr(d1)
    return S * n1 - K * df * ndtr(d2), n1


def public_value(claim: ClaimSpec, r_D: float, sigma: float, t, S):
    """Public value of the claim at time ``t`` and spot ``S`` (vectorized in ``S``)."""
    tau = float(_check_time(claim, t))
    S = np.asarray(S, dtype=float)
    if tau == 0.0:
        return claim.payoff(S)
    a, b, K, w = claim.decomposition()
    df = math.exp(-r_D * tau)
    out = a * df + b * S
    for k, wk in zip(K, w):
        out = out + wk * _call_parts(S, k, r_D, sigma, tau)[0]
    return claim.quantity * out


def public_delta(claim: ClaimSpec, r_D: float, sigma: float, t, S):
    """Spot sensitivity of :func:`public_value`; at maturity kinks the average slope."""
    tau = float(_check_time(claim, t))
    S = np.asarray(S, dtype=float)
    a, b, K, w = claim.decomposition()
    out = np.full_like(S, b)
    for k, wk in zip(K, w):
        out = out + wk * _call_parts(S, k, r_D, sigma, tau)[1]
    return claim.quantity * out


def public_gamma(claim: ClaimSpec, r_D: float, sigma: float, t, S):
    tau = float(_check_time(claim, t))
    S = np.asarray(S, dtype=float)
    out = np.zeros_like(S)
    if tau == 0.0 or sigma == 0.0:
        return out
    a, b, K, w = claim.decomposition()
    vol = sigma * math.sqrt(tau)
    for k, wk in zip(K, w):
        if k <= 0:
            continue
        d1 = (np.log(S / k) + (r_D + 0.5 * sigma * sigma) * tau) / vol
        out = out + wk * np.exp(-0.5 * d1 * d1) / (math.sqrt(2 * math.pi) * S * vol)
    return claim.quantity * out


def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def compound_theta(claim: ClaimSpec, r_D: float, sigma: float, t: float, S: float, s: float,
                   sign: int, nodes: int = 24) -> float:
    """Public value at ``t`` of receiving ``Vhat(s, S_s)`` only where it is >= 0
    (``sign=+1``) or < 0 (``sign=-1``)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not (t - 1e-14 <= s <= claim.maturity + 1e-14):
        raise DomainError(f"horizon s={s} outside [t, T] = [{t}, {claim.maturity}]")
    s = min(max(s, t), claim.maturity)
    v0 = float(public_value(claim, r_D, sigma, t, S))
    cs = claim.sign()
    if cs != 0:
        return v0 if sign == cs else 0.0
    h = s - t
    if h <= 0 or sigma == 0.0:
        fwd = S * math.exp(r_D * h)
        vs = float(public_value(claim, r_D, sigma, s, fwd))
        keep = vs >= 0 if sign > 0 else vs < 0
        return math.exp(-r_D * h) * vs if keep else 0.0
    plus, minus = _theta_split(claim, r_D, sigma, S, t, s, nodes)
    return plus if sign > 0 else minus


def _theta_split(claim, r_D, sigma, S, t, s, nodes):
    h = s - t
    vol = sigma * math.sqrt(h)
    drift = (r_D - 0.5 * sigma * sigma) * h
    zmax = 10.0

    def vs(z):
        return public_value(claim, r_D, sigma, s, S * np.exp(drift + vol * np.asarray(z)))

    zg = np.linspace(-zmax, zmax, 801)
    vg = vs(zg)
    breaks = [-zmax]
    for i in np.nonzero(np.sign(vg[:-1]) * np.sign(vg[1:]) < 0)[0]:
        breaks.append(brentq(lambda z: float(vs(z)), zg[i], zg[i + 1], xtol=1e-14))
    # payoff kinks: exact breaks at s = T, steep regions shortly before
    a, b, K, w = claim.decomposition()
    for k in K:
        if k > 0:
            zk = (math.log(k / S) - drift) / vol
            if -zmax < zk < zmax:
                breaks.append(zk)
    breaks.extend(np.arange(-zmax + 0.5, zmax, 0.5))
    breaks.append(zmax)
    breaks = sorted(set(breaks))
    x, wts = _gl(nodes)
    plus = minus = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo < 1e-15:
            continue
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        vz = vs(z) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        plus += 0.5 * (hi - lo) * float(np.dot(wts, np.where(vz >= 0, vz, 0.0)))
        minus += 0.5 * (hi - lo) * float(np.dot(wts, np.where(vz < 0, vz, 0.0)))
    df = math.exp(-r_D * h)
    return df * plus, df * minus

