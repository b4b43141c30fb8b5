"""Nonlinear valuation equations solved on a time x log-price lattice.

Before the first default the replication value is a function ``v(t, S)``.
Substituting the jump integrands ``theta_i(Vhat) - v`` and the diffusion
integrand ``sigma * S * v_S`` into the backward equation leaves a semilinear
parabolic PDE. It is stepped backward with Crank-Nicolson (Rannacher start);
the piecewise-linear driver is handled by freezing the sign pattern of its
arguments and iterating until the pattern and the solution settle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .analytic import ClaimSpec, public_value
from .closed_form import HedgeReport, hedge_from_value
from .closeout import theta_counterparty, theta_investor
from .market import MarketParams, RateSet, risk_neutral_intensities

SELLER = "seller"
BUYER = "buyer"


class ConvergenceError(RuntimeError):
    """Raised when the per-step fixed-point iteration does not settle."""


class GridDomainError(ValueError):
    """Raised when a lookup falls outside the lattice."""


@dataclass(frozen=True)
class GridConfig:
    n_time: int = 200
    n_space: int = 400
    width_sigmas: float = 6.0
    picard_tol: float = 1e-10
    picard_max: int = 50
    rannacher_steps: int = 2

    def __post_init__(self):
        if self.n_time < 1:
            raise ValueError("n_time must be >= 1")
        if self.n_space < 4 or self.n_space % 2:
            raise ValueError("n_space must be an even integer >= 4 so the spot sits on a node")
        if not self.width_sigmas > 0:
            raise ValueError("width_sigmas must be positive")
        if not self.picard_tol > 0 or self.picard_max < 1:
            raise ValueError("invalid fixed-point settings")

    def halved(self) -> "GridConfig":
        n_s = max(4, (self.n_space // 4) * 2)
        return GridConfig(max(1, self.n_time // 2), n_s, self.width_sigmas,
                          self.picard_tol, self.picard_max, self.rannacher_steps)


@dataclass(frozen=True)
class Driver:
    """Generator of the seller (``side='seller'``) or buyer replication equation."""

    side: str
    rates: RateSet
    alpha: float
    sigma: float
    h_I: float = 0.0
    h_C: float = 0.0

    def __post_init__(self):
        if self.side not in (SELLER, BUYER):
            raise ValueError(f"side must be {SELLER!r} or {BUYER!r}")

    @classmethod
    def from_params(cls, params: MarketParams, side: str = SELLER) -> "Driver":
        h_I, h_C = risk_neutral_intensities(params)
        return cls(side, params.rates, params.alpha, params.equity.sigma, h_I, h_C)

    def rate_choice(self, y, z, c):
        """Funding, repo and collateral rates selected by the signs of the
        funding balance ``y``, diffusion integrand ``z`` and collateral ``c``."""
        r = self.rates
        if self.side == SELLER:
            r_f = np.where(y > 0, r.r_f_plus, r.r_f_minus)
            r_r = np.where(z > 0, r.r_r_minus, r.r_r_plus)
            r_c = np.where(c > 0, r.r_c_plus, r.r_c_minus)
        else:
            r_f = np.where(y > 0, r.r_f_minus, r.r_f_plus)
            r_r = np.where(z > 0, r.r_r_plus, r.r_r_minus)
            r_c = np.where(c > 0, r.r_c_minus, r.r_c_plus)
        return r_f, r_r, r_c


def _pos(x):
    return np.maximum(x, 0.0)


def _neg(x):
    return np.maximum(-x, 0.0)


def _seller_f(r: RateSet, sigma, alpha, v, z, z_I, z_C, vhat):
    y = v + z_I + z_C - alpha * vhat
    c = alpha * vhat
    return -(
        r.r_f_plus * _pos(y) - r.r_f_minus * _neg(y)
        + (r.r_D - r.r_r_minus) * _pos(z) / sigma - (r.r_D - r.r_r_plus) * _neg(z) / sigma
        - r.r_D * z_I - r.r_D * z_C
        + r.r_c_plus * _pos(c) - r.r_c_minus * _neg(c)
    )


def driver_eval(driver: Driver, t, v, z, z_I, z_C, vhat):
    """Drift of the replication equation (time-homogeneous, ``t`` is unused)."""
    args = [np.asarray(a, dtype=float) for a in (v, z, z_I, z_C, vhat)]
    if driver.side == SELLER:
        return _seller_f(driver.rates, driver.sigma, driver.alpha, *args)
    return -_seller_f(driver.rates, driver.sigma, driver.alpha, *[-a for a in args])


@dataclass(frozen=True)
class GridSolution:
    side: str
    default_free: bool
    times: np.ndarray
    x: np.ndarray
    S: np.ndarray
    value: np.ndarray
    Z: np.ndarray
    Z_I: np.ndarray
    Z_C: np.ndarray
    vhat: np.ndarray
    maturity: float
    r_D: float
    h_I: float
    h_C: float
    sigma: float
    iterations: np.ndarray = field(repr=False)

    def _locate(self, t: float, S: float):
        if not (self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12):
            raise GridDomainError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        if not S > 0:
            raise GridDomainError(f"S={S} must be positive")
        x = math.log(S)
        if not (self.x[0] - 1e-12 <= x <= self.x[-1] + 1e-12):
            raise GridDomainError(f"S={S} outside [{self.S[0]:.6g}, {self.S[-1]:.6g}]")
        dt = self.times[1] - self.times[0]
        dx = self.x[1] - self.x[0]
        ft = min(max((t - self.times[0]) / dt, 0.0), len(self.times) - 1.0)
        fx = min(max((x - self.x[0]) / dx, 0.0), len(self.x) - 1.0)
        i = min(int(ft), len(self.times) - 2)
        j = min(int(fx), len(self.x) - 2)
        return i, j, ft - i, fx - j

    def interp(self, surface: np.ndarray, t: float, S: float) -> float:
        """Bilinear interpolation in (t, log S)."""
        i, j, a, b = self._locate(t, S)
        return float(
            (1 - a) * ((1 - b) * surface[i, j] + b * surface[i, j + 1])
            + a * ((1 - b) * surface[i + 1, j] + b * surface[i + 1, j + 1])
        )

    def interp_many(self, surface: np.ndarray, t: float, S: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at one time for many spots (clamped to the lattice)."""
        if not (self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12):
            raise GridDomainError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        dt = self.times[1] - self.times[0]
        ft = min(max((t - self.times[0]) / dt, 0.0), len(self.times) - 1.0)
        i = min(int(ft), len(self.times) - 2)
        a = ft - i
        x = np.log(np.asarray(S, dtype=float))
        row = (1 - a) * surface[i] + a * surface[i + 1]
        return np.interp(x, self.x, row)

    def value_at(self, t: float, S: float) -> float:
        return self.interp(self.value, t, S)

    @property
    def v0(self) -> float:
        return float(self.value[0, len(self.x) // 2])

    @property
    def vhat0(self) -> float:
        return float(self.vhat[0, len(self.x) // 2])


def _linearize(driver: Driver, default_free: bool, u, u_x, vhat, th_I, th_C):
    """Frozen-sign coefficients ``(drift, reaction, source)`` of
    ``0.5 sigma^2 u_xx + drift u_x + reaction u + source``."""
    sigma = driver.sigma
    c = driver.alpha * vhat
    r_D = driver.rates.r_D
    if default_free:
        y = u - c
        r_f, r_r, r_c = driver.rate_choice(y, u_x, c)
        return r_r - 0.5 * sigma * sigma, -r_f, (r_f - r_c) * c
    y = th_I + th_C - u - c
    r_f, r_r, r_c = driver.rate_choice(y, u_x, c)
    reaction = -(driver.h_I + driver.h_C) + r_f - 2.0 * r_D
    source = (driver.h_I + r_D) * th_I + (driver.h_C + r_D) * th_C - r_f * (th_I + th_C - c) - r_c * c
    return r_r - 0.5 * sigma * sigma, reaction, source


class _Stepper:
    def __init__(self, driver, default_free, x, cfg):
        self.driver = driver
        self.default_free = default_free
        self.dx = x[1] - x[0]
        self.n = len(x) - 1
        S = np.exp(x)
        self.w0 = (S[0] - S[1]) / (S[2] - S[1])
        self.wN = (S[-1] - S[-2]) / (S[-3] - S[-2])
        self.cfg = cfg

    def fill_boundary(self, u):
        u[0] = (1 - self.w0) * u[1] + self.w0 * u[2]
        u[-1] = (1 - self.wN) * u[-2] + self.wN * u[-3]
        return u

    def ux(self, u):
        g = np.empty_like(u)
        g[1:-1] = (u[2:] - u[:-2]) / (2 * self.dx)
        g[0] = (u[1] - u[0]) / self.dx
        g[-1] = (u[-1] - u[-2]) / self.dx
        return g

    def bands(self, drift, reaction):
        s2 = self.driver.sigma ** 2
        dx = self.dx
        diff = 0.5 * s2 / (dx * dx)
        lo = diff - drift / (2 * dx)
        di = -2 * diff + reaction
        up = diff + drift / (2 * dx)
        return lo, di, up

    def apply(self, u, lo, di, up, src):
        out = lo[1:-1] * u[:-2] + di[1:-1] * u[1:-1] + up[1:-1] * u[2:] + src[1:-1]
        return out

    def step(self, u_next, dt, theta, vhat_new, vhat_old, thI_new, thI_old, thC_new, thC_old):
        """One backward step from ``u_next`` (later time) to the earlier level."""
        d, df = self.driver, self.default_free
        if theta < 1.0:
            drift, react, src = _linearize(d, df, u_next, self.ux(u_next), vhat_old, thI_old, thC_old)
            lo, di, up = self.bands(np.broadcast_to(drift, u_next.shape), np.broadcast_to(react, u_next.shape))
            rhs = u_next[1:-1] + (1 - theta) * dt * self.apply(u_next, lo, di, up, np.broadcast_to(src, u_next.shape))
        else:
            rhs = u_next[1:-1].copy()
        u = u_next.copy()
        tol = self.cfg.picard_tol * max(1.0, float(np.max(np.abs(u_next))))
        m = self.n - 1
        for it in range(1, self.cfg.picard_max + 1):
            drift, react, src = _linearize(d, df, u, self.ux(u), vhat_new, thI_new, thC_new)
            drift = np.broadcast_to(drift, u.shape)
            react = np.broadcast_to(react, u.shape)
            src = np.broadcast_to(src, u.shape)
            lo, di, up = self.bands(drift, react)
            a = -theta * dt * lo[1:-1]
            b = 1.0 - theta * dt * di[1:-1]
            c = -theta * dt * up[1:-1]
            b = b.copy()
            # eliminate boundary nodes through the linear-in-S closure
            b[0] += a[0] * (1 - self.w0)
            c0 = c[0] + a[0] * self.w0
            a_last = a[-1] + c[-1] * self.wN
            b[-1] += c[-1] * (1 - self.wN)
            ab = np.zeros((3, m))
            ab[0, 1:] = c[:-1]
            ab[0, 1] = c0
            ab[1] = b
            ab[2, :-1] = a[1:]
            ab[2, -2] = a_last
            new = np.empty_like(u)
            new[1:-1] = solve_banded((1, 1), ab, rhs + theta * dt * src[1:-1])
            self.fill_boundary(new)
            change = float(np.max(np.abs(new - u)))
            u = new
            if change <= tol:
                return u, it
        raise ConvergenceError(
            f"fixed-point iteration did not settle in {self.cfg.picard_max} iterations (last change {change:.3e})"
        )


def solve(claim: ClaimSpec, params: MarketParams, side: str = SELLER,
          grid: GridConfig | None = None, reflect: bool = False) -> GridSolution:
    """Pre-default replication value surface for the seller or buyer.

    With ``reflect=True`` the terminal payoff, public value and default
    settlements of ``claim`` are all negated. The settlements are not
    recomputed from the negated claim, so ``-solve(c, p, SELLER, reflect=True)``
    is the buyer price of ``c``.
    """
    cfg = grid or GridConfig()
    driver = Driver.from_params(params, side)
    default_free = params.default_free
    sigma = params.equity.sigma
    if not sigma > 0:
        raise ValueError("the grid solver needs sigma > 0")
    r_D = params.rates.r_D
    T = claim.maturity
    half_width = cfg.width_sigmas * sigma * math.sqrt(T)
    x0 = math.log(params.equity.S0)
    x = np.linspace(x0 - half_width, x0 + half_width, cfg.n_space + 1)
    S = np.exp(x)
    times = np.linspace(0.0, T, cfg.n_time + 1)
    alpha = params.alpha
    L_I, L_C = params.credit.L_I, params.credit.L_C

    sgn = -1.0 if reflect else 1.0

    def public(t):
        vh = public_value(claim, r_D, sigma, t, S)
        if default_free:
            zero = np.zeros_like(vh)
            return sgn * vh, zero, zero
        return sgn * vh, sgn * theta_investor(vh, alpha, L_I), sgn * theta_counterparty(vh, alpha, L_C)

    vhat = np.empty((len(times), len(x)))
    th_I = np.empty_like(vhat)
    th_C = np.empty_like(vhat)
    for k, t in enumerate(times):
        vhat[k], th_I[k], th_C[k] = public(t)

    stepper = _Stepper(driver, default_free, x, cfg)
    value = np.empty_like(vhat)
    value[-1] = sgn * claim.payoff(S)
    iters = np.zeros(cfg.n_time, dtype=int)
    dt = T / cfg.n_time
    for k in range(cfg.n_time - 1, -1, -1):
        u = value[k + 1]
        if cfg.n_time - 1 - k < cfg.rannacher_steps:
            # two implicit half steps damp the payoff kink
            vh_mid, tI_mid, tC_mid = public(0.5 * (times[k] + times[k + 1]))
            u, n1 = stepper.step(u, 0.5 * dt, 1.0, vh_mid, None, tI_mid, None, tC_mid, None)
            u, n2 = stepper.step(u, 0.5 * dt, 1.0, vhat[k], None, th_I[k], None, th_C[k], None)
            iters[k] = max(n1, n2)
        else:
            u, iters[k] = stepper.step(u, dt, 0.5, vhat[k], vhat[k + 1], th_I[k], th_I[k + 1], th_C[k], th_C[k + 1])
        value[k] = u

    Z = sigma * np.gradient(value, x, axis=1)
    if default_free:
        Z_I = np.zeros_like(value)
        Z_C = np.zeros_like(value)
    else:
        Z_I = th_I - value
        Z_C = th_C - value
    for arr in (times, x, S, value, Z, Z_I, Z_C, vhat, iters):
        arr.setflags(write=False)
    return GridSolution(side, default_free, times, x, S, value, Z, Z_I, Z_C, vhat, T, r_D,
                        driver.h_I, driver.h_C, sigma, iters)


def refinement_delta(claim: ClaimSpec, params: MarketParams, side: str = SELLER,
                     grid: GridConfig | None = None, fine: GridSolution | None = None) -> float:
    """Largest gap between the solution and a half-resolution solve on shared nodes
    within two standard deviations of the spot; a practical grid-error estimate."""
    cfg = grid or GridConfig()
    fine = fine or solve(claim, params, side, cfg)
    coarse = solve(claim, params, side, cfg.halved())
    sigma = params.equity.sigma
    band = 2.0 * sigma * math.sqrt(claim.maturity)
    x0 = math.log(params.equity.S0)
    worst = 0.0
    for k, t in enumerate(coarse.times):
        kf = int(round(t / (fine.times[1] - fine.times[0])))
        if abs(fine.times[kf] - t) > 1e-12:
            continue
        for j, xj in enumerate(coarse.x):
            if abs(xj - x0) > band:
                continue
            worst = max(worst, abs(coarse.value[k, j] - fine.interp(fine.value, t, math.exp(xj))))
    return worst


@dataclass(frozen=True)
class IntervalReport:
    V0_minus: float
    V0_plus: float
    xva_buy: float
    xva_sell: float
    vhat: float

    @property
    def width(self) -> float:
        return self.V0_plus - self.V0_minus


def interval(claim: ClaimSpec, params: MarketParams, grid: GridConfig | None = None,
             direct_buyer: bool = False) -> IntervalReport:
    """Seller and buyer replication prices at the spot.

    The buyer price is minus the seller solve of the reflected problem, or a
    direct buyer-side solve when ``direct_buyer`` is set; both agree.
    """
    seller = solve(claim, params, SELLER, grid)
    if direct_buyer:
        v_minus = solve(claim, params, BUYER, grid).v0
    else:
        v_minus = -solve(claim, params, SELLER, grid, reflect=True).v0
    vh = seller.vhat0
    return IntervalReport(v_minus, seller.v0, v_minus - vh, seller.v0 - vh, vh)


def bond_price(r_D: float, h: float, t: float, maturity: float) -> float:
    return math.exp(-(r_D + h) * (maturity - t))


def extract_hedge(solution: GridSolution, params: MarketParams, t: float, S: float) -> HedgeReport:
    """Replicating positions read off the lattice at ``(t, S)``."""
    if t >= solution.maturity:
        raise GridDomainError("hedge extraction needs t < maturity")
    value = solution.value_at(t, S)
    xi = solution.interp(solution.Z, t, S) / (solution.sigma * S)
    vhat = solution.interp(solution.vhat, t, S)
    if solution.default_free:
        return hedge_from_value(params, t, S, value, xi, 0.0, 0.0, vhat, 0.0, 0.0)
    P_I = bond_price(solution.r_D, solution.h_I, t, solution.maturity)
    P_C = bond_price(solution.r_D, solution.h_C, t, solution.maturity)
    xi_I = -solution.interp(solution.Z_I, t, S) / P_I
    xi_C = -solution.interp(solution.Z_C, t, S) / P_C
    return hedge_from_value(params, t, S, value, xi, xi_I, xi_C, vhat, P_I, P_C)
