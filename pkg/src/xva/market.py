"""Model parameters, risk-neutral intensities and the no-arbitrage rate checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class NonFiniteParameterError(ValueError):
    """Raised when a parameter is NaN or infinite."""


class IntensityError(ValueError):
    """Raised when a derived risk-neutral default intensity is not positive."""


def discount(rate, t):
    """Continuously compounded discount factor ``exp(-rate * t)``."""
    return np.exp(-np.multiply(rate, t))


def account(rate, t):
    """Value at ``t`` of a unit cash account growing at ``rate``."""
    return np.exp(np.multiply(rate, t))


def _check_finite(obj) -> None:
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, bool) or v is None:
            continue
        if isinstance(v, (int, float)) and not math.isfinite(v):
            raise NonFiniteParameterError(f"{type(obj).__name__}.{f.name} is not finite: {v!r}")


@dataclass(frozen=True)
class RateSet:
    """Funding, repo and collateral rates (lend ``_plus`` / borrow ``_minus``)
    plus the public discount rate ``r_D``; all continuous per-year decimals."""

    r_f_plus: float
    r_f_minus: float
    r_r_plus: float
    r_r_minus: float
    r_c_plus: float
    r_c_minus: float
    r_D: float

    @classmethod
    def flat(cls, r: float) -> "RateSet":
        return cls(r, r, r, r, r, r, r)

    @classmethod
    def piterbarg(cls, r_D: float, r_f: float, r_c: float) -> "RateSet":
        """Symmetric funding/collateral rates with repo rate equal to ``r_D``."""
        return cls(r_f, r_f, r_D, r_D, r_c, r_c, r_D)

    @property
    def is_piterbarg(self) -> bool:
        return (
            self.r_f_plus == self.r_f_minus
            and self.r_c_plus == self.r_c_minus
            and self.r_r_plus == self.r_r_minus == self.r_D
        )


@dataclass(frozen=True)
class CreditParams:
    """Default model of the investor (I) and counterparty (C).

    Physical intensities ``h_*_P`` and bond return rates ``r_*`` define the
    valuation-measure intensities ``h_Q = r + h_P - r_D``. Alternatively the
    Q-intensities can be given directly; the missing quantities are then
    back-solved by :class:`MarketParams`. ``default_free=True`` switches the
    default model off entirely (no risky bonds are traded).
    """

    h_I_P: float | None = None
    h_C_P: float | None = None
    r_I: float | None = None
    r_C: float | None = None
    L_I: float = 0.0
    L_C: float = 0.0
    h_I_Q: float | None = None
    h_C_Q: float | None = None
    default_free: bool = False

    def __post_init__(self):
        _check_finite(self)
        for name in ("L_I", "L_C"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("h_I_P", "h_C_P"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative, got {v}")

    @classmethod
    def none(cls) -> "CreditParams":
        return cls(default_free=True)


@dataclass(frozen=True)
class EquityParams:
    S0: float
    sigma: float
    mu: float = 0.0

    def __post_init__(self):
        _check_finite(self)
        if self.S0 <= 0:
            raise ValueError(f"S0 must be positive, got {self.S0}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class MarketParams:
    rates: RateSet
    credit: CreditParams
    equity: EquityParams
    alpha: float = 0.0

    def __post_init__(self):
        _check_finite(self.rates)
        if not math.isfinite(self.alpha):
            raise NonFiniteParameterError(f"alpha is not finite: {self.alpha!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "credit", _resolve_credit(self.credit, self.rates.r_D))

    def with_updates(self, **changes) -> "MarketParams":
        """Return a copy with nested fields replaced, e.g. ``r_f=0.08`` or ``h_I_Q=0.2``.

        ``r_f``, ``r_r`` and ``r_c`` set both the lend and borrow side.
        """
        rates = {}
        credit = {}
        equity = {}
        top = {}
        for key, value in changes.items():
            if key in ("r_f", "r_r", "r_c"):
                rates[key + "_plus"] = value
                rates[key + "_minus"] = value
            elif key in _RATE_FIELDS:
                rates[key] = value
            elif key in _CREDIT_FIELDS:
                credit[key] = value
            elif key in _EQUITY_FIELDS:
                equity[key] = value
            elif key == "alpha":
                top[key] = value
            else:
                raise KeyError(f"unknown market parameter {key!r}")
        credit_obj = self.credit
        if credit:
            # a Q-intensity override must re-derive the bond return rate
            if "h_I_Q" in credit and "r_I" not in credit:
                credit.setdefault("r_I", None)
                credit.setdefault("h_I_P", None)
            if "h_C_Q" in credit and "r_C" not in credit:
                credit.setdefault("r_C", None)
                credit.setdefault("h_C_P", None)
            credit_obj = replace(self.credit, **credit)
        return MarketParams(
            rates=replace(self.rates, **rates),
            credit=credit_obj,
            equity=replace(self.equity, **equity),
            alpha=top.get("alpha", self.alpha),
        )

    @property
    def default_free(self) -> bool:
        return self.credit.default_free


_RATE_FIELDS = {f.name for f in fields(RateSet)}
_CREDIT_FIELDS = {f.name for f in fields(CreditParams)}
_EQUITY_FIELDS = {f.name for f in fields(EquityParams)}


def _resolve_credit(credit: CreditParams, r_D: float) -> CreditParams:
    if credit.default_free:
        return credit
    updates = {}
    for party in ("I", "C"):
        hq = getattr(credit, f"h_{party}_Q")
        hp = getattr(credit, f"h_{party}_P")
        r = getattr(credit, f"r_{party}")
        if hq is not None:
            if hp is None:
                hp = hq
            if r is None:
                r = r_D + hq - hp
        else:
            if hp is None or r is None:
                raise ValueError(
                    f"credit for party {party} needs either h_{party}_Q or both h_{party}_P and r_{party}"
                )
        updates[f"h_{party}_P"] = hp
        updates[f"r_{party}"] = r
    return replace(credit, **updates)


@dataclass(frozen=True)
class Violation:
    id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def ids(self) -> set[str]:
        return {v.id for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "all rate conditions hold"
        return "\n".join(f"{v.id}: {v.message}" for v in self.violations)


# Stable identifiers of the rate inequalities, in report order.
REPO_LEND_LE_FUND_LEND = "r_r_plus<=r_f_plus"
FUND_LEND_LE_REPO_BORROW = "r_f_plus<=r_r_minus"
FUND_LEND_LE_FUND_BORROW = "r_f_plus<=r_f_minus"
INVESTOR_BOND_RETURN = "max(r_f_plus,r_D)<r_I+h_I_P"
COUNTERPARTY_BOND_RETURN = "max(r_f_plus,r_D)<r_C+h_C_P"
COLLATERAL_LE_FUND_BORROW = "max(r_c_plus,r_c_minus)<=r_f_minus"
FUND_BORROW_LE_BOND_RETURN = "r_f_minus<=min(r_I+h_I_P,r_C+h_C_P)"
REPO_LEND_LE_FUND_BORROW = "r_r_plus<=r_f_minus"

CONDITION_IDS = (
    REPO_LEND_LE_FUND_LEND,
    FUND_LEND_LE_REPO_BORROW,
    FUND_LEND_LE_FUND_BORROW,
    INVESTOR_BOND_RETURN,
    COUNTERPARTY_BOND_RETURN,
    COLLATERAL_LE_FUND_BORROW,
    FUND_BORROW_LE_BOND_RETURN,
    REPO_LEND_LE_FUND_BORROW,
)


def validate(params: MarketParams) -> ValidationReport:
    """Check the no-arbitrage rate inequalities.

    Returns a report listing every violated inequality by a stable id (see
    ``CONDITION_IDS``). Bond-return conditions are skipped in default-free
    mode since no risky bonds exist there.
    """
    r = params.rates
    _check_finite(r)
    _check_finite(params.credit)
    out: list[Violation] = []

    def check(ok: bool, cid: str, msg: str) -> None:
        if not ok:
            out.append(Violation(cid, msg))

    check(r.r_r_plus <= r.r_f_plus, REPO_LEND_LE_FUND_LEND,
          f"repo lending rate {r.r_r_plus} exceeds funding lending rate {r.r_f_plus}")
    check(r.r_f_plus <= r.r_r_minus, FUND_LEND_LE_REPO_BORROW,
          f"funding lending rate {r.r_f_plus} exceeds repo borrowing rate {r.r_r_minus}")
    check(r.r_f_plus <= r.r_f_minus, FUND_LEND_LE_FUND_BORROW,
          f"funding lending rate {r.r_f_plus} exceeds funding borrowing rate {r.r_f_minus}")
    c = params.credit
    if not c.default_free:
        ret_I = c.r_I + c.h_I_P
        ret_C = c.r_C + c.h_C_P
        floor = max(r.r_f_plus, r.r_D)
        check(floor < ret_I, INVESTOR_BOND_RETURN,
              f"investor bond return {ret_I} does not exceed max(r_f_plus, r_D) = {floor}")
        check(floor < ret_C, COUNTERPARTY_BOND_RETURN,
              f"counterparty bond return {ret_C} does not exceed max(r_f_plus, r_D) = {floor}")
    check(max(r.r_c_plus, r.r_c_minus) <= r.r_f_minus, COLLATERAL_LE_FUND_BORROW,
          f"collateral rate exceeds funding borrow rate {r.r_f_minus}")
    if not c.default_free:
        cap = min(c.r_I + c.h_I_P, c.r_C + c.h_C_P)
        check(r.r_f_minus <= cap, FUND_BORROW_LE_BOND_RETURN,
              f"funding borrow rate {r.r_f_minus} exceeds the lower bond return {cap}")
    check(r.r_r_plus <= r.r_f_minus, REPO_LEND_LE_FUND_BORROW,
          f"repo lending rate {r.r_r_plus} exceeds funding borrowing rate {r.r_f_minus}")
    return ValidationReport(tuple(out))


def risk_neutral_intensities(params: MarketParams) -> tuple[float, float]:
    """Valuation-measure default intensities ``(h_I_Q, h_C_Q)``.

    Direct overrides win; otherwise ``h_Q = r + h_P - r_D``. Default-free
    markets return ``(0.0, 0.0)``.
    """
    c = params.credit
    if c.default_free:
        return 0.0, 0.0
    out = []
    for party, name in (("I", "investor"), ("C", "counterparty")):
        hq = getattr(c, f"h_{party}_Q")
        if hq is None:
            hq = getattr(c, f"r_{party}") + getattr(c, f"h_{party}_P") - params.rates.r_D
        if not hq > 0:
            raise IntensityError(f"{name} risk-neutral intensity h_{party}_Q = {hq} is not positive")
        out.append(float(hq))
    return out[0], out[1]
