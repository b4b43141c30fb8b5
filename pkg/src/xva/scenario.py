"""Strict scenario-file parsing and sweep expansion."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .analytic import ClaimSpec
from .bsde import GridConfig
from .market import CreditParams, EquityParams, MarketParams, RateSet

MODES = ("closed_form", "pde", "mc", "crosscheck")
MAX_SWEEP_POINTS = 10_000


class ScenarioError(ValueError):
    """Malformed or unknown content in a scenario file."""


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    n_steps: int = 250
    seed: int = 20240101
    antithetic: bool = False
    resource_cap: int = 50_000_000


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    mode: str = "crosscheck"
    points: tuple[tuple[float, float], ...] = ()
    sweep: tuple[Axis, ...] = ()
    force: bool = False
    rel_tol: float = 5e-3
    se_multiple: float = 3.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"run.mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    market: MarketParams
    claim: ClaimSpec
    grid: GridConfig = field(default_factory=GridConfig)
    mc: McConfig = field(default_factory=McConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def eval_points(self) -> tuple[tuple[float, float], ...]:
        return self.run.points or ((0.0, self.market.equity.S0),)

    def to_dict(self) -> dict:
        m = self.market
        credit = {k: v for k, v in asdict(m.credit).items() if v is not None}
        claim = {"kind": self.claim.kind, "maturity": self.claim.maturity, "quantity": self.claim.quantity}
        if self.claim.strike is not None:
            claim["strike"] = self.claim.strike
        if self.claim.knots:
            claim["knots"] = [list(k) for k in self.claim.knots]
        run = asdict(self.run)
        run["points"] = [list(p) for p in self.run.points]
        run["sweep"] = [{"name": a.name, "values": list(a.values)} for a in self.run.sweep]
        return {
            "rates": asdict(m.rates),
            "credit": credit,
            "equity": asdict(m.equity),
            "collateral": {"alpha": m.alpha},
            "claim": claim,
            "grid": asdict(self.grid),
            "mc": asdict(self.mc),
            "run": run,
        }


_BLOCKS = ("rates", "credit", "equity", "collateral", "claim", "grid", "mc", "run")
_REQUIRED = ("rates", "credit", "equity", "claim")


def _strict(block: str, data, cls, allowed=None, required=()):
    if not isinstance(data, dict):
        raise ScenarioError(f"{block} must be an object")
    names = allowed or {f.name for f in fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ScenarioError(f"unknown key(s) in {block}: {sorted(unknown)}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ScenarioError(f"missing key(s) in {block}: {missing}")
    return data


def _number(block, key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{block}.{key} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ScenarioError(f"{block}.{key} must be an integer, got {value!r}")
    return int(value) if integer else float(value)


def parse_scenario(data: dict) -> ScenarioConfig:
    """Build a scenario from decoded JSON; every block is strictly checked."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - set(_BLOCKS)
    if unknown:
        raise ScenarioError(f"unknown top-level key(s): {sorted(unknown)}")
    missing = [b for b in _REQUIRED if b not in data]
    if missing:
        raise ScenarioError(f"missing block(s): {missing}")
    try:
        rates_d = _strict("rates", data["rates"], RateSet, required=[f.name for f in fields(RateSet)])
        rates = RateSet(**{k: _number("rates", k, v) for k, v in rates_d.items()})
        credit_d = _strict("credit", data["credit"], CreditParams)
        credit = CreditParams(**{k: (v if k == "default_free" else (None if v is None else _number("credit", k, v)))
                                 for k, v in credit_d.items()})
        equity_d = _strict("equity", data["equity"], EquityParams, required=("S0", "sigma"))
        equity = EquityParams(**{k: _number("equity", k, v) for k, v in equity_d.items()})
        coll = _strict("collateral", data.get("collateral", {}), None, allowed={"alpha"})
        alpha = _number("collateral", "alpha", coll.get("alpha", 0.0))
        market = MarketParams(rates, credit, equity, alpha)

        claim_d = _strict("claim", data["claim"], ClaimSpec, required=("kind", "maturity"))
        claim_kw = dict(claim_d)
        if "knots" in claim_kw:
            claim_kw["knots"] = tuple(tuple(_number("claim", "knots", v) for v in k) for k in claim_kw["knots"])
        for key in ("maturity", "strike", "quantity"):
            if key in claim_kw:
                claim_kw[key] = _number("claim", key, claim_kw[key])
        claim = ClaimSpec(**claim_kw)

        grid_d = _strict("grid", data.get("grid", {}), GridConfig)
        grid = GridConfig(**{k: _number("grid", k, v, integer=k in ("n_time", "n_space", "picard_max", "rannacher_steps"))
                             for k, v in grid_d.items()})
        mc_d = _strict("mc", data.get("mc", {}), McConfig)
        mc_kw = {}
        for k, v in mc_d.items():
            if k == "antithetic":
                if not isinstance(v, bool):
                    raise ScenarioError("mc.antithetic must be true or false")
                mc_kw[k] = v
            else:
                mc_kw[k] = _number("mc", k, v, integer=True)
        mc = McConfig(**mc_kw)

        run_d = _strict("run", data.get("run", {}), RunConfig)
        run_kw = dict(run_d)
        if "points" in run_kw:
            run_kw["points"] = tuple((_number("run", "points", p[0]), _number("run", "points", p[1]))
                                     for p in run_kw["points"])
        if "sweep" in run_kw:
            axes = []
            for a in run_kw["sweep"]:
                _strict("run.sweep", a, Axis)
                axes.append(Axis(str(a["name"]), tuple(_number("run.sweep", a["name"], v) for v in a["values"])))
            run_kw["sweep"] = tuple(axes)
        if "force" in run_kw and not isinstance(run_kw["force"], bool):
            raise ScenarioError("run.force must be true or false")
        run = RunConfig(**run_kw)
    except ScenarioError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ScenarioError(str(exc)) from exc
    return ScenarioConfig(market, claim, grid, mc, run)


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
    return parse_scenario(data)


def _reject_constant(name):
    raise ScenarioError(f"non-finite literal {name} is not allowed")


def parse_axis(spec: str) -> Axis:
    """``name=a:b:step`` (inclusive range) or ``name=v1,v2,...``."""
    if "=" not in spec:
        raise ScenarioError(f"axis {spec!r} must look like name=a:b:step or name=v1,v2")
    name, body = spec.split("=", 1)
    name = name.strip()
    try:
        if ":" in body:
            a, b, step = (float(p) for p in body.split(":"))
            if not all(math.isfinite(v) for v in (a, b, step)) or step <= 0 or b < a:
                raise ScenarioError(f"axis {name}: need finite a <= b and step > 0")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            if n > MAX_SWEEP_POINTS:
                raise ScenarioError(f"axis {name} has {n} points, more than {MAX_SWEEP_POINTS}")
            values = tuple(round(a + i * step, 12) for i in range(n))
        else:
            values = tuple(float(v) for v in body.split(","))
    except ValueError as exc:
        raise ScenarioError(f"axis {name}: {exc}") from exc
    if not all(math.isfinite(v) for v in values):
        raise ScenarioError(f"axis {name}: values must be finite")
    return Axis(name, values)


CLAIM_AXES = ("strike", "maturity", "quantity")


def sweep_points(axes) -> list[dict]:
    """Cartesian product in lexicographic axis order."""
    total = 1
    for a in axes:
        total *= len(a.values)
    if total > MAX_SWEEP_POINTS:
        raise ScenarioError(f"sweep has {total} points, more than {MAX_SWEEP_POINTS}")
    names = [a.name for a in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in axes))]


def apply_point(config: ScenarioConfig, point: dict) -> ScenarioConfig:
    market_kw = {k: v for k, v in point.items() if k not in CLAIM_AXES}
    claim_kw = {k: v for k, v in point.items() if k in CLAIM_AXES}
    try:
        market = config.market.with_updates(**market_kw) if market_kw else config.market
    except KeyError as exc:
        raise ScenarioError(str(exc)) from exc
    claim = replace(config.claim, **claim_kw) if claim_kw else config.claim
    return replace(config, market=market, claim=claim)
