"""Experiment harness: regime sampling, bidder trials on common streams, suites, regret sweeps."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .benchmarks import BudgetPacing, Conserv, Pacing, ROIPacing
from .core import BuyerParams, MarketModel, RandomSource, as_generator, make_market
from .ctbr import CTBR, ConfidenceSchedule, LearnerConfig
from .hindsight import opt_from_counts, solve_threshold
from .runs import RunRecord, draw_types, simulate

SLACK_TOL = 1e-9
MAX_REJECTIONS = 100_000


class Regime(str, Enum):
    ROI = "roi"
    BUDGET = "budget"
    ALPHA = "alpha"


# (gamma, rho) per regime at alpha = 1
REGIME_PARAMS = {
    Regime.BUDGET: (1.2, 0.05),
    Regime.ROI: (2.1, 0.4),
    Regime.ALPHA: (1.2, 0.4),
}
DEFAULT_ALPHA = 1.0

BIDDERS = ("ctbr", "conserv", "budget-pacing", "roi-pacing", "pacing", "known-p", "never")
DEFAULT_ROSTER = ("ctbr", "conserv", "budget-pacing", "roi-pacing", "pacing")


def grid_support(levels=(0.2, 0.4, 0.6, 0.8, 1.0)) -> list[tuple[float, float]]:
    """One (value, cost) pair per distinct ratio on levels x levels.

    Pairs sharing a ratio are merged into the representative with the smallest
    value; 5 levels give 19 types.
    """
    rep: dict[Fraction, tuple[float, float]] = {}
    for v in levels:
        for d in levels:
            key = Fraction(v).limit_denominator(10**6) / Fraction(d).limit_denominator(10**6)
            if key not in rep or v < rep[key][0]:
                rep[key] = (v, d)
    return [rep[k] for k in sorted(rep, reverse=True)]


def regime_params(regime: Regime | str, alpha: float = DEFAULT_ALPHA) -> BuyerParams:
    gamma, rho = REGIME_PARAMS[Regime(regime)]
    return BuyerParams(alpha=alpha, gamma=gamma, rho=rho)


def classify_regime(market: MarketModel, params: BuyerParams) -> Regime | None:
    """ROI-binding, budget-binding, or both slack at the optimum for the true p.

    Returns None when both constraints bind.
    """
    sol = solve_threshold(market.probs, params.alpha, params.gamma, params.rho, market)
    scale = 1.0 + params.rho + float(np.dot(market.probs, market.costs))
    roi_tight = sol.roi_slack <= SLACK_TOL * scale
    budget_tight = sol.budget_slack <= SLACK_TOL * scale
    if roi_tight and budget_tight:
        return None
    if roi_tight:
        return Regime.ROI
    if budget_tight:
        return Regime.BUDGET
    return Regime.ALPHA


def sample_regime_instance(regime: Regime | str, params: BuyerParams, support, rng,
                           max_attempts: int = MAX_REJECTIONS) -> MarketModel:
    """Uniform(0,1) entries rescaled to the simplex, rejected until the regime matches."""
    regime = Regime(regime)
    gen = as_generator(rng)
    base = make_market(support, np.full(len(support), 1.0 / len(support)))
    for _ in range(max_attempts):
        p = gen.random(base.K)
        market = base.with_probs(p / p.sum())
        if classify_regime(market, params) is regime:
            return market
    raise RuntimeError(f"no {regime.value}-dominant instance after {max_attempts} draws")


@dataclass(frozen=True)
class BidderSpec:
    kind: str
    learner: str = "ee"
    schedule: str = "power"
    exponent: float = 1.0
    eta: float | None = None
    hard_stop: bool | None = None
    dual_init: float = 0.0
    dual_cap: float = 10.0
    dual_step: float | None = None

    def __post_init__(self):
        if self.kind not in BIDDERS:
            raise ValueError(f"unknown bidder {self.kind!r}; expected one of {BIDDERS}")

    @property
    def label(self) -> str:
        if self.kind == "ctbr":
            return f"ctbr-{self.learner}"
        return self.kind

    @property
    def stops_on_budget(self) -> bool:
        if self.hard_stop is not None:
            return self.hard_stop
        return self.kind in ("conserv", "budget-pacing", "roi-pacing", "pacing")

    def build(self, market: MarketModel, params: BuyerParams, T: int):
        if self.kind == "ctbr":
            learner = LearnerConfig(self.learner, horizon=T, eta=self.eta)
            return CTBR(market, params, learner, ConfidenceSchedule(self.schedule, self.exponent, self.eta), T)
        if self.kind == "conserv":
            return Conserv(params)
        if self.kind == "known-p":
            return KnownThreshold(market, params)
        if self.kind == "never":
            return NeverBid()
        cls = {"budget-pacing": BudgetPacing, "roi-pacing": ROIPacing, "pacing": Pacing}[self.kind]
        return cls(params, T, step=self.dual_step, lambda_cap=self.dual_cap, mu_cap=self.dual_cap,
                   lambda_init=self.dual_init, mu_init=self.dual_init)


def parse_bidder(name: str, **overrides) -> BidderSpec:
    """'ctbr-ee', 'ctbr-sgd-constant', 'pacing', ... -> BidderSpec."""
    if name.startswith("ctbr"):
        learner = name[5:] or overrides.pop("learner", "ee")
        return BidderSpec("ctbr", learner=learner, **overrides)
    return BidderSpec(name, **overrides)


class KnownThreshold:
    """Threshold bidding with the optimal (J, q) for the true distribution."""

    def __init__(self, market: MarketModel, params: BuyerParams):
        from .ctbr import threshold_bid

        sol = solve_threshold(market.probs, params.alpha, params.gamma, params.rho, market)
        self.market, self.head, self.remainder = market, sol.head, sol.remainder
        self._bid = threshold_bid

    def bid(self, v, rng):
        return self._bid(v, self.head, self.remainder, self.market, rng)

    def observe(self, v, d, won):
        pass


class NeverBid:
    def bid(self, v, rng=None):
        return 0.0

    def observe(self, v, d, won):
        pass


@dataclass
class RunMetrics:
    bidder: str
    normalized_utility: float
    utility: float
    spend: float
    roi_ratio: float | None
    roi_balance: float
    depletion: np.ndarray
    regret: float
    opt: float
    roi_ok: bool
    budget_ok: bool
    record: RunRecord | None = field(default=None, repr=False)

    @property
    def final_depletion(self) -> float:
        return float(self.depletion[-1]) if len(self.depletion) else 0.0


def metrics_for(record: RunRecord, market: MarketModel, params: BuyerParams, label: str) -> RunMetrics:
    T = record.T
    U = solve_threshold(market.probs, params.alpha, params.gamma, params.rho, market).objective
    counts = np.bincount(record.types, minlength=market.K)
    opt = opt_from_counts(counts, market, params, T)
    util = record.total_utility
    spend = record.total_spend
    return RunMetrics(
        bidder=label,
        normalized_utility=(util / T) / U if U > 0 else math.nan,
        utility=util, spend=spend,
        roi_ratio=record.total_value / spend if spend > 0 else None,
        roi_balance=record.total_roi_balance,
        depletion=np.cumsum(record.payment) / (params.rho * T),
        regret=opt - util, opt=opt,
        roi_ok=record.total_roi_balance >= 0,
        budget_ok=spend <= params.rho * T * (1 + 1e-12),
        record=record,
    )


def run_bidder_trial(market: MarketModel, params: BuyerParams, spec: BidderSpec | str, T: int,
                     rng: RandomSource, *, types: np.ndarray | None = None) -> RunMetrics:
    """Run one bidder on one stream. Arrivals come from ``rng.child(0)`` unless supplied,
    bid randomness from ``rng.child(1)``, so bidders sharing ``rng`` share the stream."""
    if isinstance(spec, str):
        spec = parse_bidder(spec)
    if types is None:
        types = draw_types(market, T, rng.child(0))
    bidder = spec.build(market, params, T)
    cap = params.rho * T if spec.stops_on_budget else None
    record = simulate(bidder, market, params, types, rng.child(1), budget_cap=cap)
    return metrics_for(record, market, params, spec.label)


@dataclass(frozen=True)
class ScenarioConfig:
    regimes: tuple[str, ...] = ("roi", "budget", "alpha")
    alpha: float = DEFAULT_ALPHA
    instances: int = 10
    T: int = 10_000
    bidders: tuple[str, ...] = DEFAULT_ROSTER
    schedule: str = "power"
    exponent: float = 1.0
    seed: int = 0
    dual_init: float = 0.0
    dual_cap: float = 10.0

    def specs(self) -> list[BidderSpec]:
        out = []
        for name in self.bidders:
            if name.startswith("ctbr"):
                out.append(parse_bidder(name, schedule=self.schedule, exponent=self.exponent))
            else:
                out.append(parse_bidder(name, dual_init=self.dual_init, dual_cap=self.dual_cap))
        return out


@dataclass
class SuiteResult:
    rows: list[dict]
    runs: dict[tuple[str, int, str], RunMetrics]
    markets: dict[tuple[str, int], MarketModel]


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return math.nan, math.nan, math.nan
    q25, med, q75 = np.percentile(x, [25, 50, 75])
    return float(med), float(q25), float(q75)


def run_benchmark_suite(scenario: ScenarioConfig) -> SuiteResult:
    """Every bidder on the same stream per (regime, instance); aggregate per bidder and regime."""
    specs = scenario.specs()
    runs: dict[tuple[str, int, str], RunMetrics] = {}
    markets = {}
    rows = []
    for r_idx, regime in enumerate(scenario.regimes):
        regime = Regime(regime)
        params = regime_params(regime, scenario.alpha)
        support = grid_support()
        for i in range(scenario.instances):
            src = RandomSource(scenario.seed, stream=1000 * r_idx + i)
            market = sample_regime_instance(regime, params, support, src.child(2))
            markets[(regime.value, i)] = market
            types = draw_types(market, scenario.T, src.child(0))
            for spec in specs:
                runs[(regime.value, i, spec.label)] = run_bidder_trial(
                    market, params, spec, scenario.T, src, types=types)
        for spec in specs:
            ms = [runs[(regime.value, i, spec.label)] for i in range(scenario.instances)]
            med, q25, q75 = _quantiles([m.normalized_utility for m in ms])
            rows.append({
                "bidder": spec.label,
                "regime": regime.value,
                "median_norm_utility": med,
                "q25": q25,
                "q75": q75,
                "roi_attained_frac": float(np.mean([m.roi_ok for m in ms])),
                "final_depletion": float(np.median([m.final_depletion for m in ms])),
            })
    return SuiteResult(rows=rows, runs=runs, markets=markets)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class SweepResult:
    horizons: list[int]
    mean_regret: list[float]
    stderr: list[float]
    slope: float


def regret_scaling_sweep(market: MarketModel, params: BuyerParams, spec: BidderSpec | str,
                         horizons: Sequence[int], seeds: int = 20, base_seed: int = 0) -> SweepResult:
    """Mean regret per horizon and the fitted log-log slope over positive means."""
    if isinstance(spec, str):
        spec = parse_bidder(spec)
    if len(horizons) < 3 or seeds < 20:
        warnings.warn("slope fit wants at least 3 horizons and 20 seeds per horizon", stacklevel=2)
    means, errs = [], []
    for h_idx, T in enumerate(horizons):
        regrets = [run_bidder_trial(market, params, spec, T, RandomSource(base_seed, stream=h_idx * 10_000 + s)).regret
                   for s in range(seeds)]
        means.append(float(np.mean(regrets)))
        errs.append(float(np.std(regrets, ddof=1) / math.sqrt(seeds)) if seeds > 1 else math.nan)
    pos = [(T, m) for T, m in zip(horizons, means) if m > 0]
    if len(pos) < len(horizons):
        warnings.warn("nonpositive mean regrets excluded from the slope fit", stacklevel=2)
    slope = loglog_slope(*zip(*pos)) if len(pos) >= 2 else math.nan
    return SweepResult(list(horizons), means, errs, slope)
