"""Seller side: revenue curve, price classes, bell-shape check, and binary-search pricing."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import (
    BuyerParams,
    MarketModel,
    ThresholdVector,
    as_generator,
    make_market,
)
from .ctbr import CTBR, ConfidenceSchedule, LearnerConfig
from .hindsight import solve_threshold

CLASS_TOL = 1e-9


class PriceClass(str, Enum):
    NON_BINDING = "NonBinding"
    BUDGET_BINDING = "BudgetBinding"
    ROI_BINDING = "ROIBinding"
    BOTH_BINDING = "BudgetAndROIBinding"


class AssumptionWarning(UserWarning):
    """Pricing model violates the nontriviality assumptions."""


@dataclass(frozen=True, eq=False)
class PricingModel:
    valuations: np.ndarray
    probs: np.ndarray
    prices: np.ndarray
    gamma: float
    rho: float

    def __post_init__(self):
        V = np.asarray(self.valuations, dtype=float)
        g = np.asarray(self.probs, dtype=float)
        D = np.asarray(self.prices, dtype=float)
        if V.ndim != 1 or g.shape != V.shape:
            raise ValueError("valuations and probs must be equal-length vectors")
        if np.any(np.diff(V) >= 0) or np.any(np.diff(D) >= 0):
            raise ValueError("valuations and prices must be strictly decreasing")
        if np.any(V <= 0) or np.any(D <= 0):
            raise ValueError("valuations and prices must be positive")
        if np.any(g < 0) or abs(g.sum() - 1) > 1e-9:
            raise ValueError("valuation distribution must lie on the simplex")
        if not (self.gamma > 0 and self.rho > 0):
            raise ValueError("gamma and rho must be positive")
        object.__setattr__(self, "valuations", V)
        object.__setattr__(self, "probs", g)
        object.__setattr__(self, "prices", D)

    @property
    def N(self) -> int:
        return len(self.valuations)

    @property
    def M(self) -> int:
        return len(self.prices)

    @property
    def params(self) -> BuyerParams:
        return BuyerParams(alpha=0.0, gamma=self.gamma, rho=self.rho)

    def assumption_violations(self) -> list[str]:
        """Human-readable list of nontriviality assumption failures (empty if none)."""
        V, g, D = self.valuations, self.probs, self.prices
        out = []
        for d in map(float, D):
            if not V[-1] - self.gamma * d < 0:
                out.append(f"d={d!r}: lowest valuation is not ROI-negative")
            if not V[0] - self.gamma * d > 0:
                out.append(f"d={d!r}: highest valuation is not ROI-positive")
            if abs(np.dot(V - self.gamma * d, g)) <= 1e-12:
                out.append(f"d={d!r}: mean ROI margin is zero")
        if not D.max() > self.rho:
            out.append("largest price does not exceed rho")
        if not D.min() < self.rho:
            out.append("smallest price is not below rho")
        return out

    def nontrivial_price(self, d: float) -> bool:
        """Per-price part of the assumptions: some valuation clears the ROI target, some does not."""
        V = self.valuations
        return V[0] - self.gamma * d > 0 and V[-1] - self.gamma * d < 0


@dataclass(frozen=True)
class RevenuePoint:
    price: float
    solution: np.ndarray
    revenue: float
    classification: PriceClass
    roi_slack: float
    budget_slack: float


def six_value_model(gamma: float = 1.3) -> PricingModel:
    """Six valuations, 21 prices from 0.5 down to 0.1, rho = 0.2."""
    return PricingModel(
        valuations=np.array([0.6, 0.5, 0.4, 0.3, 0.2, 0.1]),
        probs=np.array([0.1, 0.1, 0.2, 0.1, 0.2, 0.3]),
        prices=np.round(np.linspace(0.5, 0.1, 21), 10),
        gamma=gamma, rho=0.2,
    )


def price_market(model: PricingModel, d: float) -> MarketModel:
    """Buyer market at a fixed price: types (V^n, d), already in ratio order."""
    keep = model.probs > 0
    return make_market([(v, d) for v in model.valuations[keep]], model.probs[keep])


def u_of_d(model: PricingModel, d: float):
    """Buyer's optimal value U(d) and threshold solution x_d (length N)."""
    if not d > 0:
        raise ValueError("price must be positive")
    keep = model.probs > 0
    market = price_market(model, d)
    sol = solve_threshold(model.probs[keep], 0.0, model.gamma, model.rho, market)
    x = np.zeros(model.N)
    x[keep] = sol.x
    return sol.objective, x


def _slacks(model: PricingModel, d: float, x: np.ndarray):
    g, V = model.probs, model.valuations
    roi = float(np.dot(g * (V - model.gamma * d), x))
    budget = float(model.rho - d * np.dot(g, x))
    return roi, budget


def revenue_point(model: PricingModel, d: float) -> RevenuePoint:
    _, x = u_of_d(model, d)
    roi, budget = _slacks(model, d, x)
    return RevenuePoint(price=float(d), solution=x, revenue=float(d * np.dot(model.probs, x)),
                        classification=_classify(roi, budget), roi_slack=roi, budget_slack=budget)


def _classify(roi_slack: float, budget_slack: float) -> PriceClass:
    roi_tight = roi_slack <= CLASS_TOL
    budget_tight = budget_slack <= CLASS_TOL
    if roi_tight and budget_tight:
        return PriceClass.BOTH_BINDING
    if roi_tight:
        return PriceClass.ROI_BINDING
    if budget_tight:
        return PriceClass.BUDGET_BINDING
    return PriceClass.NON_BINDING


def revenue_pi(model: PricingModel, d: float) -> float:
    return revenue_point(model, d).revenue


def classify_price(model: PricingModel, d: float) -> PriceClass:
    if model.assumption_violations():
        warnings.warn("pricing model violates the nontriviality assumptions", AssumptionWarning, stacklevel=2)
    return revenue_point(model, d).classification


def revenue_curve(model: PricingModel) -> list[RevenuePoint]:
    """Revenue points in the model's price order (decreasing price)."""
    return [revenue_point(model, d) for d in model.prices]


def min_revenue_gap(model: PricingModel) -> float:
    pis = np.array([p.revenue for p in revenue_curve(model)])
    diffs = np.abs(pis[:, None] - pis[None, :])
    diffs = diffs[diffs > 1e-12]
    return float(diffs.min()) if diffs.size else math.inf


@dataclass
class BellShapeReport:
    passed: bool
    classes: list[PriceClass]
    revenues: list[float]
    prices: list[float]
    first_budget: int | None
    first_roi: int | None
    excluded: list[float] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def plateau(self) -> list[float]:
        return [p for p, c in zip(self.prices, self.classes) if c == PriceClass.BUDGET_BINDING]

    def summary(self) -> str:
        lines = [f"bell-shape: {'pass' if self.passed else 'FAIL'}"]
        plateau = self.plateau
        lines.append("plateau: empty" if not plateau else
                     f"plateau: {len(plateau)} prices in [{min(plateau)!r}, {max(plateau)!r}]")
        if self.first_budget is not None:
            lines.append(f"first budget-binding price: {self.prices[self.first_budget]!r}")
        if self.first_roi is not None:
            lines.append(f"first ROI-binding price: {self.prices[self.first_roi]!r}")
        if self.excluded:
            lines.append(f"excluded trivial prices: {self.excluded}")
        lines += [f"violation: {v}" for v in self.violations]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def bell_shape_check(model: PricingModel) -> BellShapeReport:
    """Walk prices upward and verify increase / plateau / decrease.

    Prices where no valuation (or every valuation) clears the ROI target are
    outside the nontriviality assumption; they are listed in ``excluded`` and
    skipped. Transition indices refer to the increasing-price order of the
    remaining prices.
    """
    warns = model.assumption_violations()
    order = np.argsort(model.prices)
    kept = [float(model.prices[i]) for i in order if model.nontrivial_price(model.prices[i])]
    excluded = [float(model.prices[i]) for i in order if not model.nontrivial_price(model.prices[i])]
    points = [revenue_point(model, d) for d in kept]
    classes = [p.classification for p in points]
    pis = [p.revenue for p in points]
    violations = []

    nb = [i for i, c in enumerate(classes) if c == PriceClass.NON_BINDING]
    for i, j in zip(nb, nb[1:]):
        if not pis[i] < pis[j]:
            violations.append(f"non-binding revenue not increasing: pi({kept[i]!r})={pis[i]!r} "
                              f">= pi({kept[j]!r})={pis[j]!r}")

    budgetish = (PriceClass.BUDGET_BINDING, PriceClass.BOTH_BINDING)
    roiish = (PriceClass.ROI_BINDING, PriceClass.BOTH_BINDING)
    first_budget = next((i for i, c in enumerate(classes) if c in budgetish), None)
    if first_budget is not None:
        for j in range(first_budget + 1, len(classes)):
            if classes[j] == PriceClass.NON_BINDING:
                violations.append(f"non-binding price {kept[j]!r} above budget-binding {kept[first_budget]!r}")
    first_roi = next((i for i, c in enumerate(classes) if c in roiish), None)
    if first_roi is not None:
        for j in range(first_roi + 1, len(classes)):
            if classes[j] not in roiish:
                violations.append(f"price {kept[j]!r} above ROI-binding {kept[first_roi]!r} is {classes[j].value}")
            if not pis[j] < pis[j - 1]:
                violations.append(f"ROI-binding revenue not decreasing: pi({kept[j - 1]!r})={pis[j - 1]!r} "
                                  f"<= pi({kept[j]!r})={pis[j]!r}")
    return BellShapeReport(passed=not violations, classes=classes, revenues=pis, prices=kept,
                           first_budget=first_budget, first_roi=first_roi, excluded=excluded,
                           violations=violations, warnings=warns)


# ---------------------------------------------------------------------------
# buyers seen by the seller

def clairvoyant_buyer_step(model: PricingModel, d: float, rng) -> int:
    """Take with probability pi(d)/d, the optimal buyer's take rate."""
    prob = revenue_pi(model, d) / d
    return int(as_generator(rng).random() < prob)


class ClairvoyantBuyer:
    """Callback buyer ``(t, price) -> take`` with cached take rates."""

    def __init__(self, model: PricingModel, rng):
        self.model = model
        self.gen = as_generator(rng)
        self._rates: dict[float, float] = {}

    def __call__(self, t: int, price: float) -> int:
        rate = self._rates.get(price)
        if rate is None:
            rate = self._rates[price] = revenue_pi(self.model, price) / price
        return int(self.gen.random() < rate)


def posted_price_market(model: PricingModel) -> MarketModel:
    """Buyer support V x D for posted prices. Equal ratios are kept (cheaper first);
    the posted-price buyer acts on type indices, so ties are harmless."""
    pairs, probs = [], []
    for n, v in enumerate(model.valuations):
        for d in model.prices:
            pairs.append((v, d))
            probs.append(model.probs[n] / model.M)
    return make_market(pairs, probs, allow_ties=True)


class CTBRPostedPriceBuyer:
    """CTBR buyer facing posted prices: sees (v_t, d_t), takes per its threshold, learns."""

    def __init__(self, model: PricingModel, T: int, rng, *, learner: LearnerConfig | None = None,
                 schedule: ConfidenceSchedule | None = None):
        self.model = model
        self.market = posted_price_market(model)
        self.gen = as_generator(rng)
        learner = learner or LearnerConfig("sgd-constant", horizon=T)
        self.bidder = CTBR(self.market, model.params, learner, schedule or ConfidenceSchedule("power", 1.0), T=T)

    def __call__(self, t: int, price: float) -> int:
        v = float(self.model.valuations[self.gen.choice(self.model.N, p=self.model.probs)])
        k = self.market.index_of(v, price)
        z = self.bidder.take(k, self.gen)
        self.bidder.update(k)
        return int(z)


# ---------------------------------------------------------------------------
# seller algorithm

def exploration_budget(M: int) -> int:
    """Upper bound on exploration episodes: 2 (floor(log2 M) + 1)."""
    return 2 * (int(math.floor(math.log2(M))) + 1)


@dataclass
class BinarySearchState:
    L: int
    R: int
    med: int
    incumbent: int
    recorded: dict[int, float] = field(default_factory=dict)
    episode_length: int = 1
    phase: str = "explore"
    iterations: int = 1
    episodes: int = 0


@dataclass
class PricingRun:
    prices: np.ndarray
    takes: np.ndarray
    phases: np.ndarray
    incumbent: int
    state: BinarySearchState
    explored_order: list[int]

    @property
    def revenue(self) -> np.ndarray:
        return self.prices * self.takes

    @property
    def exploit_mask(self) -> np.ndarray:
        return self.phases == "exploit"


def binary_search_pricing(prices, buyer: Callable[[int, float], int], E: int, T: int) -> PricingRun:
    """Episodic binary-search exploration, then exploit the best recorded price.

    ``prices`` must be strictly decreasing; indices in the returned state are
    1-based positions into it. The seller only sees the buyer's take decisions.
    """
    D = np.asarray(prices, dtype=float)
    M = len(D)
    if E < 1:
        raise ValueError("episode length must be >= 1")
    need = E * exploration_budget(M)
    if T < need:
        raise ValueError(f"horizon {T} too short for exploration; need at least {need}")

    price_log = np.empty(T)
    take_log = np.zeros(T, dtype=np.int64)
    phase_log = np.empty(T, dtype=object)
    t = 0
    order: list[int] = []

    def explore(m: int) -> float:
        nonlocal t
        price = float(D[m - 1])
        taken = 0
        for _ in range(E):
            z = int(buyer(t, price))
            price_log[t], take_log[t], phase_log[t] = price, z, "explore"
            taken += z
            t += 1
        st.episodes += 1
        order.append(m)
        st.recorded[m] = price * taken / E
        return st.recorded[m]

    st = BinarySearchState(L=1, R=M, med=(1 + M) // 2, incumbent=1, episode_length=E)
    explore(1)
    if M > 1:
        explore(M)
    st.incumbent = 1 if st.recorded[1] >= st.recorded.get(M, -math.inf) else M

    def better(a: int, b: int) -> int:
        # argmax over {a, b}; ties keep the incumbent a
        return b if st.recorded[b] > st.recorded[a] else a

    while st.L < st.R:
        st.iterations += 1
        for k in (st.med, st.med + 1):
            if k not in st.recorded:
                explore(k)
        if st.recorded[st.med] < st.recorded[st.med + 1]:
            st.incumbent = better(st.incumbent, st.med + 1)
            st.L = st.med + 1
        else:
            st.incumbent = better(st.incumbent, st.med)
            st.R = st.med - 1
        st.med = (st.L + st.R) // 2

    st.phase = "exploit"
    price = float(D[st.incumbent - 1])
    while t < T:
        z = int(buyer(t, price))
        price_log[t], take_log[t], phase_log[t] = price, z, "exploit"
        t += 1
    return PricingRun(prices=price_log, takes=take_log, phases=phase_log.astype(str),
                      incumbent=st.incumbent, state=st, explored_order=order)


def best_revenue(model: PricingModel) -> float:
    return max(p.revenue for p in revenue_curve(model))


def seller_regret(model: PricingModel, prices, takes) -> float:
    """T max_d pi(d) minus realized revenue."""
    prices = np.asarray(prices, dtype=float)
    takes = np.asarray(takes, dtype=float)
    return len(prices) * best_revenue(model) - float(np.dot(prices, takes))


def default_episode_length(T: int, eps: float | None = None) -> int:
    """E = T^(2/3 + eps) with eps = 1/ln T by default."""
    if eps is None:
        eps = 1.0 / math.log(T)
    return int(math.floor(T ** (2.0 / 3.0 + eps)))
