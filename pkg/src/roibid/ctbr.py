"""Conservative threshold-based bidding (CTBR) with pluggable distribution learners."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ALWAYS_WIN,
    BuyerParams,
    DegeneracyWarning,
    MarketModel,
    as_generator,
    threshold,
    tv_min,
)
from .hindsight import kappa
from .runs import RunRecord, draw_types, simulate

LEARNERS = ("ee", "sgd-vanishing", "sgd-constant")
SCHEDULES = ("ee-theory", "sgd-vanishing-theory", "sgd-constant-theory", "power")


# ---------------------------------------------------------------------------
# learners

def project_simplex(u) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    u = np.asarray(u, dtype=float)
    s = np.sort(u)[::-1]
    css = np.cumsum(s) - 1.0
    idx = np.arange(1, len(u) + 1)
    rho = np.flatnonzero(s - css / idx > 0)[-1]
    tau = css[rho] / (rho + 1)
    x = np.maximum(u - tau, 0.0)
    # renormalize away the last ulp so downstream sums stay at 1 within 1e-12
    return x / x.sum()


def learner_update_ee(p_hat: np.ndarray, s: np.ndarray, t: int) -> np.ndarray:
    """Running empirical frequency: (t p_hat + s) / (t + 1)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return (t * p_hat + s) / (t + 1)


def learner_update_sgd(p_hat: np.ndarray, s: np.ndarray, eta: float) -> np.ndarray:
    """Projected SGD step on 0.5 ||p - p_true||^2 with stochastic gradient p_hat - s."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("step size must lie in [0, 1]")
    return project_simplex(p_hat - eta * (p_hat - s))


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "ee"
    horizon: int = 10_000
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in LEARNERS:
            raise ValueError(f"unknown learner {self.kind!r}; expected one of {LEARNERS}")
        if self.kind == "sgd-constant":
            eta = self.constant_eta
            if not 0 < eta < 1:
                raise ValueError("constant step size must lie in (0, 1)")

    @property
    def constant_eta(self) -> float:
        return self.eta if self.eta is not None else self.horizon ** (-2.0 / 3.0)

    def step_size(self, t: int) -> float:
        if self.kind == "sgd-vanishing":
            return 1.0 / t
        return self.constant_eta

    def update(self, p_hat: np.ndarray, s: np.ndarray, t: int) -> np.ndarray:
        if self.kind == "ee":
            return learner_update_ee(p_hat, s, t)
        return learner_update_sgd(p_hat, s, self.step_size(t))


# ---------------------------------------------------------------------------
# confidence schedules

def _loglog(T: int) -> float:
    return math.log(T * math.log(T))


@dataclass(frozen=True)
class ConfidenceSchedule:
    """Confidence radius ell_t. ``exponent`` is used by the power schedule;
    ``eta`` by the constant-step SGD schedule (defaults to T^(-2/3))."""

    kind: str = "power"
    exponent: float = 1.0
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULES}")

    def ell(self, t: int, *, T: int, K: int, d_max: float, w_max: float) -> float:
        if self.kind == "ee-theory":
            return math.sqrt(2 * K * math.log(2 * T) / t)
        if self.kind == "sgd-vanishing-theory":
            return math.sqrt((600 * _loglog(T) + 12) / t)
        if self.kind == "sgd-constant-theory":
            eta = self.eta if self.eta is not None else T ** (-2.0 / 3.0)
            A = math.sqrt(2 + 16 * math.sqrt(_loglog(T)))
            B = 2 * math.sqrt(1 + 72 * _loglog(T))
            return A * (1 - 2 * eta) ** ((t - 1) / 2) + B * math.sqrt(eta)
        return t ** (-self.exponent) / (max(d_max, w_max) * math.sqrt(K))


# ---------------------------------------------------------------------------
# threshold bidding

def threshold_bid(v: float, head: int, remainder: float, market: MarketModel, rng) -> float:
    """Bid v/theta^(head+1) with probability ``remainder``, else v/theta^head.

    theta^0 = +inf gives a zero bid; theta^(K+1) = 0 gives ALWAYS_WIN. Type
    head+1 therefore wins with probability exactly ``remainder``.
    """
    K = market.K
    if not 0 <= head <= K:
        raise ValueError(f"head {head} outside 0..{K}")
    if not 0.0 <= remainder < 1.0:
        raise ValueError(f"remainder {remainder} outside [0, 1)")
    u = as_generator(rng).random()
    k = head + 1 if u < remainder else head
    if k == 0:
        return 0.0
    if k == K + 1:
        return ALWAYS_WIN
    return v / market.ratios[k - 1]


@dataclass
class CTBRState:
    t: int
    p_hat: np.ndarray
    ell: float
    r_hat: int
    b_hat: int
    q_roi_hat: float
    q_budget_hat: float
    head: int
    remainder: float


def conservative_thresholds(p_hat, ell: float, market: MarketModel, params: BuyerParams,
                            k_alpha: int | None = None):
    """Shifted threshold estimates from a distribution estimate.

    Returns (r_hat, b_hat, q_roi_hat, q_budget_hat, head, remainder); the two q
    values are raw (possibly negative), the returned remainder uses their
    positive parts.
    """
    K = market.K
    d = market.costs
    w = market.margins(params.gamma)
    w_bar = float(np.abs(w).max())
    d_bar = float(d.max())
    root_k = math.sqrt(K)
    if k_alpha is None:
        k_alpha = kappa(market, params.alpha)

    roi_sums = np.cumsum(p_hat * w)
    spend_sums = np.cumsum(p_hat * d)

    hits = np.flatnonzero(roi_sums >= -root_k * w_bar * ell)
    r_hat = int(hits[-1]) + 1 if hits.size else 0
    if r_hat == K:
        q_roi = 0.0
    else:
        denom = p_hat[r_hat] * abs(w[r_hat])
        prefix = roi_sums[r_hat - 1] if r_hat else 0.0
        if denom > 0:
            q_roi = (prefix - (root_k + 2) * w_bar * ell) / denom
        else:
            warnings.warn("zero estimated mass at the ROI boundary type", DegeneracyWarning, stacklevel=2)
            q_roi = 0.0

    hits = np.flatnonzero(spend_sums <= params.rho + root_k * d_bar * ell)
    b_hat = int(hits[-1]) + 1 if hits.size else 0
    if b_hat == K:
        q_budget = 0.0
    else:
        denom = p_hat[b_hat] * d[b_hat]
        prefix = spend_sums[b_hat - 1] if b_hat else 0.0
        if denom > 0:
            q_budget = (params.rho - prefix - (root_k + 2) * d_bar * ell) / denom
        else:
            warnings.warn("zero estimated mass at the budget boundary type", DegeneracyWarning, stacklevel=2)
            q_budget = 0.0

    x = tv_min(threshold(K, r_hat, max(q_roi, 0.0)),
               threshold(K, b_hat, max(q_budget, 0.0)),
               threshold(K, k_alpha, 0.0))
    return r_hat, b_hat, float(q_roi), float(q_budget), x.head, x.remainder


class CTBR:
    """CTBR bidder for a known support with an unknown occurrence distribution.

    Implements the ``bid`` / ``observe`` protocol used by :func:`runs.simulate`
    and a ``take`` method for posted-price use where the type is seen first.
    """

    def __init__(self, market: MarketModel, params: BuyerParams, learner: LearnerConfig | None = None,
                 schedule: ConfidenceSchedule | None = None, T: int | None = None):
        self.market = market
        self.params = params
        self.learner = learner or LearnerConfig()
        self.schedule = schedule or ConfidenceSchedule()
        self.T = T if T is not None else self.learner.horizon
        self.k_alpha = kappa(market, params.alpha)
        self._d_max = market.d_max
        self._w_max = market.w_max(params.gamma)
        self.state = self.initial_state()

    def ell(self, t: int) -> float:
        return self.schedule.ell(t, T=self.T, K=self.market.K, d_max=self._d_max, w_max=self._w_max)

    def initial_state(self) -> CTBRState:
        K = self.market.K
        p = np.full(K, 1.0 / K)
        return CTBRState(t=1, p_hat=p, ell=self.ell(1), r_hat=0, b_hat=0,
                         q_roi_hat=0.0, q_budget_hat=0.0, head=min(1, K), remainder=0.0)

    @property
    def head(self) -> int:
        return self.state.head

    @property
    def remainder(self) -> float:
        return self.state.remainder

    def bid(self, v: float, rng) -> float:
        return threshold_bid(v, self.state.head, self.state.remainder, self.market, rng)

    def take_probability(self, k: int) -> float:
        """Win probability the current threshold assigns to 0-based type k."""
        if k < self.state.head:
            return 1.0
        if k == self.state.head:
            return self.state.remainder
        return 0.0

    def take(self, k: int, rng) -> bool:
        return as_generator(rng).random() < self.take_probability(k)

    def observe(self, v: float, d: float, won: bool = False) -> None:
        self.update(self.market.index_of(v, d))

    def update(self, k: int) -> CTBRState:
        """Learner step on observed type k (0-based), then refresh the thresholds."""
        st = self.state
        s = np.zeros(self.market.K)
        s[k] = 1.0
        p_next = self.learner.update(st.p_hat, s, st.t)
        r_hat, b_hat, q_r, q_b, head, rem = conservative_thresholds(
            p_next, st.ell, self.market, self.params, self.k_alpha)
        t = st.t + 1
        self.state = CTBRState(t=t, p_hat=p_next, ell=self.ell(t), r_hat=r_hat, b_hat=b_hat,
                               q_roi_hat=q_r, q_budget_hat=q_b, head=head, remainder=rem)
        return self.state


def ctbr_init(market: MarketModel, params: BuyerParams, learner: LearnerConfig | None = None,
              conf: ConfidenceSchedule | None = None, T: int | None = None) -> CTBR:
    return CTBR(market, params, learner, conf, T)


def ctbr_step(bidder: CTBR, v: float, d: float, rng):
    """One period: bid from the current state, resolve the auction, update.

    Returns (bid, won, new_state).
    """
    bid = bidder.bid(v, rng)
    won = bid > 0 and bid >= d * (1.0 - 1e-12)
    bidder.observe(v, d, won)
    return bid, won, replace(bidder.state)


def ctbr_run(market: MarketModel, params: BuyerParams, learner: LearnerConfig | None = None,
             conf: ConfidenceSchedule | None = None, T: int = 10_000, rng=None,
             types: np.ndarray | None = None) -> RunRecord:
    """Run CTBR for T periods on i.i.d. arrivals (or on a supplied type stream)."""
    gen = as_generator(rng)
    if types is None:
        types = draw_types(market, T, gen)
    learner = learner or LearnerConfig(horizon=len(types))
    bidder = CTBR(market, params, learner, conf, T=len(types))
    return simulate(bidder, market, params, types, gen)
