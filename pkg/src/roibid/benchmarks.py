"""Benchmark bidders: a conservative bidder and three dual-pacing bidders."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ALWAYS_WIN, BuyerParams, as_generator, wins


def conserv_bid(v: float, gamma: float) -> float:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return v / gamma


@dataclass
class PacingState:
    lambda_hat: float = 0.0
    mu_hat: float = 0.0
    lambda_cap: float = 10.0
    mu_cap: float = 10.0
    step: float = 0.01

    def __post_init__(self):
        if not (0 <= self.lambda_hat <= self.lambda_cap and 0 <= self.mu_hat <= self.mu_cap):
            raise ValueError("dual estimates must start inside their boxes")


def _clip(x: float, hi: float) -> float:
    return min(max(x, 0.0), hi)


def _paced(num: float, den: float) -> float:
    return ALWAYS_WIN if den <= 0 else num / den


def budget_pacing_bid(state: PacingState, v: float, alpha: float) -> float:
    return _paced(v, alpha + state.lambda_hat)


def roi_pacing_bid(state: PacingState, v: float, alpha: float, gamma: float) -> float:
    return _paced((1 + state.mu_hat) * v, alpha + gamma * state.mu_hat)


def joint_pacing_bid(state: PacingState, v: float, alpha: float, gamma: float) -> float:
    return _paced((1 + state.mu_hat) * v, alpha + gamma * state.mu_hat + state.lambda_hat)


def update_budget_dual(state: PacingState, payment: float, rho: float) -> None:
    state.lambda_hat = _clip(state.lambda_hat - state.step * (rho - payment), state.lambda_cap)


def update_roi_dual(state: PacingState, value_won: float, payment: float, gamma: float) -> None:
    state.mu_hat = _clip(state.mu_hat - state.step * (value_won - gamma * payment), state.mu_cap)


def budget_pacing_step(state: PacingState, v: float, payment: float, alpha: float, rho: float):
    """Bid v/(alpha + lambda) for this period, then take the dual step on the realized payment.

    Returns (bid, state); ``state`` is updated in place.
    """
    bid = budget_pacing_bid(state, v, alpha)
    update_budget_dual(state, payment, rho)
    return bid, state


def roi_pacing_step(state: PacingState, v: float, value_won: float, payment: float,
                    alpha: float, gamma: float):
    bid = roi_pacing_bid(state, v, alpha, gamma)
    update_roi_dual(state, value_won, payment, gamma)
    return bid, state


def joint_pacing_step(state: PacingState, v: float, value_won: float, payment: float,
                      alpha: float, gamma: float, rho: float):
    bid = joint_pacing_bid(state, v, alpha, gamma)
    update_budget_dual(state, payment, rho)
    update_roi_dual(state, value_won, payment, gamma)
    return bid, state


class Conserv:
    def __init__(self, params: BuyerParams):
        self.params = params

    def bid(self, v, rng=None):
        return conserv_bid(v, self.params.gamma)

    def observe(self, v, d, won):
        pass


class _Pacer:
    uses_budget = False
    uses_roi = False

    def __init__(self, params: BuyerParams, T: int, *, step: float | None = None,
                 lambda_cap: float = 10.0, mu_cap: float = 10.0,
                 lambda_init: float = 0.0, mu_init: float = 0.0):
        self.params = params
        self.state = PacingState(lambda_hat=lambda_init, mu_hat=mu_init, lambda_cap=lambda_cap,
                                 mu_cap=mu_cap, step=step if step is not None else 1 / math.sqrt(T))

    def observe(self, v, d, won):
        pay = d if won else 0.0
        if self.uses_budget:
            update_budget_dual(self.state, pay, self.params.rho)
        if self.uses_roi:
            update_roi_dual(self.state, v if won else 0.0, pay, self.params.gamma)


class BudgetPacing(_Pacer):
    uses_budget = True

    def bid(self, v, rng=None):
        return budget_pacing_bid(self.state, v, self.params.alpha)


class ROIPacing(_Pacer):
    uses_roi = True

    def bid(self, v, rng=None):
        return roi_pacing_bid(self.state, v, self.params.alpha, self.params.gamma)


class Pacing(_Pacer):
    uses_budget = uses_roi = True

    def bid(self, v, rng=None):
        return joint_pacing_bid(self.state, v, self.params.alpha, self.params.gamma)


def example1_expected_roi(p: float, v: float, gamma: float, T: int) -> float:
    """Cumulative expected ROI balance T v (p - 1/2) of the mu* = 2 paced bidder.

    Costs are v/(2 gamma) w.p. p and 3v/(2 gamma) otherwise; the paced bid 3v/(2 gamma)
    wins both.
    """
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    return T * v * (p - 0.5)


def example1_simulate(p: float, v: float, gamma: float, T: int, rng) -> np.ndarray:
    """Per-period ROI balances of the mu* = 2, alpha = 0 paced bidder in the two-cost market."""
    gen = as_generator(rng)
    state = PacingState(mu_hat=2.0)
    bid = roi_pacing_bid(state, v, 0.0, gamma)
    d = np.where(gen.random(T) < p, v / (2 * gamma), 3 * v / (2 * gamma))
    won = np.array([wins(bid, x) for x in d])
    return (v - gamma * d) * won
