"""Arrival streams, the per-period auction loop, and run records shared by all bidders."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BuyerParams, MarketModel, as_generator, wins


def draw_types(market: MarketModel, T: int, rng) -> np.ndarray:
    """T i.i.d. 0-based arrival type indices."""
    gen = as_generator(rng)
    return gen.choice(market.K, size=T, p=market.probs)


@dataclass
class RunRecord:
    types: np.ndarray
    v: np.ndarray
    d: np.ndarray
    bid: np.ndarray
    win: np.ndarray
    alpha: float
    gamma: float
    heads: np.ndarray | None = None
    remainders: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.types)

    @property
    def payment(self) -> np.ndarray:
        return self.d * self.win

    @property
    def utility(self) -> np.ndarray:
        return (self.v - self.alpha * self.d) * self.win

    @property
    def roi_balance(self) -> np.ndarray:
        return (self.v - self.gamma * self.d) * self.win

    @property
    def total_utility(self) -> float:
        return float(self.utility.sum())

    @property
    def total_spend(self) -> float:
        return float(self.payment.sum())

    @property
    def total_value(self) -> float:
        return float((self.v * self.win).sum())

    @property
    def total_roi_balance(self) -> float:
        return float(self.roi_balance.sum())


def simulate(bidder, market: MarketModel, params: BuyerParams, types: np.ndarray, rng,
             *, budget_cap: float | None = None) -> RunRecord:
    """Run one bidder over a fixed arrival stream.

    ``bidder`` needs ``bid(v, rng) -> float`` and ``observe(v, d, won)``; it may
    expose ``head``/``remainder`` for the state trace. With ``budget_cap`` the
    bid is capped at the remaining budget, so no win can overspend it.
    """
    gen = as_generator(rng)
    T = len(types)
    v = market.values[types]
    d = market.costs[types]
    bids = np.empty(T)
    won = np.zeros(T, dtype=bool)
    trace = hasattr(bidder, "head")
    heads = np.empty(T, dtype=np.int64) if trace else None
    rems = np.empty(T) if trace else None
    spent = 0.0
    for t in range(T):
        vt, dt = float(v[t]), float(d[t])
        if trace:
            heads[t], rems[t] = bidder.head, bidder.remainder
        b = bidder.bid(vt, gen)
        if budget_cap is not None:
            b = min(b, budget_cap - spent)
        z = b > 0 and wins(b, dt)
        if z:
            spent += dt
        bids[t] = b
        won[t] = z
        bidder.observe(vt, dt, z)
    return RunRecord(types=np.asarray(types), v=v, d=d, bid=bids, win=won,
                     alpha=params.alpha, gamma=params.gamma, heads=heads, remainders=rems)
