"""Shared domain types: arrival supports, buyer parameters, threshold vectors, RNG streams."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
INPUT_TOL = 1e-9

# Bid that beats every finite cost. math.inf compares correctly against any float.
ALWAYS_WIN = math.inf


class DegeneracyWarning(UserWarning):
    """A quantity assumed nonzero by the threshold analysis is (numerically) zero."""


@dataclass(frozen=True)
class ArrivalType:
    value: float
    cost: float

    def __post_init__(self):
        if not (self.value > 0 and self.cost > 0):
            raise ValueError(f"value and cost must be positive, got ({self.value}, {self.cost})")

    @property
    def ratio(self) -> float:
        return self.value / self.cost


@dataclass(frozen=True)
class BuyerParams:
    alpha: float
    gamma: float
    rho: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not self.gamma > self.alpha:
            raise ValueError("gamma must exceed alpha")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Finite support of (value, cost) pairs sorted by decreasing value-to-cost ratio.

    The sentinel type K+1 (value 0, cost inf, ratio 0) is never stored.
    ``values``, ``costs``, ``ratios`` and ``probs`` are read-only numpy views
    of the same ordering.
    """

    arrivals: tuple[ArrivalType, ...]
    probs: np.ndarray
    values: np.ndarray = field(init=False, repr=False)
    costs: np.ndarray = field(init=False, repr=False)
    ratios: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array([a.value for a in self.arrivals], dtype=float)
        costs = np.array([a.cost for a in self.arrivals], dtype=float)
        ratios = np.array([a.ratio for a in self.arrivals], dtype=float)
        probs = np.array(self.probs, dtype=float)
        for arr in (values, costs, ratios, probs):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "probs", probs)

    @property
    def K(self) -> int:
        return len(self.arrivals)

    @property
    def d_max(self) -> float:
        return float(self.costs.max())

    @property
    def d_min(self) -> float:
        return float(self.costs.min())

    def margins(self, gamma: float) -> np.ndarray:
        """Per-type ROI margins v^k - gamma d^k."""
        return self.values - gamma * self.costs

    def w_max(self, gamma: float) -> float:
        return float(np.abs(self.margins(gamma)).max())

    def w_min(self, gamma: float) -> float:
        return float(np.abs(self.margins(gamma)).min())

    def index_of(self, value: float, cost: float) -> int:
        """0-based position of the support pair (value, cost)."""
        lookup = self.__dict__.get("_lookup")
        if lookup is None:
            lookup = {(a.value, a.cost): i for i, a in enumerate(self.arrivals)}
            object.__setattr__(self, "_lookup", lookup)
        try:
            return lookup[(float(value), float(cost))]
        except KeyError:
            raise KeyError(f"pair ({value}, {cost}) is not in the market support") from None

    def with_probs(self, probs: Sequence[float]) -> "MarketModel":
        """Same support, different occurrence distribution (no reordering)."""
        probs = np.asarray(probs, dtype=float)
        _check_probs(probs, self.K)
        return MarketModel(self.arrivals, probs)


def _check_probs(probs: np.ndarray, K: int) -> None:
    if probs.shape != (K,):
        raise ValueError(f"expected {K} probabilities, got shape {probs.shape}")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > INPUT_TOL:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")


def make_market(pairs, probs, *, allow_ties: bool = False) -> MarketModel:
    """Build a MarketModel, sorting types by strictly decreasing value-to-cost ratio.

    Equal ratios are rejected unless ``allow_ties`` is set, in which case ties keep
    a deterministic order (cheaper cost first). Tied types only make sense for
    callers that act on the type index directly (posted-price buyers).
    """
    pairs = [(float(v), float(d)) for v, d in pairs]
    probs = np.asarray(probs, dtype=float)
    if len(pairs) == 0:
        raise ValueError("market needs at least one arrival type")
    _check_probs(probs, len(pairs))
    arrivals = [ArrivalType(v, d) for v, d in pairs]
    order = sorted(range(len(arrivals)), key=lambda i: (-arrivals[i].ratio, arrivals[i].cost))
    arrivals = [arrivals[i] for i in order]
    probs = probs[order]
    for a, b in zip(arrivals, arrivals[1:]):
        if a.ratio == b.ratio and not allow_ties:
            raise ValueError(f"duplicate value-to-cost ratio {a.ratio!r} for {a} and {b}")
        if (a.value, a.cost) == (b.value, b.cost):
            raise ValueError(f"duplicate support pair {a}")
    probs = probs / probs.sum()
    return MarketModel(tuple(arrivals), probs)


def roi_margin(market: MarketModel, params: BuyerParams, k: int) -> float:
    """w^k = v^k - gamma d^k for 1-based type index k."""
    if not 1 <= k <= market.K:
        raise IndexError(f"type index {k} outside 1..{market.K}")
    a = market.arrivals[k - 1]
    return a.value - params.gamma * a.cost


@dataclass(frozen=True)
class ThresholdVector:
    """psi(J, q): J leading ones, then q, then zeros."""

    dim: int
    head: int
    remainder: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not 0 <= self.head <= self.dim:
            raise ValueError(f"head {self.head} outside 0..{self.dim}")
        if not 0.0 <= self.remainder < 1.0:
            raise ValueError(f"remainder {self.remainder} outside [0, 1)")
        if self.head == self.dim and self.remainder != 0.0:
            raise ValueError("a full threshold vector must have remainder 0")

    def entry(self, k: int) -> float:
        """Value at 1-based index k; indices past dim read as 0."""
        if k <= self.head:
            return 1.0
        if k == self.head + 1:
            return self.remainder
        return 0.0

    def __le__(self, other: "ThresholdVector") -> bool:
        _same_dim(self, other)
        return (self.head, self.remainder) <= (other.head, other.remainder)


def _same_dim(a: ThresholdVector, b: ThresholdVector) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def threshold(dim: int, head: int, remainder: float = 0.0) -> ThresholdVector:
    """Convenience constructor that zeroes the remainder when head == dim."""
    if head >= dim:
        return ThresholdVector(dim, dim, 0.0)
    return ThresholdVector(dim, head, float(remainder))


def tv_expand(tv: ThresholdVector) -> np.ndarray:
    x = np.zeros(tv.dim)
    x[: tv.head] = 1.0
    if tv.head < tv.dim:
        x[tv.head] = tv.remainder
    return x


def tv_min(*vectors: ThresholdVector) -> ThresholdVector:
    """Elementwise minimum; threshold vectors are totally ordered so this picks one."""
    if not vectors:
        raise ValueError("tv_min needs at least one vector")
    out = vectors[0]
    for tv in vectors[1:]:
        _same_dim(out, tv)
        if (tv.head, tv.remainder) < (out.head, out.remainder):
            out = tv
    return out


class RandomSource:
    """Reproducible numpy Generator keyed by (seed, stream id)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RandomSource":
        """Independent stream derived from this one by extra integer keys."""
        rs = RandomSource.__new__(RandomSource)
        rs.seed, rs.stream = self.seed, self.stream
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *keys))
        rs.gen = np.random.Generator(np.random.PCG64(ss))
        return rs

    def random(self) -> float:
        return float(self.gen.random())

    def choice(self, n: int, size: int, p) -> np.ndarray:
        return self.gen.choice(n, size=size, p=p)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.gen
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def wins(bid: float, cost: float) -> bool:
    """Second-price win rule: ties go to the buyer.

    A relative slack of 1e-12 absorbs rounding in bids like v / (v / d).
    """
    return bid >= cost * (1.0 - 1e-12)
