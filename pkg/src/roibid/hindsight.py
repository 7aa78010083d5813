"""Closed-form solver for the two-constraint threshold LP, a vertex-enumeration oracle,
and the realization-level hindsight benchmark."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    BuyerParams,
    DegeneracyWarning,
    MarketModel,
    ThresholdVector,
    make_market,
    threshold,
    tv_expand,
    tv_min,
)

DEGENERACY_TOL = 1e-12
ORACLE_MAX_K = 12


@dataclass(frozen=True)
class HindsightSolution:
    r: int
    b: int
    kappa_alpha: int
    q_roi: float
    q_budget: float
    head: int
    remainder: float
    solution: ThresholdVector
    objective: float
    roi_slack: float
    budget_slack: float

    @property
    def x(self) -> np.ndarray:
        return tv_expand(self.solution)


@dataclass(frozen=True)
class ArrivalCounts:
    counts: np.ndarray
    total: int


def _max_prefix(mask: np.ndarray) -> int:
    """Largest 1-based k with mask[k-1] true, 0 if none."""
    hits = np.flatnonzero(mask)
    return int(hits[-1]) + 1 if hits.size else 0


def kappa(market: MarketModel, alpha: float) -> int:
    """Largest type index whose utility v - alpha d is nonnegative."""
    return _max_prefix(market.values - alpha * market.costs >= 0)


def solve_threshold(n, alpha: float, gamma: float, cap: float, market: MarketModel) -> HindsightSolution:
    """Optimal threshold vector for max sum n(v - alpha d)x s.t. ROI >= 0 and spend <= cap."""
    n = np.asarray(n, dtype=float)
    K = market.K
    if n.shape != (K,):
        raise ValueError(f"weights must have length {K}")
    if np.any(n <= 0):
        raise ValueError("weights must be strictly positive")
    if not cap > 0:
        raise ValueError("cap must be positive")
    v, d = market.values, market.costs
    w = v - gamma * d

    roi_sums = np.cumsum(n * w)
    spend_sums = np.cumsum(n * d)
    if np.any(np.abs(roi_sums) <= DEGENERACY_TOL) or np.any(np.abs(cap - spend_sums) <= DEGENERACY_TOL):
        warnings.warn("partial sum at a threshold boundary; solution may not be unique",
                      DegeneracyWarning, stacklevel=2)

    r = _max_prefix(roi_sums >= 0)
    if r == K:
        q_roi = 0.0
    else:
        # r < K means roi_sums[r] < 0, so w^{r+1} < 0 and the quotient is in [0, 1).
        prefix = roi_sums[r - 1] if r > 0 else 0.0
        q_roi = prefix / (n[r] * abs(w[r]))

    b = _max_prefix(spend_sums <= cap)
    if b == K:
        q_budget = 0.0
    else:
        prefix = spend_sums[b - 1] if b > 0 else 0.0
        q_budget = (cap - prefix) / (n[b] * d[b])

    k_alpha = kappa(market, alpha)
    x_roi = threshold(K, r, q_roi)
    x_budget = threshold(K, b, q_budget)
    sol = tv_min(x_roi, x_budget, threshold(K, k_alpha, 0.0))
    x = tv_expand(sol)
    objective = float(np.dot(n * (v - alpha * d), x))
    return HindsightSolution(
        r=r, b=b, kappa_alpha=k_alpha, q_roi=float(q_roi), q_budget=float(q_budget),
        head=sol.head, remainder=sol.remainder, solution=sol, objective=objective,
        roi_slack=float(np.dot(n * w, x)),
        budget_slack=float(cap - np.dot(n * d, x)),
    )


def feasibility_scale(n, cap: float, market: MarketModel) -> float:
    return 1.0 + abs(cap) + float(np.dot(n, market.costs))


def lp_vertex_oracle(n, alpha: float, gamma: float, cap: float, market: MarketModel):
    """Exact LP optimum by enumerating basic solutions.

    A vertex of the box-plus-two-constraints polytope has at most two fractional
    coordinates. For each fractional index set F (|F| <= 2), each 0/1 setting of
    the rest, and each choice of tight constraints, solve the small linear system
    and keep feasible points. Returns (x, objective); ties go to the
    lexicographically largest x.
    """
    n = np.asarray(n, dtype=float)
    K = market.K
    if K > ORACLE_MAX_K:
        raise ValueError(f"vertex enumeration limited to K <= {ORACLE_MAX_K}")
    v, d = market.values, market.costs
    util = n * (v - alpha * d)
    roi = n * (v - gamma * d)
    spend = n * d
    scale = feasibility_scale(n, cap, market)
    tol = 1e-9 * scale

    candidates = []
    for size in (0, 1, 2):
        for F in itertools.combinations(range(K), size):
            rest = [k for k in range(K) if k not in F]
            B = np.array(list(itertools.product((0.0, 1.0), repeat=len(rest))))
            X = np.zeros((len(B), K))
            if rest:
                X[:, rest] = B
            roi_fixed = X @ roi
            spend_fixed = X @ spend
            if size == 0:
                candidates.append(X)
            elif size == 1:
                (i,) = F
                for coef, rhs in ((roi[i], -roi_fixed), (spend[i], cap - spend_fixed)):
                    if coef == 0:
                        continue
                    Xi = X.copy()
                    Xi[:, i] = rhs / coef
                    candidates.append(Xi)
            else:
                i, j = F
                det = roi[i] * spend[j] - roi[j] * spend[i]
                if det == 0:
                    continue
                r1, r2 = -roi_fixed, cap - spend_fixed
                Xij = X.copy()
                Xij[:, i] = (r1 * spend[j] - roi[j] * r2) / det
                Xij[:, j] = (roi[i] * r2 - r1 * spend[i]) / det
                candidates.append(Xij)
    X = np.vstack(candidates)
    ok = (
        np.all(X >= -1e-12, axis=1) & np.all(X <= 1 + 1e-12, axis=1)
        & (X @ roi >= -tol) & (X @ spend <= cap + tol)
    )
    X = np.clip(X[ok], 0.0, 1.0)
    if len(X) == 0:
        raise RuntimeError("no feasible vertex found")
    obj = X @ util
    best = obj.max()
    near = X[obj >= best - 1e-12 * (1 + abs(best))]
    order = np.lexsort(near.T[::-1])
    x = near[order[-1]]
    return x, float(x @ util)


def arrival_counts(realization, market: MarketModel) -> ArrivalCounts:
    counts = np.zeros(market.K, dtype=np.int64)
    for v, d in realization:
        counts[market.index_of(v, d)] += 1
    return ArrivalCounts(counts, int(counts.sum()))


def opt_from_counts(counts, market: MarketModel, params: BuyerParams, T: int) -> float:
    """OPT = U(N; alpha, gamma, rho T), dropping types that never arrived."""
    counts = np.asarray(counts)
    seen = np.flatnonzero(counts > 0)
    if seen.size == 0:
        return 0.0
    sub = make_market([(market.values[k], market.costs[k]) for k in seen],
                      np.full(seen.size, 1.0 / seen.size), allow_ties=True)
    # make_market keeps ratio order, so the surviving types stay aligned with `seen`.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        sol = solve_threshold(counts[seen].astype(float), params.alpha, params.gamma,
                              params.rho * T, sub)
    return sol.objective


def hindsight_opt(realization, market: MarketModel, params: BuyerParams) -> float:
    realization = list(realization)
    counts = arrival_counts(realization, market)
    return opt_from_counts(counts.counts, market, params, counts.total)


def regret_of_run(realization, market: MarketModel, params: BuyerParams, run_utility: float) -> float:
    return hindsight_opt(realization, market, params) - run_utility
