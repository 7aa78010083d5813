import numpy as np
import pytest

from roibid.core import BuyerParams, make_market


def random_instance(gen: np.random.Generator, K: int):
    """Random market with distinct ratios and params gamma in (alpha, alpha + 2]."""
    while True:
        v = gen.uniform(0.1, 1.0, K)
        d = gen.uniform(0.1, 1.0, K)
        if len(set(np.round(v / d, 12))) == K:
            break
    p = gen.uniform(0, 1, K) + 1e-3
    market = make_market(list(zip(v, d)), p / p.sum())
    alpha = gen.uniform(0, 2)
    gamma = alpha + gen.uniform(1e-3, 2)
    cap = gen.uniform(0.05, 1.0) * float(market.probs @ market.costs) * 1.5
    return market, BuyerParams(alpha, gamma, cap)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
