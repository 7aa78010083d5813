import warnings

import numpy as np
import pytest

from roibid.core import BuyerParams, RandomSource, make_market
from roibid.harness import (
    BidderSpec,
    Regime,
    ScenarioConfig,
    classify_regime,
    grid_support,
    loglog_slope,
    parse_bidder,
    regime_params,
    regret_scaling_sweep,
    run_benchmark_suite,
    run_bidder_trial,
    sample_regime_instance,
)
from roibid.hindsight import solve_threshold
from roibid.runs import draw_types

pytestmark = pytest.mark.filterwarnings("ignore::roibid.core.DegeneracyWarning")


def test_grid_support_representatives():
    pairs = grid_support()
    assert len(pairs) == 19
    ratios = [v / d for v, d in pairs]
    assert len(set(np.round(ratios, 12))) == 19
    assert (0.2, 0.2) in pairs  # ratio 1 represented by its smallest pair


@pytest.mark.parametrize("regime, gamma, rho", [("budget", 1.2, 0.05), ("roi", 2.1, 0.4), ("alpha", 1.2, 0.4)])
def test_regime_sampler(regime, gamma, rho):
    params = regime_params(regime)
    assert (params.alpha, params.gamma, params.rho) == (1.0, gamma, rho)
    for i in range(5):
        m = sample_regime_instance(regime, params, grid_support(), RandomSource(i).child(2))
        sol = solve_threshold(m.probs, params.alpha, params.gamma, params.rho, m)
        tol = 1e-9 * (1 + rho + m.probs @ m.costs)
        roi_tight, budget_tight = sol.roi_slack <= tol, sol.budget_slack <= tol
        assert (roi_tight, budget_tight) == {"roi": (True, False), "budget": (False, True),
                                             "alpha": (False, False)}[regime]
        assert classify_regime(m, params) is Regime(regime)


def test_sampler_gives_up():
    # gamma so high that the ROI constraint binds on every draw
    params = BuyerParams(1.0, 20.0, 0.4)
    with pytest.raises(RuntimeError):
        sample_regime_instance("alpha", params, grid_support(), 0, max_attempts=50)


def test_parse_bidder():
    assert parse_bidder("ctbr-ee").learner == "ee"
    assert parse_bidder("ctbr-sgd-constant").label == "ctbr-sgd-constant"
    assert parse_bidder("pacing").stops_on_budget
    assert not parse_bidder("ctbr-ee").stops_on_budget
    with pytest.raises(ValueError):
        BidderSpec("oracle")


def test_conserv_below_gamma_has_no_spend():
    market = make_market([(0.5, 0.5), (0.3, 0.6)], [0.5, 0.5])
    params = BuyerParams(0.0, 1.5, 0.3)
    m = run_bidder_trial(market, params, "conserv", 500, RandomSource(1))
    assert m.spend == 0 and m.utility == 0
    assert m.roi_ratio is None


def _roi_instance(seed=0):
    params = regime_params("roi")
    return sample_regime_instance("roi", params, grid_support(), RandomSource(seed).child(2)), params


def test_trial_metrics_consistent():
    market, params = _roi_instance()
    m = run_bidder_trial(market, params, "pacing", 3000, RandomSource(4))
    rec = m.record
    assert np.all(np.diff(m.depletion) >= 0)
    assert m.final_depletion <= 1 + 1e-12
    assert m.regret == pytest.approx(m.opt - rec.total_utility)
    U = solve_threshold(market.probs, params.alpha, params.gamma, params.rho, market).objective
    assert m.normalized_utility == pytest.approx(rec.total_utility / 3000 / U)
    assert m.budget_ok


def test_trial_is_deterministic():
    market, params = _roi_instance()
    a = run_bidder_trial(market, params, "ctbr-ee", 2000, RandomSource(8))
    b = run_bidder_trial(market, params, "ctbr-ee", 2000, RandomSource(8))
    assert np.array_equal(a.record.bid, b.record.bid)
    assert a.regret == b.regret and a.normalized_utility == b.normalized_utility


def test_common_random_numbers():
    market, params = _roi_instance()
    src = RandomSource(3)
    a = run_bidder_trial(market, params, "conserv", 1000, src)
    b = run_bidder_trial(market, params, "ctbr-ee", 1000, src)
    assert np.array_equal(a.record.types, b.record.types)
    assert np.array_equal(a.record.types, draw_types(market, 1000, src.child(0)))


def test_ctbr_alpha_regime_near_optimal():
    params = regime_params("alpha")
    vals = []
    for i in range(3):
        m = sample_regime_instance("alpha", params, grid_support(), RandomSource(i).child(2))
        vals.append(run_bidder_trial(m, params, "ctbr-ee", 5000, RandomSource(i)).normalized_utility)
    assert np.median(vals) == pytest.approx(1.0, abs=0.05)


def test_suite_shape_and_depletion():
    scen = ScenarioConfig(regimes=("budget", "alpha"), instances=2, T=800)
    res = run_benchmark_suite(scen)
    assert len(res.rows) == 2 * 5
    assert {(r["bidder"], r["regime"]) for r in res.rows} == {
        (b, g) for b in ("ctbr-ee", "conserv", "budget-pacing", "roi-pacing", "pacing") for g in ("budget", "alpha")}
    for (regime, i, label), m in res.runs.items():
        assert np.all(np.diff(m.depletion) >= 0)
        if label != "ctbr-ee":
            assert m.final_depletion <= 1 + 1e-12
    # identical streams across bidders for each instance
    for regime in ("budget", "alpha"):
        for i in range(2):
            ts = [res.runs[(regime, i, b)].record.types for b in ("ctbr-ee", "pacing")]
            assert np.array_equal(*ts)


def test_loglog_slope():
    T = np.array([10, 100, 1000])
    assert loglog_slope(T, 3 * T ** 0.5) == pytest.approx(0.5)


def test_sweep_warns_on_small_design():
    market, params = _roi_instance()
    with pytest.warns(UserWarning, match="at least 3 horizons"):
        res = regret_scaling_sweep(market, params, "never", [200, 800], seeds=3)
    assert res.slope == pytest.approx(1.0, abs=0.1)


def test_never_bid_regret_is_linear():
    market, params = _roi_instance()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = regret_scaling_sweep(market, params, "never", [1000, 4000, 16_000], seeds=5)
    assert res.slope == pytest.approx(1.0, abs=0.05)


def test_known_p_regret_is_small():
    # E[OPT] <= T U, so the known-distribution bidder's mean regret sits near or below zero
    market, params = _roi_instance()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = regret_scaling_sweep(market, params, "known-p", [1000, 4000, 16_000], seeds=20)
    for T, m, se in zip(res.horizons, res.mean_regret, res.stderr):
        assert m <= 4 * se + 1e-9
        assert abs(m) <= 2 * np.sqrt(T)
