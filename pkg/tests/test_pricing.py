import math

import numpy as np
import pytest

from roibid.hindsight import lp_vertex_oracle
from roibid.pricing import (
    AssumptionWarning,
    ClairvoyantBuyer,
    CTBRPostedPriceBuyer,
    PriceClass,
    PricingModel,
    bell_shape_check,
    best_revenue,
    binary_search_pricing,
    classify_price,
    clairvoyant_buyer_step,
    default_episode_length,
    exploration_budget,
    six_value_model,
    min_revenue_gap,
    price_market,
    revenue_curve,
    revenue_pi,
    seller_regret,
    u_of_d,
)

pytestmark = pytest.mark.filterwarnings("ignore::roibid.core.DegeneracyWarning")


def random_model(gen, N=None, M=None):
    """A model satisfying the nontriviality assumptions."""
    N = N or int(gen.integers(2, 7))
    M = M or int(gen.integers(3, 15))
    V = np.sort(gen.uniform(0.1, 1.0, N))[::-1]
    while np.any(np.diff(V) >= 0):
        V = np.sort(gen.uniform(0.1, 1.0, N))[::-1]
    gamma = gen.uniform(1.05, 2.0)
    lo, hi = V[-1] / gamma, V[0] / gamma
    D = np.sort(gen.uniform(lo, hi, M))[::-1]
    D = np.unique(np.clip(D, lo * 1.0001, hi * 0.9999))[::-1]
    g = gen.dirichlet(np.ones(N))
    rho = gen.uniform(D.min(), D.max())
    return PricingModel(V, g, D, gamma, rho)


class TestRevenue:
    def test_fact_all_ones_when_slack(self):
        model = PricingModel([0.9, 0.3], [0.5, 0.5], [0.1], gamma=1.2, rho=5.0)
        U, x = u_of_d(model, 0.1)
        assert x.tolist() == [1.0, 1.0]
        assert U == pytest.approx(0.6)
        assert revenue_pi(model, 0.1) == pytest.approx(0.1)

    def test_matches_oracle_on_six_value(self):
        model = six_value_model(1.3)
        for d in model.prices:
            U, _ = u_of_d(model, d)
            m = price_market(model, d)
            _, U_or = lp_vertex_oracle(m.probs, 0.0, model.gamma, model.rho, m)
            assert U == pytest.approx(U_or, abs=1e-9)

    def test_classification_slacks(self):
        model = six_value_model(1.3)
        for p in revenue_curve(model):
            if p.classification == PriceClass.ROI_BINDING:
                assert abs(p.roi_slack) <= 1e-9 and p.budget_slack > 1e-9
            if p.classification == PriceClass.BUDGET_BINDING:
                assert abs(p.budget_slack) <= 1e-9 and p.roi_slack > 1e-9
                assert p.revenue == pytest.approx(model.rho, abs=1e-12)
            if p.classification == PriceClass.NON_BINDING:
                assert p.revenue == pytest.approx(p.price, abs=1e-12)
            assert -1e-12 <= p.revenue <= min(p.price, model.rho) + 1e-12

    def test_six_value_ends(self):
        model = six_value_model(1.3)
        with pytest.warns(AssumptionWarning):
            assert classify_price(model, 0.1) == PriceClass.NON_BINDING
            assert classify_price(model, 0.46) == PriceClass.ROI_BINDING

    def test_synthetic_budget_binding(self):
        # a single price where spending everything costs exactly the budget
        model = PricingModel([1.0, 0.1], [0.5, 0.5], [0.4, 0.2], gamma=1.5, rho=0.1)
        pts = {p.price: p for p in revenue_curve(model)}
        assert pts[0.2].classification == PriceClass.BUDGET_BINDING
        assert pts[0.2].revenue == pytest.approx(0.1)

    def test_gamma17_no_budget_binding(self):
        model = six_value_model(1.7)
        assert all(p.classification != PriceClass.BUDGET_BINDING for p in revenue_curve(model))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            PricingModel([0.5, 0.6], [0.5, 0.5], [0.2], 1.2, 0.1)
        with pytest.raises(ValueError):
            PricingModel([0.6, 0.5], [0.5, 0.6], [0.2], 1.2, 0.1)
        with pytest.raises(ValueError):
            PricingModel([0.6, 0.5], [0.5, 0.5], [0.2, 0.3], 1.2, 0.1)
        with pytest.raises(ValueError):
            u_of_d(six_value_model(), 0.0)

    def test_min_gap_positive(self):
        assert 0 < min_revenue_gap(six_value_model(1.3)) < 0.1


class TestBellShape:
    def test_six_value_gamma13(self):
        rep = bell_shape_check(six_value_model(1.3))
        assert rep.passed, rep.violations
        assert rep.plateau
        assert all(abs(rep.revenues[rep.prices.index(p)] - 0.2) <= 1e-12 for p in rep.plateau)
        assert "plateau:" in rep.summary() and "empty" not in rep.summary()

    def test_six_value_gamma17(self):
        rep = bell_shape_check(six_value_model(1.7))
        assert rep.passed, rep.violations
        assert rep.plateau == []
        assert "plateau: empty" in rep.summary()

    def test_trivial_prices_reported(self):
        rep = bell_shape_check(six_value_model(1.3))
        assert rep.excluded == [0.48, 0.5]
        assert any("highest valuation" in w for w in rep.warnings)

    @pytest.mark.parametrize("seed", range(100))
    def test_random_models_pass(self, seed):
        model = random_model(np.random.default_rng(seed))
        assert model.assumption_violations() == []
        rep = bell_shape_check(model)
        assert rep.passed, rep.violations
        for p in revenue_curve(model):
            assert p.revenue <= model.rho + 1e-12

    def test_nonbinding_revenue_increases(self):
        rep = bell_shape_check(six_value_model(1.3))
        nb = [r for r, c in zip(rep.revenues, rep.classes) if c == PriceClass.NON_BINDING]
        assert all(a < b for a, b in zip(nb, nb[1:]))


class TestBuyers:
    def test_nonbinding_always_takes(self):
        model = six_value_model(1.3)
        gen = np.random.default_rng(0)
        assert all(clairvoyant_buyer_step(model, 0.1, gen) for _ in range(200))

    def test_zero_solution_never_takes(self):
        model = PricingModel([0.3, 0.2], [0.5, 0.5], [0.4], gamma=1.0, rho=1.0)
        gen = np.random.default_rng(0)
        assert not any(clairvoyant_buyer_step(model, 0.4, gen) for _ in range(200))

    def test_episode_means_in_hoeffding_band(self):
        model = six_value_model(1.3)
        d = 0.36
        rate = revenue_pi(model, d) / d
        E = 2000
        band = math.sqrt(math.log(2 / 0.01) / (2 * E))
        inside = 0
        for seed in range(100):
            buyer = ClairvoyantBuyer(model, np.random.default_rng(seed))
            z = np.mean([buyer(t, d) for t in range(E)])
            inside += abs(z - rate) <= band
        assert inside >= 99

    def test_posted_price_ctbr_take_rate(self):
        model = six_value_model(1.3)
        T = 20_000
        buyer = CTBRPostedPriceBuyer(model, T, np.random.default_rng(4))
        d = 0.26
        z = np.array([buyer(t, d) for t in range(T)])
        target = revenue_pi(model, d) / d
        assert abs(z[T // 2:].mean() - target) < 0.1


class ScriptedBuyer:
    """Takes with certainty at a scripted rate so that revenue estimates are exact."""

    def __init__(self, prices, revenues, E):
        self.rate = {float(p): r / p for p, r in zip(prices, revenues)}
        self.E = E
        self.count = {}

    def __call__(self, t, price):
        k = self.count.get(price, 0)
        self.count[price] = k + 1
        # exactly round(rate * E) takes in the first E periods at this price
        return int(k % self.E < round(self.rate[price] * self.E))


class TestBinarySearch:
    def test_m3_tie_goes_right_bound_down(self):
        prices = [0.3, 0.2, 0.1]
        E = 10
        buyer = ScriptedBuyer(prices, [0.03, 0.1, 0.1], E)
        run = binary_search_pricing(prices, buyer, E, T=200)
        # explore 1, 3, then med=2: pi(2) >= pi(3), so R = 1 and the loop stops
        assert run.explored_order == [1, 3, 2]
        assert run.state.R == 1 and run.incumbent == 3
        assert run.state.episodes == 3

    def test_too_short_horizon(self):
        with pytest.raises(ValueError):
            binary_search_pricing([0.3, 0.2, 0.1], lambda t, p: 1, E=10, T=30)
        with pytest.raises(ValueError):
            binary_search_pricing([0.3, 0.2, 0.1], lambda t, p: 1, E=0, T=30)

    def test_budget_formula(self):
        assert exploration_budget(21) == 10
        assert exploration_budget(1) == 2

    @pytest.mark.parametrize("M", [2, 3, 5, 8, 21])
    def test_episode_bound_over_many_curves(self, M):
        prices = np.linspace(0.5, 0.1, M)
        gen = np.random.default_rng(M)
        curves = [gen.uniform(0, 0.1, M) for _ in range(150)]
        # plus every unimodal curve shape with its peak at each index
        for peak in range(M):
            curves.append(0.1 - 0.001 * np.abs(np.arange(M) - peak))
        for rev in curves:
            rev = np.minimum(rev, prices)
            run = binary_search_pricing(prices, ScriptedBuyer(prices, rev, 4), 4, T=4 * exploration_budget(M) + 3)
            assert run.state.episodes <= exploration_budget(M)
            assert len(set(run.explored_order)) == len(run.explored_order)
            assert run.state.iterations <= int(math.log2(M)) + 1 + 1

    @pytest.mark.parametrize("peak", range(21))
    def test_finds_peak_of_unimodal_curve(self, peak):
        prices = np.linspace(0.5, 0.1, 21)
        rev = np.minimum(0.1 - 0.002 * np.abs(np.arange(21) - peak), prices)
        if np.argmax(rev) != peak:
            pytest.skip("peak clipped by the price cap")
        run = binary_search_pricing(prices, ScriptedBuyer(prices, rev, 5000), 5000, T=5000 * 10 + 10)
        assert run.incumbent == peak + 1

    def test_exploit_phase_fills_horizon(self):
        model = six_value_model(1.3)
        run = binary_search_pricing(model.prices, ClairvoyantBuyer(model, 0), 100, T=5000)
        assert len(run.prices) == 5000
        assert set(run.phases) == {"explore", "exploit"}
        assert np.all(run.prices[run.exploit_mask] == model.prices[run.incumbent - 1])


class TestSellerRegret:
    def test_best_price_regret_near_zero(self):
        model = six_value_model(1.3)
        best_d = max(revenue_curve(model), key=lambda p: p.revenue).price
        T = 20_000
        buyer = ClairvoyantBuyer(model, 1)
        takes = [buyer(t, best_d) for t in range(T)]
        reg = seller_regret(model, [best_d] * T, takes)
        se = best_d * math.sqrt(T * 0.25)
        assert abs(reg) <= 4 * se

    def test_worst_price_regret(self):
        model = six_value_model(1.3)
        pts = [p for p in revenue_curve(model) if p.revenue > 0]
        worst = min(pts, key=lambda p: p.revenue)
        T = 20_000
        buyer = ClairvoyantBuyer(model, 2)
        takes = [buyer(t, worst.price) for t in range(T)]
        reg = seller_regret(model, [worst.price] * T, takes)
        expected = T * (best_revenue(model) - worst.revenue)
        assert abs(reg - expected) <= 4 * worst.price * math.sqrt(T * 0.25)

    def test_default_episode_length(self):
        T = 50_000
        assert default_episode_length(T) == int(T ** (2 / 3 + 1 / math.log(T)))
        assert default_episode_length(1000, eps=0.0) == int(1000 ** (2 / 3))

    def test_regret_sublinear(self):
        model = six_value_model(1.3)
        Ts = [40_000, 160_000, 640_000]
        regs = []
        for T in Ts:
            vals = []
            for seed in range(5):
                run = binary_search_pricing(model.prices, ClairvoyantBuyer(model, seed),
                                            default_episode_length(T), T)
                vals.append(seller_regret(model, run.prices, run.takes))
            regs.append(np.mean(vals))
        slope = np.polyfit(np.log(Ts), np.log(regs), 1)[0]
        assert slope < 0.95
        assert regs[-1] / Ts[-1] < regs[0] / Ts[0]
