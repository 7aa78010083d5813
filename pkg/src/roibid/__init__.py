"""Bidding under budget and ROI constraints in repeated second-price auctions, plus seller-side pricing."""
from .core import (
    ALWAYS_WIN,
    ArrivalType,
    BuyerParams,
    DegeneracyWarning,
    MarketModel,
    RandomSource,
    ThresholdVector,
    make_market,
    roi_margin,
    threshold,
    tv_expand,
    tv_min,
)
from .ctbr import CTBR, ConfidenceSchedule, LearnerConfig, ctbr_init, ctbr_run, ctbr_step, threshold_bid
from .hindsight import HindsightSolution, hindsight_opt, lp_vertex_oracle, solve_threshold
from .harness import Regime, ScenarioConfig, regret_scaling_sweep, run_benchmark_suite, run_bidder_trial
from .pricing import PricingModel, PriceClass, bell_shape_check, binary_search_pricing, revenue_curve

__version__ = "0.1.0"
