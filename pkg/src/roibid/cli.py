"""Command-line entry point: ``roibid solve|bid|price``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import jsonschema

from . import csvio
from .core import BuyerParams, RandomSource, make_market
from .harness import (
    BIDDERS,
    DEFAULT_ROSTER,
    ScenarioConfig,
    grid_support,
    parse_bidder,
    regime_params,
    regret_scaling_sweep,
    run_benchmark_suite,
    sample_regime_instance,
)
from .hindsight import lp_vertex_oracle, solve_threshold
from .pricing import (
    ClairvoyantBuyer,
    CTBRPostedPriceBuyer,
    PricingModel,
    bell_shape_check,
    best_revenue,
    binary_search_pricing,
    default_episode_length,
    six_value_model,
    price_market,
    revenue_curve,
    revenue_pi,
    seller_regret,
)

OUT_ENV = "ROIBID_OUT"
EXIT_CONFIG = 2

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_vec = {"type": "array", "items": _num, "minItems": 1}

PRICING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["six-value"]},
        "valuations": _vec,
        "probs": _vec,
        "prices": _vec,
        "gamma": _pos,
        "rho": _pos,
    },
    "required": ["gamma"],
}

MARKET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "pairs": {"type": "array", "minItems": 1,
                  "items": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}},
        "probs": _vec,
    },
    "required": ["pairs", "probs"],
}

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"alpha": _num, "gamma": _pos, "rho": _pos},
    "required": ["alpha", "gamma", "rho"],
}

_common = {"seed": {"type": "integer", "minimum": 0}, "out": {"type": "string"}}

SCHEMAS = {
    "solve": {
        "type": "object",
        "additionalProperties": False,
        "properties": {**_common, "market": MARKET_SCHEMA, "params": PARAMS_SCHEMA,
                       "pricing": PRICING_SCHEMA},
    },
    "bid": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            **_common,
            "regimes": {"type": "array", "items": {"enum": ["roi", "budget", "alpha"]}, "minItems": 1},
            "alpha": {"type": "number", "minimum": 0},
            "instances": _posint,
            "T": _posint,
            "bidders": {"oneOf": [{"const": "all"},
                                  {"type": "array", "minItems": 1, "items": {"type": "string"}}]},
            "schedule": {"enum": ["ee-theory", "sgd-vanishing-theory", "sgd-constant-theory", "power"]},
            "exponent": _pos,
            "dual_init": {"type": "number", "minimum": 0},
            "dual_cap": _pos,
            "write_runs": {"type": "boolean"},
            "sweep": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "regime": {"enum": ["roi", "budget", "alpha"]},
                    "bidder": {"type": "string"},
                    "horizons": {"type": "array", "items": _posint, "minItems": 2},
                    "seeds": _posint,
                    "exponent": _pos,
                },
            },
        },
    },
    "price": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            **_common,
            "pricing": PRICING_SCHEMA,
            "buyer": {"enum": ["clairvoyant", "ctbr"]},
            "T": _posint,
            "E": _posint,
            "runs": _posint,
        },
    },
}


class ConfigError(Exception):
    pass


def validate(kind: str, cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMAS[kind])
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at '{where}': {err.message}") from None


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def output_dir(args, cfg) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or cfg.get("out") or "out")


def pricing_model(spec: dict | None) -> PricingModel:
    spec = spec or {"preset": "six-value", "gamma": 1.3}
    if spec.get("preset") == "six-value":
        extra = set(spec) - {"preset", "gamma"}
        if extra:
            raise ConfigError(f"invalid config at 'pricing': preset six-value fixes {sorted(extra)[0]!r}")
        return six_value_model(spec["gamma"])
    for key in ("valuations", "probs", "prices", "rho"):
        if key not in spec:
            raise ConfigError(f"invalid config at 'pricing': missing {key!r}")
    try:
        return PricingModel(spec["valuations"], spec["probs"], spec["prices"], spec["gamma"], spec["rho"])
    except ValueError as err:
        raise ConfigError(f"invalid config at 'pricing': {err}") from None


# ---------------------------------------------------------------------------

def cmd_solve(args, cfg) -> int:
    out = output_dir(args, cfg)
    if "market" in cfg:
        if "params" not in cfg:
            raise ConfigError("invalid config at '<root>': 'params' is required with 'market'")
        try:
            market = make_market([tuple(p) for p in cfg["market"]["pairs"]], cfg["market"]["probs"])
            params = BuyerParams(**cfg["params"])
        except ValueError as err:
            raise ConfigError(f"invalid config at 'market': {err}") from None
        sol = solve_threshold(market.probs, params.alpha, params.gamma, params.rho, market)
        rows = [("r", sol.r), ("b", sol.b), ("kappa_alpha", sol.kappa_alpha), ("q_roi", sol.q_roi),
                ("q_budget", sol.q_budget), ("head", sol.head), ("remainder", sol.remainder),
                ("objective", sol.objective), ("roi_slack", sol.roi_slack),
                ("budget_slack", sol.budget_slack)]
        rows += [(f"x{k + 1}", x) for k, x in enumerate(sol.x)]
        for name, val in rows:
            print(f"{name:>13} {csvio.fmt(val)}")
        if args.oracle:
            _, U_or = lp_vertex_oracle(market.probs, params.alpha, params.gamma, params.rho, market)
            print(f"oracle deviation {abs(U_or - sol.objective)!r}")
        csvio.write_csv(out / "solution.csv", "solution", rows)
    else:
        model = pricing_model(cfg.get("pricing"))
        curve = revenue_curve(model)
        csvio.write_csv(out / "revenue.csv", "revenue",
                        [(p.price, p.revenue, p.classification.value, p.roi_slack, p.budget_slack) for p in curve])
        for p in curve:
            print(f"{p.price!r:>6} {p.revenue!r:<22} {p.classification.value}")
        if args.oracle:
            dev = 0.0
            for d in model.prices:
                mkt = price_market(model, float(d))
                sol = solve_threshold(mkt.probs, 0.0, model.gamma, model.rho, mkt)
                _, U_or = lp_vertex_oracle(mkt.probs, 0.0, model.gamma, model.rho, mkt)
                dev = max(dev, abs(U_or - sol.objective))
            print(f"oracle max deviation {dev!r}")
        if args.bell_check:
            print(bell_shape_check(model).summary())
    csvio.write_meta(out, command="solve", seed=args.seed)
    return 0


def _roster(cfg) -> tuple[str, ...]:
    bidders = cfg.get("bidders", list(DEFAULT_ROSTER))
    if bidders == "all":
        return DEFAULT_ROSTER
    for b in bidders:
        kind = "ctbr" if b.startswith("ctbr") else b
        if kind not in BIDDERS:
            raise ConfigError(f"invalid config at 'bidders': unknown bidder {b!r}")
    return tuple(bidders)


def cmd_bid(args, cfg) -> int:
    out = output_dir(args, cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if args.sweep:
        sw = cfg.get("sweep", {})
        regime = sw.get("regime", "roi")
        params = regime_params(regime, cfg.get("alpha", 1.0))
        market = sample_regime_instance(regime, params, grid_support(), RandomSource(seed).child(2))
        spec = parse_bidder(sw.get("bidder", "ctbr-ee"), exponent=sw.get("exponent", 1.0)) \
            if sw.get("bidder", "ctbr-ee").startswith("ctbr") else parse_bidder(sw["bidder"])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = regret_scaling_sweep(market, params, spec, sw.get("horizons", [2500, 10_000, 40_000]),
                                       seeds=sw.get("seeds", 20), base_seed=seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        csvio.write_csv(out / "sweep.csv", "sweep",
                        [(T, m, e, res.slope) for T, m, e in zip(res.horizons, res.mean_regret, res.stderr)])
        for T, m, e in zip(res.horizons, res.mean_regret, res.stderr):
            print(f"T={T:<8} mean regret {m:.4f} +/- {e:.4f}")
        print(f"log-log slope {res.slope:.4f}")
        csvio.write_meta(out, command="bid --sweep", seed=seed)
        return 0

    scenario = ScenarioConfig(
        regimes=tuple(cfg.get("regimes", ("roi", "budget", "alpha"))),
        alpha=cfg.get("alpha", 1.0),
        instances=cfg.get("instances", 10),
        T=cfg.get("T", 10_000),
        bidders=_roster(cfg),
        schedule=cfg.get("schedule", "power"),
        exponent=cfg.get("exponent", 1.0),
        seed=seed,
        dual_init=cfg.get("dual_init", 0.0),
        dual_cap=cfg.get("dual_cap", 10.0),
    )
    res = run_benchmark_suite(scenario)
    csvio.write_csv(out / "aggregate.csv", "aggregate", res.rows)
    if cfg.get("write_runs", True):
        for (regime, i, label), m in res.runs.items():
            csvio.write_csv(out / "runs" / f"{regime}-{i:03d}-{label}.csv", "run", csvio.run_rows(m.record))
    print(f"{'bidder':<15}{'regime':<8}{'median':>9}{'q25':>9}{'q75':>9}{'roi ok':>8}{'depl':>8}")
    for r in res.rows:
        print(f"{r['bidder']:<15}{r['regime']:<8}{r['median_norm_utility']:>9.4f}{r['q25']:>9.4f}"
              f"{r['q75']:>9.4f}{r['roi_attained_frac']:>8.2f}{r['final_depletion']:>8.3f}")
    csvio.write_meta(out, command="bid", seed=seed)
    return 0


def cmd_price(args, cfg) -> int:
    out = output_dir(args, cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    model = pricing_model(cfg.get("pricing"))
    buyer_kind = cfg.get("buyer", "clairvoyant")
    T = cfg.get("T", 50_000)
    E = cfg.get("E") or (2000 if buyer_kind == "clairvoyant" else default_episode_length(T))
    runs = cfg.get("runs", 1)
    best = best_revenue(model)
    for run in range(runs):
        src = RandomSource(seed, stream=run)
        buyer = ClairvoyantBuyer(model, src.child(0)) if buyer_kind == "clairvoyant" \
            else CTBRPostedPriceBuyer(model, T, src.child(0))
        try:
            res = binary_search_pricing(model.prices, buyer, E, T)
        except ValueError as err:
            raise ConfigError(f"invalid config at 'T': {err}") from None
        name = "pricing.csv" if runs == 1 else f"pricing-{run:03d}.csv"
        csvio.write_csv(out / name, "pricing",
                        [(t + 1, res.prices[t], res.takes[t], res.phases[t]) for t in range(T)])
        d_star = float(model.prices[res.incumbent - 1])
        regret = seller_regret(model, res.prices, res.takes)
        print(f"run {run}: m*={res.incumbent} price={d_star!r} pi={revenue_pi(model, d_star)!r} "
              f"max pi={best!r} regret={regret:.2f} episodes={res.state.episodes}")
    if args.bell_check:
        print(bell_shape_check(model).summary())
    csvio.write_meta(out, command="price", seed=seed, buyer=buyer_kind, E=E, T=T)
    return 0


COMMANDS = {"solve": cmd_solve, "bid": cmd_bid, "price": cmd_price}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roibid", description="Budget- and ROI-constrained bidding experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and config)")
        p.add_argument("--oracle", action="store_true", help="cross-check against the vertex oracle")
        p.add_argument("--bell-check", action="store_true", help="print the bell-shape report")
        p.add_argument("--sweep", action="store_true", help="regret-scaling sweep (bid only)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("invalid value for '--seed': must be nonnegative")
        cfg = load_config(args.config)
        validate(args.command, cfg)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as err:
        print(f"roibid: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
