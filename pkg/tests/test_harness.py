import json
import math
from pathlib import Path

import numpy as np
import pytest

from fairprice.demand import DemandModel, LinkFunction
from fairprice.distributions import ContextGenerator, UtilityDistribution
from fairprice.harness import (Environment, ExperimentConfig, loglog_slope,
                               read_rho_csv, read_sweep_csv, regret_sweep,
                               rho_curve, write_rho_csv, write_sweep_csv)
from fairprice.solver import check_fairness, cost_of_fairness_linear

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def linear_unit_env():
    """Linear link, explicit Normal(1, 1) utility: mu=1, nu^2=2."""
    model = DemandModel(link=LinkFunction("linear"), theta0=[1.0], alpha0=1.0,
                        price_min=0.0, price_max=2.0)
    gen = ContextGenerator(dim=1, theta0=[1.0],
                           coords={"kind": "normal", "mu": 1.0, "sigma": 1.0})
    dist = UtilityDistribution(kind="normal", mu=1.0, sigma=1.0, B=8.0)
    return Environment(model=model, context_gen=gen, utility_dist=dist)


def logistic_env_with(dist_kind):
    model = DemandModel(link=LinkFunction("logistic"), theta0=[1.0], alpha0=1.0,
                        price_min=0.0, price_max=4.0)
    gen = ContextGenerator(dim=1, theta0=[1.0],
                           coords={"kind": "normal", "mu": 0.5, "sigma": 0.5})
    dist = UtilityDistribution(kind=dist_kind, mu=0.5, sigma=0.5, B=4.0)
    return Environment(model=model, context_gen=gen, utility_dist=dist)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

def test_environment_validation():
    model = DemandModel(link=LinkFunction("linear"), theta0=[1.0, 1.0],
                        alpha0=1.0, price_min=0.0, price_max=1.0)
    gen = ContextGenerator(dim=1, theta0=[1.0],
                           coords={"kind": "uniform", "low": 0.0, "high": 1.0})
    with pytest.raises(ValueError):
        Environment(model=model, context_gen=gen)
    gen2 = ContextGenerator(dim=2, theta0=[1.0, 0.5],
                            coords={"kind": "uniform", "low": 0.0, "high": 1.0})
    with pytest.raises(ValueError):
        Environment(model=model, context_gen=gen2)


def test_environment_implied_utility_roundtrip(tmp_path):
    env = Environment.load(CONFIGS / "linear.json")
    assert env._implied_utility
    obj = env.to_json()
    assert obj["utility"] is None  # implied -> recomputed on load
    assert obj["seed"] == 7
    env2 = Environment.from_json(obj)
    # the implied empirical distribution is rebuilt deterministically
    assert env2.moments() == env.moments()
    rng1, rng2 = np.random.default_rng(3), np.random.default_rng(3)
    assert np.array_equal(env.sample_contexts(rng1, 50),
                          env2.sample_contexts(rng2, 50))
    path = tmp_path / "env.json"
    path.write_text(json.dumps(obj))
    env3 = Environment.load(path)
    assert env3.model.link.kind == "linear"


def test_environment_explicit_utility_roundtrip():
    env = linear_unit_env()
    assert not env._implied_utility
    obj = env.to_json()
    assert obj["utility"] is not None
    env2 = Environment.from_json(obj)
    assert env2.moments() == pytest.approx(env.moments(), abs=1e-12)


def test_demand_prob_clamped():
    env = Environment.load(CONFIGS / "linear.json")
    # linear link values clipped into [0, 1]
    assert float(env.demand_prob(5.0, 0.0)) == 1.0
    assert float(env.demand_prob(-5.0, 0.0)) == 0.0
    assert float(env.demand_prob(0.8, 0.5)) == pytest.approx(0.55)
    # exponential link never raises even for negative arguments
    model = DemandModel(link=LinkFunction("exponential"), theta0=[1.0],
                        alpha0=1.0, price_min=0.0, price_max=1.0)
    gen = ContextGenerator(dim=1, theta0=[1.0],
                           coords={"kind": "uniform", "low": 0.5, "high": 1.0})
    env_e = Environment(model=model, context_gen=gen)
    assert float(env_e.demand_prob(0.1, 1.0)) == 0.0  # w = 0.1 - 0.5 < 0
    assert float(env_e.demand_prob(1.0, 0.0)) == pytest.approx(1 - math.exp(-1))


def test_check_consistency():
    env = Environment.load(CONFIGS / "linear.json")
    ok, msg = env.check_consistency()
    assert ok and "mu" in msg
    # deliberately inconsistent attachment is reported, not raised
    model = env.model
    gen = env.context_gen
    bad = UtilityDistribution(kind="uniform", mu=5.0, sigma=0.1, B=8.0)
    env_bad = Environment(model=model, context_gen=gen, utility_dist=bad)
    ok_bad, _ = env_bad.check_consistency()
    assert not ok_bad


def test_benchmark_policy_cached_and_fair():
    env = Environment.load(CONFIGS / "linear.json")
    p1 = env.benchmark_policy(0.3)
    p2 = env.benchmark_policy(0.3)
    assert p1 is p2
    p3 = env.benchmark_policy(0.4)
    assert p3 is not p1
    assert p1.form == "linear"
    assert check_fairness(p1, 0.3)
    log_env = Environment.load(CONFIGS / "logistic_d3.json")
    bp = log_env.benchmark_policy(0.3)
    assert check_fairness(bp, 0.3)
    assert len(bp.knots) > 10  # grid policy, not a two-knot linear form


# ---------------------------------------------------------------------------
# rho curve
# ---------------------------------------------------------------------------

def test_rho_curve_closed_examples(tmp_path):
    env = linear_unit_env()
    rows = rho_curve(env, [0.5, 1.5], out=tmp_path / "rho.csv")
    assert rows[0][0] == 0.5 and rows[0][1] == pytest.approx(0.875, abs=1e-9)
    assert rows[1] == (1.5, 1.0)
    text = (tmp_path / "rho.csv").read_text().splitlines()
    assert text[0] == "delta0,rho"
    assert len(text) == 3
    back = read_rho_csv(tmp_path / "rho.csv")
    write_rho_csv(back, tmp_path / "rho2.csv")
    assert (tmp_path / "rho2.csv").read_bytes() == (tmp_path / "rho.csv").read_bytes()


def test_rho_curve_validation():
    env = linear_unit_env()
    with pytest.raises(ValueError):
        rho_curve(env, [0.5, 0.5])
    with pytest.raises(ValueError):
        rho_curve(env, [0.9, 0.3])
    with pytest.raises(ValueError):
        rho_curve(env, [0.5], method="bogus")


def test_rho_curve_numeric_close_to_closed():
    # positive utilities and interior optima: closed-form assumptions hold
    model = DemandModel(link=LinkFunction("linear"), theta0=[1.0], alpha0=1.0,
                        price_min=0.0, price_max=2.0)
    gen = ContextGenerator(dim=1, theta0=[1.0],
                           coords={"kind": "uniform", "low": 0.5, "high": 1.5})
    dist = UtilityDistribution(kind="uniform", mu=1.0,
                               sigma=1.0 / math.sqrt(12.0), B=1.5)
    env = Environment(model=model, context_gen=gen, utility_dist=dist)
    eps = 0.01
    nu_sq = 1.0 + 1.0 / 12.0
    r_inf = 0.5 * nu_sq  # E[max_p p(u - p/2)] = E[u^2]/2
    closed = rho_curve(env, [0.3, 0.6], method="closed")
    numeric = rho_curve(env, [0.3, 0.6], method="numeric", eps=eps)
    for (d_c, r_c), (d_n, r_n) in zip(closed, numeric):
        assert d_c == d_n
        assert abs(r_n - r_c) <= 8.0 * d_c * eps / r_inf + 1e-6  # L_f = 1
        assert 0.0 <= r_n <= 1.0 + 1e-9


def test_rho_curve_heavier_tail_not_higher():
    # at matched mean/sd a heavier-tailed utility makes fairness slightly
    # costlier in the midrange (qualitative, small tolerance)
    deltas = [0.4, 0.6]
    normal = rho_curve(logistic_env_with("normal"), deltas, method="numeric")
    t3 = rho_curve(logistic_env_with("student_t3"), deltas, method="numeric")
    for (_, r_n), (_, r_t) in zip(normal, t3):
        assert r_t <= r_n + 0.02


def test_rho_monotone_on_curve():
    env = linear_unit_env()
    rows = rho_curve(env, [0.1 * k for k in range(1, 11)])
    vals = [r for _, r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# experiment config and sweep
# ---------------------------------------------------------------------------

def test_experiment_config_validation():
    env = Environment.load(CONFIGS / "linear.json")
    with pytest.raises(ValueError):
        ExperimentConfig(env=env, delta0=0.3, T_values=[100], n_trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(env=env, delta0=0.3, T_values=[100], n_trials=2,
                         seeds=[1])
    with pytest.raises(ValueError):
        ExperimentConfig(env=env, delta0=0.3, T_values=[200, 100], n_trials=1)


def test_trial_seed_derivation():
    env = Environment.load(CONFIGS / "linear.json")
    cfg = ExperimentConfig(env=env, delta0=0.3, T_values=[100], n_trials=4,
                           base_seed=5)
    assert cfg.trial_seeds() == [5 ^ 0, 5 ^ 1, 5 ^ 2, 5 ^ 3]
    cfg2 = ExperimentConfig(env=env, delta0=0.3, T_values=[100], n_trials=2,
                            seeds=[11, 13])
    assert cfg2.trial_seeds() == [11, 13]


def test_experiment_config_from_json():
    obj = json.loads((CONFIGS / "sweep_logistic.json").read_text())
    cfg = ExperimentConfig.from_json(obj)
    assert cfg.T_values == [1024, 4096, 16384]
    assert cfg.n_trials == 5
    assert cfg.mode == "computational"


def test_regret_sweep_deterministic_and_sane(tmp_path):
    env = Environment.load(CONFIGS / "linear.json")
    cfg = ExperimentConfig(env=env, delta0=0.3, T_values=[512, 4096],
                           n_trials=5, base_seed=0)
    rows = regret_sweep(cfg, out=tmp_path / "sweep.csv")
    assert [set(r) for r in rows] == [
        {"T", "mean_rel_regret", "sd_rel_regret", "n_trials"}] * 2
    for r in rows:
        assert 0.0 <= r["mean_rel_regret"] <= 1.0
        assert r["sd_rel_regret"] >= 0.0
        assert r["n_trials"] == 5
    assert rows[1]["mean_rel_regret"] < rows[0]["mean_rel_regret"]
    # deterministic given the seed list
    rows2 = regret_sweep(cfg)
    assert rows2 == rows
    # CSV round trip is byte-identical
    back = read_sweep_csv(tmp_path / "sweep.csv")
    write_sweep_csv(back, tmp_path / "sweep2.csv")
    assert (tmp_path / "sweep2.csv").read_bytes() == (tmp_path / "sweep.csv").read_bytes()
    assert back == rows


def test_regret_sweep_single_trial_sd_zero():
    env = Environment.load(CONFIGS / "linear.json")
    cfg = ExperimentConfig(env=env, delta0=0.3, T_values=[512], n_trials=1,
                           base_seed=3)
    rows = regret_sweep(cfg)
    assert rows[0]["sd_rel_regret"] == 0.0
    assert rows == regret_sweep(cfg)


def test_regret_sweep_serial_matches_parallel(monkeypatch, tmp_path):
    env = Environment.load(CONFIGS / "linear.json")
    cfg = ExperimentConfig(env=env, delta0=0.3, T_values=[512], n_trials=3,
                           base_seed=1)
    parallel = regret_sweep(cfg)
    monkeypatch.setenv("FAIRPRICE_THREADS", "1")
    serial = regret_sweep(cfg)
    assert serial == parallel


# ---------------------------------------------------------------------------
# log-log slope
# ---------------------------------------------------------------------------

def test_loglog_slope_exact_powerlaw():
    pts = [(T, 3.7 * T ** -0.28) for T in (1024, 2048, 4096, 8192)]
    assert loglog_slope(pts) == pytest.approx(-0.28, abs=1e-12)


def test_loglog_slope_two_points():
    s = loglog_slope([(1000, 0.4), (8000, 0.1)])
    expect = (math.log2(0.1) - math.log2(0.4)) / (math.log2(8000) - math.log2(1000))
    assert s == pytest.approx(expect, abs=1e-12)


def test_loglog_slope_errors():
    with pytest.raises(ValueError):
        loglog_slope([(1000, 0.4)])
    with pytest.raises(ValueError):
        loglog_slope([(1000, 0.4), (2000, 0.0)])
    with pytest.raises(ValueError):
        loglog_slope([(1000, 0.4), (-2000, 0.1)])
