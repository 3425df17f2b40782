import math

import numpy as np
import pytest

from fairprice.demand import LOGISTIC, DemandModel, LinkFunction, validate_bounds
from fairprice.distributions import (ContextGenerator, UtilityDistribution,
                                     UtilityGrid, discretize, implied_moments,
                                     implied_support, implied_utility_dist,
                                     min_cov_eigenvalue, moments,
                                     sample_context, sample_utility,
                                     support_range)


def uniform02():
    return UtilityDistribution(kind="uniform", mu=1.0, sigma=1.0 / math.sqrt(3.0), B=2.0)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def test_moments_uniform_0_2():
    mu, nu = moments(uniform02())
    assert mu == pytest.approx(1.0, abs=1e-9)
    assert nu == pytest.approx(4.0 / 3.0, abs=1e-9)


def test_moments_point_mass():
    d = UtilityDistribution(kind="point_mass", mu=0.7, sigma=0.0, B=2.0)
    assert moments(d) == pytest.approx((0.7, 0.49))


def test_moments_normal_unclipped():
    d = UtilityDistribution(kind="normal", mu=1.0, sigma=1.0, B=8.0)
    mu, nu = moments(d)
    assert mu == pytest.approx(1.0, abs=1e-6)
    assert nu == pytest.approx(2.0, abs=1e-6)


def test_moments_analytic_vs_mc():
    for kind in ("uniform", "normal", "laplace", "student_t3"):
        d = UtilityDistribution(kind=kind, mu=0.5, sigma=1.0, B=4.0)
        mu_a, nu_a = moments(d)
        mu_m, nu_m = moments(d, method="mc")
        # 4 standard errors at 10^6 samples
        se_mu = 4 * 1.0 / 1000.0
        se_nu = 4 * math.sqrt(max(nu_a, 1.0)) * 3 / 1000.0
        assert abs(mu_a - mu_m) <= se_mu
        assert abs(nu_a - nu_m) <= se_nu


def test_heavy_tail_calibration():
    # post-clip mean and sd hit the requested targets within 1%
    for kind in ("laplace", "student_t3"):
        d = UtilityDistribution(kind=kind, mu=0.5, sigma=1.0, B=4.0)
        mu, nu = moments(d)
        sd = math.sqrt(nu - mu * mu)
        assert abs(mu - 0.5) <= 0.01
        assert abs(sd - 1.0) <= 0.01


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

def test_discretize_cell_count():
    d = uniform02()
    g = discretize(d, 1.0, 0.5)
    assert len(g) == 4
    assert np.allclose(np.diff(g.points), 0.5)


def test_discretize_uniform_equal_weights():
    d = UtilityDistribution(kind="uniform", mu=0.0, sigma=1.0 / math.sqrt(3.0), B=1.0)
    g = discretize(d, 1.0, 0.25)
    assert np.all(np.abs(g.weights - 1.0 / len(g)) <= 1e-9)


def test_discretize_point_mass():
    d = UtilityDistribution(kind="point_mass", mu=0.0, sigma=0.0, B=1.0)
    g = discretize(d, 1.0, 0.25)
    k = int(np.argmin(np.abs(g.points - 0.0)))
    assert g.weights[k] == pytest.approx(1.0)
    assert np.sum(g.weights) == pytest.approx(1.0, abs=1e-9)
    assert np.count_nonzero(g.weights) == 1


def test_discretize_single_cell_degenerate():
    g = discretize(uniform02(), 1.0, 5.0)  # eps >= 2B
    assert len(g) == 1
    assert g.weights[0] == pytest.approx(1.0)


def test_discretize_weights_sum_to_one():
    rng = np.random.default_rng(7)
    kinds = ("uniform", "normal", "laplace", "student_t3", "point_mass")
    for _ in range(20):
        kind = kinds[rng.integers(len(kinds))]
        sigma = 0.0 if kind == "point_mass" else float(rng.uniform(0.3, 2.0))
        d = UtilityDistribution(kind=kind, mu=float(rng.uniform(-1, 1)),
                                sigma=sigma, B=float(rng.uniform(1.0, 4.0)))
        g = discretize(d, d.B, float(rng.uniform(0.05, 1.0)))
        assert abs(float(np.sum(g.weights)) - 1.0) <= 1e-9
        assert np.all(g.weights >= -1e-12)


def test_discretize_mc_close_to_cdf():
    d = UtilityDistribution(kind="normal", mu=0.0, sigma=1.0, B=3.0)
    g1 = discretize(d, 3.0, 0.5)
    g2 = discretize(d, 3.0, 0.5, method="mc")
    assert np.max(np.abs(g1.weights - g2.weights)) <= 0.005


def test_refinement_consistency():
    # expected revenue of a fixed Lipschitz policy on grids at eps and eps/2
    # differs by at most 4 L_f eps
    model = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([1.0]),
                        alpha0=1.0, price_min=0.0, price_max=1.0)
    d = UtilityDistribution(kind="normal", mu=0.0, sigma=1.0, B=3.0)
    bounds = validate_bounds(model, (-3.0, 3.0))

    def policy(u):
        return np.clip(0.5 + 0.3 * u, 0.0, 1.0)

    def grid_revenue(eps):
        g = discretize(d, 3.0, eps)
        p = policy(g.points)
        r = p * model.link.value(g.points - model.price_slope * p)
        return float(np.dot(g.weights, r))

    for eps in (0.4, 0.2, 0.1):
        assert abs(grid_revenue(eps) - grid_revenue(eps / 2)) <= 4 * bounds.L_f * eps


def test_utility_grid_validation():
    with pytest.raises(ValueError):
        UtilityGrid(points=np.array([0.0, 1.0]), weights=np.array([0.7, 0.2]),
                    eps=1.0)  # mass missing
    with pytest.raises(ValueError):
        UtilityGrid(points=np.array([0.0, 1.0, 2.5]),
                    weights=np.array([0.3, 0.3, 0.4]), eps=1.0)  # uneven
    with pytest.raises(ValueError):
        UtilityGrid(points=np.array([0.0, 1.0]), weights=np.array([1.2, -0.2]),
                    eps=1.0)  # negative weight


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_point_mass():
    d = UtilityDistribution(kind="point_mass", mu=0.7, sigma=0.0, B=1.0)
    assert sample_utility(d, np.random.default_rng(0)) == 0.7


def test_sample_uniform_mean():
    d = UtilityDistribution(kind="uniform", mu=0.0, sigma=1.0 / math.sqrt(3.0), B=1.0)
    s = sample_utility(d, np.random.default_rng(3), size=100_000)
    assert np.all(s >= -1.0) and np.all(s <= 1.0)
    assert abs(float(np.mean(s))) <= 0.02


def test_sample_determinism():
    d = UtilityDistribution(kind="laplace", mu=0.0, sigma=1.0, B=3.0)
    a = sample_utility(d, np.random.default_rng(11), size=100)
    b = sample_utility(d, np.random.default_rng(11), size=100)
    assert np.array_equal(a, b)


def test_empirical_distribution():
    data = np.array([0.1, 0.4, 0.4, 0.9, 5.0])
    d = UtilityDistribution(kind="empirical", B=1.0, data=data)
    mu, nu = moments(d)
    clipped = np.clip(data, -1, 1)
    assert mu == pytest.approx(float(np.mean(clipped)))
    assert nu == pytest.approx(float(np.mean(clipped ** 2)))
    s = sample_utility(d, np.random.default_rng(0), size=1000)
    assert set(np.unique(s)) <= set(np.unique(clipped))
    assert support_range(d) == (0.1, 1.0)


def test_support_range():
    assert support_range(uniform02()) == pytest.approx((0.0, 2.0))
    d = UtilityDistribution(kind="normal", mu=0.0, sigma=1.0, B=2.5)
    assert support_range(d) == (-2.5, 2.5)


def test_distribution_json_roundtrip():
    d = UtilityDistribution(kind="laplace", mu=0.3, sigma=1.2, B=3.0)
    d2 = UtilityDistribution.from_json(d.to_json())
    assert (d2.kind, d2.mu, d2.sigma, d2.B) == (d.kind, d.mu, d.sigma, d.B)
    e = UtilityDistribution(kind="empirical", B=1.0, data=np.array([0.2, 0.8]))
    e2 = UtilityDistribution.from_json(e.to_json())
    assert np.array_equal(e2.data, e.data)


# ---------------------------------------------------------------------------
# context generation
# ---------------------------------------------------------------------------

def test_context_support_d1():
    gen = ContextGenerator(dim=1, theta0=np.array([1.0]),
                           coords=[{"kind": "uniform", "low": 0.25, "high": 0.75}])
    x = sample_context(gen, np.random.default_rng(0), size=5000)
    u = x @ gen.theta0
    assert np.all(u >= 0.25) and np.all(u <= 0.75)
    lo, hi = implied_support(gen)
    assert (lo, hi) == pytest.approx((0.25, 0.75))


def test_context_zero_theta():
    gen = ContextGenerator(dim=2, theta0=np.zeros(2),
                           coords=[{"kind": "normal", "mu": 0.0, "sigma": 1.0}] * 2)
    x = sample_context(gen, np.random.default_rng(1), size=100)
    assert np.all(x @ gen.theta0 == 0.0)


def test_context_covariance_eigenvalue():
    gen = ContextGenerator(dim=3, theta0=np.ones(3) / math.sqrt(3.0),
                           coords=[{"kind": "uniform", "low": 0.0, "high": 1.0}] * 3)
    lam = min_cov_eigenvalue(gen, np.random.default_rng(5), n=10_000)
    assert lam >= 1.0 / 24.0  # iid U[0,1]: true covariance I/12


def test_implied_moments_exact():
    gen = ContextGenerator(dim=2, theta0=np.array([0.5, 0.5]),
                           coords=[{"kind": "uniform", "low": 0.5, "high": 1.0}] * 2)
    mu, nu = implied_moments(gen)
    assert mu == pytest.approx(0.75)
    # var(u) = 0.25*var(x1) + 0.25*var(x2), var(U[0.5,1]) = 0.25/12
    assert nu == pytest.approx(0.75 ** 2 + 2 * 0.25 * 0.25 / 12.0)


def test_implied_utility_dist_matches_moments():
    gen = ContextGenerator(dim=3, theta0=np.ones(3) / math.sqrt(3.0),
                           coords=[{"kind": "uniform", "low": 0.0, "high": 1.0}] * 3)
    dist = implied_utility_dist(gen)
    mu_t, nu_t = implied_moments(gen)
    mu_e, nu_e = moments(dist)
    assert abs(mu_e - mu_t) <= 0.01
    assert abs(nu_e - nu_t) <= 0.01


def test_context_json_roundtrip():
    gen = ContextGenerator(dim=2, theta0=np.array([1.0, -0.5]),
                           coords=[{"kind": "uniform", "low": 0.0, "high": 1.0},
                                   {"kind": "normal", "mu": 0.5, "sigma": 2.0}])
    gen2 = ContextGenerator.from_json(gen.to_json())
    assert np.array_equal(gen2.theta0, gen.theta0)
    a = sample_context(gen, np.random.default_rng(9), size=50)
    b = sample_context(gen2, np.random.default_rng(9), size=50)
    assert np.array_equal(a, b)
