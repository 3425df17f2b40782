import math

import numpy as np
import pytest

from fairprice.demand import (EXPONENTIAL, LINEAR, LOGISTIC, DemandModel,
                              LinkDomainError, LinkFunction, ModelBounds,
                              compute_sigma_u, expected_revenue, link_eval,
                              unconstrained_optimal_price, validate_bounds)


def linear_model(alpha0=1.0, lo=0.0, hi=1.0, c=0.5, theta0=(1.0,)):
    return DemandModel(link=LinkFunction(LINEAR), theta0=np.array(theta0),
                       alpha0=alpha0, price_min=lo, price_max=hi, price_coeff=c)


def test_link_values():
    assert link_eval(LinkFunction(LINEAR), 0.3) == 0.3
    assert link_eval(LinkFunction(LOGISTIC), 0.0) == 0.5
    assert link_eval(LinkFunction(EXPONENTIAL), 0.0) == 0.0


def test_exponential_domain_error():
    link = LinkFunction(EXPONENTIAL)
    with pytest.raises(LinkDomainError):
        link.value(-0.1)
    with pytest.raises(LinkDomainError):
        link.deriv(np.array([0.5, -1e-9]))


def test_unknown_link_kind_rejected():
    with pytest.raises(ValueError):
        LinkFunction("probit")


def test_link_derivatives_finite_difference():
    h = 1e-4
    for kind, mesh in ((LINEAR, np.linspace(-3, 3, 41)),
                       (LOGISTIC, np.linspace(-3, 3, 41)),
                       (EXPONENTIAL, np.linspace(h, 3, 41))):
        link = LinkFunction(kind)
        for u in mesh:
            fd1 = (link.value(u + h) - link.value(u - h)) / (2 * h)
            fd2 = (link.value(u + h) - 2 * link.value(u) + link.value(u - h)) / h**2
            assert abs(link.deriv(u) - fd1) <= 10 * h**2
            assert abs(link.deriv2(u) - fd2) <= 1e-4


def test_expected_revenue_examples():
    m = linear_model()
    assert expected_revenue(m, 1.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert expected_revenue(m, 0.7, 0.0) == 0.0
    # alpha0 -> 0 limit: price does not move the demand argument
    tiny = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([1.0]),
                       alpha0=1e-12, price_min=0.0, price_max=1.0)
    assert expected_revenue(tiny, 0.0, 0.5) == pytest.approx(0.25, abs=1e-9)


def test_expected_revenue_broadcasts():
    m = linear_model()
    u = np.array([0.2, 0.5, 0.9])
    p = np.array([0.1, 0.4, 0.8])
    out = expected_revenue(m, u, p)
    assert out.shape == (3,)
    for i in range(3):
        assert out[i] == pytest.approx(p[i] * (u[i] - 0.5 * p[i]))


def test_unconstrained_price_linear():
    m = linear_model()
    price, interior = unconstrained_optimal_price(m, 0.6)
    assert price == pytest.approx(0.6, abs=1e-12)
    assert interior
    price, interior = unconstrained_optimal_price(m, 2.0)
    assert price == 1.0
    assert not interior


def test_unconstrained_price_logistic_against_grid():
    m = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([1.0]),
                    alpha0=1.0, price_min=0.0, price_max=3.0)
    price, _ = unconstrained_optimal_price(m, 1.0)
    mesh = np.linspace(0.0, 3.0, 3_000_001)  # 1e-6 resolution
    oracle = mesh[np.argmax(expected_revenue(m, 1.0, mesh))]
    assert abs(price - oracle) <= 1e-5


def test_unconstrained_price_monotone_and_linear_sandwich():
    m = linear_model(alpha0=2.0, hi=3.0)
    us = np.linspace(0.5, 3.0, 20)  # stationary points interior: u/(2*0.5*2)=u/2
    prices = [unconstrained_optimal_price(m, float(u))[0] for u in us]
    for a, b in zip(prices, prices[1:]):
        assert b >= a - 1e-12
    # Linear with c=0.5: p*(u') - p*(u) = (u'-u)/alpha0 exactly
    for u, u2, p, p2 in zip(us, us[1:], prices, prices[1:]):
        assert p2 - p == pytest.approx((u2 - u) / 2.0, abs=1e-12)


def test_revenue_peak_matches_reported_price():
    rng = np.random.default_rng(42)
    for kind in (LINEAR, LOGISTIC):
        for _ in range(5):
            alpha0 = float(rng.uniform(0.5, 2.0))
            m = DemandModel(link=LinkFunction(kind), theta0=np.array([1.0]),
                            alpha0=alpha0, price_min=0.0, price_max=2.0)
            u = float(rng.uniform(0.0, 1.5))
            price, _ = unconstrained_optimal_price(m, u)
            mesh = np.linspace(0.0, 2.0, 1000)
            peak = mesh[np.argmax(expected_revenue(m, u, mesh))]
            assert abs(price - peak) <= mesh[1] - mesh[0]


def test_sigma_u_linear_is_one():
    for alpha0 in (0.3, 1.0, 5.0):
        m = linear_model(alpha0=alpha0, hi=2.0)
        b = ModelBounds(B=1.0, B_tilde=1.0 + alpha0, L_f=1.0, sigma_r=1.0, M_r=alpha0)
        assert compute_sigma_u(m, b) == 1.0
        assert b.sigma_u == 1.0


def test_sigma_u_logistic_positive_when_alpha_small():
    # f'' of the logistic is bounded by f'/2 in size, so alpha0 <= 2/pmax works
    m = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([1.0]),
                    alpha0=0.5, price_min=0.0, price_max=4.0)
    b = ModelBounds(B=2.0, B_tilde=3.0, L_f=1.0, sigma_r=0.1, M_r=1.0)
    assert compute_sigma_u(m, b) > 0.0


def test_sigma_u_exponential_positive_on_domain():
    m = DemandModel(link=LinkFunction(EXPONENTIAL), theta0=np.array([1.0]),
                    alpha0=0.9, price_min=0.0, price_max=2.0)
    b = ModelBounds(B=2.0, B_tilde=2.0, L_f=1.0, sigma_r=0.1, M_r=1.0)
    # mesh restricted to [0, B_tilde]; f' = e^{-u} = |f''| so margin is
    # (1 - c*a*pmax) e^{-u} > 0 when c*a*pmax < 1
    assert compute_sigma_u(m, b) > 0.0


def test_validate_bounds_flags_f_range():
    m = linear_model()
    b = validate_bounds(m, (0.0, 1.0))
    assert not b.f_range_ok
    assert b.f_range_violation == pytest.approx((0.0, 1.0))
    assert b.M_r == pytest.approx(1.0)  # |r''| = 2*c*alpha0 for the linear link
    assert b.sigma_u == 1.0
    assert b.B == 1.0 and b.B_tilde == 1.0


def test_validate_bounds_logistic_clean():
    m = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([1.0]),
                    alpha0=1.0, price_min=0.0, price_max=4.0)
    b = validate_bounds(m, (-1.0, 2.0))
    assert b.f_range_ok
    assert b.f_range_violation is None
    assert b.L_f <= 1.0
    assert b.sigma_r > 0.0
    assert b.B <= b.B_tilde


def test_model_validation():
    with pytest.raises(ValueError):
        linear_model(alpha0=0.0)
    with pytest.raises(ValueError):
        linear_model(lo=1.0, hi=1.0)
    with pytest.raises(ValueError):
        linear_model(lo=-0.5)
    with pytest.raises(ValueError):
        linear_model(c=0.7)


def test_model_json_roundtrip():
    m = DemandModel(link=LinkFunction(LOGISTIC), theta0=np.array([0.3, 0.7]),
                    alpha0=1.5, price_min=0.5, price_max=2.5, price_coeff=1.0)
    m2 = DemandModel.from_json(m.to_json())
    assert m2.link.kind == LOGISTIC
    assert np.array_equal(m2.theta0, m.theta0)
    assert (m2.alpha0, m2.price_coeff) == (1.5, 1.0)
    assert (m2.price_min, m2.price_max) == (0.5, 2.5)
    assert m.price_slope == 1.5
    assert m.dim == 2


def test_demand_arg_convention():
    m = linear_model(alpha0=2.0, c=0.5)
    assert m.demand_arg(1.0, 0.5) == pytest.approx(1.0 - 0.5 * 2.0 * 0.5)
    m1 = linear_model(alpha0=2.0, c=1.0)
    assert m1.demand_arg(1.0, 0.5) == pytest.approx(0.0)
