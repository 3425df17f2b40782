"""Two-phase fair pricing with demand learning.

Phase 1 (periods 1..T0, T0 = ceil(T^{2/3})): non-personalized price
experimentation, offering the interval endpoints with probability 1/2 each,
followed by an MLE fit of (theta, alpha).

Phase 2: UCB over K = ceil(T^{1/3}) "starting prices" pi_k. Arm k prices
customer x at Trim(pi_k + delta0_tilde * x'theta_hat), where the cushion
delta0_tilde = max(0, delta0 - kappa1/sqrt(T0)) absorbs the estimation error
in theta_hat so the implemented policy stays delta0-fair under the true
parameters with high probability.

Regret is measured per period against the full-information optimal fair
policy evaluated at the realized context (expected-demand revenue, not the
Bernoulli draw, which keeps traces low-variance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import ucb_phase2 as _ucb_kernel
from .demand import LINK_IDS, DemandModel, expected_revenue
from .estimation import (LikelihoodSpec, ModelEstimate, Observation, mle_fit,
                         observations_to_arrays)

COMPUTATIONAL = "computational"
THEORETICAL = "theoretical"


def _ceil_cbrt(x: int) -> int:
    """Smallest m >= 1 with m^3 >= x, in exact integer arithmetic.

    (Float rounding makes e.g. 8000**(1/3) = 20.000000000000004, whose ceil
    is 21; the adjustment loops repair any such off-by-one.)
    """
    m = max(1, int(round(x ** (1.0 / 3.0))))
    while m ** 3 < x:
        m += 1
    while m > 1 and (m - 1) ** 3 >= x:
        m -= 1
    return m


@dataclass(frozen=True)
class BanditParams:
    """Run parameters. delta0_tilde is the fairness budget actually used in
    phase 2 (zero means pricing degenerates to non-personalized UCB)."""

    T: int
    T0: int
    K: int
    kappa1: float
    kappa2: float
    delta0: float
    delta0_tilde: float
    mode: str

    def to_json(self) -> dict:
        return {"T": self.T, "T0": self.T0, "K": self.K,
                "kappa1": self.kappa1, "kappa2": self.kappa2,
                "delta0": self.delta0, "delta0_tilde": self.delta0_tilde,
                "mode": self.mode}


def make_params(T: int, d: int, delta0: float, mode: str = COMPUTATIONAL,
                bounds=None, diam_x: float | None = None,
                sigma_x: float | None = None,
                price_interval: tuple[float, float] | None = None) -> BanditParams:
    """Derive (T0, K, kappa1, kappa2, delta0_tilde) from the horizon.

    computational mode: kappa1 = sqrt(ln(d*T)), kappa2 = sqrt(ln T) -- the
    working choices. theoretical mode: kappa1 = 8*M_r*diam(X)*sqrt(ln(dT)) /
    (min(sigma_x, 0.25*(pmax-pmin)^2) * sigma_r), kappa2 = 4*sqrt(ln T),
    which needs `bounds` (for M_r, sigma_r), diam_x, sigma_x and the price
    interval.
    """
    if T < 8:
        raise ValueError("T must be >= 8")
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    T0 = _ceil_cbrt(T * T)
    K = _ceil_cbrt(T)
    if mode == COMPUTATIONAL:
        kappa1 = math.sqrt(math.log(d * T))
        kappa2 = math.sqrt(math.log(T))
    elif mode == THEORETICAL:
        if bounds is None or diam_x is None or sigma_x is None or price_interval is None:
            raise ValueError("theoretical mode needs bounds, diam_x, sigma_x "
                             "and price_interval")
        span = price_interval[1] - price_interval[0]
        kappa1 = (8.0 * bounds.M_r * diam_x * math.sqrt(math.log(d * T))
                  / (min(sigma_x, 0.25 * span * span) * bounds.sigma_r))
        kappa2 = 4.0 * math.sqrt(math.log(T))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    delta0_tilde = max(0.0, delta0 - kappa1 / math.sqrt(T0))
    return BanditParams(T=T, T0=T0, K=K, kappa1=kappa1, kappa2=kappa2,
                        delta0=delta0, delta0_tilde=delta0_tilde, mode=mode)


# ---------------------------------------------------------------------------
# phase 1: experimentation
# ---------------------------------------------------------------------------

def run_experimentation(env, params: BanditParams,
                        rng: np.random.Generator) -> list[Observation]:
    """T0 periods offering price_min or price_max with probability 1/2 each.

    Draw order (fixed, for reproducibility): all contexts, then the T0 price
    coins, then the T0 demand uniforms.
    """
    model = env.model
    X = env.sample_contexts(rng, params.T0)
    coins = rng.random(params.T0)
    yu = rng.random(params.T0)
    prices = np.where(coins < 0.5, model.price_min, model.price_max)
    probs = env.demand_prob(X @ model.theta0, prices)
    ys = (yu < probs).astype(float)
    return [Observation(x=X[t], p=float(prices[t]), y=float(ys[t]))
            for t in range(params.T0)]


# ---------------------------------------------------------------------------
# phase 2: UCB over starting prices
# ---------------------------------------------------------------------------

@dataclass
class UcbState:
    """Arms are starting prices on [pi_lo, pi_hi]; r and n are the per-arm
    revenue sums and pull counts."""

    arms: np.ndarray
    r: np.ndarray
    n: np.ndarray
    theta_hat: np.ndarray
    delta0_tilde: float
    diagnostic: str | None = None


def init_ucb(estimate: ModelEstimate, data, params: BanditParams,
             price_interval: tuple[float, float]) -> UcbState:
    """K evenly spaced starting prices on [pi_lo, pi_hi] where
    pi_lo = pmin - delta0_tilde * max_t x_t'theta_hat and
    pi_hi = pmax - delta0_tilde * min_t x_t'theta_hat (so that some customer
    can be priced at each interval endpoint). Falls back to [pmin, pmax] with
    a diagnostic if the estimate makes the interval empty."""
    p_lo, p_hi = price_interval
    X, _, _ = observations_to_arrays(data)
    u_hat = X @ estimate.theta_hat
    pi_lo = p_lo - params.delta0_tilde * float(np.max(u_hat))
    pi_hi = p_hi - params.delta0_tilde * float(np.min(u_hat))
    diagnostic = None
    if pi_lo > pi_hi:
        diagnostic = (f"degenerate arm interval [{pi_lo:.6g}, {pi_hi:.6g}]; "
                      "falling back to the price interval")
        pi_lo, pi_hi = p_lo, p_hi
    if params.K == 1:
        arms = np.array([0.5 * (pi_lo + pi_hi)])
    else:
        arms = np.linspace(pi_lo, pi_hi, params.K)
    return UcbState(arms=arms, r=np.zeros(params.K),
                    n=np.zeros(params.K, dtype=np.int64),
                    theta_hat=estimate.theta_hat.copy(),
                    delta0_tilde=params.delta0_tilde, diagnostic=diagnostic)


def select_arm(state: UcbState, kappa2: float) -> int:
    """Smallest unpulled arm if any; else argmax of r/n + kappa2/sqrt(n)
    (ties to the smallest index). 0-based."""
    unpulled = np.flatnonzero(state.n == 0)
    if len(unpulled) > 0:
        return int(unpulled[0])
    scores = state.r / state.n + kappa2 / np.sqrt(state.n)
    return int(np.argmax(scores))


def implement_price(state: UcbState, arm: int, x: np.ndarray,
                    price_interval: tuple[float, float]) -> float:
    """Trim(pi_arm + delta0_tilde * x'theta_hat) into the price interval."""
    raw = state.arms[arm] + state.delta0_tilde * float(np.dot(x, state.theta_hat))
    return float(min(max(raw, price_interval[0]), price_interval[1]))


def update_state(state: UcbState, arm: int, p: float, y: float) -> None:
    """Revenue-count update: r_arm += y*p, n_arm += 1."""
    state.r[arm] += y * p
    state.n[arm] += 1


# ---------------------------------------------------------------------------
# full run
# ---------------------------------------------------------------------------

@dataclass
class RegretTrace:
    """Per-period record of a full bandit run.

    arm is -1 during phase 1 (no arm yet), else the 0-based phase-2 arm.
    instant_regret compares expected revenue against the benchmark fair
    policy at the realized context, so single entries can be negative;
    cumulative_regret is their running sum's final value.
    """

    t: np.ndarray
    arm: np.ndarray
    price: np.ndarray
    y: np.ndarray
    instant_regret: np.ndarray
    cum_regret: np.ndarray
    cumulative_regret: float
    fairness_violations: int
    benchmark_revenue: float
    params: BanditParams
    estimate: ModelEstimate
    theta_err: float
    diagnostic: str | None = None

    @property
    def relative_regret(self) -> float:
        return self.cumulative_regret / self.benchmark_revenue

    def to_csv(self, path) -> None:
        """Columns t,arm,price,y,instant_regret,cum_regret. The arm column is
        1-based; 0 marks phase-1 (experimentation) periods."""
        write_trace_csv({"t": self.t, "arm": self.arm + 1, "price": self.price,
                         "y": self.y, "instant_regret": self.instant_regret,
                         "cum_regret": self.cum_regret}, path)

    def summary_json(self, seed: int | None = None) -> dict:
        return {"seed": seed, "T": self.params.T, "T0": self.params.T0,
                "K": self.params.K, "kappa1": self.params.kappa1,
                "kappa2": self.params.kappa2,
                "delta0_tilde": self.params.delta0_tilde,
                "theta_err": self.theta_err,
                "cum_regret": self.cumulative_regret,
                "fairness_violations": self.fairness_violations}


TRACE_HEADER = "t,arm,price,y,instant_regret,cum_regret"


def write_trace_csv(cols: dict, path) -> None:
    """cols keyed by the trace header names; arm is already 1-based here."""
    lines = [TRACE_HEADER]
    n = len(cols["t"])
    for i in range(n):
        lines.append(f"{int(cols['t'][i])},{int(cols['arm'][i])},"
                     f"{float(cols['price'][i])!r},{float(cols['y'][i])!r},"
                     f"{float(cols['instant_regret'][i])!r},"
                     f"{float(cols['cum_regret'][i])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> dict:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: unexpected trace CSV header")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return {"t": np.array([int(r[0]) for r in rows]),
            "arm": np.array([int(r[1]) for r in rows]),
            "price": np.array([float(r[2]) for r in rows]),
            "y": np.array([float(r[3]) for r in rows]),
            "instant_regret": np.array([float(r[4]) for r in rows]),
            "cum_regret": np.array([float(r[5]) for r in rows])}


def run_bandit(env, params: BanditParams, rng: np.random.Generator,
               benchmark=None) -> RegretTrace:
    """Execute both phases for T periods against the given environment.

    `benchmark` is the full-information optimal fair policy used for regret
    accounting; by default the environment's cached one (linear fast path
    when the structure condition holds, DP otherwise).

    A period counts as a fairness violation when the implemented policy's
    slope on the true-utility scale, delta0_tilde * theta_hat'theta0 /
    ||theta0||^2, exceeds delta0 in absolute value. Phase-1 prices are
    constant across customers and never violate.
    """
    model: DemandModel = env.model
    if benchmark is None:
        benchmark = env.benchmark_policy(params.delta0)

    data = run_experimentation(env, params, rng)
    spec = LikelihoodSpec(link=model.link, price_coeff=model.price_coeff)
    estimate = mle_fit(spec, data)
    state = init_ucb(estimate, data, params,
                     (model.price_min, model.price_max))

    T2 = params.T - params.T0
    X2 = env.sample_contexts(rng, T2)
    yu2 = rng.random(T2)
    u_true2 = X2 @ model.theta0
    u_hat2 = X2 @ estimate.theta_hat
    arm2, price2, y2 = _ucb_kernel(
        u_true2, u_hat2, yu2, state.arms, state.r, state.n,
        params.kappa2, params.delta0_tilde,
        model.price_min, model.price_max,
        LINK_IDS[model.link.kind], model.price_slope)

    X1, price1, y1 = observations_to_arrays(data)
    u_all = np.concatenate([X1 @ model.theta0, u_true2])
    p_all = np.concatenate([price1, price2])
    y_all = np.concatenate([y1, y2])
    arm_all = np.concatenate([np.full(params.T0, -1, dtype=np.int64), arm2])

    bench_rev = expected_revenue(model, u_all, benchmark.evaluate(u_all))
    actual_rev = expected_revenue(model, u_all, p_all)
    instant = bench_rev - actual_rev
    cum = np.cumsum(instant)

    norm_sq = float(np.dot(model.theta0, model.theta0))
    if norm_sq > 0 and T2 > 0:
        slope_u = params.delta0_tilde * float(
            np.dot(estimate.theta_hat, model.theta0)) / norm_sq
        violations = T2 if abs(slope_u) > params.delta0 else 0
    else:
        violations = 0

    notes = []
    if params.delta0_tilde == 0.0:
        notes.append("cushion consumed the whole fairness budget; phase-2 "
                     "pricing is non-personalized")
    if not estimate.converged:
        notes.append(f"MLE did not converge: {estimate.diagnostic or 'unknown'}")
    if state.diagnostic:
        notes.append(state.diagnostic)
    diagnostic = "; ".join(notes) if notes else None

    return RegretTrace(
        t=np.arange(1, params.T + 1), arm=arm_all, price=p_all, y=y_all,
        instant_regret=instant, cum_regret=cum,
        cumulative_regret=float(cum[-1]),
        fairness_violations=violations,
        benchmark_revenue=float(np.sum(bench_rev)),
        params=params, estimate=estimate,
        theta_err=float(np.linalg.norm(estimate.theta_hat - model.theta0)),
        diagnostic=diagnostic)
