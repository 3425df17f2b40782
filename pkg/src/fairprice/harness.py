"""Simulation environments and experiment drivers.

An Environment bundles a demand model with a context generator (and the
utility distribution it implies), providing the pieces a bandit run needs:
context sampling, demand probabilities, and a cached full-information
benchmark policy for regret accounting.
"""
from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import bandit as _bandit
from .demand import LINEAR, LOGISTIC, DemandModel, ModelBounds, validate_bounds
from .distributions import (ContextGenerator, UtilityDistribution, discretize,
                            implied_moments, implied_utility_dist, moments,
                            sample_context, support_range)
from .solver import (PiecewiseLinearPolicy, cost_of_fairness_linear,
                     linear_optimal_policy, make_price_grid, solve_dp,
                     unconstrained_revenue)

BENCHMARK_EPS = 1e-2


@dataclass
class Environment:
    """Everything a simulation needs, JSON round-trippable.

    utility_dist defaults to the distribution implied by the context
    generator (tabulated once from a large fixed-seed sample). When it is
    supplied explicitly, consistency with the generator is checkable via
    check_consistency() but not enforced.
    """

    model: DemandModel
    context_gen: ContextGenerator
    utility_dist: UtilityDistribution | None = None
    seed: int = 0
    _bounds: ModelBounds | None = field(default=None, repr=False)
    _benchmarks: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.context_gen.dim != self.model.dim:
            raise ValueError("context generator and model dimension differ")
        if not np.allclose(self.context_gen.theta0, self.model.theta0):
            raise ValueError("context generator and model disagree on theta0")
        self._implied_utility = self.utility_dist is None
        if self.utility_dist is None:
            self.utility_dist = implied_utility_dist(self.context_gen)

    # -- sampling ----------------------------------------------------------
    def sample_contexts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return sample_context(self.context_gen, rng, size=n)

    def demand_prob(self, u, p):
        """Bernoulli purchase probability, clamped to [0, 1].

        Unlike the raw link this never raises: an exponential-link argument
        pushed negative by price trimming yields probability 0.
        """
        w = self.model.demand_arg(u, p)
        kind = self.model.link.kind
        if kind == LINEAR:
            return np.clip(w, 0.0, 1.0)
        if kind == LOGISTIC:
            return expit(w)
        return np.where(w > 0.0, -np.expm1(-np.minimum(np.maximum(w, 0.0), 700.0)), 0.0)

    def check_consistency(self, tol: float = 0.05) -> tuple[bool, str]:
        """Compare the generator-implied utility moments against the
        attached distribution's (Monte-Carlo tolerance; advisory only)."""
        mu_g, nu_g = implied_moments(self.context_gen)
        mu_d, nu_d = moments(self.utility_dist)
        scale = max(1.0, abs(mu_g), abs(nu_g))
        gap = max(abs(mu_g - mu_d), abs(nu_g - nu_d)) / scale
        msg = (f"implied (mu, nu_sq)=({mu_g:.4g}, {nu_g:.4g}) vs attached "
               f"({mu_d:.4g}, {nu_d:.4g})")
        return gap <= tol, msg

    # -- analysis ----------------------------------------------------------
    def bounds(self) -> ModelBounds:
        if self._bounds is None:
            self._bounds = validate_bounds(self.model,
                                           support_range(self.utility_dist))
        return self._bounds

    def moments(self) -> tuple[float, float]:
        return moments(self.utility_dist)

    def benchmark_policy(self, delta0: float,
                         eps: float = BENCHMARK_EPS) -> PiecewiseLinearPolicy:
        """Full-information optimal fair policy, cached per (delta0, eps).

        Linear link: exact closed form. Otherwise, when delta0 is under the
        structure threshold sigma_u / M_r the optimum is linear in u and a
        one-dimensional intercept search suffices; past the threshold the
        grid solver runs at resolution eps.
        """
        key = (float(delta0), float(eps))
        if key in self._benchmarks:
            return self._benchmarks[key]
        mu_u, nu_sq = self.moments()
        b = self.bounds()
        if self.model.link.kind == LINEAR:
            policy = linear_optimal_policy(self.model, mu_u, nu_sq, delta0)
        else:
            grid = discretize(self.utility_dist, b.B, eps)
            if b.sigma_u > 0 and delta0 <= b.sigma_u / b.M_r:
                policy = linear_optimal_policy(self.model, mu_u, nu_sq, delta0,
                                               grid=grid, bounds=b)
            else:
                price_grid = make_price_grid(self.model, delta0, eps)
                sol = solve_dp(self.model, grid, delta0, eps=eps,
                               keep_value_table=False)
                policy = PiecewiseLinearPolicy(
                    knots=grid.points.copy(),
                    prices=price_grid[sol.j_star], delta0=delta0)
        self._benchmarks[key] = policy
        return policy

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        """An implied utility distribution serializes as null: from_json
        recomputes it deterministically, keeping configs small."""
        return {"model": self.model.to_json(),
                "context": self.context_gen.to_json(),
                "utility": (None if self._implied_utility
                            else self.utility_dist.to_json()),
                "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "Environment":
        dist = (UtilityDistribution.from_json(obj["utility"])
                if obj.get("utility") is not None else None)
        return cls(model=DemandModel.from_json(obj["model"]),
                   context_gen=ContextGenerator.from_json(obj["context"]),
                   utility_dist=dist, seed=int(obj.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "Environment":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# cost-of-fairness curve
# ---------------------------------------------------------------------------

def rho_curve(env: Environment, delta0_values, eps: float | None = None,
              method: str = "auto", out=None) -> list[tuple[float, float]]:
    """(delta0, rho) pairs: optimal fair revenue over unconstrained revenue.

    method "closed" forces the linear-link formula, "numeric" the grid
    ratio, "auto" picks closed form for the linear link. Numeric eps
    defaults to 2B/100 (one hundred utility cells; the price grid follows
    from the solver's delta0*eps spacing). Writes `delta0,rho` CSV when
    `out` is given.
    """
    delta0_values = [float(d) for d in delta0_values]
    if any(b <= a for a, b in zip(delta0_values, delta0_values[1:])):
        raise ValueError("delta0 values must be increasing")
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    use_closed = (method == "closed"
                  or (method == "auto" and env.model.link.kind == LINEAR))
    mu_u, nu_sq = env.moments()
    rows: list[tuple[float, float]] = []
    if use_closed:
        if env.model.link.kind != LINEAR:
            raise ValueError("closed form requires the linear link")
        for d0 in delta0_values:
            rows.append((d0, cost_of_fairness_linear(env.model.alpha0, d0,
                                                     mu_u, nu_sq)))
    else:
        b = env.bounds()
        if eps is None:
            eps = 2.0 * b.B / 100.0
        grid = discretize(env.utility_dist, b.B, eps)
        r_star = unconstrained_revenue(env.model, grid)
        for d0 in delta0_values:
            sol = solve_dp(env.model, grid, d0, eps=eps,
                           keep_value_table=False)
            rows.append((d0, sol.objective / r_star))
    if out is not None:
        write_rho_csv(rows, out)
    return rows


def write_rho_csv(rows, path) -> None:
    lines = ["delta0,rho"]
    for d0, rho in rows:
        lines.append(f"{float(d0)!r},{float(rho)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_rho_csv(path) -> list[tuple[float, float]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "delta0,rho":
        raise ValueError(f"{path}: expected 'delta0,rho' header")
    return [tuple(float(v) for v in ln.split(",")) for ln in lines[1:] if ln]


# ---------------------------------------------------------------------------
# regret sweeps
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """A regret sweep: horizons, trial count, fairness level, seeds.

    Seeds are either explicit (list of length n_trials, reused for every
    horizon) or derived as base_seed XOR trial-index.
    """

    env: Environment
    delta0: float
    T_values: list[int]
    n_trials: int
    mode: str = _bandit.COMPUTATIONAL
    base_seed: int = 0
    seeds: list[int] | None = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.n_trials:
            raise ValueError("seeds list must have length n_trials")
        if any(b <= a for a, b in zip(self.T_values, self.T_values[1:])):
            raise ValueError("T_values must be increasing")

    def trial_seeds(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return [self.base_seed ^ i for i in range(self.n_trials)]

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return cls(env=Environment.from_json(obj["env"]),
                   delta0=float(obj["delta0"]),
                   T_values=[int(t) for t in obj["T_values"]],
                   n_trials=int(obj["n_trials"]),
                   mode=obj.get("mode", _bandit.COMPUTATIONAL),
                   base_seed=int(obj.get("seed", obj.get("base_seed", 0))),
                   seeds=obj.get("seeds"))


def _run_trial(env_json: dict, delta0: float, T: int, mode: str, seed: int,
               benchmark: PiecewiseLinearPolicy) -> float:
    env = Environment.from_json(env_json)
    params = _bandit.make_params(T, env.model.dim, delta0, mode)
    rng = np.random.default_rng(seed)
    trace = _bandit.run_bandit(env, params, rng, benchmark=benchmark)
    return trace.relative_regret


def _worker_count(n_trials: int) -> int:
    cap = os.environ.get("FAIRPRICE_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_trials, limit))


def regret_sweep(config: ExperimentConfig, out=None) -> list[dict]:
    """Run n_trials bandit runs per horizon; aggregate relative regret.

    Rows: {"T", "mean_rel_regret", "sd_rel_regret", "n_trials"}. The
    benchmark policy is computed once and shared across trials, which run
    in parallel processes (capped by FAIRPRICE_THREADS; =1 means in-process
    serial). Results are written by this single process, so output order is
    deterministic regardless of worker scheduling.
    """
    env_json = config.env.to_json()
    benchmark = config.env.benchmark_policy(config.delta0)
    seeds = config.trial_seeds()
    jobs = [(T, s) for T in config.T_values for s in seeds]
    workers = _worker_count(config.n_trials)
    if workers == 1:
        results = [_run_trial(env_json, config.delta0, T, config.mode, s,
                              benchmark) for T, s in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_trial, env_json, config.delta0, T,
                                config.mode, s, benchmark) for T, s in jobs]
            results = [f.result() for f in futs]
    rows = []
    for ti, T in enumerate(config.T_values):
        rel = np.array(results[ti * config.n_trials:(ti + 1) * config.n_trials])
        if np.any(rel < 0) or np.any(rel > 1):
            warnings.warn(f"relative regret outside [0, 1] at T={T}")
        sd = float(np.std(rel, ddof=1)) if len(rel) > 1 else 0.0
        rows.append({"T": T, "mean_rel_regret": float(np.mean(rel)),
                     "sd_rel_regret": sd, "n_trials": config.n_trials})
    if out is not None:
        write_sweep_csv(rows, out)
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    lines = ["T,mean_rel_regret,sd_rel_regret,n_trials"]
    for row in rows:
        lines.append(f"{row['T']},{float(row['mean_rel_regret'])!r},"
                     f"{float(row['sd_rel_regret'])!r},{row['n_trials']}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_sweep_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "T,mean_rel_regret,sd_rel_regret,n_trials":
        raise ValueError(f"{path}: unexpected sweep CSV header")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        t, m, s, n = ln.split(",")
        rows.append({"T": int(t), "mean_rel_regret": float(m),
                     "sd_rel_regret": float(s), "n_trials": int(n)})
    return rows


def loglog_slope(points) -> float:
    """Least-squares slope of log2(rel_regret) on log2(T) for
    [(T, rel_regret), ...]. Requires >= 2 points, all positive."""
    pts = [(float(t), float(m)) for t, m in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(t <= 0 or m <= 0 for t, m in pts):
        raise ValueError("log-log slope needs positive values")
    x = np.log2([t for t, _ in pts])
    y = np.log2([m for _, m in pts])
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
