"""Optimal fair pricing policies.

A policy is fair at level delta0 when any two customers' prices differ by at
most delta0 times the difference of their baseline utilities, i.e. the map
from utility to price is delta0-Lipschitz. This module computes optimal fair
policies three ways and cross-checks them:

  * solve_dp        -- discretized dynamic program over (utility cell, price
                       index) with the price-step/utility-step ratio pinned to
                       delta0, so chain feasibility IS the Lipschitz constraint
  * brute_force_solve -- exhaustive chain enumeration (the DP's test oracle)
  * linear_optimal_policy -- the linear-form shortcut pi0 + delta0*u that is
                       provably optimal when delta0 <= sigma_u / M_r

plus fairness verification and the cost-of-fairness ratio rho(delta0) =
R(delta0) / R(+inf), in closed form for linear demand and numerically
otherwise.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import dp_forward
from .demand import (LINEAR, DemandModel, ModelBounds, expected_revenue,
                     golden_section_max, unconstrained_optimal_price,
                     validate_bounds)
from .distributions import UtilityGrid, _ceil_count

#: refuse DP instances with more than this many (cell, price) states
DP_CELL_CAP = 10_000_000


class SolverResourceError(RuntimeError):
    """The requested discretization does not fit the configured budget."""


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseLinearPolicy:
    """A delta0-Lipschitz map from baseline utility to price.

    form="interpolated": linear interpolation of (knots, prices), constant
    extension outside the knot range -- the shape the DP produces.
    form="linear": the closed form clip(pi0 + slope*u, *price_bounds); knots
    and prices then hold an exact piecewise-linear rendering of the same map
    on its working range (for serialization and slope checks).
    """

    knots: np.ndarray
    prices: np.ndarray
    delta0: float
    form: str = "interpolated"
    pi0: float | None = None
    slope: float | None = None
    price_bounds: tuple[float, float] | None = None
    warning: str | None = None

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.knots.shape != self.prices.shape or self.knots.ndim != 1:
            raise ValueError("knots and prices must be 1-d and the same length")
        if len(self.knots) > 1 and np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if self.form not in ("interpolated", "linear"):
            raise ValueError(f"unknown policy form {self.form!r}")
        if self.form == "linear" and (self.pi0 is None or self.slope is None
                                      or self.price_bounds is None):
            raise ValueError("linear form needs pi0, slope and price_bounds")

    def evaluate(self, u):
        if self.form == "linear":
            lo, hi = self.price_bounds
            out = np.clip(self.pi0 + self.slope * np.asarray(u, dtype=float), lo, hi)
        else:
            out = np.interp(u, self.knots, self.prices)
        return float(out) if np.ndim(u) == 0 else out

    __call__ = evaluate


def check_fairness(policy: PiecewiseLinearPolicy, delta0: float,
                   tol: float = 1e-9) -> bool:
    """True iff the policy's utility-to-price slopes all stay within delta0+tol.

    For piecewise-linear maps the knot-to-knot slopes are necessary and
    sufficient; the linear form is checked on its exact slope.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if policy.form == "linear":
        return abs(policy.slope) <= delta0 + tol
    if len(policy.knots) < 2:
        return True
    slopes = np.diff(policy.prices) / np.diff(policy.knots)
    return bool(np.all(np.abs(slopes) <= delta0 + tol))


def evaluate_policy_revenue(policy: PiecewiseLinearPolicy, model: DemandModel,
                            grid: UtilityGrid) -> float:
    """Expected revenue sum_k gamma_k * r_{u_k}(policy(u_k))."""
    prices = policy.evaluate(grid.points)
    rev = expected_revenue(model, grid.points, prices)
    return float(np.dot(grid.weights, rev))


# ---------------------------------------------------------------------------
# dynamic program
# ---------------------------------------------------------------------------

@dataclass
class DpSolution:
    """Optimal price-index chain for a discretized fair-pricing instance.

    j_star is 0-based; consecutive entries differ by at most 1, which is the
    discrete form of the fairness constraint (price step = delta0 * eps).
    value_table is the Bellman table V[k, j] (None for brute-force results).
    """

    j_star: np.ndarray
    value_table: np.ndarray | None
    objective: float
    price_grid: np.ndarray


def price_grid_size(model: DemandModel, delta0: float, eps: float) -> int:
    """M_p = ceil((p_max - p_min) / (delta0*eps)), without allocating."""
    if delta0 <= 0 or eps <= 0:
        raise ValueError("delta0 and eps must be positive")
    return _ceil_count((model.price_max - model.price_min) / (delta0 * eps))


def make_price_grid(model: DemandModel, delta0: float, eps: float) -> np.ndarray:
    """Price cell centers p_j = p_min + (j - 1/2)*delta0*eps, j = 1..M_p,
    with M_p = ceil((p_max - p_min) / (delta0*eps)); centers are clamped into
    the price interval (only the last one can be affected)."""
    M_p = price_grid_size(model, delta0, eps)
    if M_p > 50_000_000:
        raise SolverResourceError(
            f"price grid would need {M_p} cells; increase eps or delta0")
    step = delta0 * eps
    pj = model.price_min + (np.arange(M_p) + 0.5) * step
    return np.minimum(pj, model.price_max)


def _chain_objective(r_table: np.ndarray, gamma: np.ndarray, chain) -> float:
    # sequential accumulation in ascending k: bitwise-identical to the DP's
    obj = 0.0
    for k, j in enumerate(chain):
        obj += gamma[k] * r_table[k, j]
    return float(obj)


def solve_dp(model: DemandModel, grid: UtilityGrid, delta0: float,
             eps: float | None = None, keep_value_table: bool = True,
             cell_cap: int = DP_CELL_CAP) -> DpSolution:
    """Exact optimum of the discretized fair-pricing problem.

    Forward DP over utility cells: V(k+1, j) = gamma_{k+1} * r_{u_{k+1}}(p_j)
    + max over |j'-j| <= 1 of V(k, j'), V(1, j) = gamma_1 * r_{u_1}(p_j).
    Ties break toward the smaller price index everywhere, so the recovered
    chain is deterministic. O(M_u * M_p) time and space.
    """
    if eps is None:
        eps = grid.eps
    if abs(eps - grid.eps) > 1e-12 * max(1.0, abs(grid.eps)):
        raise ValueError("eps must equal grid.eps")
    M_u, M_p = len(grid), price_grid_size(model, delta0, eps)
    if M_u * M_p > cell_cap:
        raise SolverResourceError(
            f"DP needs {M_u}x{M_p} = {M_u * M_p} cells > cap {cell_cap}; "
            "increase eps (or raise cell_cap)")
    price_grid = make_price_grid(model, delta0, eps)
    r_table = np.ascontiguousarray(
        expected_revenue(model, grid.points[:, None], price_grid[None, :]))
    V, bp = dp_forward(r_table, grid.weights)
    j_star = np.empty(M_u, dtype=np.int64)
    j = int(np.argmax(V[-1]))  # first max = smallest price index
    j_star[-1] = j
    for k in range(M_u - 1, 0, -1):
        j = j + int(bp[k, j])
        j_star[k - 1] = j
    objective = _chain_objective(r_table, grid.weights, j_star)
    return DpSolution(j_star=j_star, value_table=V if keep_value_table else None,
                      objective=objective, price_grid=price_grid)


def brute_force_solve(model: DemandModel, grid: UtilityGrid,
                      price_grid: np.ndarray) -> DpSolution:
    """Exhaustive enumeration over all admissible price-index chains.

    Test oracle for solve_dp on small instances. Ties break to the chain that
    is smallest in reverse-lexicographic order, which is exactly the chain the
    DP's backtracking reconstructs.
    """
    M_u, M_p = len(grid), len(price_grid)
    n_chains = M_p * 3 ** (M_u - 1)
    if n_chains > 10 ** 6:
        raise SolverResourceError(
            f"brute force would enumerate {n_chains} chains (> 1e6)")
    r_table = np.asarray(
        expected_revenue(model, grid.points[:, None], price_grid[None, :]))
    gamma = grid.weights
    best_obj = -math.inf
    best_key = None
    best_chain = None
    for j0 in range(M_p):
        for moves in itertools.product((-1, 0, 1), repeat=M_u - 1):
            chain = [j0]
            j = j0
            ok = True
            for m in moves:
                j += m
                if j < 0 or j >= M_p:
                    ok = False
                    break
                chain.append(j)
            if not ok:
                continue
            obj = _chain_objective(r_table, gamma, chain)
            key = tuple(reversed(chain))
            if obj > best_obj or (obj == best_obj and key < best_key):
                best_obj = obj
                best_key = key
                best_chain = chain
    return DpSolution(j_star=np.asarray(best_chain, dtype=np.int64),
                      value_table=None, objective=best_obj,
                      price_grid=np.asarray(price_grid, dtype=float))


def build_policy(solution: DpSolution, grid: UtilityGrid,
                 delta0: float) -> PiecewiseLinearPolicy:
    """Piecewise-linear policy through the DP's (u_k, p_{j_k*}) points.

    Linear interpolation between knots and constant extension outside; this
    coincides with the segment-by-segment slope construction (+-delta0 or 0
    between adjacent cells) because adjacent chosen prices differ by exactly
    one price step delta0*eps or none.
    """
    return PiecewiseLinearPolicy(knots=grid.points.copy(),
                                 prices=solution.price_grid[solution.j_star],
                                 delta0=float(delta0))


# ---------------------------------------------------------------------------
# linear-structure shortcut
# ---------------------------------------------------------------------------

def linear_optimal_policy(model: DemandModel, mu_u: float, nu_sq: float,
                          delta0: float, grid: UtilityGrid | None = None,
                          bounds: ModelBounds | None = None) -> PiecewiseLinearPolicy:
    """Best policy of the linear form pi0 + delta0*u (prices clipped into the
    price interval at evaluation).

    For linear demand pi0 has a closed form; when delta0 exceeds the slope of
    the unconstrained optimum, that optimum itself (slope 1/(2*c*alpha0)) is
    returned since the constraint no longer binds. For other links pi0 is
    found by golden-section over the grid-quadrature revenue, which requires
    `grid`; if delta0 > sigma_u / M_r the linear form is not guaranteed to be
    optimal and the returned policy carries a warning saying so.
    """
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    lo, hi = model.price_min, model.price_max
    if model.link.kind == LINEAR:
        c2a = 2.0 * model.price_slope  # 2*c*alpha0
        if delta0 >= 1.0 / c2a:
            pi0, slope = 0.0, 1.0 / c2a
        else:
            pi0, slope = (1.0 - c2a * delta0) * mu_u / c2a, delta0
        warning = None
    else:
        if grid is None:
            raise ValueError("non-linear links need a utility grid for the pi0 search")
        slope = delta0
        B = float(np.max(np.abs(grid.points)))

        def revenue_of(pi0_val):
            p = np.clip(pi0_val + delta0 * grid.points, lo, hi)
            return float(np.dot(grid.weights, expected_revenue(model, grid.points, p)))

        pi0 = golden_section_max(revenue_of, lo - delta0 * B, hi + delta0 * B, tol=1e-9)
        if bounds is None:
            u_lo, u_hi = float(grid.points[0]), float(grid.points[-1])
            bounds = validate_bounds(model, (u_lo, u_hi))
        warning = None
        if bounds.M_r > 0 and delta0 > bounds.sigma_u / bounds.M_r:
            warning = (f"delta0={delta0} exceeds sigma_u/M_r="
                       f"{bounds.sigma_u / bounds.M_r:.6g}: the linear form is "
                       "not guaranteed optimal")

    if grid is not None:
        knots = grid.points.copy()
    elif slope > 0:
        knots = np.array([(lo - pi0) / slope, (hi - pi0) / slope])
    else:
        knots = np.array([0.0])
    prices = np.clip(pi0 + slope * knots, lo, hi)
    return PiecewiseLinearPolicy(knots=knots, prices=prices, delta0=float(delta0),
                                 form="linear", pi0=float(pi0), slope=float(slope),
                                 price_bounds=(lo, hi), warning=warning)


# ---------------------------------------------------------------------------
# cost of fairness
# ---------------------------------------------------------------------------

def cost_of_fairness_linear(alpha0: float, delta0: float, mu_u: float,
                            nu_sq: float) -> float:
    """rho(delta0) for purely linear demand (price_coeff = 0.5), closed form:

        rho = a*d*(2 - a*d) + (1 - a*d)^2 * mu_u^2 / nu_sq   for d < 1/a,
        rho = 1                                              for d >= 1/a,

    with a = alpha0, d = delta0, and nu_sq the second RAW moment E[u^2].
    """
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    if nu_sq <= 0:
        raise ValueError("degenerate utility distribution (nu_sq = 0): "
                         "rho is undefined")
    if mu_u * mu_u > nu_sq * (1.0 + 1e-9):
        raise ValueError("inconsistent moments: mu_u^2 > nu_sq")
    s = alpha0 * delta0
    if s >= 1.0:
        return 1.0
    return s * (2.0 - s) + (1.0 - s) ** 2 * (mu_u * mu_u / nu_sq)


def unconstrained_revenue(model: DemandModel, grid: UtilityGrid) -> float:
    """R(+inf): expected revenue of pointwise revenue-maximizing prices."""
    rev = 0.0
    for u, g in zip(grid.points, grid.weights):
        if g == 0.0:
            continue
        p, _ = unconstrained_optimal_price(model, float(u))
        rev += g * expected_revenue(model, float(u), p)
    return float(rev)


def cost_of_fairness_numeric(model: DemandModel, grid: UtilityGrid,
                             delta0: float, eps: float | None = None) -> float:
    """rho(delta0) = R(delta0) / R(+inf), both estimated on the same grid
    (fair optimum via solve_dp, unconstrained via pointwise maximization)."""
    sol = solve_dp(model, grid, delta0, eps=eps, keep_value_table=False)
    r_inf = unconstrained_revenue(model, grid)
    if abs(r_inf) < 1e-300:
        raise ValueError("unconstrained optimal revenue is zero: rho undefined")
    return sol.objective / r_inf


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_policy(policy: PiecewiseLinearPolicy, csv_path) -> None:
    """Write knots to `csv_path` (header u,price) and a JSON sidecar with the
    metadata (delta0, form, pi0; plus slope and price bounds for the linear
    form) next to it."""
    lines = ["u,price"]
    for u, p in zip(policy.knots, policy.prices):
        lines.append(f"{float(u)!r},{float(p)!r}")
    Path(csv_path).write_text("\n".join(lines) + "\n")
    meta = {"delta0": policy.delta0, "form": policy.form, "pi0": policy.pi0}
    if policy.form == "linear":
        meta["slope"] = policy.slope
        meta["price_min"], meta["price_max"] = policy.price_bounds
    _sidecar_path(csv_path).write_text(json.dumps(meta, indent=2) + "\n")


def write_value_table_csv(solution: DpSolution, path) -> None:
    """Debug dump of the DP value table: one line per utility cell k, the
    M_p values comma-joined."""
    if solution.value_table is None:
        raise ValueError("solution was computed without keep_value_table")
    lines = [",".join(f"{float(v)!r}" for v in row)
             for row in solution.value_table]
    Path(path).write_text("\n".join(lines) + "\n")


def read_policy(csv_path) -> PiecewiseLinearPolicy:
    """Inverse of write_policy."""
    text = Path(csv_path).read_text().strip().split("\n")
    if text[0] != "u,price":
        raise ValueError(f"{csv_path}: expected header 'u,price', got {text[0]!r}")
    knots, prices = [], []
    for row in text[1:]:
        u, p = row.split(",")
        knots.append(float(u))
        prices.append(float(p))
    meta = json.loads(_sidecar_path(csv_path).read_text())
    kwargs = {}
    if meta["form"] == "linear":
        kwargs = {"slope": meta["slope"],
                  "price_bounds": (meta["price_min"], meta["price_max"])}
    return PiecewiseLinearPolicy(knots=np.asarray(knots), prices=np.asarray(prices),
                                 delta0=meta["delta0"], form=meta["form"],
                                 pi0=meta["pi0"], **kwargs)
