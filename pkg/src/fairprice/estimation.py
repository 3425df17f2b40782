"""Maximum-likelihood demand estimation.

Fits the extended parameter beta = (theta, alpha) from priced-demand
observations (x, p, y) via damped Newton ascent on a concave log-likelihood.
Each observation contributes ell(y | w) with w = z'beta and extended
covariate z = (x, -c*p), so w = x'theta - c*alpha*p matches the demand
argument of the corresponding link:

  linear       ell = -(y - w)^2 / 2          (Gaussian pseudo-likelihood)
  logistic     ell = y*w - ln(1 + e^w)
  exponential  ell = y*ln(1 - e^{-w}) - (1-y)*w,  valid for w > 0

The exponential y=1 branch is undefined at w <= 0, which unfitted parameters
routinely produce; below w0 = 1e-6 it is replaced by its second-order Taylor
tangent at w0 (value, gradient and curvature matched), keeping the objective
globally concave and twice differentiable so Newton can walk back into the
domain. The y=0 branch -w is already globally concave and is kept as is.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demand import EXPONENTIAL, LINEAR, LOGISTIC, LinkFunction

_W0 = 1e-6  # exponential-link tangent extension threshold


@dataclass(frozen=True)
class Observation:
    """One priced-demand record: context x, offered price p, demand y in [0,1]."""

    x: np.ndarray
    p: float
    y: float


@dataclass(frozen=True)
class LikelihoodSpec:
    """Per-link likelihood with analytic gradient and Hessian.

    rho_L, M_L, sigma_L are the textbook regularity constants of the
    likelihood (recorded for diagnostics/documentation only; nothing computes
    with them).
    """

    link: LinkFunction
    price_coeff: float = 0.5
    rho_L: float | None = None
    M_L: float | None = None
    sigma_L: float | None = None


@dataclass
class ModelEstimate:
    """MLE output: beta_hat split into (theta_hat, alpha_hat) + diagnostics."""

    theta_hat: np.ndarray
    alpha_hat: float
    n_obs: int
    converged: bool
    final_gradient_norm: float
    n_iter: int = 0
    diagnostic: str | None = None

    @property
    def beta_hat(self) -> np.ndarray:
        return np.append(self.theta_hat, self.alpha_hat)

    def to_json(self) -> dict:
        return {"theta_hat": [float(v) for v in self.theta_hat],
                "alpha_hat": float(self.alpha_hat), "n_obs": self.n_obs,
                "converged": self.converged,
                "final_gradient_norm": float(self.final_gradient_norm),
                "n_iter": self.n_iter, "diagnostic": self.diagnostic}


def observations_to_arrays(data) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X, p, y) arrays from a list of Observations."""
    if len(data) == 0:
        raise ValueError("no observations")
    X = np.asarray([ob.x for ob in data], dtype=float)
    p = np.asarray([ob.p for ob in data], dtype=float)
    y = np.asarray([ob.y for ob in data], dtype=float)
    return X, p, y


def design_matrix(spec: LikelihoodSpec, X: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Extended covariates z_t = (x_t, -c*p_t), stacked as rows."""
    return np.hstack([X, -spec.price_coeff * p[:, None]])


def _per_obs_terms(spec, w, y):
    """(ell_i, dell/dw_i, d2ell/dw2_i) for each observation."""
    kind = spec.link.kind
    if kind == LINEAR:
        resid = y - w
        return -0.5 * resid ** 2, resid, -np.ones_like(w)
    if kind == LOGISTIC:
        s = 1.0 / (1.0 + np.exp(-np.clip(w, -700, 700)))
        val = y * w - np.logaddexp(0.0, w)
        return val, y - s, -s * (1.0 - s)
    # exponential: y=0 part is -(1-y)*w everywhere; y=1 part gets the tangent
    # extension below _W0
    inside = w > _W0
    e = np.exp(-np.where(inside, w, _W0))
    one_me = -np.expm1(-np.where(inside, w, _W0))  # 1 - e^{-.}
    log1 = np.log(one_me)
    g1 = e / one_me
    h1 = -e / one_me ** 2
    dw = w - _W0
    val1 = np.where(inside, log1, log1 + g1 * dw + 0.5 * h1 * dw ** 2)
    grad1 = np.where(inside, g1, g1 + h1 * dw)
    hess1 = h1  # matched curvature on both branches
    return (y * val1 - (1.0 - y) * w,
            y * grad1 - (1.0 - y),
            y * hess1)


def _loglik_arrays(spec, Z, y, beta, want_derivs=True):
    w = Z @ beta
    val, dw, d2w = _per_obs_terms(spec, w, y)
    value = float(np.sum(val))
    if not want_derivs:
        return value, None, None
    grad = Z.T @ dw
    hess = (Z * d2w[:, None]).T @ Z
    return value, grad, hess


def log_likelihood(spec: LikelihoodSpec, data, beta):
    """Total log-likelihood with analytic gradient and Hessian at beta.

    beta is the extended vector (theta, alpha) of length d+1. The Hessian is
    negative semi-definite everywhere (concavity), which the Newton fitter
    relies on.
    """
    X, p, y = observations_to_arrays(data)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1] + 1,):
        raise ValueError(f"beta must have length d+1 = {X.shape[1] + 1}")
    Z = design_matrix(spec, X, p)
    return _loglik_arrays(spec, Z, y, beta)


def default_init(spec: LikelihoodSpec, d: int) -> np.ndarray:
    """beta = 0 for linear/logistic; exponential starts alpha at 0.1 (the
    concave extension makes any start valid, this keeps early steps tame)."""
    beta = np.zeros(d + 1)
    if spec.link.kind == EXPONENTIAL:
        beta[-1] = 0.1
    return beta


def mle_fit(spec: LikelihoodSpec, data, init=None, tol: float = 1e-8,
            max_iter: int = 100) -> ModelEstimate:
    """Damped Newton ascent to the maximum-likelihood beta = (theta, alpha).

    Converged means gradient norm <= tol. A rank-deficient design (all z in a
    proper subspace: e.g. every observation at the same (x, p)) cannot
    identify beta; the fit still runs with a regularized Hessian but the
    result is flagged converged=False with a diagnostic.
    """
    X, p, y = observations_to_arrays(data)
    n, d = X.shape
    Z = design_matrix(spec, X, p)
    rank = int(np.linalg.matrix_rank(Z))
    rank_ok = rank >= d + 1
    diagnostic = None if rank_ok else (
        f"rank-deficient design: rank {rank} < {d + 1} parameters")

    beta = default_init(spec, d) if init is None else np.asarray(init, dtype=float)
    value, grad, hess = _loglik_arrays(spec, Z, y, beta)
    gnorm = float(np.linalg.norm(grad))
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if gnorm <= tol:
            break
        neg_h = -hess
        try:
            step = np.linalg.solve(neg_h, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.solve(neg_h + 1e-9 * np.eye(d + 1), grad)
        # backtrack until the objective improves (concave: full step can
        # still overshoot through flat tails); near the optimum the true gain
        # drops below float spacing at |value|, so allow a few ulps of
        # apparent regression or the final quadratic step gets rejected
        slack = 4.0 * np.finfo(float).eps * max(1.0, abs(value))
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            cand_val, _, _ = _loglik_arrays(spec, Z, y, cand, want_derivs=False)
            if np.isfinite(cand_val) and cand_val >= value - slack:
                break
            t *= 0.5
        else:
            break  # no improving step along the Newton direction
        beta = beta + t * step
        value, grad, hess = _loglik_arrays(spec, Z, y, beta)
        gnorm = float(np.linalg.norm(grad))
    converged = bool(gnorm <= tol and rank_ok)
    return ModelEstimate(theta_hat=beta[:-1].copy(), alpha_hat=float(beta[-1]),
                         n_obs=n, converged=converged, final_gradient_norm=gnorm,
                         n_iter=n_iter, diagnostic=diagnostic)


# ---------------------------------------------------------------------------
# CSV interface
# ---------------------------------------------------------------------------

def write_observations_csv(data, path) -> None:
    """Header x1,...,xd,p,y; one observation per row."""
    X, p, y = observations_to_arrays(data)
    d = X.shape[1]
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["p", "y"])
    lines = [header]
    for i in range(len(p)):
        vals = [repr(float(v)) for v in X[i]] + [repr(float(p[i])), repr(float(y[i]))]
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_observations_csv(path) -> list:
    """Inverse of write_observations_csv."""
    rows = Path(path).read_text().strip().split("\n")
    header = rows[0].split(",")
    if header[-2:] != ["p", "y"] or not all(
            h == f"x{i + 1}" for i, h in enumerate(header[:-2])):
        raise ValueError(f"{path}: expected header x1,...,xd,p,y; got {rows[0]!r}")
    out = []
    for row in rows[1:]:
        vals = [float(v) for v in row.split(",")]
        out.append(Observation(x=np.asarray(vals[:-2]), p=vals[-2], y=vals[-1]))
    return out
