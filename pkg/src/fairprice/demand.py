"""GLM demand surfaces.

A customer with context x sees price p and buys with expected probability
f(x'theta0 - c*alpha0*p), where f is a monotone link function. Everything
downstream (the fair-policy solver, the bandit) consumes the primitives
defined here: link evaluation, expected revenue, revenue-maximizing prices,
and the regularity constants (L_f, M_r, sigma_r, sigma_u) that decide when
the linear-policy shortcut is available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

LINEAR = "linear"
LOGISTIC = "logistic"
EXPONENTIAL = "exponential"
LINK_KINDS = (LINEAR, LOGISTIC, EXPONENTIAL)

#: maps link kind -> small integer id used by the compiled kernels
LINK_IDS = {LINEAR: 0, LOGISTIC: 1, EXPONENTIAL: 2}


class LinkDomainError(ValueError):
    """A link function was evaluated outside its domain."""


def _scalar_like(u, out):
    # return a python float when the input was scalar, else the array
    if np.ndim(u) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LinkFunction:
    """One of the three supported demand links.

    linear:      f(u) = u            (f' = 1,      f'' = 0)
    logistic:    f(u) = e^u/(1+e^u)  (f' = f(1-f), f'' = f(1-f)(1-2f))
    exponential: f(u) = 1 - e^{-u}, defined only for u >= 0
                                     (f' = e^{-u}, f'' = -e^{-u})
    """

    kind: str

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}; expected one of {LINK_KINDS}")

    def _check_domain(self, u):
        if self.kind == EXPONENTIAL and np.any(np.asarray(u) < 0):
            raise LinkDomainError("exponential link requires u >= 0")

    def value(self, u):
        self._check_domain(u)
        arr = np.asarray(u, dtype=float)
        if self.kind == LINEAR:
            out = arr.copy()
        elif self.kind == LOGISTIC:
            out = expit(arr)
        else:
            out = -np.expm1(-arr)
        return _scalar_like(u, out)

    def deriv(self, u):
        self._check_domain(u)
        arr = np.asarray(u, dtype=float)
        if self.kind == LINEAR:
            out = np.ones_like(arr)
        elif self.kind == LOGISTIC:
            s = expit(arr)
            out = s * (1.0 - s)
        else:
            out = np.exp(-arr)
        return _scalar_like(u, out)

    def deriv2(self, u):
        self._check_domain(u)
        arr = np.asarray(u, dtype=float)
        if self.kind == LINEAR:
            out = np.zeros_like(arr)
        elif self.kind == LOGISTIC:
            s = expit(arr)
            out = s * (1.0 - s) * (1.0 - 2.0 * s)
        else:
            out = -np.exp(-arr)
        return _scalar_like(u, out)


def link_eval(link: LinkFunction, u):
    """Evaluate f(u); derivatives are available via link.deriv / link.deriv2."""
    return link.value(u)


@dataclass(frozen=True)
class DemandModel:
    """True demand environment: link + (theta0, alpha0) + price convention.

    Expected demand at context x and price p is f(x'theta0 - price_coeff*alpha0*p).
    price_coeff is the multiplier c in the demand argument; both the 0.5 and the
    1.0 conventions appear in practice, so it is an explicit field (default 0.5).
    """

    link: LinkFunction
    theta0: np.ndarray
    alpha0: float
    price_min: float
    price_max: float
    price_coeff: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if not self.price_min < self.price_max:
            raise ValueError("need price_min < price_max")
        if self.price_min < 0:
            raise ValueError("price_min must be >= 0")
        if self.price_coeff not in (0.5, 1.0):
            raise ValueError("price_coeff must be 0.5 or 1.0")

    @property
    def dim(self) -> int:
        return self.theta0.shape[0]

    @property
    def price_slope(self) -> float:
        """The multiplier of p inside the demand argument: price_coeff * alpha0."""
        return self.price_coeff * self.alpha0

    def demand_arg(self, u, p):
        """u - c*alpha0*p, broadcasting over arrays."""
        return np.asarray(u, dtype=float) - self.price_slope * np.asarray(p, dtype=float)

    def to_json(self) -> dict:
        return {
            "link": self.link.kind,
            "theta0": [float(v) for v in self.theta0],
            "alpha0": float(self.alpha0),
            "price_coeff": float(self.price_coeff),
            "price_min": float(self.price_min),
            "price_max": float(self.price_max),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DemandModel":
        return cls(
            link=LinkFunction(obj["link"]),
            theta0=np.asarray(obj["theta0"], dtype=float),
            alpha0=float(obj["alpha0"]),
            price_min=float(obj["price_min"]),
            price_max=float(obj["price_max"]),
            price_coeff=float(obj.get("price_coeff", 0.5)),
        )


@dataclass
class ModelBounds:
    """Numerically estimated regularity constants of a DemandModel.

    B        bound on the baseline utility |u|
    B_tilde  bound on the demand argument |u - c*alpha0*p| (B <= B_tilde)
    L_f      uniform bound on |f|, |f'|, |f''| over the argument range
    sigma_r  strong-unimodality margin: min over u of -r_u''(p*(u))
    M_r      bound on |r_u''(p)| over the scanned (u, p) range
    sigma_u  margin by which marginal utility dominates curvature
             (min of f'(u) - c*alpha0*pmax*|f''(u)|); may be <= 0, which
             disables the linear-structure shortcut

    f_range_ok / f_range_violation record whether the expected demand stays
    inside [0, 1] on the scanned range, and the worst offending (u, p) if not.
    """

    B: float
    B_tilde: float
    L_f: float
    sigma_r: float
    M_r: float
    sigma_u: float = float("nan")
    f_range_ok: bool = True
    f_range_violation: tuple | None = None


def expected_revenue(model: DemandModel, u, p):
    """r_u(p) = p * f(u - c*alpha0*p). Broadcasts over u and p."""
    w = model.demand_arg(u, p)
    out = np.asarray(p, dtype=float) * model.link.value(w)
    if np.ndim(u) == 0 and np.ndim(p) == 0:
        return float(out)
    return out


def golden_section_max(fn, a: float, b: float, tol: float = 1e-9) -> float:
    """Maximize a unimodal fn on [a, b] by golden-section search.

    Returns the midpoint of the final bracket, accurate to abs tolerance tol.
    """
    if b < a:
        raise ValueError("empty interval")
    invphi = (math.sqrt(5.0) - 1.0) / 2.0  # 0.618...
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
    return 0.5 * (a + b)


def unconstrained_optimal_price(model: DemandModel, u: float) -> tuple[float, bool]:
    """argmax of r_u over [price_min, price_max].

    Returns (price, interior). interior is False when the maximizer sits on a
    boundary of the price interval, signalling that the interior-optimum
    assumption fails at this utility level.
    """
    lo, hi = model.price_min, model.price_max
    if model.link.kind == LINEAR:
        # r_u(p) = p*(u - c*a*p) has its stationary point at u / (2*c*a)
        stat = u / (2.0 * model.price_slope)
        price = min(max(stat, lo), hi)
        return price, bool(lo < stat < hi)
    b = hi
    if model.link.kind == EXPONENTIAL:
        # keep the demand argument non-negative during the search
        b = min(hi, u / model.price_slope)
        if b < lo:
            raise LinkDomainError(
                f"exponential link undefined over the whole price interval at u={u}")
    price = golden_section_max(lambda p: expected_revenue(model, u, p), lo, b, tol=1e-9)
    interior = (price - lo > 1e-6) and (hi - price > 1e-6)
    return price, interior


def compute_sigma_u(model: DemandModel, bounds: ModelBounds, n_grid: int = 2001) -> float:
    """min over a mesh of [-B_tilde, B_tilde] of f'(u) - c*alpha0*pmax*|f''(u)|.

    For the exponential link the mesh is restricted to [0, B_tilde] (its domain).
    The result is stored in bounds.sigma_u and returned.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    lo = 0.0 if model.link.kind == EXPONENTIAL else -bounds.B_tilde
    mesh = np.linspace(lo, bounds.B_tilde, n_grid)
    coeff = model.price_slope * model.price_max
    vals = model.link.deriv(mesh) - coeff * np.abs(model.link.deriv2(mesh))
    sigma_u = float(np.min(vals))
    bounds.sigma_u = sigma_u
    return sigma_u


def validate_bounds(model: DemandModel, utility_range: tuple[float, float],
                    n_grid: int = 201) -> ModelBounds:
    """Scan the (utility, price) box and estimate the regularity constants.

    utility_range is the interval the baseline utility u = x'theta0 lives in.
    Flags (rather than raises on) expected-demand values outside [0, 1]; the
    worst offending (u, p) pair is recorded in the result.
    """
    u_lo, u_hi = float(utility_range[0]), float(utility_range[1])
    if u_hi < u_lo:
        raise ValueError("empty utility range")
    B = max(abs(u_lo), abs(u_hi))
    cs = model.price_slope
    w_lo = u_lo - cs * model.price_max
    w_hi = u_hi - cs * model.price_min
    B_tilde = max(B, abs(w_lo), abs(w_hi))

    u_mesh = np.linspace(u_lo, u_hi, n_grid)
    p_mesh = np.linspace(model.price_min, model.price_max, n_grid)
    W = u_mesh[:, None] - cs * p_mesh[None, :]

    F = model.link.value(W)
    dF = model.link.deriv(W)
    d2F = model.link.deriv2(W)
    L_f = float(max(np.max(np.abs(F)), np.max(np.abs(dF)), np.max(np.abs(d2F))))

    # r_u''(p) = -2*c*a*f'(w) + (c*a)^2 * p * f''(w)
    R2 = -2.0 * cs * dF + cs * cs * p_mesh[None, :] * d2F
    M_r = float(np.max(np.abs(R2)))

    # worst excursion of f outside [0, 1]
    excess = np.maximum(-F, F - 1.0)
    worst = float(np.max(excess))
    if worst > 1e-12:
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        f_range_ok = False
        violation = (float(u_mesh[i]), float(p_mesh[j]))
    else:
        f_range_ok = True
        violation = None

    # sigma_r: minimum curvature of r_u at its own maximizer, over utilities
    sig = math.inf
    for u in u_mesh:
        p_star, _ = unconstrained_optimal_price(model, float(u))
        w = u - cs * p_star
        r2 = -2.0 * cs * model.link.deriv(w) + cs * cs * p_star * model.link.deriv2(w)
        sig = min(sig, -r2)
    bounds = ModelBounds(B=B, B_tilde=B_tilde, L_f=L_f, sigma_r=float(sig), M_r=M_r,
                         f_range_ok=f_range_ok, f_range_violation=violation)
    compute_sigma_u(model, bounds)
    return bounds
