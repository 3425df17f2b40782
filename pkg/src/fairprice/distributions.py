"""Baseline-utility distributions and context generation.

The policy solver works on a discretized utility axis: a grid of cell centers
u_k with cell probabilities gamma_k. This module owns the distribution of the
baseline utility u = x'theta0 (clipped to a compact interval [-B, B]), its
moments, the discretization, and the generator of raw context vectors x whose
projection follows that distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

UNIFORM = "uniform"
NORMAL = "normal"
LAPLACE = "laplace"
STUDENT_T3 = "student_t3"
POINT_MASS = "point_mass"
EMPIRICAL = "empirical"
DIST_KINDS = (UNIFORM, NORMAL, LAPLACE, STUDENT_T3, POINT_MASS, EMPIRICAL)

#: fixed seed of the Monte-Carlo moments/weights route (dual check of the
#: quadrature route; tests compare the two)
MC_SEED = 161803
MC_SAMPLES = 10 ** 6


def _clipped_moments_quad(frozen, B: float) -> tuple[float, float]:
    """First and second raw moment of clip(X, -B, B) for a scipy frozen dist."""
    m1_mid, _ = integrate.quad(lambda x: x * frozen.pdf(x), -B, B, limit=200)
    m2_mid, _ = integrate.quad(lambda x: x * x * frozen.pdf(x), -B, B, limit=200)
    p_lo = float(frozen.cdf(-B))
    p_hi = float(frozen.sf(B))
    m1 = m1_mid + (-B) * p_lo + B * p_hi
    m2 = m2_mid + B * B * (p_lo + p_hi)
    return m1, m2


@dataclass
class UtilityDistribution:
    """Distribution of the baseline utility, hard-clipped to [-B, B].

    mu and sigma are the TARGET mean and standard deviation. For the
    heavy-tailed kinds (laplace, student_t3) the underlying location/scale are
    calibrated at construction so that the post-clip mean and sd match the
    targets (within 0.1%); clipping a heavy tail otherwise shifts both.
    """

    kind: str
    mu: float = 0.0
    sigma: float = 1.0
    B: float = 1.0
    data: np.ndarray | None = None  # empirical kind only

    # underlying (pre-clip) location/scale, set during calibration
    _loc: float = field(init=False, repr=False, default=0.0)
    _scale: float = field(init=False, repr=False, default=1.0)

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.B <= 0:
            raise ValueError("B must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == EMPIRICAL:
            if self.data is None or len(self.data) == 0:
                raise ValueError("empirical distribution needs non-empty data")
            self.data = np.clip(np.asarray(self.data, dtype=float), -self.B, self.B)
            self.mu = float(np.mean(self.data))
            self.sigma = float(np.std(self.data))
            return
        if self.kind == POINT_MASS:
            self._loc, self._scale = self.mu, 0.0
            return
        self._loc, self._scale = self._calibrate()

    # -- underlying (pre-clip) distribution ---------------------------------

    def _frozen(self, loc: float, scale: float):
        if self.kind == UNIFORM:
            half = scale * math.sqrt(3.0)  # uniform sd = halfwidth/sqrt(3)
            return stats.uniform(loc=loc - half, scale=2.0 * half)
        if self.kind == NORMAL:
            return stats.norm(loc=loc, scale=scale)
        if self.kind == LAPLACE:
            return stats.laplace(loc=loc, scale=scale)
        if self.kind == STUDENT_T3:
            return stats.t(df=3, loc=loc, scale=scale)
        raise AssertionError(self.kind)

    def _calibrate(self) -> tuple[float, float]:
        """Pick pre-clip (loc, scale) so the clipped mean/sd hit the targets."""
        if self.kind == UNIFORM or self.kind == NORMAL:
            # clipping is a no-op (uniform) or negligible by design (normal)
            return self.mu, self.sigma
        if self.sigma == 0.0:
            return self.mu, 0.0
        loc = self.mu
        # start from the unclipped-exact scales: laplace sd = b*sqrt(2),
        # student-t3 sd = scale*sqrt(3)
        scale = self.sigma / math.sqrt(2.0) if self.kind == LAPLACE \
            else self.sigma / math.sqrt(3.0)
        for _ in range(60):
            m1, m2 = _clipped_moments_quad(self._frozen(loc, scale), self.B)
            sd = math.sqrt(max(m2 - m1 * m1, 0.0))
            if abs(m1 - self.mu) <= 1e-3 * max(1.0, abs(self.mu)) \
                    and abs(sd - self.sigma) <= 1e-3 * self.sigma:
                break
            loc += self.mu - m1
            if sd > 0:
                scale *= self.sigma / sd
        return loc, scale

    def frozen(self):
        """scipy frozen distribution of the calibrated pre-clip law."""
        if self.kind in (POINT_MASS, EMPIRICAL):
            raise ValueError(f"no continuous underlying law for {self.kind}")
        return self._frozen(self._loc, self._scale)

    def cdf_preclip(self, t):
        """CDF of the pre-clip law (step function for point mass / empirical)."""
        t = np.asarray(t, dtype=float)
        if self.kind == POINT_MASS:
            return (t >= self.mu).astype(float)
        if self.kind == EMPIRICAL:
            sorted_data = np.sort(self.data)
            return np.searchsorted(sorted_data, t, side="right") / len(sorted_data)
        return self.frozen().cdf(t)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "mu": float(self.mu),
               "sigma": float(self.sigma), "B": float(self.B)}
        if self.kind == EMPIRICAL:
            obj["data"] = [float(v) for v in self.data]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "UtilityDistribution":
        return cls(kind=obj["kind"], mu=float(obj.get("mu", 0.0)),
                   sigma=float(obj.get("sigma", 1.0)), B=float(obj["B"]),
                   data=np.asarray(obj["data"], dtype=float) if "data" in obj else None)


def moments(dist: UtilityDistribution, method: str = "analytic") -> tuple[float, float]:
    """(mu_u, nu_sq): first moment and second RAW moment of the clipped law.

    method="analytic" uses exact expressions (point mass, empirical) or
    deterministic quadrature with the clip atoms accounted for; method="mc"
    uses 10^6 fixed-seed samples. The two routes are compared in tests.
    """
    if method == "mc":
        rng = np.random.default_rng(MC_SEED)
        s = sample_utility(dist, rng, size=MC_SAMPLES)
        return float(np.mean(s)), float(np.mean(s * s))
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    if dist.kind == POINT_MASS:
        m = float(np.clip(dist.mu, -dist.B, dist.B))
        return m, m * m
    if dist.kind == EMPIRICAL:
        return float(np.mean(dist.data)), float(np.mean(dist.data ** 2))
    if dist.kind == UNIFORM:
        fr = dist.frozen()
        a, b = fr.support()
        if a >= -dist.B and b <= dist.B:  # no clipping: textbook closed form
            m1 = 0.5 * (a + b)
            m2 = (a * a + a * b + b * b) / 3.0
            return float(m1), float(m2)
    m1, m2 = _clipped_moments_quad(dist.frozen(), dist.B)
    return float(m1), float(m2)


def support_range(dist: UtilityDistribution) -> tuple[float, float]:
    """Interval actually carrying mass after clipping to [-B, B].

    Exact for bounded kinds (uniform, point mass, empirical); unbounded kinds
    report the full clip interval.
    """
    if dist.kind == POINT_MASS:
        m = float(np.clip(dist.mu, -dist.B, dist.B))
        return m, m
    if dist.kind == EMPIRICAL:
        return float(np.min(dist.data)), float(np.max(dist.data))
    if dist.kind == UNIFORM:
        a, b = dist.frozen().support()
        return max(float(a), -dist.B), min(float(b), dist.B)
    return -dist.B, dist.B


def sample_utility(dist: UtilityDistribution, rng: np.random.Generator, size=None):
    """Draw from the clipped distribution. Same seed, same stream."""
    if dist.kind == UNIFORM:
        fr_lo = dist._loc - dist._scale * math.sqrt(3.0)
        fr_hi = dist._loc + dist._scale * math.sqrt(3.0)
        raw = rng.uniform(fr_lo, fr_hi, size)
    elif dist.kind == NORMAL:
        raw = rng.normal(dist._loc, dist._scale, size)
    elif dist.kind == LAPLACE:
        raw = rng.laplace(dist._loc, dist._scale, size)
    elif dist.kind == STUDENT_T3:
        raw = dist._loc + dist._scale * rng.standard_t(3, size)
    elif dist.kind == POINT_MASS:
        raw = np.full(size, dist.mu) if size is not None else dist.mu
    else:  # empirical
        raw = rng.choice(dist.data, size=size, replace=True)
    out = np.clip(raw, -dist.B, dist.B)
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

def _ceil_count(x: float) -> int:
    """ceil(x) robust to float ratios that are mathematically integral."""
    return max(1, int(math.ceil(round(x, 9))))


@dataclass
class UtilityGrid:
    """Evenly spaced utility cell centers u_k with cell probabilities gamma_k.

    Cell k covers [u_k - eps/2, u_k + eps/2]; the centers are
    u_k = -B + (k - 1/2)*eps for k = 1..M_u with M_u = ceil(2B/eps).
    """

    points: np.ndarray
    weights: np.ndarray
    eps: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.shape != self.weights.shape or self.points.ndim != 1:
            raise ValueError("points and weights must be 1-d and same length")
        if np.any(self.weights < -1e-12):
            raise ValueError("negative cell probability")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-9:
            raise ValueError("cell probabilities must sum to 1")
        if len(self.points) > 1:
            steps = np.diff(self.points)
            if np.any(np.abs(steps - self.eps) > 1e-9 * max(1.0, abs(self.eps))):
                raise ValueError("points must be evenly spaced with step eps")

    def __len__(self):
        return len(self.points)


def discretize(dist: UtilityDistribution, B: float, eps: float,
               method: str = "cdf") -> UtilityGrid:
    """Grid over [-B, B] with M_u = ceil(2B/eps) cells.

    gamma_k comes from CDF differences of the clipped law (method="cdf") or a
    seeded 10^6-sample histogram (method="mc"). Mass outside [-B, B) -- the
    clip atoms included -- is folded into the edge cells, so the weights sum
    to exactly 1.
    """
    if eps <= 0 or B <= 0:
        raise ValueError("B and eps must be positive")
    M_u = _ceil_count(2.0 * B / eps)
    if M_u > 50_000_000:
        raise ValueError(f"utility grid would need {M_u} cells; increase eps")
    points = -B + (np.arange(M_u) + 0.5) * eps
    edges = -B + np.arange(M_u + 1) * eps

    if method == "cdf":
        cum = np.empty(M_u + 1)
        cum[0] = 0.0
        cum[-1] = 1.0
        if M_u > 1:
            inner = edges[1:-1]
            vals = np.asarray(dist.cdf_preclip(inner), dtype=float)
            # the clipped law has atoms at +-dist.B; fold anything outside the
            # grid (or at its boundary) into the edge cells
            vals = np.where(inner <= -dist.B, 0.0, vals)
            vals = np.where(inner >= dist.B, 1.0, vals)
            cum[1:-1] = vals
        weights = np.diff(cum)
    elif method == "mc":
        rng = np.random.default_rng(MC_SEED)
        s = sample_utility(dist, rng, size=MC_SAMPLES)
        s = np.clip(s, edges[0], edges[-1])
        counts, _ = np.histogram(s, bins=edges)
        weights = counts / float(MC_SAMPLES)
    else:
        raise ValueError(f"unknown method {method!r}")
    return UtilityGrid(points=points, weights=weights, eps=float(eps))


# ---------------------------------------------------------------------------
# context generation
# ---------------------------------------------------------------------------

def _coord_spec(spec: dict) -> dict:
    kind = spec.get("kind")
    if kind == "uniform":
        return {"kind": "uniform", "low": float(spec["low"]), "high": float(spec["high"])}
    if kind == "normal":
        return {"kind": "normal", "mu": float(spec["mu"]), "sigma": float(spec["sigma"])}
    raise ValueError(f"unknown coordinate spec {spec!r}")


@dataclass
class ContextGenerator:
    """Generates context vectors x with independent coordinates.

    coords is either a single spec applied to every coordinate or a list of d
    per-coordinate specs; each spec is {"kind":"uniform","low":..,"high":..}
    or {"kind":"normal","mu":..,"sigma":..}. The implied baseline-utility
    distribution is the law of x'theta0.
    """

    dim: int
    theta0: np.ndarray
    coords: dict | list

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        if self.theta0.shape != (self.dim,):
            raise ValueError("theta0 must have length dim")
        if isinstance(self.coords, dict):
            self.coords = [_coord_spec(self.coords)] * self.dim
        else:
            self.coords = [_coord_spec(s) for s in self.coords]
            if len(self.coords) != self.dim:
                raise ValueError("need one coordinate spec per dimension")

    def to_json(self) -> dict:
        return {"dim": self.dim, "theta0": [float(v) for v in self.theta0],
                "coords": self.coords if len(set(map(str, self.coords))) > 1
                else self.coords[0]}

    @classmethod
    def from_json(cls, obj: dict) -> "ContextGenerator":
        return cls(dim=int(obj["dim"]), theta0=np.asarray(obj["theta0"], dtype=float),
                   coords=obj["coords"])


def sample_context(gen: ContextGenerator, rng: np.random.Generator, size=None):
    """One context vector (size=None) or a (size, dim) batch.

    Batches are drawn column by column (all of coordinate 1, then coordinate
    2, ...) so a fixed seed pins the exact output.
    """
    n = 1 if size is None else int(size)
    out = np.empty((n, gen.dim))
    for i, spec in enumerate(gen.coords):
        if spec["kind"] == "uniform":
            out[:, i] = rng.uniform(spec["low"], spec["high"], n)
        else:
            out[:, i] = rng.normal(spec["mu"], spec["sigma"], n)
    return out[0] if size is None else out


def _coord_mean_var(spec: dict) -> tuple[float, float]:
    if spec["kind"] == "uniform":
        lo, hi = spec["low"], spec["high"]
        return 0.5 * (lo + hi), (hi - lo) ** 2 / 12.0
    return spec["mu"], spec["sigma"] ** 2


def implied_moments(gen: ContextGenerator) -> tuple[float, float]:
    """Exact (mu_u, nu_sq) of u = x'theta0 under independent coordinates."""
    mu = 0.0
    var = 0.0
    for th, spec in zip(gen.theta0, gen.coords):
        m, v = _coord_mean_var(spec)
        mu += th * m
        var += th * th * v
    return float(mu), float(mu * mu + var)


def implied_support(gen: ContextGenerator) -> tuple[float, float]:
    """Interval containing u = x'theta0 (exact for uniform coordinates;
    mean +- 6 sd for normal ones)."""
    lo = hi = 0.0
    for th, spec in zip(gen.theta0, gen.coords):
        if spec["kind"] == "uniform":
            ends = (th * spec["low"], th * spec["high"])
        else:
            ends = (th * (spec["mu"] - 6.0 * spec["sigma"]),
                    th * (spec["mu"] + 6.0 * spec["sigma"]))
        lo += min(ends)
        hi += max(ends)
    return float(lo), float(hi)


def implied_utility_dist(gen: ContextGenerator, n: int = 200_000,
                         seed: int = MC_SEED) -> UtilityDistribution:
    """Empirical utility distribution from n seeded context draws."""
    rng = np.random.default_rng(seed)
    x = sample_context(gen, rng, size=n)
    u = x @ gen.theta0
    lo, hi = implied_support(gen)
    B = max(abs(lo), abs(hi))
    if B == 0.0:  # theta0 = 0: all mass at the origin
        B = 1.0
    return UtilityDistribution(kind=EMPIRICAL, B=B, data=u)


def min_cov_eigenvalue(gen: ContextGenerator, rng: np.random.Generator,
                       n: int = 10_000) -> float:
    """Smallest eigenvalue of the empirical covariance of x over n draws
    (non-degeneracy diagnostic for the context distribution)."""
    x = sample_context(gen, rng, size=n)
    cov = np.cov(x, rowvar=False)
    cov = np.atleast_2d(cov)
    return float(np.min(np.linalg.eigvalsh(cov)))
