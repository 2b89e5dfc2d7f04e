"""Monte Carlo hitting probabilities and polarity scans.

Two empirical scaling laws are probed: the probability that the field comes
within r of a drift on a small rho-ball (expected to decay like r^d), and
the probability that the shifted field range meets a small Euclidean ball
(expected to decay like delta^(d-Q) when Q < d). Only upper bounds are
proved in the theory, so the fitted exponents are compared against the
predicted exponent minus a desk-scale tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm as _norm

from .errors import ModelRejected, Refusal
from .field import (FieldModel, Grid, cholesky_with_jitter, build_covariance,
                    sample_paths, standard_normal_batch)
from .metric import HurstVector, IndexSet, ball_bounding_box, rho_pairwise, rho_to_point
from .seeds import derive_seed


def wilson_interval(successes: int, trials: int,
                    confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a Bernoulli proportion; well-behaved at 0 and 1."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not (0 <= successes <= trials):
        raise ValueError("successes out of range")
    z = float(_norm.ppf(0.5 + confidence / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    # clip against p so rounding can never push a bound past the point estimate
    return min(p, max(0.0, center - half)), max(p, min(1.0, center + half))


@dataclass(frozen=True)
class LipschitzDrift:
    """Drift f with ||f(s) - f(t)|| <= L rho(s, t).

    kinds:
      * "zero"   -- f = 0;
      * "affine" -- f(s) = L * rho(anchor, s) * direction (unit vector in R^d);
      * "field"  -- an independently sampled Gaussian field path, rescaled on
        the evaluation grid so its empirical Lipschitz ratio equals L exactly.
    """

    kind: str
    L: float = 0.0
    anchor: tuple[float, ...] = ()
    direction: tuple[float, ...] = ()
    drift_model: Optional[FieldModel] = None

    def __post_init__(self):
        if self.kind not in ("zero", "affine", "field"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.L < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if self.kind == "affine" and (not self.anchor or not self.direction):
            raise ValueError("affine drift needs anchor and direction")
        if self.kind == "field" and self.drift_model is None:
            raise ValueError("field drift needs a drift model")

    @property
    def is_random(self) -> bool:
        return self.kind == "field"

    def evaluate(self, points: np.ndarray, H: HurstVector, d: int,
                 seed: int = 0) -> np.ndarray:
        """Drift values on the given points, shape (n, d).

        For the "field" kind the seed selects the sample path; callers must
        use a stream separate from the field's own draws.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        if self.kind == "zero":
            return np.zeros((n, d))
        if self.kind == "affine":
            e = np.asarray(self.direction, dtype=float)
            if e.size != d:
                raise ValueError("direction dimension mismatch")
            e = e / np.linalg.norm(e)
            vals = self.L * rho_to_point(pts, self.anchor, H)
            return vals[:, None] * e[None, :]
        # sampled random field, rescaled to the claimed constant on this grid
        raw = sample_paths(self.drift_model, Grid(points=pts), 1, seed,
                           stream="drift").values[0]
        if n < 2:
            return np.zeros((n, raw.shape[1]))
        rho = rho_pairwise(pts, H)
        iu = np.triu_indices(n, k=1)
        num = np.linalg.norm(raw[iu[0]] - raw[iu[1]], axis=1)
        den = rho[iu]
        mask = den > 0
        ratio = float(np.max(num[mask] / den[mask])) if np.any(mask) else 0.0
        if ratio == 0.0:
            return np.zeros_like(raw)
        return raw * (self.L / ratio)


def check_lipschitz(values: np.ndarray, L: float, grid: Grid,
                    H: HurstVector) -> tuple[float, bool]:
    """Max pairwise ratio ||f(s)-f(t)|| / rho(s,t) of given values, against L."""
    if grid.n < 2:
        raise ValueError("need at least two grid points")
    vals = np.atleast_2d(np.asarray(values, dtype=float))
    rho = rho_pairwise(grid.points, H)
    iu = np.triu_indices(grid.n, k=1)
    num = np.linalg.norm(vals[iu[0]] - vals[iu[1]], axis=1)
    den = rho[iu]
    mask = den > 0
    max_ratio = float(np.max(num[mask] / den[mask])) if np.any(mask) else 0.0
    return max_ratio, max_ratio <= L * (1.0 + 1e-9)


def lipschitz_verify(f: LipschitzDrift, grid: Grid,
                     H: HurstVector, d: Optional[int] = None,
                     seed: int = 0) -> tuple[float, bool]:
    """Empirical Lipschitz ratio of the drift on a grid, against its claimed L."""
    if d is None:
        d = f.drift_model.d if f.kind == "field" else max(1, len(f.direction) or 1)
    return check_lipschitz(f.evaluate(grid.points, H, d, seed), f.L, grid, H)


@dataclass(frozen=True)
class HittingEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_mc: int
    r: float
    p_hat_margin: float = float("nan")   # event relaxed by the grid-bias margin
    config: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not (self.ci_low <= self.p_hat <= self.ci_high):
            raise ValueError("Wilson interval must bracket the point estimate")


@dataclass(frozen=True)
class ScalingReport:
    radii: tuple[float, ...]
    estimates: tuple[HittingEstimate, ...]
    fitted_slope: float
    slope_se: float
    status: str = "ok"


def _ball_grid(t: np.ndarray, r: float, I: IndexSet, H: HurstVector,
               grid_step: float) -> np.ndarray:
    """Uniform grid on the bounding box of B_rho(t, r), filtered to ball and I."""
    lo, hi = ball_bounding_box(t, r, H)
    axes = []
    for j in range(H.N):
        n_pts = int(np.floor((hi[j] - lo[j]) / grid_step)) + 1
        if n_pts < 8:
            raise Refusal(
                f"grid_step {grid_step:g} gives {n_pts} points on axis {j}; "
                "at least 8 per axis are required to resolve the ball")
        axes.append(lo[j] + np.arange(n_pts) * grid_step)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    mask = (rho_to_point(pts, t, H) <= r) & I.contains(pts, atol=1e-12)
    pts = pts[mask]
    if pts.shape[0] == 0:
        raise Refusal("the rho-ball does not intersect the index set")
    return pts


def grid_bias_margin(grid_step: float, H: HurstVector, c_emp: float = 1.0) -> float:
    """Modulus-of-continuity margin m(h) = c_emp h^(H_min) sqrt(log 1/h)."""
    h = float(grid_step)
    if not (0.0 < h < 1.0):
        return 0.0
    return c_emp * h ** min(H.H) * math.sqrt(math.log(1.0 / h))


def hitting_probability(model: FieldModel, index_set: IndexSet, t, r: float,
                        f: LipschitzDrift, n_mc: int, seed: int,
                        grid_step: float, workers: int = 1,
                        margin_coeff: float = 1.0) -> HittingEstimate:
    """Estimate P(inf over the ball grid of ||X(s) - f(s)|| <= r).

    The grid minimum overstates the continuum infimum, so p_hat is biased
    low; p_hat_margin relaxes the threshold to r + m(grid_step) with the
    modulus-motivated margin and brackets the bias from the other side.
    """
    if n_mc <= 0:
        raise ValueError("n_mc must be positive")
    if r <= 0:
        raise ValueError("r must be positive")
    t = np.asarray(t, dtype=float).reshape(-1)
    pts = _ball_grid(t, r, index_set, model.H, grid_step)
    grid = Grid(points=pts)
    cov = build_covariance(model, grid)
    L_chol, _ = cholesky_with_jitter(cov)
    z = standard_normal_batch(cov.shape[0], n_mc, seed, "field", workers)
    X = (z @ L_chol.T).reshape(n_mc, grid.n, model.d)

    if f.is_random:
        mins = np.empty(n_mc)
        for i in range(n_mc):
            fv = f.evaluate(pts, model.H, model.d,
                            seed=derive_seed(seed, i, "drift"))
            mins[i] = np.linalg.norm(X[i] - fv, axis=1).min()
    else:
        fv = f.evaluate(pts, model.H, model.d)
        mins = np.linalg.norm(X - fv[None], axis=2).min(axis=1)

    margin = grid_bias_margin(grid_step, model.H, margin_coeff)
    hits = int(np.sum(mins <= r))
    hits_margin = int(np.sum(mins <= r + margin))
    lo, hi = wilson_interval(hits, n_mc)
    return HittingEstimate(
        p_hat=hits / n_mc, ci_low=lo, ci_high=hi, n_mc=n_mc, r=float(r),
        p_hat_margin=hits_margin / n_mc,
        config={"grid_step": grid_step, "grid_points": grid.n,
                "margin": margin, "seed": seed, "t": list(t)})


def scaling_exponent(estimates: Sequence[HittingEstimate]) -> ScalingReport:
    """Log-log least-squares slope of p_hat against r over nonzero estimates."""
    ests = tuple(sorted(estimates, key=lambda e: -e.r))
    radii = tuple(e.r for e in ests)
    if len(set(radii)) != len(radii):
        raise ValueError("radii must be distinct")
    nonzero = [e for e in ests if e.p_hat > 0]
    if len(nonzero) < 3:
        return ScalingReport(radii=radii, estimates=ests,
                             fitted_slope=float("nan"), slope_se=float("nan"),
                             status="too-few-nonzero-estimates")
    x = np.log([e.r for e in nonzero])
    y = np.log([e.p_hat for e in nonzero])
    n = len(x)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    resid = y - (y.mean() + slope * (x - xbar))
    se = math.sqrt(float(np.sum(resid ** 2)) / max(1, n - 2) / sxx)
    return ScalingReport(radii=radii, estimates=ests,
                         fitted_slope=slope, slope_se=se)


def polarity_scan(model: FieldModel, index_set: IndexSet, drift: LipschitzDrift,
                  target_center: Sequence[float], deltas: Sequence[float],
                  n_mc: int, seed: int, grid_step: float,
                  workers: int = 1) -> ScalingReport:
    """Estimate P(exists grid s with X(s) + Y(s) in B(center, delta)) per delta.

    One field draw (and one drift draw) per replicate is shared across all
    deltas, so the hit indicator is exactly monotone in delta.
    """
    Q = model.H.Q
    if Q >= model.d:
        raise Refusal(
            f"polarity bound requires Q < d, got Q = {Q:g} >= d = {model.d}; "
            "no nontrivial polar sets are predicted in this regime")
    deltas = [float(x) for x in deltas]
    if any(x <= 0 for x in deltas) or any(
            a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and strictly decreasing")
    if n_mc <= 0:
        raise ValueError("n_mc must be positive")
    center = np.asarray(target_center, dtype=float).reshape(-1)
    if center.size != model.d:
        raise ValueError("target center dimension mismatch")

    # grid over the whole index set
    axes_pts = []
    for lo, hi in index_set.boxes:
        axes = []
        for j in range(index_set.dim):
            n_pts = int(np.floor((hi[j] - lo[j]) / grid_step)) + 1
            if n_pts < 8:
                raise Refusal(
                    f"grid_step {grid_step:g} gives {n_pts} points on axis {j}; "
                    "at least 8 per axis are required")
            axes.append(lo[j] + np.arange(n_pts) * grid_step)
        mesh = np.meshgrid(*axes, indexing="ij")
        axes_pts.append(np.stack([m.ravel() for m in mesh], axis=1))
    pts = np.concatenate(axes_pts, axis=0)
    grid = Grid(points=pts)

    cov = build_covariance(model, grid)
    L_chol, _ = cholesky_with_jitter(cov)
    z = standard_normal_batch(cov.shape[0], n_mc, seed, "field", workers)
    X = (z @ L_chol.T).reshape(n_mc, grid.n, model.d)

    if drift.is_random:
        dmin = np.empty(n_mc)
        for i in range(n_mc):
            fv = drift.evaluate(pts, model.H, model.d,
                                seed=derive_seed(seed, i, "drift"))
            dmin[i] = np.linalg.norm(X[i] + fv - center, axis=1).min()
    else:
        fv = drift.evaluate(pts, model.H, model.d)
        dmin = np.linalg.norm(X + fv[None] - center[None, None], axis=2).min(axis=1)

    ests = []
    for delta in deltas:
        hits = int(np.sum(dmin <= delta))
        lo_ci, hi_ci = wilson_interval(hits, n_mc)
        ests.append(HittingEstimate(
            p_hat=hits / n_mc, ci_low=lo_ci, ci_high=hi_ci, n_mc=n_mc,
            r=delta, p_hat_margin=float("nan"),
            config={"grid_step": grid_step, "grid_points": grid.n,
                    "seed": seed, "center": list(center)}))
    return scaling_exponent(ests)
