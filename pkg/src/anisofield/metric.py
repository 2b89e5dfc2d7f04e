"""Deterministic geometry of the anisotropic metric.

rho(s, t) = sum_j |s_j - t_j|^{H_j} with per-axis exponents H_j in (0, 1].
Everything here is pure arithmetic: distances, balls, grid covers,
covering-number upper bounds, the dyadic chaining schedule, Hausdorff
premeasure sums and the entropy-integral closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_C2_TERM_FLOOR = 1e-16
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True)
class HurstVector:
    """Per-axis smoothness exponents, each in (0, 1]."""

    H: tuple[float, ...]

    def __post_init__(self):
        H = tuple(float(h) for h in self.H)
        if len(H) < 1:
            raise ValueError("need at least one exponent")
        for h in H:
            if not (0.0 < h <= 1.0):
                raise ValueError(f"exponent {h} outside (0, 1]")
        object.__setattr__(self, "H", H)

    @property
    def N(self) -> int:
        return len(self.H)

    @property
    def Q(self) -> float:
        """Anisotropy index: sum of reciprocal exponents. Always >= N."""
        return float(sum(1.0 / h for h in self.H))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.H, dtype=float)


def rho_distance(s, t, H: HurstVector) -> float:
    """Anisotropic distance between two points of R^N."""
    s = np.asarray(s, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float).reshape(-1)
    if s.shape != t.shape or s.size != H.N:
        raise ValueError(f"dimension mismatch: {s.size}, {t.size}, N={H.N}")
    return float(np.sum(np.abs(s - t) ** H.as_array()))


def rho_pairwise(points: np.ndarray, H: HurstVector) -> np.ndarray:
    """Full matrix of rho distances between rows of an (n, N) array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != H.N:
        raise ValueError("points dimension does not match Hurst vector")
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    return np.sum(diff ** H.as_array(), axis=2)


def rho_to_point(points: np.ndarray, t, H: HurstVector) -> np.ndarray:
    """rho distances from each row of points to a single point t."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    return np.sum(np.abs(pts - t) ** H.as_array(), axis=1)


def anisotropy_index(H: HurstVector) -> float:
    return H.Q


def ball_bounding_box(t, r: float, H: HurstVector) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box containing the rho-ball of radius r around t.

    Per axis the ball extends at most r^(1/H_j) from the center.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size != H.N:
        raise ValueError("center dimension does not match Hurst vector")
    half = r ** (1.0 / H.as_array())
    return t - half, t + half


@dataclass(frozen=True)
class IndexSet:
    """Finite union of bounded axis-aligned closed boxes in R^N.

    Each box is a (lo, hi) pair of equal-length tuples with lo <= hi.
    """

    boxes: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]

    def __post_init__(self):
        norm = []
        if len(self.boxes) == 0:
            raise ValueError("index set needs at least one box")
        dim = None
        for lo, hi in self.boxes:
            lo = tuple(float(x) for x in lo)
            hi = tuple(float(x) for x in hi)
            if len(lo) != len(hi) or len(lo) == 0:
                raise ValueError("malformed box")
            if dim is None:
                dim = len(lo)
            elif len(lo) != dim:
                raise ValueError("boxes of mixed dimension")
            for a, b in zip(lo, hi):
                if not (math.isfinite(a) and math.isfinite(b)) or a > b:
                    raise ValueError(f"empty or unbounded box [{a}, {b}]")
            norm.append((lo, hi))
        object.__setattr__(self, "boxes", tuple(norm))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "IndexSet":
        return cls(boxes=(((tuple(lo)), tuple(hi)),))

    @classmethod
    def unit_box(cls, N: int) -> "IndexSet":
        return cls.box([0.0] * N, [1.0] * N)

    @property
    def dim(self) -> int:
        return len(self.boxes[0][0])

    def contains(self, points: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """Boolean mask: which rows of points lie in the union of boxes."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(pts.shape[0], dtype=bool)
        for lo, hi in self.boxes:
            lo = np.asarray(lo) - atol
            hi = np.asarray(hi) + atol
            mask |= np.all((pts >= lo) & (pts <= hi), axis=1)
        return mask

    def test_grid(self, n_points: int = 10_000) -> np.ndarray:
        """Deterministic mesh of about n_points points per box, for cover checks."""
        out = []
        for lo, hi in self.boxes:
            lo = np.asarray(lo)
            hi = np.asarray(hi)
            per_axis = max(2, math.ceil(n_points ** (1.0 / len(lo))))
            axes = [np.linspace(a, b, per_axis) if b > a else np.array([a])
                    for a, b in zip(lo, hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            out.append(np.stack([m.ravel() for m in mesh], axis=1))
        return np.concatenate(out, axis=0)


@dataclass(frozen=True)
class BallCover:
    """A set of rho-balls of common radius, given by their centers."""

    centers: np.ndarray
    radius: float

    @property
    def count(self) -> int:
        return int(np.atleast_2d(self.centers).shape[0])

    def max_min_distance(self, points: np.ndarray, H: HurstVector,
                         chunk: int = 2048) -> float:
        """Largest distance from a test point to its nearest center."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        exps = H.as_array()
        worst = 0.0
        for i in range(0, pts.shape[0], chunk):
            block = pts[i:i + chunk]
            d = np.sum(np.abs(block[:, None, :] - centers[None, :, :]) ** exps, axis=2)
            worst = max(worst, float(d.min(axis=1).max()))
        return worst

    def is_valid_on(self, points: np.ndarray, H: HurstVector,
                    rtol: float = 1e-12) -> bool:
        return self.max_min_distance(points, H) <= self.radius * (1.0 + rtol)


@dataclass(frozen=True)
class GridCover:
    """Product-grid cover of an IndexSet by rho-balls of radius r.

    Built by cutting each box orthogonal to axis j with spacing (r/N)^(1/H_j);
    every resulting cell sits inside one rho-ball centered at the cell midpoint.
    ``c8`` is the constructive constant with count <= c8 * r^(-Q), valid for
    all radii r <= 1 (computed from the box side lengths).
    """

    cover: BallCover
    H: HurstVector
    c8: float
    # per box: (lo, piece widths, per-axis counts)
    cells: tuple[tuple[tuple[float, ...], tuple[float, ...], tuple[int, ...]], ...]

    @property
    def count(self) -> int:
        return self.cover.count

    def nearest_center_distance(self, points: np.ndarray) -> np.ndarray:
        """rho distance from each point to its covering cell center.

        Uses the grid structure: the covering center of a point inside a box is
        the midpoint of the cell the point falls in. Points in several boxes
        take the minimum over boxes.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        exps = self.H.as_array()
        best = np.full(pts.shape[0], np.inf)
        for lo, piece, counts in self.cells:
            lo = np.asarray(lo)
            piece = np.asarray(piece)
            counts = np.asarray(counts)
            safe = np.where(piece > 0, piece, 1.0)
            idx = np.clip(np.floor((pts - lo) / safe), 0, counts - 1)
            centers = lo + (idx + 0.5) * piece
            inside = np.all((pts >= lo - 1e-12) & (pts <= lo + piece * counts + 1e-12),
                            axis=1)
            d = np.sum(np.abs(pts - centers) ** exps, axis=1)
            best = np.where(inside, np.minimum(best, d), best)
        return best

    def is_valid_on(self, points: np.ndarray, rtol: float = 1e-12) -> bool:
        d = self.nearest_center_distance(points)
        return bool(np.all(d <= self.cover.radius * (1.0 + rtol)))


def grid_cover(I: IndexSet, r: float, H: HurstVector) -> GridCover:
    """Cover the index set with rho-balls of radius r by axis-aligned cutting."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if I.dim != H.N:
        raise ValueError("index set dimension does not match Hurst vector")
    N = H.N
    spacing = (r / N) ** (1.0 / H.as_array())
    all_centers = []
    cells = []
    c8 = 0.0
    for lo, hi in I.boxes:
        lo_a = np.asarray(lo)
        hi_a = np.asarray(hi)
        L = hi_a - lo_a
        counts = np.maximum(1, np.ceil(L / spacing - 1e-12).astype(int))
        piece = L / counts
        axes = [lo_a[j] + (np.arange(counts[j]) + 0.5) * piece[j] for j in range(N)]
        mesh = np.meshgrid(*axes, indexing="ij")
        all_centers.append(np.stack([m.ravel() for m in mesh], axis=1))
        cells.append((tuple(lo_a), tuple(piece), tuple(int(c) for c in counts)))
        c8 += float(np.prod(L * (N ** (1.0 / H.as_array())) + 1.0))
    centers = np.concatenate(all_centers, axis=0)
    return GridCover(cover=BallCover(centers=centers, radius=float(r)),
                     H=H, c8=c8, cells=tuple(cells))


def covering_number_upper(r: float, eps: float, H: HurstVector) -> float:
    """Upper bound on the number of eps-balls needed to cover a rho-ball of radius r."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps > r:
        raise ValueError("need eps <= r")
    N = H.N
    return float(np.prod((2.0 * r * N / eps) ** (1.0 / H.as_array()) + 1.0))


@dataclass(frozen=True)
class ChainingSchedule:
    """Dyadic chaining radii: eps_n = r exp(-2^(n+1)), r_n = beta eps_n 2^((n+1)/2)."""

    r: float
    beta: float
    epsilons: tuple[float, ...]
    radii: tuple[float, ...]
    c2: float


def chaining_schedule(r: float, beta: float, n_max: int) -> ChainingSchedule:
    if r <= 0 or beta <= 0:
        raise ValueError("r and beta must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    ns = np.arange(1, n_max + 1)
    eps = r * np.exp(-(2.0 ** (ns + 1)))
    radii = beta * eps * 2.0 ** ((ns + 1) / 2.0)
    # c2 = 1 + beta * sum_l 2^((l+1)/2) exp(-2^(l+1)); terms die off doubly fast
    total = 0.0
    l = 1
    while True:
        term = 2.0 ** ((l + 1) / 2.0) * math.exp(-(2.0 ** (l + 1)))
        if term < _C2_TERM_FLOOR:
            break
        total += term
        l += 1
    return ChainingSchedule(r=float(r), beta=float(beta),
                            epsilons=tuple(float(e) for e in eps),
                            radii=tuple(float(x) for x in radii),
                            c2=1.0 + beta * total)


def chaining_series_bound(beta: float, L: float, c: float, d: int, Q: float,
                          k_max: int) -> tuple[float, bool]:
    """Partial sum of the tail series controlling the chaining argument.

    Terms are exp(Q 2^(k+1) - (beta 2^(k/2) - L)^2 / (16 d (d+1)^2 c^2)) for
    k = 2..k_max. The series converges iff beta^2 / (16 d (d+1)^2 c^2) > 2 Q
    and beta > max(L/2, 0); terms overflowing double precision are reported
    as divergence.
    """
    if beta <= 0 or c <= 0 or d <= 0 or Q <= 0 or L < 0:
        raise ValueError("beta, c, d, Q must be positive and L nonnegative")
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    denom = 16.0 * d * (d + 1) ** 2 * c * c
    converges = (beta * beta / denom > 2.0 * Q) and (beta > max(L / 2.0, 0.0))
    partial = 0.0
    overflowed = False
    for k in range(2, k_max + 1):
        log_term = Q * 2.0 ** (k + 1) - (beta * 2.0 ** (k / 2.0) - L) ** 2 / denom
        if log_term > _LOG_OVERFLOW:
            overflowed = True
            partial = math.inf
            break
        partial += math.exp(log_term)
    return partial, (converges and not overflowed)


@dataclass(frozen=True)
class EuclideanBall:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative radius")
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        object.__setattr__(self, "radius", float(self.radius))


def hausdorff_premeasure(cover: Iterable[EuclideanBall], alpha: float) -> float:
    """Cover sum sum_l (2 r_l)^alpha: an upper bound on the alpha-dimensional
    Hausdorff measure of whatever the given balls cover."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    total = 0.0
    for ball in cover:
        if ball.radius < 0:
            raise ValueError("negative radius")
        total += (2.0 * ball.radius) ** alpha
    return total


def entropy_integral_closed_form(x: float) -> float:
    """Closed form of the truncated entropy integral of sqrt(log(1/y)) on (0, x].

    Equals sqrt(pi)/2 - sqrt(pi)/2 * erf(sqrt(log(1/x))) + x*sqrt(log(1/x)).
    """
    if not (0.0 < x <= 1.0):
        raise ValueError("x must lie in (0, 1]")
    if x == 1.0:
        return math.sqrt(math.pi) / 2.0
    s = math.sqrt(math.log(1.0 / x))
    return math.sqrt(math.pi) / 2.0 * (1.0 - math.erf(s)) + x * s
