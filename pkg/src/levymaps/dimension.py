"""Covering, volume and Hoelder estimators on sampled metrics.

Covering numbers are computed on a finite sample of points by greedy
farthest-point insertion: the ``i``-th inserted point is at distance
``r_i`` from the previous ones, the radii are nonincreasing and the cover
at scale ``eps`` uses ``1 + #{i >= 1 : r_i > eps}`` balls.  This is within
a factor two of the optimal cover of the sample.

Two effects limit the usable scales and are censored before any fit:
below the unit of a graph metric every point is its own ball, and once
``N(eps)`` is a sizeable fraction of the sample the count measures the
sample rather than the space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.sparse import csgraph

from .errors import BudgetExceededError, ValidationError

__all__ = [
    "MetricSample",
    "DimensionEstimate",
    "covering_number",
    "covering_curve",
    "minkowski_estimate",
    "default_eps_grid",
    "ball_volume_profile",
    "volume_estimate",
    "holder_estimate",
    "dyadic_increments",
    "graph_metric_sample",
    "segment_sample",
    "circle_sample",
    "square_sample",
]

SATURATION = 0.5


@dataclass(frozen=True, eq=False)
class MetricSample:
    """Finite sample of a metric space with its distance matrix."""

    points: np.ndarray
    dist: np.ndarray
    lattice: float = 0.0
    _radii: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValidationError("distance matrix must be square")
        if np.any(np.diag(d) != 0):
            raise ValidationError("distance matrix must have a zero diagonal")
        if not np.allclose(d, d.T):
            raise ValidationError("distance matrix must be symmetric")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValidationError("distances must be finite and nonnegative")
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "points", np.asarray(self.points))

    @property
    def size(self):
        return self.dist.shape[0]

    @property
    def diameter(self):
        return float(self.dist.max())

    def insertion_radii(self):
        """Farthest-point insertion radii (first one is ``inf``), cached."""
        if not self._radii:
            d = self.dist
            s = d.shape[0]
            radii = np.empty(s)
            radii[0] = np.inf
            nearest = d[0].copy()
            for i in range(1, s):
                j = int(np.argmax(nearest))
                radii[i] = nearest[j]
                np.minimum(nearest, d[j], out=nearest)
            self._radii.append(radii)
        return self._radii[0]

    def check_triangle(self, triples=2000, rng=None, tol=1e-9):
        rng = np.random.default_rng(rng)
        i, j, k = rng.integers(0, self.size, (3, triples))
        d = self.dist
        return bool(np.all(d[i, k] <= d[i, j] + d[j, k] + tol))


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    stderr: float
    eps_range: tuple
    method: str
    lower: float = float("nan")
    upper: float = float("nan")
    points: int = 0
    replicas: int = 1

    def to_dict(self):
        return {"slope": self.slope, "stderr": self.stderr, "eps_range": list(self.eps_range),
                "method": self.method, "lower": self.lower, "upper": self.upper,
                "points": self.points, "replicas": self.replicas}


def covering_number(ms, eps):
    """Greedy farthest-point cover size of the sample at scale ``eps``."""
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    r = ms.insertion_radii()
    return int(1 + np.count_nonzero(r[1:] > eps))


def covering_curve(ms, eps_grid):
    r = np.sort(ms.insertion_radii()[1:])
    eps = np.asarray(eps_grid, dtype=float)
    return 1 + r.size - np.searchsorted(r, eps, side="right")


def default_eps_grid(ms, points=24):
    """24 log-spaced scales in ``[diameter/256, diameter/4]``."""
    d = ms.diameter
    return np.geomspace(d / 256.0, d / 4.0, points)


def _fit(x, y):
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def _window_slopes(x, y, width):
    out = []
    for i in range(0, x.size - width + 1):
        out.append(_fit(x[i: i + width], y[i: i + width])[0])
    return np.array(out)


def minkowski_estimate(ms, eps_grid=None, saturation=SATURATION):
    """Slope of ``log N(eps)`` against ``log 1/eps``.

    Scales below ``ms.lattice`` and scales where ``N(eps)`` exceeds
    ``saturation * sample size`` are dropped.  ``lower`` and ``upper``
    are the extreme slopes over sliding windows of half the retained
    scales, mirroring the lower and upper Minkowski dimensions.
    """
    eps = default_eps_grid(ms) if eps_grid is None else np.sort(np.asarray(eps_grid, float))
    d = ms.diameter
    if eps.size < 3 or np.log10(eps[-1] / eps[0]) < 1.5 - 1e-9:
        raise ValidationError("degenerate grid: need at least 3 scales spanning 1.5 decades")
    if eps[0] < d / 256 * (1 - 1e-9) or eps[-1] > d / 4 * (1 + 1e-9):
        raise ValidationError("degenerate grid: scales must lie in [diameter/256, diameter/4]")
    N = covering_curve(ms, eps)
    keep = (eps >= ms.lattice) & (N <= saturation * ms.size)
    if np.count_nonzero(keep) < 3:
        raise ValidationError(
            f"degenerate grid: only {np.count_nonzero(keep)} scales left after censoring"
        )
    x, y = np.log(1.0 / eps[keep]), np.log(N[keep])
    slope, se = _fit(x, y)
    w = _window_slopes(x, y, max(3, x.size // 2))
    return DimensionEstimate(slope, se, (float(eps[keep][0]), float(eps[keep][-1])),
                             "covering", float(w.min()), float(w.max()), int(x.size))


def ball_volume_profile(rows, weights, radii):
    """Mean mass of balls ``B(center, r)``.

    ``rows`` holds distances from each center to every point, ``weights``
    the mass of each point (contour-time multiplicities, normalized to 1).
    Returns an array of ``(r, volume fraction)``.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    radii = np.asarray(radii, dtype=float)
    vol = np.zeros(radii.size)
    for row in rows:
        order = np.argsort(row, kind="stable")
        cum = np.cumsum(w[order])
        idx = np.searchsorted(row[order], radii, side="right")
        vol += np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return np.column_stack((radii, vol / rows.shape[0]))


def volume_estimate(profile, r_min=2.0, r_max=None):
    """Slope of ``log volume`` against ``log r`` for ``r_min <= r <= r_max``."""
    r, v = profile[:, 0], profile[:, 1]
    keep = (r >= r_min) & (v > 0)
    if r_max is not None:
        keep &= r <= r_max
    if np.count_nonzero(keep) < 3:
        raise ValidationError("degenerate radius grid for the volume fit")
    x, y = np.log(r[keep]), np.log(v[keep])
    slope, se = _fit(x, y)
    w = _window_slopes(x, y, max(3, x.size // 2))
    return DimensionEstimate(slope, se, (float(r[keep][0]), float(r[keep][-1])), "ball-volume",
                             float(w.min()), float(w.max()), int(x.size))


def dyadic_increments(n, j_min=4, j_max=None):
    """Scales ``h = 2**j`` for ``j`` in ``[j_min, log2(n) - 2]``."""
    top = int(np.floor(np.log2(n))) - 2 if j_max is None else j_max
    return [1 << j for j in range(j_min, top + 1)]


def holder_estimate(values=None, n=None, distance=None, j_min=4, j_max=None,
                    statistic="max"):
    """Critical Hoelder exponent from dyadic maximal increments.

    For each dyadic step ``h`` the largest increment over consecutive
    points ``(i h, (i + 1) h)`` is recorded, either ``|f((i+1)h) - f(ih)|``
    for a profile ``values`` or ``distance(ih, (i+1)h)`` for a metric given
    as a vectorized callable on integer times ``0..n``.  The exponent is
    the slope of ``log max`` against ``log(h / n)``.

    ``statistic="median"`` regresses the median increment instead, which
    estimates the self-similarity index without the extreme-value factor
    carried by a maximum over ``n / h`` intervals.
    """
    reduce = {"max": np.max, "median": np.median}.get(statistic)
    if reduce is None:
        raise ValidationError(f"unknown statistic {statistic!r}")
    if values is not None:
        f = np.asarray(getattr(values, "values", values), dtype=float)
        n = f.size - 1

        def distance(s, t):
            return np.abs(f[t] - f[s])
    elif distance is None or n is None:
        raise ValidationError("give either values or (distance, n)")
    steps = dyadic_increments(n, j_min, j_max)
    if len(steps) < 3:
        raise ValidationError(f"too few dyadic scales for n={n}")
    maxima = []
    for h in steps:
        s = np.arange(0, n - h + 1, h)
        maxima.append(float(reduce(distance(s, s + h))))
    maxima = np.array(maxima)
    if np.any(maxima <= 0):
        raise ValidationError("a dyadic scale has zero maximal increment")
    x, y = np.log(np.array(steps) / n), np.log(maxima)
    slope, se = _fit(x, y)
    w = _window_slopes(x, y, max(3, x.size // 2))
    method = "holder" if statistic == "max" else "holder-median"
    return DimensionEstimate(slope, se, (steps[0] / n, steps[-1] / n), method,
                             float(w.min()), float(w.max()), int(x.size))


def graph_metric_sample(adjacency, sources, budget=None, chunk=64, full_rows=False):
    """BFS distances among sampled vertices of a graph.

    With ``full_rows=True`` also returns the distances from every sampled
    vertex to all vertices (used for ball volumes).
    """
    sources = np.asarray(sources, dtype=np.int64)
    V = adjacency.shape[0]
    cost = sources.size * (V + adjacency.nnz)
    if budget is not None and cost > budget:
        raise BudgetExceededError(f"{sources.size} BFS need {cost} work units, budget {budget}")
    rows = np.empty((sources.size, V), dtype=np.float32 if full_rows else float)
    for i in range(0, sources.size, chunk):
        rows[i: i + chunk] = csgraph.shortest_path(adjacency, unweighted=True,
                                                   indices=sources[i: i + chunk])
    ms = MetricSample(sources, rows[:, sources].astype(float), lattice=1.0)
    return (ms, rows) if full_rows else ms


# analytic fixtures --------------------------------------------------------


def segment_sample(points=512):
    x = np.linspace(0.0, 1.0, points)
    return MetricSample(x, np.abs(x[:, None] - x[None, :]))


def circle_sample(points=512, length=1.0):
    x = np.linspace(0.0, length, points, endpoint=False)
    d = np.abs(x[:, None] - x[None, :])
    return MetricSample(x, np.minimum(d, length - d))


def square_sample(points=512, rng=None):
    """Uniform points of the unit square with the max metric."""
    rng = np.random.default_rng(rng)
    p = rng.random((points, 2))
    d = np.max(np.abs(p[:, None, :] - p[None, :, :]), axis=2)
    return MetricSample(p, d)
