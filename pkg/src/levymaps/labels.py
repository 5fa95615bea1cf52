"""Good labellings, contour label processes and Gaussian label fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .looptree import InterpolatedPath, Looptree

__all__ = [
    "GoodLabelling",
    "LabelProcess",
    "sample_good_labelling",
    "label_process",
    "gaussian_labels",
    "label_variance",
    "label_covariance",
    "rescaled_label_process",
    "uniform_compositions",
]


@dataclass(frozen=True, eq=False)
class GoodLabelling:
    """Integer label per looptree vertex, the root being labelled 0."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def check(self, lt):
        """Raise if some contour edge decreases the label by more than one."""
        if self.labels.size != lt.N:
            raise ValidationError(f"{self.labels.size} labels for {lt.N} vertices")
        if self.labels[lt.root] != 0:
            raise ValidationError(f"root label is {self.labels[lt.root]}, expected 0")
        z = self.labels[lt.contour]
        dz = np.diff(z)
        if dz.size and dz.min() < -1:
            k = int(np.argmin(dz))
            raise ValidationError(
                f"edge e_{k} ({lt.contour[k]} -> {lt.contour[k + 1]}) has label step {dz[k]} < -1"
            )
        return True


@dataclass(frozen=True, eq=False)
class LabelProcess:
    """Label values on a time grid.

    Discrete processes live on the integer contour times ``0..n``;
    rescaled and Gaussian ones on real grids.  Calling the object
    evaluates it by piecewise-linear interpolation.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape[-1:]:
            raise ValidationError("times and values have different lengths")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def discrete(cls, values):
        values = np.asarray(values)
        return cls(np.arange(values.size, dtype=float), values)

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def __len__(self):
        return self.times.size


def uniform_compositions(lengths, rng):
    """One uniform weak composition of ``l`` into ``l`` parts per entry ``l``.

    Stars and bars: ``l - 1`` bars among ``2l - 1`` slots chosen uniformly;
    part ``j`` counts the stars between bar ``j - 1`` and bar ``j``.  Parts
    are returned concatenated in the order of ``lengths``.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size == 0:
        return np.zeros(0, dtype=np.int64)
    slots = 2 * lengths - 1
    owner = np.repeat(np.arange(lengths.size), slots)
    keys = rng.random(owner.size)
    order = np.lexsort((keys, owner))
    slot_start = np.concatenate(([0], np.cumsum(slots)[:-1]))
    rank = np.empty(owner.size, dtype=np.int64)
    rank[order] = np.arange(owner.size) - slot_start[owner[order]]
    is_bar = rank < (lengths - 1)[owner]
    bars_before = np.cumsum(is_bar) - is_bar
    bars_before -= np.concatenate(([0], np.cumsum(lengths - 1)[:-1]))[owner]
    part_start = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    stars = ~is_bar
    return np.bincount(part_start[owner[stars]] + bars_before[stars], minlength=lengths.sum())


def sample_good_labelling(lt, rng):
    """Uniform good labelling: independent uniform bridges on every cycle.

    On a cycle of length ``l`` the label increments along its edges (in
    contour order) are ``part - 1`` for a uniform weak composition of ``l``
    into ``l`` parts, giving one of ``binom(2l - 1, l)`` bridges with steps
    ``>= -1``.
    """
    parts = uniform_compositions(lt.cycle_length, rng)
    order = np.argsort(lt.edge_cycle, kind="stable")
    inc = np.empty(lt.n, dtype=np.int64)
    inc[order] = parts - 1
    z = np.concatenate(([0], np.cumsum(inc)))
    labels = np.empty(lt.N, dtype=np.int64)
    labels[lt.contour] = z
    return GoodLabelling(labels)


def label_process(lt, gl):
    """Contour label process ``Z_k = label(u_k)`` for ``k = 0..n``."""
    gl.check(lt)
    return LabelProcess.discrete(gl.labels[lt.contour])


def rescaled_label_process(Z, r_n):
    """``t -> (2 r_n)**(-1/2) Z_{n t}`` on [0, 1]."""
    if not r_n > 0:
        raise ValidationError(f"r_n must be positive, got {r_n}")
    n = Z.times[-1] if Z.times[-1] > 0 else 1.0
    return LabelProcess(Z.times / n, Z.values / np.sqrt(2.0 * r_n))


def _ensure_path(path):
    if isinstance(path, Looptree):
        return InterpolatedPath(path.path)
    if not isinstance(path, InterpolatedPath):
        return InterpolatedPath(path)
    return path


def label_variance(path, a, t):
    """``Var(Z^a_t | path) = a C_t + sum R (Delta - R) / Delta`` over ancestors."""
    path = _ensure_path(path)
    total = a * path.c_process(t)
    for r, R in path.ancestors(t):
        D = path.x[r] + 1
        total += R * (D - R) / D
    return float(total)


def label_covariance(path, a, s, t):
    """Conditional covariance of ``Z^a_s`` and ``Z^a_t``.

    Obtained by polarization: above the last common ancestor both values
    share the same bridge values, on its cycle they see one bridge at two
    points, below it the bridges are independent.
    """
    path = _ensure_path(path)
    if s == t:
        return label_variance(path, a, s)
    cs = {r: (R, D) for r, R, D in path.chain(s)}
    ct = {r: (R, D) for r, R, D in path.chain(t)}
    c = max(set(cs) & set(ct))
    var_diff = 0.0
    for chain in (cs, ct):
        for r, (R, D) in chain.items():
            if r > c and D > 0:
                var_diff += R * (D - R) / D
    (Rs, D), (Rt, _) = cs[c], ct[c]
    if D > 0:
        g = abs(Rs - Rt)
        var_diff += g * (D - g) / D
    c_s, c_t = path.c_process(s), path.c_process(t)
    var_diff += a * (c_s + c_t - 2.0 * min(c_s, c_t, 0.0))
    return 0.5 * (label_variance(path, a, s) + label_variance(path, a, t) - var_diff)


def gaussian_labels(path, a, times, rng, size=None):
    """Gaussian labels ``Z^a`` of the interpolated path on a time grid.

    ``Z^a_t = sqrt(a) Z^C_t + sum_{r < t} sqrt(Delta_r) b_r(R^t_r / Delta_r)``
    with independent standard Brownian bridges ``b_r``.  Each bridge is
    sampled jointly at every argument the grid needs, by cumulating
    Gaussian increments over the sorted arguments and subtracting
    ``u * W(1)``.  ``size`` draws that many independent fields at once.
    """
    path = _ensure_path(path)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    reps = 1 if size is None else int(size)
    anc = [path.ancestors(t) for t in times]
    # one record per (grid time, ancestor)
    rec_t = np.array([i for i, lst in enumerate(anc) for _ in lst], dtype=np.int64)
    rec_r = np.array([r for lst in anc for r, _ in lst], dtype=np.int64)
    rec_R = np.array([R for lst in anc for _, R in lst], dtype=float)
    values = np.zeros((reps, times.size))
    if rec_r.size:
        D = (path.x[rec_r] + 1).astype(float)
        u = rec_R / D
        # evaluation points per jump, plus the endpoint u = 1
        jumps = np.unique(rec_r)
        pts_r = np.concatenate((rec_r, jumps))
        pts_u = np.concatenate((u, np.ones(jumps.size)))
        key_r, inv = np.unique(np.stack((pts_r, pts_u)), axis=1, return_inverse=True)
        inv = np.asarray(inv).ravel()
        kr, ku = key_r[0].astype(np.int64), key_r[1]
        first = np.ones(kr.size, dtype=bool)
        first[1:] = kr[1:] != kr[:-1]
        du = np.diff(np.concatenate(([0.0], ku)))
        du[first] = ku[first]
        group = np.cumsum(first) - 1
        g_start = np.flatnonzero(first)
        incr = rng.standard_normal((reps, kr.size)) * np.sqrt(du)
        csum = np.cumsum(incr, axis=1)
        before = np.concatenate((np.zeros((reps, 1)), csum[:, g_start[1:] - 1]), axis=1)
        wiener = csum - before[:, group]
        g_end = np.concatenate((g_start[1:], [kr.size])) - 1
        bridge = wiener - ku * wiener[:, g_end][:, group]
        contrib = np.sqrt((path.x[kr] + 1).astype(float)) * bridge
        rec_vals = contrib[:, inv[: rec_r.size]]
        for j in range(reps):
            values[j] = np.bincount(rec_t, weights=rec_vals[j], minlength=times.size)
    if a:
        c = np.array([path.c_process(t) for t in times])
        if np.any(c != 0):
            order = np.argsort(times)
            cs = c[order]
            cov = np.empty((times.size, times.size))
            for i in range(times.size):
                cov[i, i:] = np.minimum.accumulate(cs[i:])
                cov[i:, i] = cov[i, i:]
            chol = np.linalg.cholesky(cov + 1e-12 * np.eye(times.size))
            snake = rng.standard_normal((reps, times.size)) @ chol.T
            values[:, order] += np.sqrt(a) * snake
    if size is None:
        return LabelProcess(times, values[0])
    return LabelProcess(times, values)
