"""Discrete looptrees and their two distances.

Time ``k`` of an excursion ``x_0..x_n`` is a node of the plane tree coded
by the path; its parent is ``max{j < k : W_j <= W_k}``.  A node with
``x_k >= 0`` carries a cycle of length ``x_k + 1`` made of its children.
Vertices of the looptree correspond to the -1 steps: the vertex visited at
time ``k`` is the one of the last -1 step of the subtree of ``k``.

Distances are computed by breadth-first search on the graph and, at real
times, by the sum over cycles on the ancestral line of the interpolated
path (``FormulaDistance``).  The two agree exactly at integer times.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ValidationError
from .paths import LukasiewiczPath

__all__ = [
    "Looptree",
    "InterpolatedPath",
    "FormulaDistance",
    "build_looptree",
    "encode_looptree",
    "graph_distance",
    "bfs_distances",
    "formula_distance",
    "ancestors",
    "tree_parents",
    "next_smaller",
]


def tree_parents(w):
    """``parent[i] = max{j < i : w[j] <= w[i]}`` for ``i >= 1``; ``parent[0] = -1``."""
    w = np.asarray(w)
    parent = np.full(w.size, -1, dtype=np.int64)
    stack = [0]
    wl = w.tolist()
    for i in range(1, w.size):
        wi = wl[i]
        while wl[stack[-1]] > wi:
            stack.pop()
        parent[i] = stack[-1]
        stack.append(i)
    return parent


def next_smaller(w):
    """Index of the first later entry strictly smaller than ``w[i]`` (``len(w)`` if none)."""
    wl = np.asarray(w).tolist()
    out = np.full(len(wl), len(wl), dtype=np.int64)
    stack = []
    for i, wi in enumerate(wl):
        while stack and wl[stack[-1]] > wi:
            out[stack.pop()] = i
        stack.append(i)
    return out


class Looptree:
    """Looptree coded by an excursion.

    Attributes
    ----------
    path : LukasiewiczPath
    n, N : int
        Number of edges and of vertices.
    contour : ndarray (n + 1,)
        ``contour[k]`` is the origin ``u_k`` of the contour edge ``e_k``;
        ``contour[n] == contour[0]`` is the root.
    edge_cycle : ndarray (n,)
        Cycle id of ``e_k``; cycles are numbered by the time that carries them.
    cycle_time, cycle_length, cycle_base : ndarray (number of cycles,)
        Carrying time, length and attachment vertex of each cycle.
    vertex_time : ndarray (N,)
        Last-appearance contour time of each vertex (the -1 steps, in order).
    parent : ndarray (n + 1,)
        Parent of each time in the coding plane tree.
    """

    def __init__(self, path):
        if not isinstance(path, LukasiewiczPath):
            path = LukasiewiczPath(path, "excursion")
        if path.kind != "excursion":
            path = LukasiewiczPath(path.increments, "excursion")
        x = path.increments
        n = path.n
        w = path.walk
        self.path = path
        self.n = n
        neg = np.flatnonzero(x == -1)
        self.N = neg.size
        self.vertex_time = neg
        vertex_of_step = np.full(n + 1, -1, dtype=np.int64)
        vertex_of_step[neg] = np.arange(self.N)
        # the leaf ending the subtree of k is the step just before W drops below W_k
        leaf = next_smaller(w)[: n + 1] - 1
        self.contour = vertex_of_step[leaf]
        self.root = int(self.contour[n])
        self.parent = tree_parents(w[: n + 1])
        self.cycle_time = np.flatnonzero(x >= 0)
        self.cycle_length = x[self.cycle_time] + 1
        self.cycle_base = self.contour[self.cycle_time]
        cycle_of_time = np.full(n + 1, -1, dtype=np.int64)
        cycle_of_time[self.cycle_time] = np.arange(self.cycle_time.size)
        self.edge_cycle = cycle_of_time[self.parent[1:]]
        self._adjacency = None

    @property
    def edges(self):
        """Contour edges as an ``(n, 2)`` array of vertex ids."""
        return np.column_stack((self.contour[:-1], self.contour[1:]))

    @property
    def adjacency(self):
        """Symmetric CSR adjacency matrix (multi-edges collapsed)."""
        if self._adjacency is None:
            e = self.edges
            data = np.ones(2 * self.n, dtype=np.int8)
            a = sparse.coo_matrix(
                (data, (np.concatenate((e[:, 0], e[:, 1])), np.concatenate((e[:, 1], e[:, 0])))),
                shape=(self.N, self.N),
            ).tocsr()
            a.data[:] = 1
            self._adjacency = a
        return self._adjacency

    def neighbors(self, v):
        a = self.adjacency
        return a.indices[a.indptr[v]: a.indptr[v + 1]]

    def cycle_histogram(self):
        lengths, counts = np.unique(self.cycle_length, return_counts=True)
        return {int(k): int(c) for k, c in zip(lengths, counts)}

    def metadata(self):
        return {"n": self.n, "N": self.N, "root": self.root,
                "cycles": int(self.cycle_time.size),
                "cycle_histogram": self.cycle_histogram()}

    def same_as(self, other):
        """Structural equality of two looptrees (same contour and cycles)."""
        return (
            self.n == other.n
            and np.array_equal(self.contour, other.contour)
            and np.array_equal(self.edge_cycle, other.edge_cycle)
            and np.array_equal(self.cycle_length, other.cycle_length)
        )

    def __repr__(self):
        return f"Looptree(n={self.n}, N={self.N}, cycles={self.cycle_time.size})"


def build_looptree(path):
    """Looptree coded by an excursion."""
    return Looptree(path)


def encode_looptree(lt):
    """Lukasiewicz path of a looptree, read off its contour.

    The increment at ``e_k`` is the length of its cycle minus one when
    ``e_k`` is the first contour edge of that cycle, and -1 otherwise.
    """
    n = lt.n
    x = np.full(n + 1, -1, dtype=np.int64)
    cyc = lt.edge_cycle
    first = np.zeros(n, dtype=bool)
    _, idx = np.unique(cyc, return_index=True)
    first[idx] = True
    lengths = np.bincount(cyc, minlength=lt.cycle_length.size)
    x[:n][first] = lengths[cyc[first]] - 1
    return LukasiewiczPath(x, "excursion")


def bfs_distances(lt, source):
    """Graph distances from ``source`` to every vertex."""
    d = csgraph.shortest_path(lt.adjacency, unweighted=True, indices=[int(source)])[0]
    return d.astype(np.int64)


def graph_distance(lt, u, v):
    """Shortest-path length between two vertices of the looptree."""
    if u == v:
        return 0
    return int(bfs_distances(lt, u)[v])


def _cycle_delta(a, b, length):
    d = np.abs(a - b)
    return np.minimum(d, length - d)


class InterpolatedPath:
    """Cadlag extension of an excursion drifting at speed -1.

    The step ``x_k`` becomes a jump of ``x_k + 1`` at time ``k`` followed by
    a unit of drift, so ``Y(k-) = W_k`` and
    ``Y(t) = W_k + x_k + 1 - (t - k)`` on ``[k, k + 1)``.  Times range over
    ``[0, n]``; ``Y(n) = 0``.
    """

    def __init__(self, base):
        if isinstance(base, Looptree):
            base = base.path
        self.base = base
        self.x = base.increments
        self.w = base.walk
        self.duration = base.n
        self.parent = tree_parents(self.w[: base.n + 1])

    def _check(self, t):
        if not 0 <= t <= self.duration:
            raise ValidationError(f"time {t} outside [0, {self.duration}]")

    def value(self, t):
        self._check(t)
        k = min(int(np.floor(t)), self.duration)
        return float(self.w[k] + self.x[k] + 1 - (t - k)) if k < self.duration else 0.0

    def left_limit(self, t):
        self._check(t)
        k = int(np.floor(t))
        if t == k:
            return float(self.w[k])
        return float(self.w[k] + self.x[k] + 1 - (t - k))

    def jump(self, t):
        k = int(t)
        if t != k or k >= self.duration:
            return 0.0
        return float(self.x[k] + 1)

    def infimum(self, s, t):
        """``inf_{[s, t]} Y``, left limits included."""
        if s > t:
            s, t = t, s
        lo, hi = int(np.floor(s)) + 1, int(np.floor(t))
        vals = [self.value(s), self.value(t), self.left_limit(t)]
        if hi >= lo:
            vals.append(float(self.w[lo: hi + 1].min()))
        return min(vals)

    def chain(self, t):
        """Full ancestral line of ``t`` as ``[(r, R, Delta)]``, from ``t`` towards 0.

        Includes ancestors with ``R = 0`` and, for integer ``t``, ``t`` itself
        with ``R = 0``.  ``Delta`` is the cycle length ``x_r + 1``.
        """
        self._check(t)
        x, w, parent = self.x, self.w, self.parent
        k = min(int(np.floor(t)), self.duration)
        frac = t - k
        out = []
        if frac == 0:
            out.append((k, 0.0, float(x[k] + 1)))
            cap = np.inf
        elif x[k] >= 0:
            out.append((k, float(x[k] + 1 - frac), float(x[k] + 1)))
            cap = np.inf
        else:
            cap = w[k] - frac
        child = k
        r = parent[k]
        while r >= 0:
            R = min(cap, w[child]) - w[r]
            if R >= 0:
                out.append((int(r), float(R), float(x[r] + 1)))
            child, r = r, parent[r]
        return out

    def ancestors(self, t):
        """Ancestors ``r`` of ``t`` with ``R^t_r > 0``, in increasing time order."""
        return [(r, R) for r, R, _ in reversed(self.chain(t)) if R > 0 and r != t]

    def c_process(self, t):
        """``C_t = Y(t-) - sum of R^t_r over ancestors``; identically 0 here."""
        return self.left_limit(t) - sum(R for _, R in self.ancestors(t))

    def d_y(self, s, t):
        """``Y_s + Y_{t-} - 2 inf_{[s,t]} Y`` for ``s <= t``."""
        if s > t:
            s, t = t, s
        if s == t:
            return 0.0
        return self.value(s) + self.left_limit(t) - 2.0 * self.infimum(s, t)


def ancestors(path, t):
    if not isinstance(path, InterpolatedPath):
        path = InterpolatedPath(path)
    return path.ancestors(t)


def formula_distance(path, a, s, t):
    """Looptree distance between times ``s`` and ``t`` of the interpolated path.

    Sum of cycle distances ``min(|u - v|, Delta - |u - v|)`` between the
    positions ``R`` along the ancestral lines of ``s`` and ``t`` above
    their last common ancestor, plus ``a`` times the distance coded by
    ``C`` (which vanishes for these paths, see ``c_process``).
    """
    if not isinstance(path, InterpolatedPath):
        path = InterpolatedPath(path)
    path._check(s)
    path._check(t)
    if s == t:
        return 0.0
    cs = {r: (R, D) for r, R, D in path.chain(s)}
    ct = {r: (R, D) for r, R, D in path.chain(t)}
    common = set(cs) & set(ct)
    c = max(common)
    total = 0.0
    for chain in (cs, ct):
        for r, (R, D) in chain.items():
            if r > c and D > 0:
                total += min(R, D - R)
    (Rs, D), (Rt, _) = cs[c], ct[c]
    total += float(_cycle_delta(Rs, Rt, D))
    if a:
        cs_, ct_ = path.c_process(s), path.c_process(t)
        total += a * (cs_ + ct_ - 2.0 * min(cs_, ct_, 0.0))
    return total


class FormulaDistance:
    """Vectorized looptree distances between integer contour times.

    With ``D_k`` the distance from time ``k`` to the root along its
    ancestral line, ``d(s, t) = D_s + D_t - 2 D_c`` corrected on the cycle
    of the last common ancestor ``c``.  Common ancestors come from binary
    lifting, so a batch of ``m`` pairs costs ``O(m log n)``.
    """

    def __init__(self, path):
        if isinstance(path, Looptree):
            path = path.path
        x = path.increments
        n = path.n
        w = path.walk[: n + 1]
        parent = tree_parents(w)
        parent[0] = 0
        self.n = n
        self.w = w
        self.length = (x + 1).astype(np.int64)
        depth = np.zeros(n + 1, dtype=np.int64)
        dist = np.zeros(n + 1, dtype=np.int64)
        # parents precede children, so one forward pass suffices
        pl, wl, ll = parent.tolist(), w.tolist(), self.length.tolist()
        dl = [0] * (n + 1)
        hl = [0] * (n + 1)
        for k in range(1, n + 1):
            p = pl[k]
            R = wl[k] - wl[p]
            L = ll[p]
            dl[k] = dl[p] + min(R, L - R)
            hl[k] = hl[p] + 1
        dist[:] = dl
        depth[:] = hl
        self.depth, self.dist = depth, dist
        levels = max(1, int(depth.max()).bit_length())
        up = np.empty((levels, n + 1), dtype=np.int64)
        up[0] = parent
        for j in range(1, levels):
            up[j] = up[j - 1][up[j - 1]]
        self.up = up

    def _lift(self, v, steps):
        v = v.copy()
        j = 0
        steps = steps.copy()
        while np.any(steps):
            sel = (steps & 1).astype(bool)
            v[sel] = self.up[j][v[sel]]
            steps >>= 1
            j += 1
        return v

    def lca(self, s, t):
        s = np.asarray(s, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        ds, dt = self.depth[s], self.depth[t]
        swap = ds < dt
        a = np.where(swap, t, s)
        b = np.where(swap, s, t)
        a = self._lift(a, np.abs(ds - dt))
        for j in range(self.up.shape[0] - 1, -1, -1):
            ua, ub = self.up[j][a], self.up[j][b]
            move = ua != ub
            a = np.where(move, ua, a)
            b = np.where(move, ub, b)
        return np.where(a == b, a, self.up[0][a])

    def __call__(self, s, t):
        s = np.atleast_1d(np.asarray(s, dtype=np.int64))
        t = np.atleast_1d(np.asarray(t, dtype=np.int64))
        c = self.lca(s, t)
        L = self.length[c]
        out = self.dist[s] + self.dist[t] - 2 * self.dist[c]
        Rs = np.zeros_like(s)
        Rt = np.zeros_like(t)
        ms, mt = s != c, t != c
        # child of c on the way to s
        cs = self._lift(s[ms], self.depth[s[ms]] - self.depth[c[ms]] - 1)
        ct = self._lift(t[mt], self.depth[t[mt]] - self.depth[c[mt]] - 1)
        Rs[ms] = self.w[cs] - self.w[c[ms]]
        Rt[mt] = self.w[ct] - self.w[c[mt]]
        out = out - _cycle_delta(0, Rs, L) - _cycle_delta(0, Rt, L) + _cycle_delta(Rs, Rt, L)
        return out

    def matrix(self, times):
        times = np.asarray(times, dtype=np.int64)
        ii, jj = np.meshgrid(times, times, indexing="ij")
        return self(ii.ravel(), jj.ravel()).reshape(ii.shape)
