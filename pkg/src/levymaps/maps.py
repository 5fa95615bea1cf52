"""From labelled looptrees to pointed bipartite maps.

Every corner ``k`` of the outer face of the looptree (the origin of the
contour edge ``e_k``) is joined to its successor, the next corner in
contour order, cyclically, with label one less; corners of minimal label
are joined to an extra vertex ``v0``.  Removing the looptree edges leaves
a bipartite map whose faces correspond to the cycles.

The map is stored as a rotation system on ``2n`` half-edges: half-edge
``2i`` leaves corner ``i``, half-edge ``2i + 1`` is the other end of the
same edge.  Map vertex 0 is ``v0``; looptree vertex ``v`` becomes ``v + 1``.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import BudgetExceededError, ValidationError

__all__ = [
    "PointedMap",
    "looptree_to_map",
    "successors",
    "bfs_distances",
    "map_distance_matrix",
    "audit_bijection",
    "d_circ",
    "d_circ_discrete",
    "RangeMin",
]


def successors(z):
    """Successor corner of each corner of a cyclic label sequence.

    ``z[k]`` is the label of corner ``k``; the result is the first ``j``
    after ``k`` (cyclically) with ``z[j] == z[k] - 1``, or -1 when ``z[k]``
    is minimal.  One sorted search over the doubled sequence replaces the
    per-corner scan.
    """
    z = np.asarray(z, dtype=np.int64)
    n = z.size
    zmin = z.min()
    pos = np.arange(2 * n, dtype=np.int64)
    key = (np.concatenate((z, z)) - zmin) * (2 * n) + pos  # sorted by label then position
    order = np.argsort(key, kind="stable")
    skey = key[order]
    k = np.arange(n)
    target = (z - 1 - zmin) * (2 * n) + k + 1
    idx = np.searchsorted(skey, target)
    idx = np.minimum(idx, 2 * n - 1)
    found = order[idx]
    ok = (z > zmin) & (np.concatenate((z, z))[found] == z - 1)
    if np.any((z > zmin) & ~ok):
        raise ValidationError("labels are not a good labelling: a successor is missing")
    return np.where(z > zmin, found % n, -1)


class PointedMap:
    """Planar map with a distinguished vertex, given by a rotation system.

    Attributes
    ----------
    V, E, F : int
    edges : ndarray (E, 2)
        Map vertex ids of both ends of each edge (corner side first).
    sigma : ndarray (2E,)
        Next half-edge around the same vertex.
    half_vertex : ndarray (2E,)
    face_of_half : ndarray (2E,)
        Face to the left of each half-edge (orbits of ``sigma o alpha``).
    face_degrees : ndarray (F,)
    labels : ndarray (V,)
        Shifted labels, 0 at the distinguished vertex.
    root_edge : (int, int)
        Oriented root edge; its tip is the endpoint farther from ``v0``.
    """

    distinguished = 0

    def __init__(self, V, edges, sigma, labels, root_edge):
        self.V = int(V)
        self.edges = np.asarray(edges, dtype=np.int64)
        self.E = self.edges.shape[0]
        self.sigma = np.asarray(sigma, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.root_edge = tuple(int(v) for v in root_edge)
        self.half_vertex = self.edges.ravel()
        phi = self.sigma[np.arange(2 * self.E) ^ 1]
        graph = sparse.csr_matrix(
            (np.ones(2 * self.E, dtype=np.int8), (np.arange(2 * self.E), phi)),
            shape=(2 * self.E, 2 * self.E),
        )
        self.F, self.face_of_half = csgraph.connected_components(graph, directed=True,
                                                                 connection="strong")
        self.face_degrees = np.bincount(self.face_of_half, minlength=self.F)
        self._adjacency = None

    @property
    def adjacency(self):
        if self._adjacency is None:
            e = self.edges
            a = sparse.coo_matrix(
                (np.ones(2 * self.E, dtype=np.int8),
                 (np.concatenate((e[:, 0], e[:, 1])), np.concatenate((e[:, 1], e[:, 0])))),
                shape=(self.V, self.V),
            ).tocsr()
            a.data[:] = 1
            self._adjacency = a
        return self._adjacency

    def faces_of_edges(self):
        """Faces on the left of ``2i`` and of ``2i + 1`` for each edge ``i``."""
        return self.face_of_half[0::2], self.face_of_half[1::2]

    def degree_histogram(self):
        deg, cnt = np.unique(self.face_degrees, return_counts=True)
        return {int(d): int(c) for d, c in zip(deg, cnt)}

    def metadata(self):
        return {"V": self.V, "E": self.E, "F": int(self.F),
                "face_degree_histogram": self.degree_histogram(),
                "distinguished_vertex": self.distinguished,
                "root_edge": list(self.root_edge)}

    def __repr__(self):
        return f"PointedMap(V={self.V}, E={self.E}, F={self.F})"


def looptree_to_map(lt, gl):
    """Bijection from a good-labelled looptree to a pointed bipartite map."""
    gl.check(lt)
    n = lt.n
    corner_vertex = lt.contour[:n]
    z = gl.labels[corner_vertex]
    shifted = gl.labels - z.min() + 1
    succ = successors(z)
    to_v0 = succ < 0
    # v0 sits on the boundary just after one corner of minimal label, where
    # no successor arc separates it from the other minimal corners
    k_star = int(np.flatnonzero(to_v0)[0])
    target_pos = np.where(to_v0, k_star + 0.5, succ).astype(float)
    edges = np.empty((n, 2), dtype=np.int64)
    edges[:, 0] = corner_vertex + 1
    edges[:, 1] = np.where(to_v0, 0, corner_vertex[np.maximum(succ, 0)] + 1)

    # half-edges at looptree vertices: (vertex, corner, angle inside the corner)
    k = np.arange(n)
    out_corner = k
    out_angle = np.mod(target_pos - k, n)
    in_edges = np.flatnonzero(~to_v0)
    in_corner = succ[in_edges]
    in_angle = np.mod(in_edges - in_corner, n).astype(float)
    half = np.concatenate((2 * k, 2 * in_edges + 1))
    corner = np.concatenate((out_corner, in_corner))
    angle = np.concatenate((out_angle, in_angle))
    vertex = corner_vertex[corner] + 1
    # around a looptree vertex: corners in contour order, and inside a
    # corner the arcs by decreasing angular offset
    order = np.lexsort((-angle, corner, vertex))
    sigma = np.empty(2 * n, dtype=np.int64)
    hs, vs = half[order], vertex[order]
    nxt = np.roll(hs, -1)
    start = np.ones(hs.size, dtype=bool)
    start[1:] = vs[1:] != vs[:-1]
    end = np.roll(start, -1)
    first_of_group = hs[np.flatnonzero(start)]
    nxt[end] = first_of_group[np.cumsum(start)[end] - 1]
    sigma[hs] = nxt
    # around v0: minimal corners in decreasing contour order, from k_star
    mins = np.flatnonzero(to_v0)
    ring = np.concatenate((mins[mins <= k_star][::-1], mins[mins > k_star][::-1]))
    h0 = 2 * ring + 1
    sigma[h0] = np.roll(h0, -1)

    labels = np.empty(lt.N + 1, dtype=np.int64)
    labels[0] = 0
    labels[1:] = shifted
    # the arc of corner 0 leaves the looptree root; orient it towards the
    # endpoint farther from v0, which is the root itself
    a, b = edges[0]
    root_edge = (b, a) if labels[a] > labels[b] else (a, b)
    pm = PointedMap(lt.N + 1, edges, sigma, labels, root_edge)
    pm.successor = succ
    pm.corner_labels = z
    return pm


def bfs_distances(m, source):
    """Graph distances from ``source`` to every vertex of the map."""
    return csgraph.shortest_path(m.adjacency, unweighted=True,
                                 indices=[int(source)])[0].astype(np.int64)


def map_distance_matrix(m, sample_vertices, budget=None, chunk=64):
    """Pairwise graph distances among sampled vertices, one BFS per source.

    ``budget`` bounds ``len(sample) * (V + E)``; when it would be exceeded
    the rows computed so far are attached to the raised error.
    """
    sample = np.asarray(sample_vertices, dtype=np.int64)
    s = sample.size
    cost_per_row = m.V + m.E
    rows_allowed = s if budget is None else int(budget // cost_per_row)
    out = np.zeros((s, s))
    done = 0
    while done < min(s, rows_allowed):
        idx = sample[done: min(done + chunk, s, rows_allowed)]
        d = csgraph.shortest_path(m.adjacency, unweighted=True, indices=idx)
        out[done: done + idx.size] = d[:, sample]
        done += idx.size
    if done < s:
        raise BudgetExceededError(
            f"distance matrix needs {s * cost_per_row} work units, budget is {budget}",
            partial=out[:done], completed_rows=done,
        )
    return out


def audit_bijection(lt, gl, m):
    """Check the structural properties of the bijection; every entry must be True."""
    lengths = np.sort(lt.cycle_length)
    report = {
        "edge_count": m.E == lt.n,
        "vertex_count": m.V == lt.N + 1,
        "face_degrees_twice_cycles": bool(
            m.F == lengths.size and np.array_equal(np.sort(m.face_degrees), 2 * lengths)
        ),
        "bipartite": bool(np.all(m.face_degrees % 2 == 0)),
        "euler": m.V - m.E + m.F == 2,
        "labels_are_distances": bool(np.array_equal(bfs_distances(m, 0), m.labels)),
        "successor_drop_one": bool(
            np.all(np.abs(m.labels[m.edges[:, 0]] - m.labels[m.edges[:, 1]]) == 1)
        ),
        "quadrangulation": bool(np.all(m.face_degrees == 4)),
    }
    return report


class RangeMin:
    """Sparse table for O(1) range-minimum queries on a fixed array."""

    def __init__(self, values):
        v = np.asarray(values)
        self.table = [v]
        j = 1
        while (1 << j) <= v.size:
            prev = self.table[-1]
            half = 1 << (j - 1)
            self.table.append(np.minimum(prev[:-half], prev[half:]))
            j += 1

    def query(self, lo, hi):
        """Minimum over ``values[lo..hi]`` inclusive (vectorized)."""
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        length = hi - lo + 1
        j = np.floor(np.log2(np.maximum(length, 1))).astype(np.int64)
        out = np.empty(np.broadcast(lo, hi).shape, dtype=self.table[0].dtype)
        for level in np.unique(j):
            sel = j == level
            t = self.table[level]
            out[sel] = np.minimum(t[lo[sel]], t[hi[sel] - (1 << level) + 1])
        return out


def d_circ_discrete(z, i, j, rmq=None):
    """``D(i, j) = z_i + z_j - 2 max(min_[i,j] z, min outside)`` on a cyclic sequence."""
    z = np.asarray(z)
    rmq = rmq or RangeMin(z)
    i = np.atleast_1d(np.asarray(i, dtype=np.int64))
    j = np.atleast_1d(np.asarray(j, dtype=np.int64))
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    inner = rmq.query(lo, hi)
    n = z.size
    left = np.where(lo > 0, rmq.query(np.zeros_like(lo), np.maximum(lo, 1) - 1), inner)
    right = np.where(hi < n - 1, rmq.query(np.minimum(hi + 1, n - 1), np.full_like(hi, n - 1)),
                     inner)
    outer = np.minimum(np.minimum(left, right), np.minimum(z[lo], z[hi]))
    return z[i] + z[j] - 2 * np.maximum(inner, outer)


def d_circ(Z, s, t):
    """The label pseudo-distance ``D(s, t)`` of a process on [0, 1].

    ``Z`` is a ``LabelProcess`` (piecewise linear) over [0, 1]; infima
    over intervals are attained at grid points or at ``s``, ``t``.
    """
    if s > t:
        s, t = t, s
    times, values = Z.times, Z.values
    zs, zt = float(Z(s)), float(Z(t))
    inside = values[(times >= s) & (times <= t)]
    outside = values[(times <= s) | (times >= t)]
    inf_in = min([zs, zt, *inside.tolist()])
    inf_out = min([zs, zt, *outside.tolist()])
    return zs + zt - 2.0 * max(inf_in, inf_out)
