import numpy as np
import pytest

from levymaps.errors import BudgetExceededError, ValidationError
from levymaps.labels import GoodLabelling, LabelProcess, label_process, sample_good_labelling
from levymaps.looptree import build_looptree
from levymaps.maps import (
    audit_bijection,
    bfs_distances,
    d_circ,
    d_circ_discrete,
    looptree_to_map,
    map_distance_matrix,
    successors,
)
from levymaps.paths import LukasiewiczPath, sample_excursion, simple_walk_law, stable_gw_law
from levymaps.rng import make_rng


def random_map(n, seed, law=None):
    rng = make_rng(seed)
    lt = build_looptree(sample_excursion(law or stable_gw_law(1.5, laziness=0.1), n, rng))
    gl = sample_good_labelling(lt, rng)
    return lt, gl, looptree_to_map(lt, gl)


def brute_successors(z):
    n = len(z)
    out = []
    for k in range(n):
        j = next((j % n for j in range(k + 1, k + n) if z[j % n] == z[k] - 1), -1)
        out.append(j)
    return out


def test_single_edge_map():
    lt = build_looptree(LukasiewiczPath([0, -1], "excursion"))
    gl = GoodLabelling([0])
    m = looptree_to_map(lt, gl)
    assert (m.V, m.E, m.F) == (2, 1, 1)
    assert m.face_degrees.tolist() == [2]
    assert bfs_distances(m, 0).tolist() == [0, 1]
    assert bfs_distances(m, 1)[1] == 0
    report = audit_bijection(lt, gl, m)
    assert all(v for k, v in report.items() if k != "quadrangulation")
    # a 2-gon is not a quadrangle
    assert not report["quadrangulation"]
    assert m.root_edge == (0, 1)


def test_audit_random_maps():
    for seed in range(30):
        lt, gl, m = random_map(int(make_rng(seed).integers(1, 400)), seed)
        report = audit_bijection(lt, gl, m)
        assert all(v for k, v in report.items() if k != "quadrangulation"), report
        assert set(report) >= {"edge_count", "face_degrees_twice_cycles",
                               "labels_are_distances", "vertex_count", "euler"}


def test_quadrangulation():
    lt, gl, m = random_map(1000, 50, simple_walk_law())
    assert audit_bijection(lt, gl, m)["quadrangulation"]
    assert set(m.face_degrees.tolist()) == {4}


def test_root_edge_points_away_from_v0():
    for seed in range(10):
        lt, gl, m = random_map(300, 60 + seed)
        a, b = m.root_edge
        assert b == lt.root + 1
        assert m.labels[b] > m.labels[a]


def test_successors_match_brute_force():
    rng = make_rng(70)
    for _ in range(50):
        lt, gl, m = random_map(int(rng.integers(1, 60)), int(rng.integers(1 << 30)))
        z = label_process(lt, gl).values[:-1].astype(int)
        assert successors(z).tolist() == brute_successors(z.tolist())
    with pytest.raises(ValidationError):
        successors(np.array([0, 2, 0]))


def test_successor_chain_reaches_v0():
    lt, gl, m = random_map(2000, 80)
    succ = m.successor
    z = m.corner_labels
    for k in make_rng(81).choice(lt.n, 50, replace=False):
        start, steps = k, 0
        while succ[k] >= 0:
            assert z[succ[k]] == z[k] - 1
            k = succ[k]
            steps += 1
        # the last corner is joined to v0, whose shifted label is 0
        assert m.labels[lt.contour[k] + 1] == 1
        assert steps == z[start] - z.min()


def test_map_distance_matrix():
    lt, gl, m = random_map(500, 90)
    assert map_distance_matrix(m, [3]).tolist() == [[0.0]]
    sample = make_rng(91).choice(m.V, 40, replace=False)
    d = map_distance_matrix(m, sample)
    assert np.array_equal(d, d.T) and not np.any(np.diag(d))
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :])
    # rows agree with single-source searches
    assert np.array_equal(d[5], bfs_distances(m, sample[5])[sample])
    with pytest.raises(BudgetExceededError) as err:
        map_distance_matrix(m, sample, budget=10 * (m.V + m.E), chunk=4)
    assert err.value.info["completed_rows"] == 10
    assert np.array_equal(err.value.partial, d[:10])


def test_d_circ_examples_and_domination():
    Z = LabelProcess(np.linspace(0, 1, 5), np.full(5, 3.0))
    assert d_circ(Z, 0.2, 0.9) == 0.0
    Z = LabelProcess(np.linspace(0, 1, 5), np.array([0.0, 2.0, 1.0, 3.0, 0.0]))
    assert d_circ(Z, 0.4, 0.4) == 0.0
    assert d_circ(Z, 0.25, 0.75) == pytest.approx(2 + 3 - 2 * 1)
    lt, gl, m = random_map(3000, 92)
    z = label_process(lt, gl).values[:-1]
    rng = make_rng(93)
    i = rng.integers(0, lt.n, 30)
    d = map_distance_matrix(m, lt.contour[i] + 1)
    bound = d_circ_discrete(z, i[:, None].repeat(30, 1).ravel(), np.tile(i, 30)).reshape(30, 30)
    assert np.all(d <= bound + 2)
