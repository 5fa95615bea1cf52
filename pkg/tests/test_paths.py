import itertools
from collections import Counter

import mpmath
import numpy as np
import pytest
from scipy import stats

from levymaps.errors import InfeasibleModelError, ValidationError
from levymaps.paths import (
    LukasiewiczPath,
    StepLaw,
    boltzmann_stable_law,
    explicit_stable_weights,
    k_n_details,
    k_n_for_theta,
    nu_from_weights,
    parity_fraction,
    sample_bridge,
    sample_bridge_biconditioned,
    sample_excursion,
    simple_walk_law,
    stable_gw_law,
    stable_rn,
    vervaat,
    vervaat_array,
)
from levymaps.rng import make_rng


def explicit_oracle(alpha, k):
    # independent high-precision evaluation of the explicit weight formula
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha)
    kappa = 1 / (4 * a + 2)
    c = -mpmath.sqrt(mpmath.pi) / (2 * mpmath.gamma(mpmath.mpf(1) / 2 - a))
    return float(c * kappa ** (k - 1) * mpmath.gamma(k - mpmath.mpf(1) / 2 - a)
                 / mpmath.gamma(k + mpmath.mpf(1) / 2))


def test_path_invariants():
    p = LukasiewiczPath([2, -1, -1, -1], "excursion")
    assert (p.n, p.num_vertices) == (3, 3)
    assert p.walk.tolist() == [0, 2, 1, 0, -1]
    with pytest.raises(ValidationError):
        LukasiewiczPath([1, -1])
    with pytest.raises(ValidationError):
        LukasiewiczPath([-2, 1])
    with pytest.raises(ValidationError, match="negative at time 1"):
        LukasiewiczPath([-1, 1, -1], "excursion")
    assert LukasiewiczPath.from_dict(p.to_dict()) == p


def test_step_law_validation_and_round_trip():
    with pytest.raises(ValidationError):
        StepLaw.from_pmf({-1: 0.5, 1: 0.4})
    with pytest.raises(ValidationError):
        StepLaw.from_pmf({0: 0.5, 1: 0.5})
    law = StepLaw.from_pmf({-1: 0.5, 0: 0.25, 2: 0.25})
    again = StepLaw.from_dict(law.to_dict())
    assert np.array_equal(again.probs, law.probs)
    assert simple_walk_law().mean == 0.0
    g = stable_gw_law(1.5)
    assert np.allclose(StepLaw.from_dict(g.to_dict()).probs, g.probs)


def test_explicit_weights():
    q = explicit_stable_weights(1.3, 8)
    assert q[0] == 0.0
    for k in range(2, 9):
        assert q[k - 1] == pytest.approx(explicit_oracle(1.3, k), rel=1e-12)
    # q_3 / q_2 = kappa * Gamma(1.2) / Gamma(0.2) * Gamma(2.5) / Gamma(3.5), kappa = 1/7.2
    assert q[2] / q[1] == pytest.approx((1 / 7.2) * 0.2 / 2.5, rel=1e-12)


def test_explicit_weights_errors():
    with pytest.raises(InfeasibleModelError, match="gamma pole"):
        explicit_stable_weights(1.5, 10)
    with pytest.raises(InfeasibleModelError, match="negative"):
        explicit_stable_weights(1.7, 10)
    with pytest.raises(ValidationError):
        explicit_stable_weights(2.0, 10)


def test_nu_from_weights():
    with pytest.raises(InfeasibleModelError, match="non-admissible"):
        nu_from_weights(np.zeros(5))
    law = boltzmann_stable_law(1.3)
    assert law.pmf(-1) == pytest.approx(4 / 7.2, rel=1e-3)
    # critical law, up to the mass lost by cutting the tail at k_max
    assert law.mean == pytest.approx(0.0, abs=1e-4)


def test_sample_bridge_examples():
    rng = make_rng(1)
    forced = StepLaw.from_pmf({-1: 1.0})
    assert sample_bridge(forced, 0, rng).increments.tolist() == [-1]
    with pytest.raises(InfeasibleModelError, match="parity-infeasible"):
        sample_bridge(simple_walk_law(), 3, rng)


def test_simple_bridge_uniform_over_arrangements():
    rng = make_rng(2)
    draws = 20_000
    counts = Counter(tuple(sample_bridge(simple_walk_law(), 4, rng).increments)
                     for _ in range(draws))
    expected = {p for p in itertools.product((-1, 1), repeat=5) if sum(p) == -1}
    assert len(expected) == 10
    assert set(counts) == expected
    obs = np.array([counts[p] for p in sorted(expected)])
    assert stats.chisquare(obs).pvalue > 1e-3


@pytest.mark.slow
def test_bridge_exchangeable():
    law = StepLaw.from_pmf({-1: 0.5, 0: 0.25, 1: 0.15, 2: 0.1})
    rng = make_rng(3)
    draws = 100_000
    counts = Counter(tuple(sample_bridge(law, 3, rng).increments) for _ in range(draws))
    # within each multiset of steps every arrangement has the same probability
    classes = {}
    for seq, c in counts.items():
        classes.setdefault(tuple(sorted(seq)), {})[seq] = c
    for key, members in classes.items():
        arrangements = set(itertools.permutations(key))
        total = sum(members.values())
        p = 1 / len(arrangements)
        se = np.sqrt(total * p * (1 - p))
        for seq in arrangements:
            assert abs(members.get(seq, 0) - total * p) <= 4 * se + 1


def test_biconditioned_examples():
    rng = make_rng(4)
    law = StepLaw.from_pmf({-1: 0.6, 0: 0.4})
    for _ in range(20):
        assert sorted(sample_bridge_biconditioned(law, 1, 1, rng).increments) == [-1, 0]
    law = StepLaw.from_pmf({-1: 0.4, 0: 0.3, 1: 0.2, 2: 0.1})
    for _ in range(50):
        x = sample_bridge_biconditioned(law, 4, 2, rng).increments
        assert np.count_nonzero(x == -1) == 2
        assert x[x >= 0].size == 3 and x[x >= 0].sum() == 1
    with pytest.raises(ValidationError):
        sample_bridge_biconditioned(law, 4, 9, rng)
    with pytest.raises(InfeasibleModelError, match="infeasible conditioning"):
        sample_bridge_biconditioned(simple_walk_law(), 4, 2, rng)


def test_biconditioned_count_exact():
    law = stable_gw_law(1.5)
    K = k_n_for_theta(law, 1.5, 0.0, 1000)
    rng = make_rng(5)
    for _ in range(100):
        p = sample_excursion(law, 1000, rng, K=K)
        assert p.walk[-1] == -1
        assert p.num_vertices == K


def test_k_n():
    law = stable_gw_law(1.5)
    p = law.pmf(-1)
    assert k_n_for_theta(law, 1.5, 0.0, 1000) == round(p * 1000)
    assert k_n_for_theta(law, 1.5, 1e12, 1000) == 1001
    assert k_n_for_theta(law, 1.5, -1e12, 1000) == 1
    assert k_n_details(law, 1.5, 1e12, 1000)["clamped"]
    mpmath.mp.dps = 30
    assert float(mpmath.gamma(-1.5)) == pytest.approx(2.3633, abs=1e-4)
    r_n = float((1.5 * mpmath.gamma(-1.5) * 10**6) ** (mpmath.mpf(2) / 3))
    assert stable_rn(1.5, 10**6) == pytest.approx(r_n, rel=1e-12)
    with pytest.raises(ValidationError):
        k_n_for_theta(StepLaw.from_pmf({-1: 1.0}), 1.5, 0.0, 10)


def test_vervaat_examples():
    out = vervaat(LukasiewiczPath([-1, 1, 0, -1]))
    assert out.increments.tolist() == [1, 0, -1, -1]
    assert out.kind == "excursion"
    exc = [2, 0, -1, -1, -1]
    assert vervaat(LukasiewiczPath(exc)).increments.tolist() == exc


@pytest.mark.slow
def test_vervaat_random_bridges():
    rng = make_rng(6)
    law = StepLaw.from_pmf({-1: 0.5, 0: 0.2, 1: 0.2, 3: 0.1})
    for _ in range(10_000):
        n = int(rng.integers(0, 30))
        x = vervaat_array(sample_bridge(law, n, rng).increments)
        w = np.cumsum(x)
        assert w[-1] == -1 and (n == 0 or w[:-1].min() >= 0)


def test_vervaat_exhaustive_small():
    for n in range(0, 9):
        seqs = np.array([p for p in itertools.product((-1, 0, 1), repeat=n + 1)
                         if sum(p) == -1])
        out = vervaat_array(seqs)
        w = np.cumsum(out, axis=1)
        assert np.all(w[:, -1] == -1)
        assert np.all(w[:, :-1] >= 0)


def test_parity_fraction():
    rng = make_rng(7)
    for _ in range(10):
        assert parity_fraction(sample_excursion(simple_walk_law(), 200, rng)) == 1.0
    assert parity_fraction(LukasiewiczPath([0, -1])) == 0.5


def test_sampling_is_reproducible():
    law = stable_gw_law(1.5)
    a = sample_excursion(law, 500, make_rng(8, 0, 0))
    b = sample_excursion(law, 500, make_rng(8, 0, 0))
    c = sample_excursion(law, 500, make_rng(8, 1, 0))
    assert a == b and a != c


@pytest.mark.parametrize("stall", [0, 32])
def test_conditioned_sum_sampler_exact(monkeypatch, stall):
    # stall=0 forces the exact head-sum fallback on every stage
    from levymaps import paths
    monkeypatch.setattr(paths, "STALL_ATTEMPTS", stall)
    p = np.array([0.3, 0.4, 0.2, 0.1])
    N, T = 5, 7
    seqs = [s for s in itertools.product(range(4), repeat=N) if sum(s) == T]
    w = np.array([np.prod(p[list(s)]) for s in seqs])
    sampler = paths._SumSampler(p, N, T)
    rng = make_rng(9)
    draws = 30_000
    counts = Counter(tuple(sampler.sample(rng)) for _ in range(draws))
    assert set(counts) <= set(seqs)
    obs = np.array([counts[s] for s in seqs])
    assert stats.chisquare(obs, w / w.sum() * draws).pvalue > 1e-3
