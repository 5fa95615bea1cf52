import numpy as np
import pytest
from scipy import stats

from levymaps.errors import BudgetExceededError, ValidationError
from levymaps.levy import LevyTriplet, psi_prime, size_biased_tail_mass, stable_density_constant
from levymaps.rng import make_rng
from levymaps.spine import (
    PROCESSES,
    SpineMarks,
    empirical_exponent,
    sample_spine_marks,
    sample_spine_values,
    spine_exponents,
    spine_subordinators,
    truncation_correction,
)

STABLE = LevyTriplet.stable(1.5)


def test_no_marks():
    sm = sample_spine_marks(STABLE, 0.0, 0.01, make_rng(1))
    assert len(sm) == 0
    assert spine_subordinators(sm, 0.0) == {name: 0.0 for name in PROCESSES}


def test_mark_count_mean():
    T, x_min = 2.0, 0.05
    # closed form of T * int_{x_min}^inf x pi(dx) for the stable density c x^(-1-alpha)
    c = stable_density_constant(1.5)
    mean = T * c * x_min ** (1 - 1.5) / (1.5 - 1)
    assert T * size_biased_tail_mass(STABLE, x_min) == pytest.approx(mean, rel=1e-10)
    rng = make_rng(2)
    counts = np.array([len(sample_spine_marks(STABLE, T, x_min, rng)) for _ in range(10_000)])
    assert abs(counts.mean() - mean) <= 3 * np.sqrt(mean / counts.size)


def test_marks_are_valid_and_uniform():
    sm = sample_spine_marks(STABLE, 50.0, 1e-3, make_rng(3))
    assert len(sm) > 1000
    assert np.all(np.diff(sm.t) >= 0) and sm.t.max() <= 50.0
    assert sm.x.min() >= 1e-3
    assert stats.kstest(sm.u, "uniform").pvalue > 0.01
    assert sm.to_csv().splitlines()[0] == "t,x,u"


def test_pointwise_orderings():
    for beta in (0.0, 0.7):
        tr = LevyTriplet.stable(1.5, gaussian=beta)
        sm = sample_spine_marks(tr, 5.0, 0.01, make_rng(4))
        prev = None
        for t in np.linspace(0, 5.0, 26):
            v = spine_subordinators(sm, t)
            assert v["XR"] <= v["Xp"] + 1e-12
            assert v["Xtilde"] - beta * t <= v["XR"] - beta * t + 1e-12
            assert v["Xtilde"] - beta * t <= 2 * (v["sigma"] - beta * t) + 1e-12
            if prev is not None:
                assert all(v[k] >= prev[k] for k in PROCESSES)
            prev = v


def test_spine_validation():
    with pytest.raises(ValidationError):
        sample_spine_marks(LevyTriplet(gaussian=1.0), 1.0, 0.1, make_rng(5))
    with pytest.raises(ValidationError):
        sample_spine_marks(STABLE, 1.0, 0.0, make_rng(5))
    with pytest.raises(ValidationError):
        SpineMarks([0.5, 0.1], [1, 1], [0.2, 0.3], 1.0)
    sm = sample_spine_marks(STABLE, 1.0, 0.1, make_rng(5))
    with pytest.raises(ValidationError):
        spine_subordinators(sm, 2.0)


def test_budget_error_reports_expected_marks():
    with pytest.raises(BudgetExceededError) as err:
        sample_spine_marks(STABLE, 1.0, 1e-6, make_rng(6), max_marks=100)
    assert err.value.info["expected_marks"] > 100


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_xp_exponent(lam):
    x_min = 1e-3
    vals = sample_spine_values(STABLE, 1.0, x_min, make_rng(7, int(lam * 10)), 100_000)
    emp = empirical_exponent(vals["Xp"], lam, 1.0)
    emp += truncation_correction(STABLE, lam, x_min)["Xp"]
    assert emp == pytest.approx(psi_prime(STABLE, lam), rel=0.05)
    assert spine_exponents(STABLE, lam)["Xp"] == psi_prime(STABLE, lam)


def test_truncation_correction_vanishes_with_x_min():
    small = truncation_correction(STABLE, 1.0, 1e-8)
    large = truncation_correction(STABLE, 1.0, 1e-2)
    for k in PROCESSES:
        assert 0 <= small[k] < 1e-3 and small[k] < large[k]
