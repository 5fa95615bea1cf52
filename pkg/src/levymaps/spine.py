"""Spinal Poisson marks and the four subordinators read along a spine.

Marks ``(t_i, x_i, u_i)`` form a Poisson measure with intensity
``dt x pi(dx) du``.  For stable ``pi`` the intensity is infinite near
``x = 0``, so jumps are truncated at ``x_min`` and the missing small-jump
contribution is added back analytically when exponents are compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import BudgetExceededError, ValidationError
from .levy import (
    phi,
    psi,
    psi_prime,
    size_biased_tail_mass,
    stable_density_constant,
)

__all__ = [
    "SpineMarks",
    "sample_spine_marks",
    "spine_subordinators",
    "sample_spine_values",
    "spine_exponents",
    "truncation_correction",
    "empirical_exponent",
    "PROCESSES",
]

PROCESSES = ("Xp", "XR", "Xtilde", "sigma")

# weight g(u) of a mark of size x in each process
_WEIGHTS = {
    "Xp": lambda u: np.ones_like(u),
    "XR": lambda u: u,
    "Xtilde": lambda u: np.minimum(u, 1.0 - u),
    "sigma": lambda u: u * (1.0 - u),
}

DEFAULT_MAX_MARKS = 10**7


@dataclass(frozen=True, eq=False)
class SpineMarks:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    horizon: float
    beta: float = 0.0

    def __post_init__(self):
        t, x, u = (np.asarray(a, dtype=float) for a in (self.t, self.x, self.u))
        if not (t.shape == x.shape == u.shape):
            raise ValidationError("mark arrays have different lengths")
        if self.horizon < 0 or self.beta < 0:
            raise ValidationError("horizon and beta must be nonnegative")
        if t.size and (t.min() < 0 or t.max() > self.horizon or np.any(np.diff(t) < 0)):
            raise ValidationError("mark times must be sorted in [0, horizon]")
        if np.any(x <= 0) or np.any((u < 0) | (u > 1)):
            raise ValidationError("sizes must be positive and u in [0, 1]")
        for name, a in zip("txu", (t, x, u)):
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.t.size

    def to_csv(self):
        rows = ["t,x,u"] + [f"{a!r},{b!r},{c!r}" for a, b, c in zip(self.t, self.x, self.u)]
        return "\n".join(rows) + "\n"


def _check_stable(triplet):
    if triplet.jumps.family != "stable":
        raise ValidationError("spine marks need a stable jump family")
    return triplet.jumps.alpha


def _pareto(rng, alpha, x_min, size):
    # size-biased law x pi(dx) on [x_min, inf) has density prop. to x**(-alpha)
    return x_min * rng.random(size) ** (-1.0 / (alpha - 1.0))


def sample_spine_marks(triplet, T, x_min, rng, max_marks=DEFAULT_MAX_MARKS):
    """Poisson marks on ``[0, T]`` with sizes ``>= x_min``."""
    alpha = _check_stable(triplet)
    if T < 0 or not x_min > 0:
        raise ValidationError("need T >= 0 and x_min > 0")
    mean = T * size_biased_tail_mass(triplet, x_min)
    if mean > max_marks:
        raise BudgetExceededError(
            f"x_min={x_min} gives {mean:.3g} expected marks, budget {max_marks}",
            expected_marks=mean,
        )
    k = int(rng.poisson(mean))
    t = np.sort(rng.random(k) * T)
    x = _pareto(rng, alpha, x_min, k)
    u = rng.random(k)
    return SpineMarks(t, x, u, float(T), float(triplet.gaussian))


def spine_subordinators(sm, t):
    """Values of ``X'``, ``X^R``, ``X~`` and ``sigma`` at local time ``t``."""
    if t < 0 or t > sm.horizon:
        raise ValidationError(f"t={t} outside [0, {sm.horizon}]")
    k = np.searchsorted(sm.t, t, side="right")
    x, u = sm.x[:k], sm.u[:k]
    drift = sm.beta * t
    return {name: float(drift + np.sum(g(u) * x)) for name, g in _WEIGHTS.items()}


def sample_spine_values(triplet, T, x_min, rng, replicas, max_marks=DEFAULT_MAX_MARKS):
    """The four processes at time ``T`` for many independent mark sets.

    Returns a dict of arrays of length ``replicas``.
    """
    alpha = _check_stable(triplet)
    mean = T * size_biased_tail_mass(triplet, x_min)
    if mean * replicas > max_marks:
        raise BudgetExceededError(
            f"{replicas} mark sets of mean size {mean:.3g} exceed budget {max_marks}",
            expected_marks=mean,
        )
    counts = rng.poisson(mean, size=replicas)
    owner = np.repeat(np.arange(replicas), counts)
    x = _pareto(rng, alpha, x_min, owner.size)
    u = rng.random(owner.size)
    drift = triplet.gaussian * T
    return {
        name: drift + np.bincount(owner, weights=g(u) * x, minlength=replicas)
        for name, g in _WEIGHTS.items()
    }


def spine_exponents(triplet, lam):
    """Laplace exponents per unit local time of the four processes."""
    beta = triplet.gaussian
    return {
        "Xp": psi_prime(triplet, lam) - beta * lam,
        "XR": psi(triplet, lam) / lam,
        "Xtilde": psi(triplet, lam / 2.0) / (lam / 2.0) + beta * lam / 2.0,
        "sigma": phi(triplet, lam) + beta * lam,
    }


def truncation_correction(triplet, lam, x_min):
    """Contribution of marks below ``x_min`` to each exponent.

    ``int_0^{x_min} x pi(dx) int_0^1 (1 - exp(-lam g(u) x)) du`` by
    quadrature; the inner integral is closed-form for ``g(u) = u`` and
    ``g(u) = min(u, 1 - u)``.
    """
    alpha = _check_stable(triplet)
    c = stable_density_constant(alpha, triplet.jumps.scale)

    def outer(f):
        val, _ = integrate.quad(lambda x: c * x ** (-alpha) * f(x), 0.0, x_min,
                                epsabs=0.0, epsrel=1e-10, limit=200)
        return val

    def mean_u(x, a):
        # int_0^1 (1 - exp(-a u x)) du
        z = a * x
        return 1.0 + np.expm1(-z) / z if z > 1e-8 else z / 2.0

    def sigma_inner(x):
        v, _ = integrate.quad(lambda u: -np.expm1(-lam * u * (1.0 - u) * x), 0.0, 1.0,
                              epsabs=0.0, epsrel=1e-10)
        return v

    return {
        "Xp": outer(lambda x: -np.expm1(-lam * x)),
        "XR": outer(lambda x: mean_u(x, lam)),
        "Xtilde": outer(lambda x: mean_u(x, lam / 2.0)),
        "sigma": outer(sigma_inner),
    }


def empirical_exponent(values, lam, t):
    """``-log mean(exp(-lam X)) / t``."""
    values = np.asarray(values, dtype=float)
    return float(-np.log(np.mean(np.exp(-lam * values))) / t)

