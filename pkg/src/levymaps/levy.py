"""Laplace exponents of spectrally positive Levy processes.

A process is described by a :class:`LevyTriplet` (drift ``d``, Gaussian
coefficient ``beta`` and a jump family).  The Laplace exponent is

    psi(lam) = -d*lam + beta*lam**2 + int (exp(-lam*r) - 1 + lam*r) pi(dr)

and everything else in this module (Blumenthal-Getoor exponents, the spine
exponents, the inverse of psi) is derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import ExponentError, ValidationError

__all__ = [
    "JumpFamily",
    "LevyTriplet",
    "ExponentPair",
    "DerivedExponents",
    "psi",
    "jump_part",
    "jump_part_derivative",
    "bg_exponents",
    "derived_exponents",
    "phi",
    "phi_inverse_of_psi",
    "stable_density_constant",
    "levy_density",
    "size_biased_tail_mass",
]

_FAMILIES = ("none", "stable", "tabulated")


@dataclass(frozen=True)
class JumpFamily:
    """Jump measure descriptor.

    ``family`` is one of ``"none"``, ``"stable"`` (``alpha`` in (1, 2) and
    ``scale`` > 0, contributing ``scale * lam**alpha`` to psi) or
    ``"tabulated"`` (finitely many atoms ``(size, rate)``).
    """

    family: str = "none"
    alpha: float | None = None
    scale: float = 1.0
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown jump family {self.family!r}")
        if self.family == "stable":
            if self.alpha is None or not 1.0 < self.alpha < 2.0:
                raise ValidationError(f"stable index must lie in (1, 2), got {self.alpha}")
            if not self.scale > 0:
                raise ValidationError(f"stable scale must be positive, got {self.scale}")
        if self.family == "tabulated":
            if not self.atoms:
                raise ValidationError("tabulated jump family needs at least one atom")
            atoms = tuple((float(s), float(r)) for s, r in self.atoms)
            if any(s <= 0 or r <= 0 for s, r in atoms):
                raise ValidationError("tabulated atom sizes and rates must be positive")
            object.__setattr__(self, "atoms", atoms)

    @classmethod
    def stable(cls, alpha, scale=1.0):
        return cls("stable", alpha=float(alpha), scale=float(scale))

    @classmethod
    def tabulated(cls, atoms):
        return cls("tabulated", atoms=tuple(tuple(a) for a in atoms))

    def to_dict(self):
        out = {"family": self.family}
        if self.family == "stable":
            out.update(alpha=self.alpha, scale=self.scale)
        elif self.family == "tabulated":
            out["atoms"] = [list(a) for a in self.atoms]
        return out

    @classmethod
    def from_dict(cls, data):
        family = data.get("family", "none")
        if family == "stable":
            return cls.stable(data["alpha"], data.get("scale", 1.0))
        if family == "tabulated":
            return cls.tabulated(data["atoms"])
        return cls(family)


@dataclass(frozen=True)
class LevyTriplet:
    """Characteristics ``(d, beta, pi)`` of a spectrally positive Levy process."""

    drift: float = 0.0
    gaussian: float = 0.0
    jumps: JumpFamily = field(default_factory=JumpFamily)

    def __post_init__(self):
        if not self.gaussian >= 0:
            raise ValidationError(f"gaussian coefficient must be >= 0, got {self.gaussian}")

    @classmethod
    def stable(cls, alpha, scale=1.0, drift=0.0, gaussian=0.0):
        return cls(float(drift), float(gaussian), JumpFamily.stable(alpha, scale))

    @property
    def infinite_variation(self):
        return self.gaussian > 0 or self.jumps.family == "stable"

    def require_infinite_variation(self):
        if not self.infinite_variation:
            raise ValidationError(
                "triplet has paths of finite variation (no Gaussian part, no stable jumps)"
            )

    def to_dict(self):
        return {"drift": self.drift, "gaussian": self.gaussian, "jumps": self.jumps.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(
            float(data.get("drift", 0.0)),
            float(data.get("gaussian", 0.0)),
            JumpFamily.from_dict(data.get("jumps", {"family": "none"})),
        )


class ExponentPair(NamedTuple):
    gamma_lower: float
    eta_upper: float
    method: str


class DerivedExponents(NamedTuple):
    psi_prime: float
    psi_tilde: float
    phi: float
    phi_inverse_of_psi: float


def stable_density_constant(alpha, scale=1.0):
    """Constant ``c`` in ``pi(dr) = c r**(-alpha-1) dr`` giving ``scale * lam**alpha``."""
    return scale * alpha * (alpha - 1.0) / special.gamma(2.0 - alpha)


def levy_density(triplet, x):
    """Density of the (stable) Levy measure at ``x`` > 0."""
    jumps = triplet.jumps
    if jumps.family != "stable":
        raise ValidationError("Levy density is only available for the stable family")
    x = np.asarray(x, dtype=float)
    return stable_density_constant(jumps.alpha, jumps.scale) * x ** (-jumps.alpha - 1.0)


def size_biased_tail_mass(triplet, x_min):
    """``int_{x_min}^inf x pi(dx)`` for the stable family."""
    jumps = triplet.jumps
    if jumps.family != "stable":
        raise ValidationError("size-biased tail mass needs a stable jump family")
    a = jumps.alpha
    return stable_density_constant(a, jumps.scale) * x_min ** (1.0 - a) / (a - 1.0)


def jump_part(triplet, lam):
    """``int (exp(-lam r) - 1 + lam r) pi(dr)``."""
    jumps = triplet.jumps
    if jumps.family == "none":
        return 0.0
    if jumps.family == "stable":
        return jumps.scale * lam**jumps.alpha
    total = 0.0
    for size, rate in jumps.atoms:
        # expm1 keeps precision when lam*size is small
        total += rate * (math.expm1(-lam * size) + lam * size)
    return total


def jump_part_derivative(triplet, lam):
    """``int r (1 - exp(-lam r)) pi(dr)``, the derivative of :func:`jump_part`."""
    jumps = triplet.jumps
    if jumps.family == "none":
        return 0.0
    if jumps.family == "stable":
        return jumps.scale * jumps.alpha * lam ** (jumps.alpha - 1.0)
    return sum(-rate * size * math.expm1(-lam * size) for size, rate in jumps.atoms)


def psi(triplet, lam):
    """Laplace exponent ``psi(lam) = log E[exp(-lam X_1)]``.

    Raises
    ------
    ValidationError
        If ``lam`` is not positive.
    ExponentError
        If the value overflows.
    """
    if not lam > 0:
        raise ValidationError(f"psi needs lam > 0, got {lam}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            value = -triplet.drift * lam + triplet.gaussian * lam * lam + jump_part(triplet, lam)
        except (OverflowError, FloatingPointError) as exc:
            raise ExponentError(f"exponent overflow at lam={lam}") from exc
    if not math.isfinite(value):
        raise ExponentError(f"exponent overflow at lam={lam}")
    return float(value)


def psi_prime(triplet, lam):
    return -triplet.drift + 2.0 * triplet.gaussian * lam + jump_part_derivative(triplet, lam)


def phi(triplet, lam):
    """``int x pi(dx) int_0^1 (1 - exp(-lam u(1-u) x)) du`` by adaptive quadrature.

    The inner integral over ``x`` equals the derivative of the jump part at
    ``lam u (1-u)``, which is available in closed form for every family, so
    only the ``u`` integral is done numerically.
    """
    if triplet.jumps.family == "none":
        return 0.0

    def integrand(u):
        return jump_part_derivative(triplet, lam * u * (1.0 - u))

    # symmetric in u <-> 1-u
    value, _ = integrate.quad(integrand, 0.0, 0.5, epsabs=0.0, epsrel=1e-10, limit=200)
    return 2.0 * value


def _psi_zero(triplet):
    """Largest root of psi on [0, inf); psi is convex with psi(0) = 0."""
    if psi_prime(triplet, 0.0) >= 0:
        return 0.0
    hi = 1.0
    while psi(triplet, hi) <= 0:
        hi *= 2.0
        if hi > 1e300:
            raise ExponentError("could not bracket the positive root of psi")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if psi(triplet, mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def phi_inverse_of_psi(triplet, value, rtol=1e-10):
    """Right inverse of psi by monotone bisection."""
    lo = _psi_zero(triplet)
    if value <= 0:
        return lo
    hi = max(1.0, 2.0 * lo)
    while psi(triplet, hi) < value:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ExponentError(f"bisection failed to bracket: [{lo}, {hi}]")
    if lo > 0 and psi(triplet, lo) > value:
        raise ExponentError(f"bisection failed to bracket: [{lo}, {hi}]")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if psi(triplet, mid) < value:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * 1e-3 * hi:
            break
    return 0.5 * (lo + hi)


def derived_exponents(triplet, lam):
    """Exponents entering the spinal decomposition, evaluated at ``lam``."""
    p = psi(triplet, lam)
    return DerivedExponents(
        psi_prime=float(psi_prime(triplet, lam)),
        psi_tilde=p / lam,
        phi=phi(triplet, lam),
        phi_inverse_of_psi=phi_inverse_of_psi(triplet, lam),
    )


def local_slopes(triplet, lo=1e2, hi=1e8, points=61):
    """Local log-log slopes of psi on a log-spaced grid."""
    lams = np.logspace(math.log10(lo), math.log10(hi), points)
    values = np.array([psi(triplet, lam) for lam in lams])
    if np.any(values <= 0) or np.any(np.diff(values) <= 0):
        raise ExponentError("invalid exponent: psi is not positive and increasing on the grid")
    return lams, np.diff(np.log(values)) / np.diff(np.log(lams))


def bg_exponents(triplet, method="analytic"):
    """Lower and upper Blumenthal-Getoor exponents of psi at infinity.

    ``method="analytic"`` uses the closed forms available for the supported
    families; ``method="numeric"`` returns the min and max local slope of
    ``log psi`` over ``lam`` in [1e2, 1e8].  The numeric values are
    estimators of a liminf/limsup, not the limits themselves.
    """
    triplet.require_infinite_variation()
    if method == "numeric":
        _, slopes = local_slopes(triplet)
        lower = float(np.clip(slopes.min(), 1.0, 2.0))
        upper = float(np.clip(slopes.max(), lower, 2.0))
        return ExponentPair(lower, upper, "numeric-fit")
    if method != "analytic":
        raise ValidationError(f"unknown method {method!r}")
    if triplet.gaussian > 0:
        return ExponentPair(2.0, 2.0, "analytic")
    alpha = triplet.jumps.alpha
    return ExponentPair(alpha, alpha, "analytic")
