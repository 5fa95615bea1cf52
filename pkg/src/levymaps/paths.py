"""Lukasiewicz paths: step laws, conditioned sampling and the cycle lemma.

A path is stored through its increments ``x_0, ..., x_n`` (all >= -1,
summing to -1).  Its partial sums are ``W_0 = 0, ..., W_{n+1} = -1``; an
excursion additionally stays nonnegative up to time ``n``.

Conditioned sampling (a bridge of ``n+1`` steps summing to -1, or with a
prescribed number of -1 steps) reduces to drawing i.i.d. nonnegative
variables conditioned on their sum.  That is done exactly, for every size,
by a divide and conquer rejection scheme on top of convolution powers of
the step law, after an exponential tilt that makes the target sum typical.
Tilting does not change the conditional law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special

from .errors import BudgetExceededError, InfeasibleModelError, ValidationError

__all__ = [
    "LukasiewiczPath",
    "StepLaw",
    "explicit_stable_weights",
    "nu_from_weights",
    "simple_walk_law",
    "stable_gw_law",
    "boltzmann_stable_law",
    "sample_bridge",
    "sample_excursion",
    "sample_bridge_biconditioned",
    "k_n_for_theta",
    "k_n_details",
    "stable_rn",
    "vervaat",
    "vervaat_array",
    "parity_count",
    "parity_fraction",
]

DEFAULT_KMAX = 1 << 20


@dataclass(frozen=True, eq=False)
class LukasiewiczPath:
    """Integer path with increments >= -1 ending at -1."""

    increments: np.ndarray
    kind: str = "bridge"

    def __post_init__(self):
        x = np.array(self.increments, dtype=np.int64).ravel()
        x.setflags(write=False)
        object.__setattr__(self, "increments", x)
        if self.kind not in ("bridge", "excursion"):
            raise ValidationError(f"unknown path kind {self.kind!r}")
        if x.size == 0:
            raise ValidationError("path needs at least one increment")
        if x.min() < -1:
            bad = int(np.argmax(x < -1))
            raise ValidationError(f"increment {x[bad]} < -1 at index {bad}")
        if x.sum() != -1:
            raise ValidationError(f"increments sum to {int(x.sum())}, expected -1")
        if self.kind == "excursion":
            w = np.cumsum(x[:-1])
            if w.size and w.min() < 0:
                bad = int(np.argmax(w < 0)) + 1
                raise ValidationError(f"excursion goes negative at time {bad}")

    @property
    def n(self):
        """Number of edges of the coded looptree."""
        return self.increments.size - 1

    @property
    def num_vertices(self):
        return int(np.count_nonzero(self.increments == -1))

    @property
    def walk(self):
        """Partial sums ``W_0 .. W_{n+1}``."""
        return np.concatenate(([0], np.cumsum(self.increments)))

    def __eq__(self, other):
        if not isinstance(other, LukasiewiczPath):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.increments, other.increments)

    def __hash__(self):
        return hash((self.kind, self.increments.tobytes()))

    def __repr__(self):
        head = ", ".join(map(str, self.increments[:8]))
        more = ", ..." if self.n >= 8 else ""
        return f"LukasiewiczPath(n={self.n}, kind={self.kind}, [{head}{more}])"

    def to_dict(self):
        return {"kind": self.kind, "increments": self.increments.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["increments"], dtype=np.int64), data.get("kind", "bridge"))


@dataclass(frozen=True, eq=False)
class StepLaw:
    """Probability law on ``{-1, 0, 1, ..., k_max}``.

    ``probs[i]`` is the probability of the step ``i - 1``.  ``spec`` is an
    optional recipe (family name and parameters) used for serialization of
    large laws.
    """

    probs: np.ndarray
    tail_index: float | None = None
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.size < 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("step law probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"step law sums to {p.sum():.15g}, not 1")
        if not p[0] > 0:
            raise ValidationError("step law needs pmf(-1) > 0")

    @classmethod
    def from_pmf(cls, pmf, tail_index=None, normalize=False):
        """Build from a mapping ``{k: prob}`` or an array indexed from -1."""
        if isinstance(pmf, dict):
            kmax = max(int(k) for k in pmf)
            probs = np.zeros(kmax + 2)
            for k, v in pmf.items():
                if int(k) < -1:
                    raise ValidationError(f"step {k} < -1")
                probs[int(k) + 1] += float(v)
        else:
            probs = np.asarray(pmf, dtype=float)
        if normalize:
            probs = probs / probs.sum()
        return cls(probs, tail_index)

    @property
    def k_max(self):
        return self.probs.size - 2

    def pmf(self, k):
        i = int(k) + 1
        return float(self.probs[i]) if 0 <= i < self.probs.size else 0.0

    @property
    def mean(self):
        return float(np.dot(np.arange(-1, self.k_max + 1), self.probs))

    def as_dict(self):
        return {k - 1: float(v) for k, v in enumerate(self.probs) if v > 0}

    def to_dict(self):
        if self.spec:
            return dict(self.spec)
        return {"family": "pmf", "pmf": {str(k): v for k, v in self.as_dict().items()},
                "tail_index": self.tail_index}

    @classmethod
    def from_dict(cls, data):
        family = data.get("family", "pmf")
        if family == "simple":
            return simple_walk_law()
        if family == "stable-gw":
            return stable_gw_law(data["alpha"], data.get("k_max", DEFAULT_KMAX),
                                 data.get("laziness", 0.0))
        if family == "boltzmann":
            return boltzmann_stable_law(data["alpha"], data.get("k_max", DEFAULT_KMAX))
        if family == "pmf":
            pmf = {int(k): float(v) for k, v in data["pmf"].items()}
            return cls.from_pmf(pmf, data.get("tail_index"))
        raise ValidationError(f"unknown step law family {family!r}")


def _fold_tail(probs):
    """Renormalize a truncated pmf by putting the missing mass on its last atom."""
    probs = np.asarray(probs, dtype=float).copy()
    deficit = 1.0 - probs.sum()
    if deficit < -1e-9:
        raise ValidationError("truncated step law has total mass above 1")
    probs[-1] += max(deficit, 0.0)
    return probs / probs.sum()


def simple_walk_law():
    """Steps -1 and +1 with probability 1/2 each (all cycles of length 2)."""
    return StepLaw(np.array([0.5, 0.0, 0.5]), None, {"family": "simple"})


def stable_gw_law(alpha, k_max=DEFAULT_KMAX, laziness=0.0):
    """Critical offspring law with generating function ``s + (1-s)**alpha / alpha``.

    Shifted by -1 it is a centred step law with ``nu(-1) = 1/alpha``,
    ``nu(0) = 0`` and ``nu(k) ~ k**(-1-alpha) / (alpha Gamma(-alpha))``; it
    exists for every ``alpha`` in (1, 2), including 3/2.  ``laziness`` mixes
    in a point mass at 0 (still centred, same tail index), which makes
    small vertex counts reachable under biconditioning.
    """
    if not 1.0 < alpha < 2.0:
        raise ValidationError(f"alpha must lie in (1, 2), got {alpha}")
    if not 0.0 <= laziness < 1.0:
        raise ValidationError(f"laziness must lie in [0, 1), got {laziness}")
    k = np.arange(1, k_max + 1, dtype=float)
    log_nu = special.gammaln(k + 1 - alpha) - special.gammaln(k + 2)
    nu = np.exp(log_nu) / (alpha * special.gamma(-alpha))
    probs = _fold_tail(np.concatenate(([1.0 / alpha, 0.0], nu)))
    probs = (1.0 - laziness) * probs
    probs[1] += laziness
    spec = {"family": "stable-gw", "alpha": float(alpha), "k_max": int(k_max)}
    if laziness:
        spec["laziness"] = float(laziness)
    return StepLaw(probs / probs.sum(), float(alpha), spec)


def _log_explicit_weights(alpha, k_max):
    """Sign and log-modulus of the explicit weights ``q_2..q_{k_max}``."""
    kappa = 1.0 / (4.0 * alpha + 2.0)
    k = np.arange(2, k_max + 1, dtype=float)
    # q_k = -sqrt(pi)/2 * kappa**(k-1) * Gamma(k - 1/2 - alpha) / (Gamma(1/2 - alpha) Gamma(k + 1/2))
    lg_num, s_num = special.gammaln(k - 0.5 - alpha), np.sign(special.gamma(k - 0.5 - alpha))
    s_den = np.sign(special.gamma(0.5 - alpha))
    log_mod = (0.5 * math.log(math.pi) - math.log(2.0) + (k - 1) * math.log(kappa)
               + lg_num - special.gammaln(0.5 - alpha) - special.gammaln(k + 0.5))
    # gammaln returns log|Gamma|
    return -s_num * s_den, log_mod


def explicit_stable_weights(alpha, k_max):
    """Face weights ``q_1..q_{k_max}`` of the explicit alpha-stable family.

    ``q_k = c kappa**(k-1) Gamma(k - 1/2 - alpha) / Gamma(k + 1/2)`` for
    ``k >= 2`` and ``q_1 = 0``, with ``kappa = 1/(4 alpha + 2)`` and
    ``c = -sqrt(pi) / (2 Gamma(1/2 - alpha))``.

    At ``alpha = 3/2`` the constant ``c`` vanishes against a pole and the
    sequence degenerates, so that value is refused.  For ``alpha > 3/2`` the
    formula gives negative weights from ``k = 3`` on, which are refused too.
    """
    if not 1.0 < alpha < 2.0:
        raise ValidationError(f"alpha must lie in (1, 2), got {alpha}")
    if abs(alpha - 1.5) < 1e-12:
        raise InfeasibleModelError("gamma pole at alpha=3/2")
    if k_max < 1:
        raise ValidationError("k_max must be positive")
    q = np.zeros(k_max)
    if k_max >= 2:
        sign, log_mod = _log_explicit_weights(alpha, k_max)
        if np.any(sign < 0):
            k_bad = int(np.argmax(sign < 0)) + 2
            raise InfeasibleModelError(
                f"explicit weights are negative at k={k_bad} for alpha={alpha} > 3/2"
            )
        q[1:] = np.exp(log_mod)
    return q


def _log_binom_2k1(k):
    # log binom(2k+1, k+1)
    return special.gammaln(2 * k + 2) - special.gammaln(k + 2) - special.gammaln(k + 1)


def nu_from_weights(q, tol=1e-12):
    """Step law ``nu_q`` of the Boltzmann map with face weights ``q``.

    ``nu(k) = Z**k binom(2k+1, k+1) q_{k+1}`` for ``k >= 0`` and
    ``nu(-1) = 1/Z``, where ``Z > 1`` is the smallest root of
    ``F(Z) = 1/Z + sum_k Z**k binom(2k+1, k+1) q_{k+1} = 1``.  ``F`` is
    convex, so the root is searched left of its minimum.  A weight sequence
    whose tail is cut at ``len(q)`` gives a slightly smaller ``F``; for
    critical weights the minimum sits at 1 up to that truncation and is
    accepted within ``1e-6``.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValidationError("weights must be nonnegative")
    with np.errstate(divide="ignore"):
        return _nu_from_log_weights(np.log(q), tol)


def _nu_from_log_weights(log_q, tol=1e-12):
    # same as nu_from_weights, with weights given by their logarithm so that
    # geometrically small weights do not underflow
    log_q = np.asarray(log_q, dtype=float)
    k = np.arange(log_q.size, dtype=float)
    log_terms = _log_binom_2k1(k) + log_q
    active = np.isfinite(log_terms)
    if not np.any(active):
        raise InfeasibleModelError("non-admissible weights: all weights vanish")
    lt, kk = log_terms[active], k[active]

    def F(logz):
        # capped so that values past the radius of convergence stay finite
        log_series = special.logsumexp(lt + kk * logz)
        return math.exp(-logz) + math.exp(min(log_series, 690.0))

    # F is convex in log Z; the minimum lies at or inside the radius of
    # convergence, estimated from the decay of the last terms
    if kk.size >= 4:
        mid = kk.size // 2
        radius = max(-(lt[-1] - lt[mid]) / (kk[-1] - kk[mid]), 0.0)
    else:
        radius = 0.0
    hi = max(radius * 1.01, 0.0) + 1e-3
    while F(hi * 2.0) < F(hi) and hi < 50:
        hi *= 2.0
    res = optimize.minimize_scalar(F, bounds=(0.0, 2.0 * hi), method="bounded",
                                   options={"xatol": 1e-14})
    log_zstar, fmin = float(res.x), float(res.fun)
    if fmin > 1.0 + 1e-6:
        raise InfeasibleModelError(
            f"non-admissible weights: min F = {fmin:.12g} > 1, no Z_q solves the normalization"
        )
    if fmin >= 1.0:
        logz = log_zstar
    else:
        logz = optimize.brentq(lambda s: F(s) - 1.0, 0.0, log_zstar, xtol=tol, rtol=1e-15)
    z = math.exp(logz)
    probs = np.empty(log_q.size + 1)
    probs[0] = 1.0 / z
    probs[1:] = 0.0
    probs[1:][active] = np.exp(lt + kk * logz)
    probs /= probs.sum()
    return StepLaw(probs)


def boltzmann_stable_law(alpha, k_max=DEFAULT_KMAX):
    """``nu_q`` for the explicit alpha-stable weights.

    The resulting steps have ``nu(-1) = 4 kappa`` and a tail
    ``nu(k) ~ C k**(-3/2 - alpha)`` (``binom(2k+1, k+1)`` contributes an
    extra ``k**(-1/2)``), so ``tail_index`` is recorded as ``alpha + 1/2``.
    """
    explicit_stable_weights(alpha, 2)  # argument checks
    sign, log_mod = _log_explicit_weights(alpha, k_max + 1)
    if np.any(sign < 0):
        explicit_stable_weights(alpha, k_max + 1)
    law = _nu_from_log_weights(np.concatenate(([-np.inf], log_mod)))
    return StepLaw(law.probs, float(alpha) + 0.5,
                   {"family": "boltzmann", "alpha": float(alpha), "k_max": int(k_max)})


# conditioned sums ---------------------------------------------------------


def _convolve(a, b, size):
    if a.size * b.size <= 4_000_000:
        out = np.convolve(a, b)[:size]
    else:
        out = signal.fftconvolve(a, b)[:size]
        out[out < 0] = 0.0
    return out


def _tilt(logp, target_mean):
    """Exponential tilt of ``exp(logp)`` on 0..K with the given mean."""
    k = np.arange(logp.size, dtype=float)

    def mean(lam):
        w = special.softmax(logp - lam * k)
        return float(np.dot(w, k)) - target_mean

    lo, hi = -1.0, 1.0
    while mean(lo) < 0:
        lo *= 2.0
        if lo < -1e4:
            break
    while mean(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            break
    if mean(lo) < 0 or mean(hi) > 0:
        lam = 0.0
    else:
        lam = optimize.brentq(mean, lo, hi, xtol=1e-12)
    return special.softmax(logp - lam * k)


STALL_ATTEMPTS = 32


class _SumSampler:
    """Exact sampler of N i.i.d. draws from ``p`` on {0..} conditioned on sum T."""

    def __init__(self, p, N, T, budget=None):
        self.N, self.T = int(N), int(T)
        p = np.asarray(p, dtype=float)
        support = np.flatnonzero(p[: self.T + 1] > 0) if self.T >= 0 else np.array([], int)
        self.feasible = False
        self.constant = None
        if self.N == 0:
            self.feasible = self.T == 0
            self.constant = 0
            return
        if support.size == 0:
            return
        s0 = int(support[0])
        g = int(np.gcd.reduce(support - s0)) if support.size > 1 else 0
        rest = self.T - self.N * s0
        if rest < 0:
            return
        if g == 0:
            self.feasible = rest == 0
            self.constant = s0
            return
        if rest % g:
            return
        self.s0, self.g, self.Tr = s0, g, rest // g
        if self.Tr == 0:
            self.feasible, self.constant = True, s0
            return
        pr = np.zeros(self.Tr + 1)
        src = p[s0::g][: self.Tr + 1]
        pr[: src.size] = src
        with np.errstate(divide="ignore"):
            logp = np.log(pr)
        pr = _tilt(logp, self.Tr / self.N)
        size = self.Tr + 1
        self.p = pr
        self.cdf = np.cumsum(pr)
        # powers[j] = law of the sum of 2**j draws, truncated at Tr
        self.powers = [pr]
        while (1 << len(self.powers)) <= self.N // 2:
            q = self.powers[-1]
            self.powers.append(_convolve(q, q, size))
        total = None
        bits = self.N
        j = 0
        while bits:
            if bits & 1:
                total = self.powers[j] if total is None else _convolve(total, self.powers[j], size)
            bits >>= 1
            j += 1
            if j >= len(self.powers) and bits:
                self.powers.append(_convolve(self.powers[-1], self.powers[-1], size))
        self.target_prob = float(total[self.Tr]) if total.size > self.Tr else 0.0
        self.feasible = self.target_prob > 1e-300 and (
            self.target_prob > 1e-13 * float(total.max()) or size * size <= 4_000_000
        )
        self.budget = budget if budget is not None else 200 * self.N + 100_000

    def _iid(self, rng, size):
        u = rng.random(size) * self.cdf[-1]
        return np.minimum(np.searchsorted(self.cdf, u, side="right"), self.p.size - 1)

    def _power(self, j):
        size = self.Tr + 1
        while len(self.powers) <= j:
            self.powers.append(_convolve(self.powers[-1], self.powers[-1], size))
        return self.powers[j]

    def _head_sum(self, head, tail, T, rng):
        """Exact draw of the sum of ``head`` steps given the stage total ``T``."""
        law = None
        j = 0
        while head:
            if head & 1:
                q = self._power(j)[: T + 1]
                law = q if law is None else _convolve(law, q, T + 1)
            head >>= 1
            j += 1
        law = np.pad(law, (0, T + 1 - law.size))
        w = law * tail[T::-1]
        cdf = np.cumsum(w)
        return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))

    def sample(self, rng):
        if self.constant is not None:
            return np.full(self.N, self.constant, dtype=np.int64)
        self._drawn = 0
        z = self._draw(self.N, self.Tr, rng)
        return self.s0 + self.g * z

    def _draw(self, N, T, rng):
        # Split N = head + m with m a power of two.  The head steps are drawn
        # i.i.d. and accepted with probability p^{*m}(T - s) / max p^{*m}.
        # When a stage keeps rejecting (one huge step is needed, which the
        # i.i.d. head rarely produces) the head sum is drawn exactly from
        # p^{*head}(s) p^{*m}(T - s) and the head is sampled given its sum.
        out = []
        attempts = accepted = 0
        while N > 1:
            m = 1 << (int(math.log2(N // 2)))
            head = N - m
            tail_pmf = self._power(int(math.log2(m)))
            top = float(tail_pmf.max())
            stage = 0
            while True:
                if stage >= STALL_ATTEMPTS:
                    s = self._head_sum(head, tail_pmf, T, rng)
                    draw = self._draw(head, s, rng)
                    break
                draw = self._iid(rng, head)
                self._drawn += head
                attempts += 1
                stage += 1
                s = int(draw.sum())
                if s <= T and rng.random() * top < tail_pmf[T - s]:
                    accepted += 1
                    break
                if self._drawn > self.budget:
                    rate = accepted / attempts if attempts else 0.0
                    raise BudgetExceededError(
                        f"rejection budget exceeded after {self._drawn} draws "
                        f"(acceptance rate {rate:.3g} per stage attempt)",
                        acceptance_rate=rate,
                    )
            out.append(draw)
            N, T = m, T - s
        out.append(np.array([T]))
        return np.concatenate(out).astype(np.int64)


def sample_bridge(law, n, rng, budget=None):
    """``n + 1`` i.i.d. steps of ``law`` conditioned on summing to -1."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    sampler = _SumSampler(law.probs, n + 1, n, budget)
    if not sampler.feasible:
        raise InfeasibleModelError(
            f"parity-infeasible: {n + 1} steps of this law cannot sum to -1"
        )
    return LukasiewiczPath(sampler.sample(rng) - 1, "bridge")


def sample_bridge_biconditioned(law, n, K, rng, budget=None):
    """Bridge with ``n + 1`` steps of which exactly ``K`` equal -1.

    The -1 steps sit at a uniform ``K``-subset of positions; the other
    ``n + 1 - K`` steps are i.i.d. from ``law`` restricted to ``k >= 0``
    and conditioned to sum to ``K - 1``.  By exchangeability this is the
    law of the i.i.d. bridge conditioned on its number of -1 steps.
    """
    if not 1 <= K <= n + 1:
        raise ValidationError(f"K must lie in [1, n+1] = [1, {n + 1}], got {K}")
    nonneg = law.probs[1:]
    sampler = _SumSampler(nonneg, n + 1 - K, K - 1, budget)
    if nonneg.sum() <= 0 or not sampler.feasible:
        raise InfeasibleModelError(
            f"infeasible conditioning: {n + 1 - K} nonnegative steps cannot sum to {K - 1}"
        )
    steps = sampler.sample(rng) if n + 1 > K else np.zeros(0, dtype=np.int64)
    x = np.empty(n + 1, dtype=np.int64)
    neg = np.zeros(n + 1, dtype=bool)
    neg[rng.choice(n + 1, size=K, replace=False)] = True
    x[neg] = -1
    x[~neg] = steps
    return LukasiewiczPath(x, "bridge")


def sample_excursion(law, n, rng, K=None, budget=None):
    """Vervaat transform of a (bi)conditioned bridge."""
    if K is None:
        return vervaat(sample_bridge(law, n, rng, budget))
    return vervaat(sample_bridge_biconditioned(law, n, K, rng, budget))


def stable_rn(alpha, n):
    """``r_n = (alpha Gamma(-alpha) n)**(1/alpha)``."""
    return (alpha * special.gamma(-alpha) * n) ** (1.0 / alpha)


def k_n_details(law, alpha, theta, n):
    """``K_n`` together with the quantities it was computed from."""
    p = law.pmf(-1)
    if not 0.0 < p < 1.0:
        raise ValidationError(f"pmf(-1) must lie in (0, 1), got {p}")
    r_n = stable_rn(alpha, n)
    raw = p * n + theta * r_n * (1.0 - p)
    k = int(np.clip(round(raw), 1, n + 1))
    return {"K": k, "raw": raw, "r_n": r_n, "clamped": k != round(raw), "nu_minus_one": p}


def k_n_for_theta(law, alpha, theta, n):
    """Number of -1 steps ``round(nu(-1) n + theta r_n (1 - nu(-1)))`` clamped to [1, n+1]."""
    return k_n_details(law, alpha, theta, n)["K"]


def vervaat_array(x):
    """Cyclic shift of each row of ``x`` at the first minimum of its partial sums."""
    x = np.asarray(x)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    w = np.cumsum(x2, axis=1)
    shift = np.argmin(w, axis=1) + 1  # argmin returns the first minimum
    m = x2.shape[1]
    idx = (np.arange(m)[None, :] + shift[:, None]) % m
    out = np.take_along_axis(x2, idx, axis=1)
    return out[0] if single else out


def vervaat(path):
    """Turn a bridge into an excursion (cycle lemma)."""
    return LukasiewiczPath(vervaat_array(path.increments), "excursion")


def parity_count(path):
    """Number of odd increments ``#{i <= n+1 : x_i odd}``."""
    return int(np.count_nonzero(path.increments % 2))


def parity_fraction(path):
    """Odd increments per step; equal to 1 for the simple walk."""
    return parity_count(path) / path.increments.size
