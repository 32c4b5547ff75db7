"""Laws of N, the number of colony members left after a catastrophe (before dispersal).

Every law here is a finite head ``P(N=n), n = 0..n_max`` followed by an
optional geometric tail ``P(N=n) = tail_scale * tail_ratio**n`` for
``n > n_max``.  The Poisson-growth / binomial-catastrophe law is exactly of
this shape with ``n_max = 0``, so series-based moments work on both kinds
and the closed forms act as cross-checks.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import DomainError
from .special import lerch_phi1

__all__ = [
    "SurvivorLaw",
    "PoissonBinomialLaw",
    "TabulatedLaw",
    "point_mass",
    "pmf_n",
    "pgf_n",
    "mean_n",
    "ratio_moment",
    "ratio_moment_lerch",
    "factorial_ratio_moment",
    "factorial_ratio_moment_lerch",
    "sample_n_closed",
    "sample_n_mechanistic",
    "law_to_json",
    "law_from_json",
]

TAIL_EPS = 1e-14
MASS_TOL = 1e-12


class SurvivorLaw:
    """Shared machinery for head-plus-geometric-tail laws.

    Subclasses provide ``head`` (tuple of P(N=n) for n = 0..n_max),
    ``tail_ratio`` and ``_tail_first`` (= P(N = n_max + 1)).
    """

    head: tuple[float, ...]
    tail_ratio: float
    _tail_first: float

    # -- structure -------------------------------------------------------
    @property
    def n_max(self) -> int:
        return len(self.head) - 1

    def tail_mass(self, m: int) -> float:
        """P(N > m) for m >= n_max."""
        r = self.tail_ratio
        if self._tail_first == 0.0:
            return 0.0
        if m < self.n_max:
            raise ValueError("tail_mass is only defined beyond the tabulated head")
        return self._tail_first * r ** (m - self.n_max) / (1.0 - r)

    def cutoff(self, eps: float = TAIL_EPS) -> int:
        """Smallest m >= n_max with P(N > m) < eps."""
        m = self.n_max
        if self._tail_first == 0.0 or self.tail_ratio == 0.0:
            return m + (1 if self._tail_first > 0.0 else 0)
        r = self.tail_ratio
        first_tail = self.tail_mass(m)
        if first_tail < eps:
            return m
        # tail_mass(m + k) = first_tail * r**k
        k = math.ceil(math.log(eps / first_tail) / math.log(r))
        m += max(k, 0)
        while self.tail_mass(m) >= eps:
            m += 1
        return m

    # -- distribution ----------------------------------------------------
    def pmf(self, n: int) -> float:
        if n < 0:
            raise DomainError(f"pmf needs n >= 0, got {n}")
        if n <= self.n_max:
            return self.head[n]
        return self._tail_first * self.tail_ratio ** (n - self.n_max - 1)

    def pmf_array(self, upto: int | None = None) -> np.ndarray:
        """P(N=n) for n = 0..upto (default: the certified cutoff)."""
        if upto is None:
            upto = self.cutoff()
        out = np.zeros(upto + 1)
        h = min(upto, self.n_max)
        out[: h + 1] = self.head[: h + 1]
        if upto > self.n_max and self._tail_first > 0.0:
            k = np.arange(upto - self.n_max, dtype=float)
            out[self.n_max + 1 :] = self._tail_first * self.tail_ratio**k
        return out

    def pgf(self, s):
        """E[s^N]; accepts scalars or arrays in [0, 1]."""
        s_arr = np.asarray(s, dtype=float)
        head = np.polynomial.polynomial.polyval(s_arr, np.asarray(self.head))
        if self._tail_first > 0.0:
            tail = self._tail_first * s_arr ** (self.n_max + 1) / (1.0 - self.tail_ratio * s_arr)
            head = head + tail
        return float(head) if np.ndim(s) == 0 else head

    def mean(self) -> float:
        r = self.tail_ratio
        m = self.n_max
        head = math.fsum(n * q for n, q in enumerate(self.head))
        if self._tail_first == 0.0:
            return head
        if 1.0 - r < 1e-12:
            raise DomainError("mean diverges: geometric tail ratio is (numerically) 1")
        # sum_{n>m} n * first * r^(n-m-1) = first * ((m+1) - m r) / (1-r)^2
        return head + self._tail_first * ((m + 1) - m * r) / (1.0 - r) ** 2

    def expect(self, f) -> float:
        """E[f(N)] for |f| <= 1, truncated at the certified cutoff (error < 1e-14)."""
        n = np.arange(self.cutoff() + 1, dtype=float)
        return float(np.sum(f(n) * self.pmf_array(len(n) - 1)))

    # -- moments used by the offspring laws -------------------------------
    def ratio_moment(self, d: int, shift: int = 0) -> float:
        """E[N / (N + d + shift)]."""
        a = _ratio_denominator(d, shift)
        return self.expect(lambda n: n / (n + a))

    def factorial_ratio_moment(self, d: int, form: str = "U") -> float:
        """E[N(N-1)/((N+d-1)(N+d-2))] (form "U") or E[N(N-1)/((N+d-1)(N+d))] (form "L")."""
        a, b = _factorial_offsets(d, form)
        # terms with n < 2 vanish; masking avoids 0/0 when a or b is 0
        return self.expect(lambda n: np.where(n >= 2, n * (n - 1) / np.maximum((n + a) * (n + b), 1.0), 0.0))

    # -- sampling --------------------------------------------------------
    def _sampling_tables(self):
        cum = self.__dict__.get("_cum")
        if cum is None:
            cum = list(np.cumsum(self.head))
            object.__setattr__(self, "_cum", cum)
        return cum

    def sample(self, rng, size=None):
        """Exact inverse-transform draw(s); ``rng`` needs a ``random()`` method."""
        if size is not None:
            return self._sample_array(rng, size)
        cum = self._sampling_tables()
        u = rng.random()
        if u < cum[-1] or self._tail_first == 0.0:
            return min(bisect.bisect_right(cum, u), self.n_max)
        w = 1.0 - rng.random()
        r = self.tail_ratio
        if r == 0.0:
            return self.n_max + 1
        return self.n_max + 1 + int(math.log(w) / math.log(r))

    def _sample_array(self, rng, size) -> np.ndarray:
        cum = np.asarray(self._sampling_tables())
        u = rng.random(size)
        out = np.minimum(np.searchsorted(cum, u, side="right"), self.n_max)
        if self._tail_first > 0.0:
            in_tail = u >= cum[-1]
            w = 1.0 - rng.random(size)
            r = self.tail_ratio
            extra = np.floor(np.log(w) / math.log(r)).astype(np.int64) if r > 0.0 else 0
            out = np.where(in_tail, self.n_max + 1 + extra, out)
        return out.astype(np.int64)


def _ratio_denominator(d: int, shift: int) -> int:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if shift not in (-1, 0):
        raise DomainError(f"shift must be -1 or 0, got {shift}")
    if d + shift < 1:
        raise DomainError("d + shift must be >= 1")
    return d + shift


def _factorial_offsets(d: int, form: str) -> tuple[int, int]:
    if form == "U":
        if d < 2:
            raise DomainError("U-form factorial moment needs d >= 2")
        return d - 1, d - 2
    if form == "L":
        if d < 1:
            raise DomainError("L-form factorial moment needs d >= 1")
        return d - 1, d
    raise DomainError(f"form must be 'U' or 'L', got {form!r}")


@dataclass(frozen=True)
class PoissonBinomialLaw(SurvivorLaw):
    """Pure-birth growth at rate ``lam`` from one founder, Exp(1) catastrophe,
    binomial thinning with survival probability ``p``."""

    lam: float
    p: float

    def __post_init__(self):
        if not (self.lam > 0.0) or not math.isfinite(self.lam):
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if not (0.0 <= self.p <= 1.0):
            raise DomainError(f"p must lie in [0, 1], got {self.p}")

    @property
    def head(self) -> tuple[float, ...]:
        return ((1.0 - self.p) / (self.lam * self.p + 1.0),)

    @property
    def tail_ratio(self) -> float:
        lp = self.lam * self.p
        return lp / (lp + 1.0)

    @property
    def _tail_first(self) -> float:
        # P(N=1) = p (lam+1) / (lam p + 1)^2
        return self.p * (self.lam + 1.0) / (self.lam * self.p + 1.0) ** 2

    @property
    def tail_scale(self) -> float:
        return (self.lam + 1.0) / (self.lam * (self.lam * self.p + 1.0))

    def pmf(self, n: int) -> float:
        if n < 0:
            raise DomainError(f"pmf needs n >= 0, got {n}")
        lp = self.lam * self.p
        if n == 0:
            return (1.0 - self.p) / (lp + 1.0)
        return (lp / (lp + 1.0)) ** n * (self.lam + 1.0) / (self.lam * (lp + 1.0))

    def pgf(self, s):
        s_arr = np.asarray(s, dtype=float)
        q = 1.0 - s_arr
        out = (1.0 - self.p * q) / (1.0 + self.lam * self.p * q)
        return float(out) if np.ndim(s) == 0 else out

    def mean(self) -> float:
        return (self.lam + 1.0) * self.p

    def as_tabulated(self) -> "TabulatedLaw":
        return TabulatedLaw(self.head, tail_ratio=self.tail_ratio, tail_scale=self.tail_scale)


@dataclass(frozen=True)
class TabulatedLaw(SurvivorLaw):
    """User-supplied law: explicit head ``probs`` plus optional geometric tail
    ``P(N=n) = tail_scale * tail_ratio**n`` for ``n >= len(probs)``."""

    probs: tuple[float, ...]
    tail_ratio: float = 0.0
    tail_scale: float = 0.0
    _cum: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = tuple(float(x) for x in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise DomainError("probs must be non-empty")
        if any(x < 0.0 or not math.isfinite(x) for x in probs):
            raise DomainError("probs must be finite and non-negative")
        if not (0.0 <= self.tail_ratio < 1.0):
            raise DomainError(f"tail_ratio must lie in [0, 1), got {self.tail_ratio}")
        if self.tail_scale < 0.0:
            raise DomainError("tail_scale must be non-negative")
        total = math.fsum(probs)
        if self._tail_first > 0.0:
            total += self._tail_first / (1.0 - self.tail_ratio)
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"total mass must be 1 within {MASS_TOL}, got {total!r}")

    @property
    def head(self) -> tuple[float, ...]:
        return self.probs

    @property
    def _tail_first(self) -> float:
        return self.tail_scale * self.tail_ratio ** len(self.probs)


def point_mass(n: int) -> TabulatedLaw:
    """Law of N identically equal to ``n``."""
    probs = [0.0] * (n + 1)
    probs[n] = 1.0
    return TabulatedLaw(tuple(probs))


# -- functional surface --------------------------------------------------------


def pmf_n(law: SurvivorLaw, n: int) -> float:
    return law.pmf(n)


def pgf_n(law: SurvivorLaw, s):
    return law.pgf(s)


def mean_n(law: SurvivorLaw) -> float:
    return law.mean()


def ratio_moment(law: SurvivorLaw, d: int, shift: int = 0) -> float:
    return law.ratio_moment(d, shift)


def factorial_ratio_moment(law: SurvivorLaw, d: int, form: str = "U") -> float:
    return law.factorial_ratio_moment(d, form)


def _lerch_inverse_moment(law: PoissonBinomialLaw, a: int) -> float:
    """sum_{n>=1} P(N=n) / (n + a) = P(N=1) * Phi(z, 1, a + 1)."""
    return law._tail_first * lerch_phi1(law.tail_ratio, a + 1).value


def ratio_moment_lerch(law: PoissonBinomialLaw, d: int, shift: int = 0) -> float:
    """E[N/(N+a)] = (lam+1) p / (lam p+1)^2 * [lam p + 1 - a Phi(z, 1, a+1)], a = d + shift."""
    a = _ratio_denominator(d, shift)
    lp1 = law.lam * law.p + 1.0
    z = law.tail_ratio
    return law.p * (law.lam + 1.0) / lp1**2 * (lp1 - a * lerch_phi1(z, a + 1).value)


def factorial_ratio_moment_lerch(law: PoissonBinomialLaw, d: int, form: str = "U") -> float:
    """Partial fractions n(n-1)/((n+a)(n+b)) = 1 + ka/(n+a) + kb/(n+b), then Lerch sums."""
    a, b = _factorial_offsets(d, form)
    ka = a * (a + 1) / (b - a)
    kb = b * (b + 1) / (a - b)
    mass_pos = 1.0 - law.pmf(0)
    total = mass_pos
    if ka != 0.0:
        total += ka * _lerch_inverse_moment(law, a)
    if kb != 0.0:
        total += kb * _lerch_inverse_moment(law, b)
    return total


def sample_n_closed(law: SurvivorLaw, rng, size=None):
    """Exact draw(s) of N from its law."""
    return law.sample(rng, size)


def sample_n_mechanistic(lam: float, p: float, rng: np.random.Generator, size=None):
    """Colony size at an Exp(1) catastrophe (1 founder + Poisson(lam * T) births),
    then binomial thinning with probability p."""
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    lifetime = rng.exponential(1.0, size)
    size_at_catastrophe = 1 + rng.poisson(lam * lifetime)
    out = rng.binomial(size_at_catastrophe, p)
    return int(out) if size is None else out


# -- serialisation -------------------------------------------------------------

LawLike = Union[dict, str]


def law_to_json(law: SurvivorLaw) -> dict:
    if isinstance(law, PoissonBinomialLaw):
        return {"kind": "poisson_binomial", "lambda": law.lam, "p": law.p}
    if isinstance(law, TabulatedLaw):
        return {
            "kind": "tabulated",
            "probs": list(law.probs),
            "tail_ratio": law.tail_ratio,
            "tail_scale": law.tail_scale,
        }
    raise TypeError(f"cannot serialise {type(law).__name__}")


def law_from_json(obj: LawLike) -> SurvivorLaw:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "poisson_binomial":
        return PoissonBinomialLaw(float(obj["lambda"]), float(obj["p"]))
    if kind == "tabulated":
        return TabulatedLaw(
            tuple(obj["probs"]),
            tail_ratio=float(obj.get("tail_ratio", 0.0) or 0.0),
            tail_scale=float(obj.get("tail_scale", 0.0) or 0.0),
        )
    raise DomainError(f"unknown law kind {kind!r}")
