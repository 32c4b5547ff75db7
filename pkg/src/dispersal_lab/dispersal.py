"""Uniform-dispersion occupancy combinatorics and the offspring laws they induce.

A colony hit by a catastrophe leaves N survivors.  They are split among
boxes (neighbouring vertices) with every weak composition equally likely,
and each non-empty *habitable* box founds exactly one new colony.  The
number of new colonies Y is the offspring variable of an embedded
branching process whose law depends on the dispersal variant:

================  =========  ==============================================
variant           boxes      P(Y = y | N = n), n >= 1
================  =========  ==============================================
self-avoiding     d          C(d,y) C(n-1,y-1) / C(n+d-1,d-1)
move-forward-or-die  d + 1   C(d,y) C(n,y) / C(n+d,d)   (one lethal box)
full-tree (root)  d + 1      C(d+1,y) C(n-1,y-1) / C(n+d,d)
independent       d          C(d,y) T(n,y) / d^n        (T = surjections)
================  =========  ==============================================
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import DomainError
from .laws import SurvivorLaw
from .special import log_binom_array, surjection_table

__all__ = [
    "Variant",
    "Graph",
    "DispersalVariant",
    "OffspringLaw",
    "uniform_success_pmf",
    "conditional_pmf",
    "conditional_pmf_exact",
    "offspring_law",
    "offspring_pmf",
    "offspring_pgf",
    "offspring_mean",
    "offspring_factorial2",
    "sample_composition",
    "occupied_boxes",
]


class Variant(str, enum.Enum):
    SELF_AVOIDING = "self-avoiding"
    MOVE_FORWARD_OR_DIE = "move-forward-or-die"
    FULL_TREE = "full-tree"
    INDEPENDENT = "independent"


class Graph(str, enum.Enum):
    """FULL: every vertex has d+1 neighbours.  HALF: the origin has only d."""

    FULL = "full"
    HALF = "half"


@dataclass(frozen=True)
class DispersalVariant:
    kind: Variant
    d: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Variant(self.kind))
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def box_count(self) -> int:
        if self.kind in (Variant.SELF_AVOIDING, Variant.INDEPENDENT):
            return self.d
        return self.d + 1

    @property
    def habitable_boxes(self) -> int:
        """Boxes that can found a colony (upper bound on Y)."""
        if self.kind is Variant.MOVE_FORWARD_OR_DIE:
            return self.d
        return self.box_count


def uniform_success_pmf(r: int, d: int, y: int) -> float:
    """P(exactly y of d boxes non-empty) when r survivors form a uniform weak composition."""
    if r < 1 or d < 1:
        raise DomainError(f"need r >= 1 and d >= 1, got r={r}, d={d}")
    if not 0 <= y <= min(r, d):
        raise DomainError(f"y={y} outside 0..min(r, d)={min(r, d)}")
    if y == 0:
        return 0.0
    return comb(r - 1, y - 1) * comb(d, y) / comb(d + r - 1, r)


def conditional_pmf_exact(variant: DispersalVariant, n: int) -> list[Fraction]:
    """P(Y = y | N = n) for y = 0..habitable_boxes as exact rationals."""
    if n < 0:
        raise DomainError("n must be non-negative")
    m = variant.habitable_boxes
    out = [Fraction(0)] * (m + 1)
    if n == 0:
        out[0] = Fraction(1)
        return out
    d = variant.d
    kind = variant.kind
    for y in range(0, min(n, m) + 1):
        if kind is Variant.SELF_AVOIDING:
            val = Fraction(comb(d, y) * comb(n - 1, y - 1), comb(n + d - 1, d - 1)) if y else 0
        elif kind is Variant.FULL_TREE:
            val = Fraction(comb(d + 1, y) * comb(n - 1, y - 1), comb(n + d, d)) if y else 0
        elif kind is Variant.MOVE_FORWARD_OR_DIE:
            val = Fraction(comb(d, y) * comb(n, y), comb(n + d, d))
        else:
            val = Fraction(comb(d, y) * _surjections_row(n, y), d**n)
        out[y] = Fraction(val)
    return out


def _surjections_row(n: int, y: int) -> int:
    return sum((-1) ** i * comb(y, i) * (y - i) ** n for i in range(y + 1))


def conditional_pmf(variant: DispersalVariant, n_max: int) -> np.ndarray:
    """Matrix P(Y = y | N = n) for n = 0..n_max (rows), y = 0..habitable_boxes (cols)."""
    m = variant.habitable_boxes
    d = variant.d
    n = np.arange(n_max + 1, dtype=float)[:, None]
    y = np.arange(m + 1, dtype=float)[None, :]
    kind = variant.kind
    if kind is Variant.INDEPENDENT:
        return _independent_conditional(d, n_max)
    if kind is Variant.MOVE_FORWARD_OR_DIE:
        logp = log_binom_array(d, y) + log_binom_array(n, y) - log_binom_array(n + d, d)
    else:
        boxes = d if kind is Variant.SELF_AVOIDING else d + 1
        logp = (
            log_binom_array(boxes, y)
            + log_binom_array(n - 1, y - 1)
            - log_binom_array(n + boxes - 1, boxes - 1)
        )
    out = np.exp(logp)
    out[0, :] = 0.0
    out[0, 0] = 1.0
    return out


def _independent_conditional(d: int, n_max: int) -> np.ndarray:
    # exact big-integer surjection counts; int / int division rounds correctly
    k_max = min(n_max, d)
    table = surjection_table(n_max, k_max)
    out = np.zeros((n_max + 1, d + 1))
    for n in range(n_max + 1):
        denom = d**n
        row = table[n]
        for y in range(min(n, k_max) + 1):
            if row[y]:
                out[n, y] = comb(d, y) * row[y] / denom
    return out


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Law of Y for one (variant, survivor law) pair."""

    variant: DispersalVariant
    pmf: np.ndarray
    mean: float
    factorial2: float

    def pgf(self, s):
        s_arr = np.asarray(s, dtype=float)
        out = np.polynomial.polynomial.polyval(s_arr, self.pmf)
        return float(out) if np.ndim(s) == 0 else out

    def pgf_derivative(self, s):
        coeffs = np.polynomial.polynomial.polyder(self.pmf)
        out = np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), coeffs)
        return float(out) if np.ndim(s) == 0 else out

    def tail_probs(self) -> np.ndarray:
        """P(Y > k) for k = 0..len(pmf)-2; (1 - G(s))/(1 - s) has these as coefficients."""
        # summed from the top: 1 - cumsum loses the small tail masses
        return np.cumsum(self.pmf[::-1])[::-1][1:]

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant.kind.value,
                "d": self.variant.d,
                "pmf": self.pmf.tolist(),
                "mean": self.mean,
                "factorial2": self.factorial2,
            }
        )


@lru_cache(maxsize=256)
def offspring_law(variant: DispersalVariant, law: SurvivorLaw) -> OffspringLaw:
    n_cut = law.cutoff()
    weights = law.pmf_array(n_cut)
    pmf = weights @ conditional_pmf(variant, n_cut)
    pmf.setflags(write=False)
    return OffspringLaw(variant, pmf, offspring_mean(variant, law), offspring_factorial2(variant, law))


def offspring_pmf(variant: DispersalVariant, law: SurvivorLaw, y: int) -> float:
    m = variant.habitable_boxes
    if not 0 <= y <= m:
        raise DomainError(f"y={y} outside 0..{m} for {variant.kind.value}")
    return float(offspring_law(variant, law).pmf[y])


def offspring_pgf(variant: DispersalVariant, law: SurvivorLaw, s):
    return offspring_law(variant, law).pgf(s)


def offspring_mean(variant: DispersalVariant, law: SurvivorLaw) -> float:
    d = variant.d
    kind = variant.kind
    if kind is Variant.SELF_AVOIDING:
        # one box: a colony is founded whenever N > 0
        return 1.0 - law.pmf(0) if d == 1 else d * law.ratio_moment(d, -1)
    if kind is Variant.MOVE_FORWARD_OR_DIE:
        return d * law.ratio_moment(d, 0)
    if kind is Variant.FULL_TREE:
        return (d + 1) * law.ratio_moment(d, 0)
    # P(a given box is hit | N = n) = 1 - ((d-1)/d)^n
    return d * (1.0 - law.pgf((d - 1) / d))


def offspring_factorial2(variant: DispersalVariant, law: SurvivorLaw) -> float:
    """E[Y(Y-1)] = (#pairs of habitable boxes) * P(both boxes of a pair non-empty)."""
    d = variant.d
    kind = variant.kind
    if kind is Variant.SELF_AVOIDING:
        return 0.0 if d < 2 else d * (d - 1) * law.factorial_ratio_moment(d, "U")
    if kind is Variant.MOVE_FORWARD_OR_DIE:
        return 0.0 if d < 2 else d * (d - 1) * law.factorial_ratio_moment(d, "L")
    if kind is Variant.FULL_TREE:
        return (d + 1) * d * law.factorial_ratio_moment(d + 1, "U")
    if d < 2:
        return 0.0
    both = 1.0 - 2.0 * law.pgf((d - 1) / d) + law.pgf((d - 2) / d)
    return d * (d - 1) * both


# -- sampling ------------------------------------------------------------------


def _floyd_positions(m: int, r: int, rng) -> list[int]:
    """r distinct positions drawn uniformly from range(m), sorted (Floyd's algorithm)."""
    chosen: set[int] = set()
    for j in range(m - r, m):
        t = int(rng.random() * (j + 1))
        chosen.add(j if t in chosen else t)
    return sorted(chosen)


def sample_composition(n: int, k: int, rng) -> list[int]:
    """Uniform weak composition of n into k boxes (stars and bars).

    Chooses whichever of the k-1 bars or the n stars is smaller among the
    n + k - 1 slots, so the cost is O(min(n, k) log min(n, k)).
    """
    if n < 0 or k < 1:
        raise DomainError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    counts = [0] * k
    if n == 0:
        return counts
    if k == 1:
        counts[0] = n
        return counts
    m = n + k - 1
    if k - 1 <= n:
        bars = _floyd_positions(m, k - 1, rng)
        prev = -1
        for i, b in enumerate(bars):
            counts[i] = b - prev - 1
            prev = b
        counts[k - 1] = m - 1 - prev
    else:
        stars = _floyd_positions(m, n, rng)
        for rank, q in enumerate(stars):
            counts[q - rank] += 1
    return counts


def occupied_boxes(n: int, k: int, rng) -> list[int]:
    """Indices of the non-empty boxes of a uniform weak composition of n into k boxes."""
    if n == 0:
        return []
    if k == 1:
        return [0]
    m = n + k - 1
    if k - 1 <= n:
        bars = _floyd_positions(m, k - 1, rng)
        out = []
        prev = -1
        for i, b in enumerate(bars):
            if b - prev > 1:
                out.append(i)
            prev = b
        if prev < m - 1:
            out.append(k - 1)
        return out
    stars = _floyd_positions(m, n, rng)
    out = []
    last = -1
    for rank, q in enumerate(stars):
        box = q - rank
        if box != last:
            out.append(box)
            last = box
    return out
