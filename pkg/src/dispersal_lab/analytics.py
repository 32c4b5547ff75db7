"""Closed-form and numerical quantities for the catastrophe / uniform-dispersal models.

The full model on the homogeneous tree (every vertex has d+1 neighbours) is
sandwiched between two auxiliary branching processes:

* move-forward-or-die with d forward boxes (dominated by the full model), and
* self-avoiding with d+1 forward boxes (dominates the full model).

Bounds below are the exact quantities of those two processes; the
self-avoiding / move-forward-or-die / independent processes also have exact
formulas of their own.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .dispersal import (
    DispersalVariant,
    Graph,
    OffspringLaw,
    Variant,
    offspring_law,
    offspring_mean,
)
from .errors import ConvergenceError, DomainError, PreconditionError
from .laws import PoissonBinomialLaw, SurvivorLaw
from .special import lerch_phi1

__all__ = [
    "Survival",
    "BoundsReport",
    "FixedPointResult",
    "ProcessParams",
    "process_params",
    "lemma_params",
    "classify_survival",
    "critical_p_bracket",
    "smallest_fixed_point",
    "survival_fixed_points",
    "survival_prob_exact",
    "survival_prob_bounds",
    "survival_prob_limit",
    "survival_prob_limit_closed",
    "reach_cdf_bounds",
    "reach_cdf_exact",
    "reach_limit_cdf",
    "reach_limit_cdf_closed",
    "reach_limit_mean",
    "reach_limit_mean_closed",
    "expected_colonies_bounds",
    "expected_colonies_bounds_lerch",
    "expected_colonies_exact",
    "colonies_limit",
    "mean_extinction_time",
    "extinction_time_mean",
    "extinction_time_bounds_fulltree",
    "compare_dispersal",
]


class Survival(str, enum.Enum):
    DIES_OUT = "dies-out"
    SURVIVES = "survives"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class BoundsReport:
    lower: float
    upper: float
    lower_source: str
    upper_source: str

    def __post_init__(self):
        if math.isfinite(self.lower) and math.isfinite(self.upper):
            # allow rounding noise only
            if self.lower > self.upper + 1e-12 * max(1.0, abs(self.upper)):
                raise ArithmeticError(f"bounds out of order: {self.lower} > {self.upper}")


@dataclass(frozen=True)
class FixedPointResult:
    value: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class ProcessParams:
    law: SurvivorLaw
    d: int
    alpha: float
    beta: float
    big_b: float
    big_d: float
    ratio: float = field(repr=False)  # E[N/(N+d)]


def _ratio(law: SurvivorLaw, d: int) -> float:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return law.ratio_moment(d, 0)


def process_params(law: SurvivorLaw, d: int) -> ProcessParams:
    """alpha = d E[N/(N+d)], beta = (d+1) E[N/(N+d)],
    D = max{2, beta / (beta - P(N != 0))}, B = d(d-1) E[N(N-1)/((N+d-1)(N+d-2))]."""
    m = _ratio(law, d)
    alpha = d * m
    beta = (d + 1) * m
    gap = beta - (1.0 - law.pmf(0))
    # a non-positive gap leaves only the constant 2 in the max
    big_d = max(2.0, beta / gap) if gap > 0.0 else 2.0
    big_b = d * (d - 1) * law.factorial_ratio_moment(d, "U") if d >= 2 else 0.0
    return ProcessParams(law, d, alpha, beta, big_b, big_d, m)


def lemma_params(lam: float, p: float, d: int) -> dict[str, float]:
    """alpha, beta, D, B for the Poisson/binomial law written with Phi(z, 1, d+1)."""
    lp = lam * p
    z = lp / (lp + 1.0)
    phi = lerch_phi1(z, d + 1).value
    core = lp + 1.0 - d * phi
    alpha = d * p * (lam + 1.0) / (lp + 1.0) ** 2 * core
    beta = (d + 1) * p * (lam + 1.0) / (lp + 1.0) ** 2 * core
    denom = beta + p * (beta * lam - lam - 1.0)
    big_d = max(2.0, beta * (lp + 1.0) / denom) if denom > 0.0 else 2.0
    big_b = (
        d * lam * p**2 * (d - 1) * (lam + 1.0) / (lp + 1.0) ** 3
        * ((d * d + d * (lp - 2.0) + 2.0) / d - (d - 1) * (d + 2.0 * lp) / (lp + 1.0) * phi)
    )
    return {"alpha": alpha, "beta": beta, "D": big_d, "B": big_b}


# -- phase transition -----------------------------------------------------------


def classify_survival(law: SurvivorLaw, d: int) -> Survival:
    m = _ratio(law, d)
    if m <= 1.0 / (d + 1):
        return Survival.DIES_OUT
    if m > 1.0 / d:
        return Survival.SURVIVES
    return Survival.INDETERMINATE


def _corollary_rhs(lam: float, p: float, d: int) -> tuple[float, float]:
    lp1 = lam * p + 1.0
    dies = lp1 * (p * (lam * d + d + 1.0) - 1.0) / (p * d * (d + 1) * (lam + 1.0))
    survives = lp1 * (p * (lam * d + d - lam) - 1.0) / (p * d * d * (lam + 1.0))
    return dies, survives


def _dies_out_condition(lam: float, p: float, d: int) -> bool:
    if p == 0.0:
        return True
    phi = lerch_phi1(lam * p / (lam * p + 1.0), d + 1).value
    return phi >= _corollary_rhs(lam, p, d)[0]


def _survives_condition(lam: float, p: float, d: int) -> bool:
    if p == 0.0:
        return False
    phi = lerch_phi1(lam * p / (lam * p + 1.0), d + 1).value
    return phi < _corollary_rhs(lam, p, d)[1]


def _bisect_boundary(cond: Callable[[float], bool], tol: float, max_iter: int) -> float:
    """Boundary of a condition that is false at 0+ ... true at 1 (monotone in p)."""
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if cond(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_p_bracket(lam: float, d: int, tol: float = 1e-6, max_iter: int = 200) -> BoundsReport:
    """Bracket for p_c(d, lam) = inf{p : P(V_d) > 0} from the Lerch-form criteria.

    Lower end: the largest p at which extinction is still certain.  Upper end:
    the smallest p at which survival is guaranteed.  When a criterion never
    switches on [0, 1] the corresponding end is 1 (lower) or inf (upper).
    """
    if not lam > 0.0:
        raise DomainError("lambda must be positive")
    if _dies_out_condition(lam, 1.0, d):
        lower = 1.0
    else:
        lower = _bisect_boundary(lambda p: not _dies_out_condition(lam, p, d), tol, max_iter)
    if not _survives_condition(lam, 1.0, d):
        upper = math.inf
    else:
        upper = _bisect_boundary(lambda p: _survives_condition(lam, p, d), tol, max_iter)
    # monotonicity in p is assumed by the bisection; spot-check it
    for q in np.linspace(0.0, 1.0, 21)[1:]:
        if q < lower - tol and not _dies_out_condition(lam, q, d):
            raise ConvergenceError(f"dies-out criterion is not monotone in p near {q}")
        if math.isfinite(upper) and q > upper + tol and not _survives_condition(lam, q, d):
            raise ConvergenceError(f"survival criterion is not monotone in p near {q}")
    return BoundsReport(lower, upper, "dies-out criterion (Lerch form)", "survival criterion (Lerch form)")


# -- fixed points and survival ---------------------------------------------------


def smallest_fixed_point(
    pgf: Callable[[float], float],
    mean: float | None = None,
    tol: float = 1e-13,
    max_iter: int = 1_000_000,
) -> FixedPointResult:
    """Smallest root of pgf(s) = s in [0, 1] by iteration from s = 0.

    Plain iteration is sublinear at criticality, so each step also tries an
    Aitken extrapolation; the extrapolated point is accepted only if it stays
    on the left of the root (pgf(x) >= x), which keeps the iterates monotone.
    If the offspring ``mean`` is supplied and is <= 1 the root is 1.
    """
    if mean is not None and mean <= 1.0:
        return FixedPointResult(1.0, 0, abs(pgf(1.0) - 1.0))
    s = 0.0
    for it in range(1, max_iter + 1):
        g1 = pgf(s)
        if g1 < s - 1e-14:
            raise ConvergenceError("iteration decreased: input is not a probability generating function")
        g1 = max(g1, s)
        if g1 - s < tol:
            s = min(g1, 1.0)
            return FixedPointResult(s, it, abs(pgf(s) - s))
        g2 = pgf(g1)
        nxt = max(g2, g1)
        curvature = g2 - 2.0 * g1 + s
        if curvature < 0.0:
            cand = s - (g1 - s) ** 2 / curvature
            if nxt < cand <= 1.0 and pgf(cand) >= cand:
                nxt = cand
        if nxt - s < tol:
            s = min(nxt, 1.0)
            return FixedPointResult(s, it, abs(pgf(s) - s))
        s = nxt
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps")


def _fixed_point_of(off: OffspringLaw) -> FixedPointResult:
    return smallest_fixed_point(off.pgf, mean=off.mean)


def survival_fixed_points(law: SurvivorLaw, d: int) -> tuple[FixedPointResult, FixedPointResult]:
    """(psi, rho): extinction probabilities of self-avoiding with d+1 boxes and
    move-forward-or-die with d forward boxes."""
    psi = _fixed_point_of(offspring_law(DispersalVariant(Variant.SELF_AVOIDING, d + 1), law))
    rho = _fixed_point_of(offspring_law(DispersalVariant(Variant.MOVE_FORWARD_OR_DIE, d), law))
    return psi, rho


def _root_variant(variant: DispersalVariant, graph: Graph) -> DispersalVariant:
    """Law of the number of colonies founded by the origin."""
    d = variant.d
    if graph is Graph.HALF:
        return variant
    if variant.kind is Variant.INDEPENDENT:
        return DispersalVariant(Variant.INDEPENDENT, d + 1)
    # the origin of the full tree has d+1 fresh neighbours
    return DispersalVariant(Variant.FULL_TREE, d)


def survival_prob_exact(variant: DispersalVariant, law: SurvivorLaw, graph: Graph = Graph.FULL) -> float:
    """P(survival) of a self-avoiding / move-forward-or-die / independent process."""
    if variant.kind is Variant.FULL_TREE:
        raise DomainError("the full-tree model has no exact survival formula; use survival_prob_bounds")
    graph = Graph(graph)
    q = _fixed_point_of(offspring_law(variant, law)).value
    if graph is Graph.HALF:
        return 1.0 - q
    root = offspring_law(_root_variant(variant, graph), law).pmf
    r = np.arange(len(root))
    return float(np.sum((1.0 - q**r[1:]) * root[1:]))


def survival_prob_bounds(law: SurvivorLaw, d: int) -> BoundsReport:
    psi, rho = survival_fixed_points(law, d)
    root = offspring_law(DispersalVariant(Variant.FULL_TREE, d), law).pmf
    r = np.arange(1, len(root))
    lower = float(np.sum((1.0 - rho.value**r) * root[1:]))
    upper = 1.0 - psi.value
    return BoundsReport(
        lower,
        upper,
        f"move-forward-or-die (d={d}) on the full tree, rho={rho.value:.6g}",
        f"self-avoiding with d+1={d + 1} boxes, psi={psi.value:.6g}",
    )


def survival_prob_limit(law: SurvivorLaw) -> float:
    """lim_{d -> inf} P(V_d) = 1 - nu, nu the smallest root of E[s^N] = s."""
    return 1.0 - smallest_fixed_point(law.pgf, mean=law.mean()).value


def survival_prob_limit_closed(lam: float, p: float) -> float:
    if p == 0.0:
        return 0.0
    return max(0.0, (p * (lam + 1.0) - 1.0) / (lam * p))


# -- reach ------------------------------------------------------------------------


def _require_subcritical_full(law: SurvivorLaw, d: int, what: str) -> float:
    m = _ratio(law, d)
    if not m < 1.0 / (d + 1):
        raise PreconditionError(
            f"{what} needs E[N/(N+d)] < 1/(d+1); got {m:.6g} >= {1.0 / (d + 1):.6g} (d={d})"
        )
    return m


def _aa_upper(mu: float, b: float, n: int) -> float:
    if mu == 0.0:
        return 1.0
    a = mu ** (n + 1)
    if b == 0.0:
        # offspring <= 1 a.s.: the bound tends to 1 - mu^(n+1)
        return 1.0 - a
    c = mu * (1.0 - mu) / b
    return (1.0 + c) * (1.0 - a) / (1.0 + c - a)


def _aa_lower(mu: float, big_d: float, n: int) -> float:
    a = mu ** (n + 1)
    k = 1.0 + big_d * (1.0 - mu)
    return k * (1.0 - a) / (k - a)


def reach_cdf_bounds(law: SurvivorLaw, d: int, n: int) -> BoundsReport:
    """Bounds on P(M_d <= n) for the full model on the half tree."""
    if n < 0:
        raise DomainError("n must be non-negative")
    _require_subcritical_full(law, d, "reach bounds")
    pp = process_params(law, d)
    return BoundsReport(
        _aa_lower(pp.beta, pp.big_d, n),
        _aa_upper(pp.alpha, pp.big_b, n),
        "extinction-time lower bound with mean beta and constant D",
        "extinction-time upper bound with mean alpha and factorial moment B",
    )


def _iterate(g: Callable[[float], float], times: int, s: float = 0.0) -> float:
    for _ in range(times):
        s = g(s)
    return s


def reach_cdf_exact(variant: DispersalVariant, law: SurvivorLaw, n: int) -> float:
    """P(M <= n) for a homogeneous (half-tree) process: the (n+1)-fold PGF iterate at 0."""
    if variant.kind is Variant.FULL_TREE:
        raise DomainError("reach_cdf_exact applies to the homogeneous auxiliary processes only")
    if n < 0:
        raise DomainError("n must be non-negative")
    return float(_iterate(offspring_law(variant, law).pgf, n + 1))


def reach_limit_cdf(law: SurvivorLaw, m: int) -> float:
    """P(M <= m) for the d -> inf limit law: (m+1)-fold iterate of E[s^N] at 0."""
    if m < 0:
        raise DomainError("m must be non-negative")
    return float(_iterate(law.pgf, m + 1))


def reach_limit_cdf_closed(lam: float, p: float, m: int) -> float:
    r = ((lam + 1.0) * p) ** (m + 1)
    return (1.0 - r) / (1.0 - lam * p / (1.0 - p) * r)


def reach_limit_mean_closed(lam: float, p: float) -> float:
    """E(M) = ((1-p-lam p)/(lam p)) sum_{n>=0} r^{n+1} / ((1-p)/(lam p) - r^{n+1}), r = (lam+1)p < 1."""
    r = (lam + 1.0) * p
    if not r < 1.0:
        raise PreconditionError("E(M) is finite only when (lam+1) p < 1")
    if p == 0.0:
        return 0.0
    k = (1.0 - p) / (lam * p)
    total = 0.0
    term_r = r
    while True:
        term = term_r / (k - term_r)
        total += term
        if term < 1e-18 * max(total, 1e-300):
            break
        term_r *= r
    return (1.0 - p - lam * p) / (lam * p) * total


def reach_limit_mean(law: SurvivorLaw, tol: float = 1e-15) -> float:
    """E(M) = sum_m P(M > m) for the limit law (tail-sum identity)."""
    if not law.mean() < 1.0:
        raise PreconditionError("E(M) is finite only when E(N) < 1")
    total = 0.0
    s = 0.0
    prev = 1.0
    for _ in range(10_000_000):
        s = law.pgf(s)
        tail = 1.0 - s
        # 1 - s bottoms out at rounding level; stop once it no longer shrinks
        if tail < tol or tail >= prev:
            return total + max(tail, 0.0)
        total += tail
        prev = tail
    raise ConvergenceError("tail sum did not converge")


# -- number of colonies ------------------------------------------------------------


def expected_colonies_bounds(law: SurvivorLaw, d: int) -> BoundsReport:
    m = _require_subcritical_full(law, d, "colony-count bounds")
    return BoundsReport(
        (1.0 + m) / (1.0 - d * m),
        1.0 / (1.0 - (d + 1) * m),
        f"move-forward-or-die (d={d}) on the full tree",
        f"self-avoiding with d+1={d + 1} boxes",
    )


def expected_colonies_bounds_lerch(lam: float, p: float, d: int) -> BoundsReport:
    """(d + alpha)/(d(1 - alpha)) <= E(I_d) <= d/(d - (d+1) alpha), alpha from the Lerch form."""
    alpha = lemma_params(lam, p, d)["alpha"]
    return BoundsReport(
        (d + alpha) / (d * (1.0 - alpha)),
        d / (d - (d + 1) * alpha),
        "Lerch form, lower",
        "Lerch form, upper",
    )


def expected_colonies_exact(variant: DispersalVariant, law: SurvivorLaw, graph: Graph = Graph.FULL) -> float:
    """Expected number of colonies ever created (the origin's included).

    For a branching process with root offspring mean m_R and offspring mean
    mu < 1 this is 1 + m_R / (1 - mu).
    """
    if variant.kind is Variant.FULL_TREE:
        raise DomainError("the full-tree model has no exact colony count; use expected_colonies_bounds")
    graph = Graph(graph)
    mu = offspring_mean(variant, law)
    if not mu < 1.0:
        raise PreconditionError(
            f"{variant.kind.value} process is not subcritical (offspring mean {mu:.6g} >= 1)"
        )
    root_mean = offspring_mean(_root_variant(variant, graph), law)
    return 1.0 + root_mean / (1.0 - mu)


def colonies_limit(law: SurvivorLaw) -> float:
    """lim_{d -> inf} E(I_d) = 1 / (1 - E(N))."""
    mean = law.mean()
    if not mean < 1.0:
        raise PreconditionError(f"the limit needs E(N) < 1, got {mean:.6g}")
    return 1.0 / (1.0 - mean)


# -- extinction time --------------------------------------------------------------


def mean_extinction_time(off: OffspringLaw, tol: float = 1e-10) -> float:
    """E[tau] = int_0^1 (1 - s) / (G(s) - s) ds for a subcritical offspring PGF G.

    (1 - G(s)) / (1 - s) = sum_k P(Y > k) s^k =: Q(s), so the integrand is
    1 / (1 - Q(s)); the removable singularity at s = 1 never materialises and
    the endpoint value is 1 / (1 - G'(1)).
    """
    tails = off.tail_probs()
    if len(tails) == 0:
        return 1.0
    q1 = float(np.sum(tails))
    if not q1 < 1.0:
        raise PreconditionError(f"extinction time needs a subcritical process (offspring mean {q1:.6g} >= 1)")

    def integrand(s: float) -> float:
        return 1.0 / (1.0 - np.polynomial.polynomial.polyval(s, tails))

    value, err = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    if not math.isfinite(value) or err > 1e-8:
        raise ConvergenceError(f"quadrature did not reach tolerance (estimate {value}, error {err})")
    return value


def extinction_time_mean(variant: DispersalVariant, law: SurvivorLaw, tol: float = 1e-10) -> float:
    """Mean extinction time of a homogeneous (half-tree) auxiliary process."""
    if variant.kind is Variant.FULL_TREE:
        raise DomainError("use extinction_time_bounds_fulltree for the full model")
    try:
        return mean_extinction_time(offspring_law(variant, law), tol)
    except PreconditionError as exc:
        raise PreconditionError(f"{variant.kind.value} (d={variant.d}): {exc}") from None


def extinction_time_bounds_fulltree(law: SurvivorLaw, d: int, tol: float = 1e-10) -> BoundsReport:
    _require_subcritical_full(law, d, "extinction-time bounds")
    lower = extinction_time_mean(DispersalVariant(Variant.MOVE_FORWARD_OR_DIE, d), law, tol)
    upper = extinction_time_mean(DispersalVariant(Variant.SELF_AVOIDING, d + 1), law, tol)
    return BoundsReport(lower, upper, f"move-forward-or-die (d={d})", f"self-avoiding with d+1={d + 1} boxes")


# -- uniform vs independent dispersal -------------------------------------------------


def _or_none(fn, *args):
    try:
        return fn(*args)
    except PreconditionError:
        return None


def compare_dispersal(law: SurvivorLaw, d: int) -> dict:
    """Uniform (self-avoiding) vs independent dispersal with d forward boxes."""
    if d < 2:
        raise DomainError("comparison needs d >= 2")
    uni = DispersalVariant(Variant.SELF_AVOIDING, d)
    ind = DispersalVariant(Variant.INDEPENDENT, d)
    mean_u, mean_i = offspring_mean(uni, law), offspring_mean(ind, law)
    col_u = _or_none(expected_colonies_exact, uni, law)
    col_i = _or_none(expected_colonies_exact, ind, law)
    tau_u = _or_none(extinction_time_mean, uni, law)
    tau_i = _or_none(extinction_time_mean, ind, law)
    limit = _or_none(colonies_limit, law)
    slack = 1e-12
    return {
        "d": d,
        "mean_offspring": {"uniform": mean_u, "independent": mean_i},
        "expected_colonies": {"uniform": col_u, "independent": col_i},
        "extinction_time": {"uniform": tau_u, "independent": tau_i},
        "checks": {
            "mean_independent_ge_uniform": mean_i >= mean_u - slack,
            "colonies_uniform_le_independent": (
                None if col_u is None or col_i is None else col_u <= col_i + slack
            ),
            "extinction_uniform_le_independent": (
                None if tau_u is None or tau_i is None else tau_u <= tau_i + slack
            ),
        },
        "colonies_limit": limit,
    }
