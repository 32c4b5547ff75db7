"""Special-function and combinatorial kernels.

Lerch transcendent at s = 1, log-space binomial ratios and surjection counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, lgamma

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError

__all__ = [
    "LerchEval",
    "lerch_phi1",
    "lerch_phi1_series",
    "lerch_phi1_closed",
    "log_binom",
    "log_binom_array",
    "log_binom_ratio",
    "surjections",
    "surjection_table",
]

# closed form is preferred above this z, provided it does not cancel badly
_CLOSED_FORM_Z = 0.9
_MAX_CANCELLED_DIGITS = 6.0
_SERIES_RTOL = 1e-16
_CROSSCHECK_RTOL = 1e-9


@dataclass(frozen=True)
class LerchEval:
    value: float
    terms_used: int
    method: str  # "series" | "closed_form"


def _check_lerch_args(z: float, a: int) -> None:
    if not (0.0 <= z < 1.0) or math.isnan(z):
        raise DomainError(f"lerch_phi1 needs 0 <= z < 1, got z={z!r}")
    if int(a) != a or a < 1:
        raise DomainError(f"lerch_phi1 needs an integer a >= 1, got a={a!r}")


def _cancelled_digits(z: float, a: int) -> float:
    """Decimal digits lost by the closed form (log term minus partial sum)."""
    if z == 0.0:
        return math.inf
    log_head = math.log(-math.log1p(-z))
    # z^a * Phi(z, 1, a) >= z^a / a
    log_tail = a * math.log(z) - math.log(a)
    return max(0.0, (log_head - log_tail) / math.log(10.0))


def lerch_phi1_series(z: float, a: int, chunk: int = 256) -> LerchEval:
    """Sum z**j / (a + j) until the geometric remainder bound is negligible."""
    _check_lerch_args(z, a)
    if z == 0.0:
        return LerchEval(1.0 / a, 1, "series")
    total = 0.0
    start = 0
    log_z = math.log(z)
    while True:
        j = np.arange(start, start + chunk, dtype=float)
        terms = np.exp(j * log_z) / (a + j)
        total = math.fsum([total, *terms.tolist()])
        start += chunk
        # remainder after `start` terms: sum_{j>=start} z^j/(a+j) <= z^start / ((a+start)(1-z))
        remainder = math.exp(start * log_z) / ((a + start) * (1.0 - z))
        if remainder <= _SERIES_RTOL * total:
            break
        if start > 50_000_000:
            raise ConvergenceError(f"Lerch series did not converge for z={z}, a={a}")
    return LerchEval(total, start, "series")


def lerch_phi1_closed(z: float, a: int) -> LerchEval:
    """Closed form (1/z^a) [ln(1/(1-z)) - sum_{j=1}^{a-1} z^j / j] for integer a."""
    _check_lerch_args(z, a)
    if z == 0.0:
        return LerchEval(1.0 / a, 1, "closed_form")
    j = np.arange(1, a, dtype=float)
    partial = math.fsum((np.exp(j * math.log(z)) / j).tolist()) if a > 1 else 0.0
    head = -math.log1p(-z)
    value = (head - partial) / z**a
    return LerchEval(value, a, "closed_form")


def lerch_phi1(z: float, a: int) -> LerchEval:
    """Lerch transcendent Phi(z, 1, a) = sum_{j>=0} z^j / (a + j) for 0 <= z < 1, integer a >= 1.

    The series is slow as z -> 1 and the closed form cancels as z -> 0 (or
    for large a), so the method is chosen from z and the estimated loss of
    digits. Whenever both routes are accurate they are compared.
    """
    _check_lerch_args(z, a)
    a = int(a)
    if z == 0.0:
        return LerchEval(1.0 / a, 1, "series")
    digits = _cancelled_digits(z, a)
    closed_ok = digits <= _MAX_CANCELLED_DIGITS
    if z >= _CLOSED_FORM_Z and closed_ok:
        result = lerch_phi1_closed(z, a)
        if z < 0.999:
            other = lerch_phi1_series(z, a)
            _crosscheck(result, other, z, a)
        return result
    result = lerch_phi1_series(z, a)
    if z >= 0.05 and closed_ok:
        _crosscheck(result, lerch_phi1_closed(z, a), z, a)
    return result


def _crosscheck(x: LerchEval, y: LerchEval, z: float, a: int) -> None:
    if abs(x.value - y.value) > _CROSSCHECK_RTOL * abs(x.value):
        raise ConvergenceError(
            f"Lerch series/closed form disagree at z={z}, a={a}: {x.value!r} vs {y.value!r}"
        )


def log_binom(n: int, k: int) -> float:
    if not (0 <= k <= n):
        raise DomainError(f"invalid binomial C({n}, {k})")
    return lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)


def log_binom_array(n, k) -> np.ndarray:
    """Vectorised log C(n, k); entries with k outside [0, n] give -inf."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n)
    nn = np.where(valid, n, 0.0)
    kk = np.where(valid, k, 0.0)
    out = gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)
    return np.where(valid, out, -np.inf)


def log_binom_ratio(n_top: int, k_top: int, n_bot: int, k_bot: int) -> float:
    """C(n_top, k_top) / C(n_bot, k_bot), evaluated through log-gamma."""
    return math.exp(log_binom(n_top, k_top) - log_binom(n_bot, k_bot))


def surjections(n: int, k: int) -> int:
    """Number of surjections from an n-set onto a k-set (exact)."""
    if k < 0 or n < 0:
        raise DomainError(f"surjections needs n, k >= 0, got ({n}, {k})")
    if n < k:
        return 0
    return sum((-1) ** i * comb(k, i) * (k - i) ** n for i in range(k + 1))


def surjection_table(n_max: int, k_max: int) -> list[list[int]]:
    """T[n][k] for 0 <= n <= n_max, 0 <= k <= k_max via T(n,k) = k (T(n-1,k) + T(n-1,k-1))."""
    table = [[0] * (k_max + 1) for _ in range(n_max + 1)]
    table[0][0] = 1
    for n in range(1, n_max + 1):
        prev, row = table[n - 1], table[n]
        for k in range(1, min(n, k_max) + 1):
            row[k] = k * (prev[k] + prev[k - 1])
    return table
