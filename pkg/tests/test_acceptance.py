"""Acceptance criteria, one pass/fail line each.

Run with pytest (lines appear in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""
import math
import subprocess
import sys
import time
from collections import Counter
from fractions import Fraction
from itertools import product

import pytest

from dispersal_lab import analytics as an
from dispersal_lab.dispersal import DispersalVariant, Graph, Variant, conditional_pmf_exact, offspring_mean
from dispersal_lab.laws import PoissonBinomialLaw
from dispersal_lab.simulator import SimConfig, estimate

RESULTS: dict[int, str] = {}
SEED = 42
REPLICAS = 100_000


def record(num: int, name: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    ok_time = elapsed < budget
    verdict = "PASS" if ok and ok_time else "FAIL"
    line = f"[{verdict}] {num:>2} {name}: {detail}; {elapsed:.2f} s (budget {budget:g} s)"
    RESULTS[num] = line
    print(line)
    assert ok, line
    assert ok_time, line


def test_01_fixed_points():
    t = time.perf_counter()
    psi, rho = an.survival_fixed_points(PoissonBinomialLaw(5.0, 0.6), 10)
    el = time.perf_counter() - t
    ok_psi = abs(psi.value - 0.141484) <= 1e-5
    ok_rho = abs(rho.value - 0.162176) <= 1e-5
    detail = (
        f"psi={psi.value:.6f} vs 0.141484 ({'ok' if ok_psi else 'off'}), "
        f"rho={rho.value:.6f} vs 0.162176 ({'ok' if ok_rho else 'off'}), tol 1e-5"
    )
    record(1, "fixed points", ok_psi and ok_rho, detail, el, 1.0)


def test_02_survival_bounds():
    t = time.perf_counter()
    rep = an.survival_prob_bounds(PoissonBinomialLaw(5.0, 0.6), 10)
    el = time.perf_counter() - t
    ok_lo = abs(rep.lower - 0.85153) <= 1e-4
    ok_hi = abs(rep.upper - 0.858516) <= 1e-4
    detail = (
        f"lower={rep.lower:.6f} vs 0.85153 ({'ok' if ok_lo else 'off'}), "
        f"upper={rep.upper:.6f} vs 0.858516 ({'ok' if ok_hi else 'off'}), tol 1e-4"
    )
    record(2, "survival bounds", ok_lo and ok_hi, detail, el, 1.0)


def test_03_critical_p():
    t = time.perf_counter()
    rep = an.critical_p_bracket(10.0, 30)
    el = time.perf_counter() - t
    ok = abs(rep.lower - 0.0962) <= 1e-4 and abs(rep.upper - 0.0996) <= 1e-4
    record(3, "critical-p bracket", ok, f"[{rep.lower:.6f}, {rep.upper:.6f}] vs [0.0962, 0.0996], tol 1e-4", el, 5.0)


def test_04_colonies():
    t = time.perf_counter()
    law = PoissonBinomialLaw(9.0, 0.099)
    rep = an.expected_colonies_bounds(law, 800)
    limit = an.colonies_limit(law)
    el = time.perf_counter() - t
    ok = abs(rep.lower - 74.5761) <= 1e-3 and abs(rep.upper - 82.0181) <= 1e-3 and abs(limit - 100) <= 1e-9
    detail = f"[{rep.lower:.5f}, {rep.upper:.5f}] vs [74.5761, 82.0181] tol 1e-3, limit={limit:.12g} vs 100 tol 1e-9"
    record(4, "colony counts", ok, detail, el, 10.0)


TABLE1 = {
    Variant.SELF_AVOIDING: [3.494, 3.862, 4.159, 4.408, 4.623],
    Variant.INDEPENDENT: [3.831, 4.372, 4.779, 5.108, 5.384],
}


def test_05_table1():
    t = time.perf_counter()
    law = PoissonBinomialLaw(1.0, 0.5)
    worst = 0.0
    for kind, row in TABLE1.items():
        for d, target in zip(range(2, 7), row):
            worst = max(worst, abs(an.extinction_time_mean(DispersalVariant(kind, d), law) - target))
    el = time.perf_counter() - t
    record(5, "Table 1 extinction times", worst <= 1e-3, f"10 entries, max |error| = {worst:.2e} (tol 1e-3)", el, 10.0)


@pytest.mark.slow
def test_06_mc_vs_analytics():
    t = time.perf_counter()
    law = PoissonBinomialLaw(1.0, 0.5)
    v = DispersalVariant(Variant.SELF_AVOIDING, 3)
    # the half tree is the homogeneous process behind Table 1 and the iterated PGF
    half, _ = estimate(SimConfig(v, law, graph=Graph.HALF, master_seed=SEED), REPLICAS)
    # the colony-count formula has the origin with d+1 fresh neighbours
    full, _ = estimate(SimConfig(v, law, graph=Graph.FULL, master_seed=SEED), REPLICAS)
    el = time.perf_counter() - t
    et = half.extinction_time
    z_tau = (et.mean - 3.862) / et.se
    col = full.colonies_created
    exact_i = an.expected_colonies_exact(v, law, Graph.FULL)
    z_col = (col.mean - exact_i) / col.se
    z_reach = []
    for n in range(11):
        f = an.reach_cdf_exact(v, law, n)
        emp = half.reach_cdf[n] if n < len(half.reach_cdf) else half.extinct / half.replicas
        z_reach.append((emp - f) / math.sqrt(f * (1 - f) / half.replicas))
    censored = half.censored + full.censored
    ok = abs(z_tau) <= 3 and abs(z_col) <= 3 and max(map(abs, z_reach)) <= 3 and censored == 0
    detail = (
        f"E[tau]={et.mean:.4f}+/-{et.se:.4f} (z={z_tau:+.2f}), "
        f"E(I)={col.mean:.4f}+/-{col.se:.4f} vs {exact_i:.4f} (z={z_col:+.2f}), "
        f"reach CDF max |z|={max(map(abs, z_reach)):.2f} over n<=10, censored={censored}"
    )
    record(6, "MC vs analytics (self-avoiding)", ok, detail, el, 60.0)


MC7_CAP = 50


@pytest.mark.slow
def test_07_sandwich():
    t = time.perf_counter()
    law = PoissonBinomialLaw(5.0, 0.6)
    rep = an.survival_prob_bounds(law, 10)
    cfg = SimConfig(DispersalVariant(Variant.FULL_TREE, 10), law, max_colonies=MC7_CAP, master_seed=SEED)
    summary, _ = estimate(cfg, REPLICAS)
    el = time.perf_counter() - t
    f = summary.survival_proportion
    sigma = math.sqrt(f * (1 - f) / summary.replicas)
    ok = rep.lower - 3 * sigma <= f <= rep.upper + 3 * sigma
    inside_published = 0.85153 - 3 * sigma <= f <= 0.858516 + 3 * sigma
    detail = (
        f"freq={f:.5f} (sigma {sigma:.5f}, live-colony cap {MC7_CAP}) in "
        f"[{rep.lower:.5f}, {rep.upper:.5f}] +/- 3 sigma; "
        f"also inside the published [0.85153, 0.858516] +/- 3 sigma: {inside_published}"
    )
    record(7, "sandwich (full tree)", ok, detail, el, 120.0)


def _weak_compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _weak_compositions(n - first, k - 1):
            yield (first,) + rest


def _enumerate(variant, n):
    d = variant.d
    counts = Counter()
    if variant.kind is Variant.INDEPENDENT:
        outcomes = list(product(range(d), repeat=n))
        for o in outcomes:
            counts[len(set(o))] += 1
    else:
        outcomes = list(_weak_compositions(n, variant.box_count))
        for c in outcomes:
            hab = c[:d] if variant.kind is Variant.MOVE_FORWARD_OR_DIE else c
            counts[sum(x > 0 for x in hab)] += 1
    return [Fraction(counts[y], len(outcomes)) for y in range(variant.habitable_boxes + 1)]


def test_08_combinatorial_oracle():
    t = time.perf_counter()
    checked = mismatches = 0
    for kind in Variant:
        for d in range(1, 5):
            v = DispersalVariant(kind, d)
            for n in range(7):
                checked += 1
                mismatches += conditional_pmf_exact(v, n) != _enumerate(v, n)
    el = time.perf_counter() - t
    record(8, "combinatorial oracle", mismatches == 0, f"{checked} (variant, d, n) cases, {mismatches} mismatches", el, 5.0)


def test_09_dominance():
    t = time.perf_counter()
    checks = failures = 0
    for lam in (0.5, 1.0, 5.0):
        for frac in (0.2, 0.5, 0.8, 0.95):
            law = PoissonBinomialLaw(lam, frac / (lam + 1))  # E(N) = frac < 1
            for d in range(2, 7):
                rep = an.compare_dispersal(law, d)
                for value in rep["checks"].values():
                    if value is not None:
                        checks += 1
                        failures += not value
    el = time.perf_counter() - t
    record(9, "dominance suite", failures == 0, f"{checks} comparisons, {failures} violations", el, 30.0)


def _cli(*args):
    cmd = [sys.executable, "-m", "dispersal_lab", *args]
    return subprocess.run(cmd, capture_output=True, check=True).stdout


def test_10_determinism():
    t = time.perf_counter()
    base = ["simulate", "--lambda", "5", "--p", "0.6", "--d", "10", "--replicas", "2000",
            "--seed", "7", "--max-colonies", "50"]
    outs = []
    for variant in ("full-tree", "self-avoiding"):
        flags = base + ["--variant", variant]
        outs.append([_cli(*flags, "--threads", "1"), _cli(*flags, "--threads", "1"), _cli(*flags, "--threads", "8")])
    el = time.perf_counter() - t
    ok = all(len(set(group)) == 1 for group in outs)
    record(10, "determinism", ok, "simulate summaries byte-identical over 2 runs and threads 1 vs 8 (2 variants)", el, math.inf)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                pass
