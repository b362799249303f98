"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` to see the lines next to the
pytest verdicts.
"""

import itertools
import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import cached_batch
from momentcone import combinatorics as cb
from momentcone.correlation import (
    INCONCLUSIVE,
    correlation_family,
    direct_correlation_integral,
    generalized_correlation,
    lb_check,
    model_zoo,
    pd_check,
    point_process_verdict,
    product_box,
    random_s_functional,
    recover_rho,
)
from momentcone.measures import DEFAULT_SHRINK_LADDER, OffDiagonalBox, Window, window_ladder
from momentcone.models import Gamma, PoissonPP, analytic_moment, components, sample_many
from momentcone.momentproblem import atom_at_zero_series, quadrature_from_moments
from momentcone.moments import MomentSource, full_moment, moment

UNIT = Window((0.0,), (1.0,))
TWO = Window((0.0,), (2.0,))
BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def within(got, want, stderr, rel=0.05, sigmas=3.0):
    return abs(got - want) <= max(rel * abs(want), sigmas * stderr)


def test_criterion_1_gamma_full_moments(report):
    start = time.perf_counter()
    exact = all(analytic_moment_full(n) == math.prod(range(1, n + 1)) for n in range(1, 6))
    batch = sample_many(Gamma(1.0), UNIT, 2024, 100_000, trunc_eps=1e-6, workers=1)
    src = MomentSource.empirical(batch)
    gaps = []
    for n in range(1, 6):
        got = full_moment(src, n, UNIT, method="partitions").value
        gaps.append(abs(got / math.factorial(n) - 1.0))
    elapsed = time.perf_counter() - start
    ok = exact and max(gaps) <= 0.05 and elapsed < 60
    report(1, ok, f"analytic exact={exact}, worst empirical rel gap {max(gaps):.4f}, {elapsed:.1f} s")


def analytic_moment_full(n):
    return full_moment(MomentSource.analytic(Gamma(1.0)), n, UNIT).value


def test_criterion_2_gamma_off_diagonal_identity(report):
    lines, ok = [], True
    for n, count in ((1, 20_000), (2, 8_000)):
        batch = cached_batch(Gamma(1.0), UNIT, 31 + n, count, 1e-6)
        got = recover_rho(MomentSource.empirical(batch), n, UNIT).s_moment((1,) * n)
        want = 1.0 / math.factorial(n)
        ok &= within(got.value, want, got.stderr)
        lines.append(f"n={n}: {got.value:.4f} vs {want:.4f} (se {got.stderr:.4f})")
    report(2, ok, "; ".join(lines))


def fixed_boxes():
    cuts = [(0.0, 0.5), (0.3, 1.1), (1.0, 2.0), (0.0, 2.0), (1.4, 1.9)]
    bands = [(0.0, math.inf), (0.2, 1.5), (0.5, 3.0), (0.05, 0.6)]
    boxes = []
    for j in range(10):
        a, b = cuts[j % 5], bands[j % 4]
        boxes.append(([Window((a[0],), (a[1],))], [b]))
    for j in range(10):
        a, c = cuts[j % 5], cuts[(j + 2) % 5]
        boxes.append(([Window((a[0],), (a[1],)), Window((c[0],), (c[1],))], [bands[j % 4], bands[(j + 1) % 4]]))
    return boxes


@pytest.mark.parametrize("name,model,count", [("gamma", Gamma(1.0), 3000), ("poisson", PoissonPP(2.0), 3000)])
def test_criterion_3_round_trip(report, name, model, count):
    batch = cached_batch(model, TWO, 77, count, 1e-4)
    src = MomentSource.empirical(batch)
    estimates = {n: recover_rho(src, n, TWO) for n in (1, 2)}
    worst, bad = 0.0, []
    for k, (xb, sb) in enumerate(fixed_boxes()):
        n = len(xb)
        f = product_box(xb, sb)
        sym = (lambda x, s, f=f: np.mean([f(x[:, p], s[:, p]) for p in itertools.permutations(range(n))], axis=0))
        pipe = estimates[n].integrate(sym)
        direct = direct_correlation_integral(batch, n, sym, TWO)
        se = math.hypot(pipe.stderr, direct.stderr)
        if not within(pipe.value, direct.value, se):
            bad.append(k)
        worst = max(worst, abs(pipe.value - direct.value))
        # weighted box moments through the moment module against the closed form
        delta = OffDiagonalBox(tuple(xb))
        m = moment(src, (1,) * n, delta)
        exact = analytic_moment(model, (1,) * n, delta)
        if not within(m.value, exact, m.stderr):
            bad.append(f"{k}:moment")
    report(3, not bad, f"{name}: 20 boxes, largest pipeline-direct gap {worst:.2e}, failures {bad}")


def test_criterion_4_verdict_zoo(report):
    start = time.perf_counter()
    wrong, soft = [], []
    for entry in model_zoo():
        got = point_process_verdict(MomentSource.analytic(entry.model)).outcome
        exotic = any(getattr(getattr(c, "intensity", None), "family", "") == "tempered_stable"
                     for c in components(entry.model))
        if got == entry.expected:
            continue
        if got == INCONCLUSIVE and exotic:
            soft.append(entry.name)
        else:
            wrong.append(f"{entry.name}: {got}")
    elapsed = time.perf_counter() - start
    ok = not wrong and elapsed <= 600
    report(4, ok, f"{len(model_zoo())} models, misclassified {wrong}, inconclusive {soft}, {elapsed:.1f} s")


def test_criterion_5_moment_oracle(report):
    rng = np.random.default_rng(5)
    quad_bad = 0
    for _ in range(100):
        k = int(rng.integers(1, 7))
        nodes = rng.choice(np.linspace(0, 5, 101), size=k, replace=False)
        weights = rng.uniform(0.05, 2.0, k)
        r = np.array([np.sum(weights * nodes ** i) for i in range(2 * k + 2)])
        got = quadrature_from_moments(r).moments(2 * k)
        quad_bad += not np.all(np.abs(got - r[:2 * k]) <= 1e-9 * np.maximum(1.0, np.abs(r[:2 * k])))
    atom_bad = 0
    for _ in range(200):
        k = int(rng.integers(1, 6))
        nodes = rng.uniform(0.05, 5.0, k)
        has_zero = bool(rng.random() < 0.5)
        if has_zero:
            nodes[0] = 0.0
        weights = rng.uniform(0.05, 1.0, k)
        r = [float(np.sum(weights * nodes ** i)) for i in range(11)]
        atom_bad += atom_at_zero_series(r, 5).atom_at_zero is not has_zero
    report(5, quad_bad == 0 and atom_bad == 0,
           f"quadrature failures {quad_bad}/100, atom-at-zero errors {atom_bad}/200")


def test_criterion_6_combinatorics(report):
    bad = []
    for n in range(1, 8):
        for idx in itertools.product(range(1, 8), repeat=n):
            if sum(idx) > 7:
                continue
            want = sum(1 for p in cb.enumerate_partitions(sum(idx)) if sorted(cb.block_sizes(p)) == sorted(idx))
            if cb.count_partitions_with_block_sizes(idx) != want:
                bad.append(idx)
    for m in range(6):
        for n in range(6):
            by_size = Counter(len(k) for k in cb.enumerate_pairings(m, n))
            for k in range(min(m, n) + 1):
                if by_size[k] != cb.pairing_count(m, n, k):
                    bad.append(("pairing", m, n, k))
                total = m + n - k
                brute = sum(1 for t in cb.enumerate_ordered_three_partitions(total)
                            if tuple(map(len, t)) == (m - k, n - k, k))
                if cb.ordered_three_partition_count(total, m - k, n - k, k) != brute:
                    bad.append(("three", m, n, k))
    bell = [cb.bell_number(n) for n in range(11)]
    if bell != BELL:
        bad.append("bell")
    if [len(cb.enumerate_partitions(n)) for n in range(1, 11)] != BELL[1:]:
        bad.append("bell enumeration")
    report(6, not bad, f"mismatches {bad[:5]}")


def rational_functional(rng, max_order):
    tables = {}
    for n in range(1, max_order + 1):
        cache = {}

        def t(pts, cache=cache):
            key = frozenset(p[0] for p in pts)
            if key not in cache:
                cache[key] = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4)))
            return cache[key] * math.prod(Fraction(p[1]) for p in pts)
        tables[n] = t
    return cb.ConfigFunctional(Fraction(int(rng.integers(-3, 4))), tables)


def symmetric_table(rng, order):
    coef = {}
    powers = tuple(int(p) for p in rng.integers(0, 3, size=order))

    def t(pts):
        key = tuple(sorted(p[0] for p in pts))
        if key not in coef:
            coef[key] = float(rng.normal())
        mono = np.mean([math.prod(pts[i][1] ** pw for i, pw in zip(perm, powers))
                        for perm in itertools.permutations(range(order))])
        return coef[key] * mono
    return t


def integrate_sets(rho, g):
    total = float(g.constant) * rho[0]
    for n in (1, 2, 3):
        for pts, w in rho[n]:
            total += w * float(np.mean([g(p) for p in itertools.permutations(pts)]))
    return total


def test_criterion_7_algebra(report):
    rng = np.random.default_rng(7)
    k_bad = 0
    for _ in range(100):
        size = int(rng.integers(0, 7))
        gamma = [((float(i),), Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 4)))) for i in range(size)]
        g1 = rational_functional(rng, int(rng.integers(0, 4)))
        g2 = rational_functional(rng, int(rng.integers(0, 4)))
        k_bad += cb.k_transform(cb.star_product(g1, g2), gamma) != cb.k_transform(g1, gamma) * cb.k_transform(g2, gamma)
    worst = 0.0
    for _ in range(50):
        points = [((float(x),), float(s)) for x, s in zip(rng.permutation(20)[:8], rng.uniform(0.2, 2, 8))]
        rho = {0: float(rng.uniform(0.5, 2))}
        for n in (1, 2, 3):
            rho[n] = [(tuple(points[i] for i in rng.choice(8, size=n, replace=False)), float(rng.uniform(0.1, 1)))
                      for _ in range(4)]
        g1 = cb.ConfigFunctional(float(rng.normal()), {k: symmetric_table(rng, k) for k in (1, 2)})
        g2 = cb.ConfigFunctional(float(rng.normal()), {k: symmetric_table(rng, k) for k in (1, 2)})
        star = integrate_sets(rho, cb.star_product(g1, g2))
        diamond = integrate_sets(rho, cb.diamond_product(g1, g2))
        worst = max(worst, abs(star - diamond) / max(1.0, abs(star)))
    report(7, k_bad == 0 and worst <= 1e-10,
           f"K-multiplicativity failures {k_bad}/100, worst star/diamond gap {worst:.1e}")


def test_criterion_8_pd_and_lb(report):
    batch = sample_many(PoissonPP(1.0), TWO, 8, 200)
    family = correlation_family(batch, 4, TWO)
    rng = np.random.default_rng(8)
    values = [pd_check(family, random_s_functional(rng, TWO, 2)) for _ in range(50)]
    gamma = cached_batch(Gamma(1.0), Window((-1.0,), (1.0,)), 88, 4000, 1e-3)
    lb = lb_check(gamma, window_ladder(DEFAULT_SHRINK_LADDER), (0.5, 2.0))
    ok = min(values) >= -1e-8 and lb.shrinks
    consts = ", ".join(f"{c:.3f}" for c in lb.constants)
    report(8, ok, f"min pd {min(values):.3e} over 50 G; gamma lb constants [{consts}] shrink={lb.shrinks}")


def test_criterion_9_wick(report):
    batch = cached_batch(PoissonPP(1.0), TWO, 9, 4000, 1e-6)
    src = MomentSource.empirical(batch)
    cases = {
        "n=1": [lambda x: float(x[0] < 1.2)],
        "n=2": [lambda x: float(x[0] < 0.8), lambda x: 2.0 * float(x[0] >= 1.0)],
    }
    lines, ok = [], True
    for label, phis in cases.items():
        cmp = generalized_correlation(src, phis)
        good = abs(cmp.left - cmp.right) <= max(0.05 * abs(cmp.right), 3 * cmp.difference_stderr)
        ok &= good
        lines.append(f"{label}: {cmp.left:.4f} vs {cmp.right:.4f}")
    report(9, ok, "; ".join(lines))
