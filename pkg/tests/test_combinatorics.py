import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentcone import combinatorics as cb
from momentcone.measures import DiscreteMeasure


def brute_block_count(sizes):
    want = sorted(sizes)
    return sum(1 for p in cb.enumerate_partitions(sum(sizes)) if sorted(cb.block_sizes(p)) == want)


# --- partitions ------------------------------------------------------------

@pytest.mark.parametrize("n,count", [(1, 1), (3, 5), (5, 52)])
def test_partition_counts(n, count):
    parts = cb.enumerate_partitions(n)
    assert len(parts) == count == cb.bell_number(n)
    assert len(set(parts)) == len(parts)


def test_partitions_are_canonical():
    for p in cb.enumerate_partitions(6):
        assert sorted(x for b in p for x in b) == list(range(1, 7))
        assert all(list(b) == sorted(b) for b in p)
        assert [b[0] for b in p] == sorted(b[0] for b in p)


def test_partition_bounds():
    with pytest.raises(ValueError):
        cb.enumerate_partitions(0)
    with pytest.raises(ValueError):
        cb.enumerate_partitions(13)


@pytest.mark.parametrize("sizes,count", [((1, 1), 1), ((2, 1), 3), ((2, 2), 3)])
def test_block_size_examples(sizes, count):
    assert cb.count_partitions_with_block_sizes(sizes) == count


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4).filter(lambda s: sum(s) <= 7))
def test_block_size_count_lower_bound(sizes):
    n_val = cb.count_partitions_with_block_sizes(sizes)
    bound = Fraction(math.factorial(sum(sizes)), math.prod(math.factorial(i) for i in sizes) * math.factorial(len(sizes)))
    assert n_val >= bound


def all_multi_indices(max_total):
    for n in range(1, max_total + 1):
        for idx in itertools.product(range(1, max_total + 1), repeat=n):
            if sum(idx) <= max_total:
                yield idx


def test_block_size_formula_matches_enumeration():
    for idx in all_multi_indices(7):
        assert cb.count_partitions_with_block_sizes(idx) == brute_block_count(idx), idx


def test_ordered_three_partition_counts():
    for m in range(6):
        for n in range(6):
            for k in range(min(m, n) + 1):
                total = m + n - k
                brute = sum(1 for t in cb.enumerate_ordered_three_partitions(total)
                            if tuple(map(len, t)) == (m - k, n - k, k))
                want = math.factorial(total) // (math.factorial(m - k) * math.factorial(n - k) * math.factorial(k))
                assert cb.ordered_three_partition_count(total, m - k, n - k, k) == brute == want


def test_pairing_counts_by_size():
    for m in range(6):
        for n in range(6):
            by_size = Counter(len(k) for k in cb.enumerate_pairings(m, n))
            for k in range(min(m, n) + 1):
                assert by_size[k] == cb.pairing_count(m, n, k)


@pytest.mark.parametrize("n", range(1, 9))
def test_block_size_counts_sum_to_bell(n):
    assert sum(cb.count_partitions_with_block_sizes(p) for p in cb.integer_partitions(n)) == cb.bell_number(n)


def test_mobius_sum_vanishes():
    # sum over the partition lattice of mu(0, pi) is zero for n >= 2
    for n in range(2, 7):
        assert sum(cb.mobius_zero(p) for p in cb.enumerate_partitions(n)) == 0


# --- pairings --------------------------------------------------------------

def test_pairing_examples():
    assert len(cb.enumerate_pairings(1, 1)) == 2
    assert Counter(len(k) for k in cb.enumerate_pairings(2, 2)) == {0: 1, 1: 4, 2: 2}
    assert cb.pairing_count(3, 2, 2) == 6


def test_pairings_are_partial_matchings():
    for kappa in cb.enumerate_pairings(3, 3):
        alphas = [a for a, _ in kappa]
        betas = [b for _, b in kappa]
        assert len(set(alphas)) == len(alphas) and len(set(betas)) == len(betas)
        assert all(1 <= a <= 3 < b <= 6 for a, b in kappa)


def test_pairing_bounds():
    with pytest.raises(ValueError):
        cb.enumerate_pairings(7, 1)


# --- star product and K-transform -----------------------------------------

def ones(max_order):
    return cb.ConfigFunctional(1, {k: (lambda pts: 1) for k in range(1, max_order + 1)})


def test_star_product_examples():
    empty_ind = cb.ConfigFunctional(1, {})
    assert cb.star_product_value(empty_ind, empty_ind, ()) == 1
    assert cb.star_product_value(ones(1), ones(1), (((0.0,), 1.0),)) == 3
    lam = (((0.0,), 1.0), ((1.0,), 2.0))
    assert cb.star_product_value(ones(2), ones(2), lam) == 9


def test_k_transform_examples():
    gamma = [((float(i),), 1.0) for i in range(3)]
    assert cb.k_transform(cb.ConfigFunctional(1, {}), gamma) == 1
    assert cb.k_transform(ones(3), gamma) == 8


def rational_functional(draw_int, max_order):
    tables = {}
    for n in range(1, max_order + 1):
        cache = {}

        def t(pts, cache=cache):
            key = frozenset(p[0] for p in pts)
            if key not in cache:
                cache[key] = Fraction(draw_int())
            return cache[key] * math.prod(Fraction(p[1]) for p in pts)
        tables[n] = t
    return cb.ConfigFunctional(Fraction(draw_int()), tables)


@given(st.randoms(use_true_random=False), st.integers(0, 6))
def test_k_transform_is_multiplicative(rnd, size):
    gamma = [((float(i),), Fraction(rnd.randint(1, 5), rnd.randint(1, 3))) for i in range(size)]
    g1 = rational_functional(lambda: rnd.randint(-3, 3), rnd.randint(0, 3))
    g2 = rational_functional(lambda: rnd.randint(-3, 3), rnd.randint(0, 3))
    assert cb.k_transform(cb.star_product(g1, g2), gamma) == cb.k_transform(g1, gamma) * cb.k_transform(g2, gamma)


# --- diamond product -------------------------------------------------------

def test_diamond_worked_example_relabeling():
    f1 = lambda ys: ("G1",) + tuple(ys)
    f2 = lambda ys: ("G2",) + tuple(ys)
    calls = []

    def rec1(ys):
        calls.append(f1(ys))
        return 1

    def rec2(ys):
        calls.append(f2(ys))
        return 1

    term = cb.contracted_tensor(rec1, 3, rec2, 4, ((3, 5), (2, 6)))
    term(("y1", "y2", "y3", "y4", "y5"))
    assert calls == [("G1", "y1", "y2", "y3"), ("G2", "y4", "y3", "y2", "y5")]


def test_diamond_scalar_factor():
    g2 = cb.ConfigFunctional(2, {1: lambda pts: pts[0][1]})
    out = cb.diamond_product(cb.ConfigFunctional(3, {}), g2)
    assert out.constant == 6
    assert out((((0.0,), 5.0),)) == 15


def test_diamond_of_weight_coordinates():
    s = cb.ConfigFunctional(0, {1: lambda pts: pts[0][1]})
    out = cb.diamond_product(s, s)
    y1, y2 = ((0.0,), 2.0), ((1.0,), 3.0)
    assert out((y1,)) == 4.0            # full pairing: s^2
    assert out((y1, y2)) == 2 * 6.0     # weight 2!/(1!1!) times s1 s2


def symmetric_table(rng, order):
    g_coef = {}
    powers = tuple(int(p) for p in rng.integers(0, 3, size=order))

    def t(pts):
        key = tuple(sorted(round(p[0][0], 9) for p in pts))
        if key not in g_coef:
            g_coef[key] = float(rng.normal())
        # symmetrize the monomial part over orderings
        mono = np.mean([math.prod(pts[i][1] ** pw for i, pw in zip(perm, powers))
                        for perm in itertools.permutations(range(order))])
        return g_coef[key] * mono
    return t


def integrate_sets(rho, g):
    """Integrate ``g`` against an atomic measure on finite sets, symmetrizing each table."""
    total = float(g.constant) * rho.get(0, 1.0)
    for n, atoms in rho.items():
        if n == 0:
            continue
        for pts, w in atoms:
            vals = [g(p) for p in itertools.permutations(pts)]
            total += w * float(np.mean(vals))
    return total


@pytest.mark.parametrize("seed", range(50))
def test_star_and_diamond_integrate_equally(seed):
    rng = np.random.default_rng(seed)
    points = [((float(x),), float(s)) for x, s in zip(rng.permutation(20)[:8], rng.uniform(0.2, 2, 8))]
    rho = {0: float(rng.uniform(0.5, 2))}
    for n in (1, 2, 3):
        rho[n] = []
        for _ in range(4):
            idx = rng.choice(len(points), size=n, replace=False)
            rho[n].append((tuple(points[i] for i in idx), float(rng.uniform(0.1, 1))))
    g1 = cb.ConfigFunctional(float(rng.normal()), {k: symmetric_table(rng, k) for k in (1, 2)})
    g2 = cb.ConfigFunctional(float(rng.normal()), {k: symmetric_table(rng, k) for k in (1, 2)})
    star = integrate_sets(rho, cb.star_product(g1, g2))
    diamond = integrate_sets(rho, cb.diamond_product(g1, g2))
    assert diamond == pytest.approx(star, rel=1e-10, abs=1e-12)


# --- lift and Wick ---------------------------------------------------------

def test_r_lift_examples():
    g = lambda x: x + 1.0
    assert cb.r_lift(g, (1,))(2.0) == 3.0
    lifted = cb.r_lift(g, (2,))
    assert lifted(2.0, 2.0) == 3.0 and lifted(2.0, 1.0) == 0.0


@given(st.lists(st.tuples(st.integers(0, 9), st.floats(0.1, 3)), min_size=1, max_size=4,
                unique_by=lambda a: a[0]),
       st.lists(st.integers(1, 3), min_size=1, max_size=2))
def test_r_lift_pairing_identity(atoms, powers):
    from momentcone.measures import tensor_pairing
    eta = DiscreteMeasure.from_atoms([((float(x),), s) for x, s in atoms])
    n = len(powers)
    g = lambda *xs: 1.0 + sum((j + 1) * float(x[0]) for j, x in enumerate(xs)) \
        if len({float(x[0]) for x in xs}) == len(xs) else 0.0
    left = tensor_pairing(eta, cb.r_lift(g, powers), sum(powers))
    right = 0.0
    for tup in itertools.permutations(range(len(atoms)), n):
        xs = [eta.locations[i] for i in tup]
        right += g(*xs) * math.prod(eta.weights[i] ** p for i, p in zip(tup, powers))
    # ordered tuples equal n! times unordered sets of symmetrized g
    assert left == pytest.approx(right, rel=1e-10, abs=1e-10)


def test_wick_examples():
    omega = DiscreteMeasure.from_atoms([((0.0,), 1.0)])
    chi = lambda x: 1.0
    assert cb.wick_pairing(omega, [chi]) == 1.0
    assert cb.wick_pairing(omega, [chi, chi]) == 0.0


def test_wick_order_two_is_off_diagonal_product():
    # with disjoint supports the n=2 recursion reduces to half the distinct-pair sum
    omega = DiscreteMeasure.from_atoms([((0.0,), 1.0), ((1.0,), 2.0), ((2.0,), 0.5)])
    p1 = lambda x: float(x[0] < 0.5)
    p2 = lambda x: 3.0 * float(x[0] > 0.5)
    x, s = omega.locations, omega.weights
    off = sum(p1(x[i]) * p2(x[j]) * s[i] * s[j] for i in range(3) for j in range(3) if i != j)
    assert cb.wick_pairing(omega, [p1, p2]) == pytest.approx(off / 2)
