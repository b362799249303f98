"""Set partitions, pairings, star/diamond products and Wick polynomials.

Counting routines return exact Python integers.  Functionals on finite
configurations are stored as per-order callables, so the products below are
evaluated pointwise rather than tabulated on grids.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

MAX_PARTITION_N = 12
MAX_PAIRING_SIZE = 6

Partition = tuple[tuple[int, ...], ...]
Pairing = tuple[tuple[int, int], ...]


# ---------------------------------------------------------------------------
# partitions


def _partitions(elements: tuple[int, ...]) -> list[list[list[int]]]:
    if not elements:
        return [[]]
    first, rest = elements[0], elements[1:]
    out = []
    for sub in _partitions(rest):
        # first element opens its own block, or joins an existing one
        out.append([[first]] + sub)
        for k in range(len(sub)):
            out.append(sub[:k] + [[first] + sub[k]] + sub[k + 1:])
    return out


@lru_cache(maxsize=None)
def _partitions_cached(n: int) -> tuple[Partition, ...]:
    raw = _partitions(tuple(range(1, n + 1)))
    canon = []
    for blocks in raw:
        blocks = sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0])
        canon.append(tuple(blocks))
    canon.sort()
    return tuple(canon)


def enumerate_partitions(n: int) -> list[Partition]:
    """All set partitions of ``{1, ..., n}``.

    Blocks are sorted tuples and appear in order of their smallest element.

    Raises
    ------
    ValueError
        If ``n`` is outside ``1..12``.
    """
    if not 1 <= n <= MAX_PARTITION_N:
        raise ValueError(f"partition enumeration needs 1 <= n <= {MAX_PARTITION_N}, got {n}")
    return list(_partitions_cached(n))


def bell_number(n: int) -> int:
    """Bell number via the triangle recurrence (exact)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def block_sizes(partition: Partition) -> tuple[int, ...]:
    return tuple(len(b) for b in partition)


def count_partitions_with_block_sizes(sizes: Sequence[int]) -> int:
    """Number of partitions of ``{1..I}`` whose block sizes form the multiset ``sizes``.

    ``I!/(i_1!...i_n! r_1! r_2! ...)`` where ``r_l`` counts entries equal to ``l``.
    """
    sizes = tuple(int(i) for i in sizes)
    if any(i < 1 for i in sizes):
        raise ValueError("block sizes must be >= 1")
    total = math.factorial(sum(sizes))
    denom = 1
    for i in sizes:
        denom *= math.factorial(i)
    for r in Counter(sizes).values():
        denom *= math.factorial(r)
    return total // denom


def integer_partitions(n: int) -> list[tuple[int, ...]]:
    """Integer partitions of ``n`` as nonincreasing tuples."""

    def rec(remaining, largest):
        if remaining == 0:
            yield ()
            return
        for k in range(min(remaining, largest), 0, -1):
            for tail in rec(remaining - k, k):
                yield (k,) + tail

    return list(rec(n, n))


def mobius_zero(partition: Partition) -> int:
    """Mobius function mu(0-hat, pi) on the partition lattice."""
    out = 1
    for b in partition:
        out *= (-1) ** (len(b) - 1) * math.factorial(len(b) - 1)
    return out


def ordered_three_partition_count(total: int, a: int, b: int, c: int) -> int:
    """Ordered partitions of ``{1..total}`` into labelled parts of sizes a, b, c."""
    if a + b + c != total:
        return 0
    return math.factorial(total) // (math.factorial(a) * math.factorial(b) * math.factorial(c))


def enumerate_ordered_three_partitions(total: int):
    """Brute-force list of (theta1, theta2, theta3) covering ``{1..total}``."""
    labels = range(1, total + 1)
    for assignment in itertools.product(range(3), repeat=total):
        parts = ([], [], [])
        for x, which in zip(labels, assignment):
            parts[which].append(x)
        yield tuple(tuple(p) for p in parts)


# ---------------------------------------------------------------------------
# pairings


def enumerate_pairings(m: int, n: int) -> list[Pairing]:
    """All partial matchings between ``{1..m}`` and ``{m+1..m+n}`` (the empty one included)."""
    if not (0 <= m <= MAX_PAIRING_SIZE and 0 <= n <= MAX_PAIRING_SIZE):
        raise ValueError(f"pairings need 0 <= m, n <= {MAX_PAIRING_SIZE}")
    left = range(1, m + 1)
    right = range(m + 1, m + n + 1)
    out: list[Pairing] = []
    for k in range(min(m, n) + 1):
        for alphas in itertools.combinations(left, k):
            for betas in itertools.permutations(right, k):
                out.append(tuple(zip(alphas, betas)))
    return out


def pairing_count(m: int, n: int, k: int) -> int:
    """``m! n! / ((m-k)! (n-k)! k!)``."""
    if k > min(m, n):
        return 0
    return (math.factorial(m) * math.factorial(n)
            // (math.factorial(m - k) * math.factorial(n - k) * math.factorial(k)))


# ---------------------------------------------------------------------------
# functionals on finite configurations

# A point of Y = X x R_+ is a pair (x, s) with x a tuple of floats.
YPoint = tuple


@dataclass(frozen=True)
class ConfigFunctional:
    """A function on finite configurations, given order by order.

    ``tables[n]`` maps an n-tuple of points ``(x, s)`` to a number; orders
    missing from ``tables`` are zero.  ``constant`` is the value on the empty
    configuration.
    """

    constant: float = 0.0
    tables: dict[int, Callable[[Sequence[YPoint]], float]] = field(default_factory=dict)

    @property
    def max_order(self) -> int:
        return max(self.tables, default=0)

    def __call__(self, points: Sequence[YPoint]):
        k = len(points)
        if k == 0:
            return self.constant
        f = self.tables.get(k)
        return 0 if f is None else f(tuple(points))

    def order(self, n: int) -> "ConfigFunctional":
        """The order-``n`` component alone."""
        if n == 0:
            return ConfigFunctional(self.constant, {})
        return ConfigFunctional(0, {n: self.tables[n]} if n in self.tables else {})


def symmetrize(f: Callable[[Sequence[YPoint]], float]) -> Callable[[Sequence[YPoint]], float]:
    """``Sym_n f``: average of ``f`` over all argument orders."""

    def sym(points):
        perms = list(itertools.permutations(points))
        total = sum(f(p) for p in perms)
        if isinstance(total, (int, Fraction)):
            return Fraction(total, len(perms))
        return total / len(perms)

    return sym


def star_product_value(g1: ConfigFunctional, g2: ConfigFunctional,
                       lam: Sequence[YPoint]):
    """``(G1 * G2)(lam)``: sum over ordered pairs of subsets whose union is ``lam``.

    Each point goes to the first set only, the second only, or both, so the
    sum has ``3**len(lam)`` terms.
    """
    lam = tuple(lam)
    if len(lam) > MAX_PARTITION_N:
        raise ValueError("configuration too large for the star product")
    total = 0
    for assignment in itertools.product((0, 1, 2), repeat=len(lam)):
        lam1 = tuple(p for p, a in zip(lam, assignment) if a != 1)
        lam2 = tuple(p for p, a in zip(lam, assignment) if a != 0)
        v1 = g1(lam1)
        if v1 == 0:
            continue
        total += v1 * g2(lam2)
    return total


def star_product(g1: ConfigFunctional, g2: ConfigFunctional) -> ConfigFunctional:
    """``G1 * G2`` as a functional; orders up to ``max_order(G1) + max_order(G2)``."""
    top = g1.max_order + g2.max_order
    tables = {k: (lambda pts: star_product_value(g1, g2, pts)) for k in range(1, top + 1)}
    return ConfigFunctional(g1.constant * g2.constant, tables)


def contracted_tensor(f1: Callable, m: int, f2: Callable, n: int, kappa: Pairing) -> Callable:
    """``(G1^(m) (x) G2^(n))_kappa`` on ``m + n - |kappa|`` points.

    Pairs are processed in increasing ``beta``; ``z_beta`` takes the value of
    ``y_alpha``, and the unpaired second-factor slots are filled by
    ``y_{m+1}, y_{m+2}, ...`` in order.
    """
    pairs = sorted(kappa, key=lambda ab: ab[1])
    paired = {beta: alpha for alpha, beta in pairs}
    free = [j for j in range(m + 1, m + n + 1) if j not in paired]

    def table(ys):
        y = {i + 1: v for i, v in enumerate(ys)}
        z = {beta: y[alpha] for beta, alpha in paired.items()}
        for offset, j in enumerate(free):
            z[j] = y[m + 1 + offset]
        first = f1(tuple(y[i] for i in range(1, m + 1))) if m else f1
        second = f2(tuple(z[j] for j in range(m + 1, m + n + 1))) if n else f2
        return first * second

    return table


def diamond_product(g1: ConfigFunctional, g2: ConfigFunctional) -> ConfigFunctional:
    """The pairing-contracted product with weights ``(m+n-|kappa|)!/(m! n!)``.

    Scalar (order-0) parts multiply the other factor directly.
    """
    comps1 = [(0, g1.constant)] + sorted(g1.tables.items())
    comps2 = [(0, g2.constant)] + sorted(g2.tables.items())
    terms: dict[int, list[tuple[float, Callable]]] = {}
    constant = g1.constant * g2.constant
    for m, f1 in comps1:
        for n, f2 in comps2:
            if m == 0 and n == 0:
                continue
            for kappa in enumerate_pairings(m, n):
                order = m + n - len(kappa)
                weight = Fraction(math.factorial(order), math.factorial(m) * math.factorial(n))
                terms.setdefault(order, []).append((weight, contracted_tensor(f1, m, f2, n, kappa)))

    def make(parts):
        def table(ys):
            total = 0
            for w, t in parts:
                v = t(ys)
                if v:
                    total += (w if isinstance(v, (int, Fraction)) else float(w)) * v
            return total
        return table

    return ConfigFunctional(constant, {k: make(v) for k, v in terms.items()})


def k_transform(g: ConfigFunctional, gamma: Sequence[YPoint]):
    """``(KG)(gamma)``: sum of ``G`` over all finite sub-configurations, ∅ included."""
    gamma = tuple(gamma)
    if len(gamma) > MAX_PARTITION_N:
        raise ValueError("configuration too large for exhaustive K-transform")
    top = min(len(gamma), g.max_order)
    total = g.constant
    for k in range(1, top + 1):
        for sub in itertools.combinations(gamma, k):
            total += g(sub)
    return total


def configuration_points(eta) -> list[YPoint]:
    """Lift a discrete measure to its list of ``(x, s)`` points."""
    return [(tuple(float(c) for c in x), float(s)) for x, s in zip(eta.locations, eta.weights)]


# ---------------------------------------------------------------------------
# R-lift and Wick polynomials


def r_lift(g: Callable[..., float], powers: Sequence[int]) -> Callable[..., float]:
    """Lift ``g`` on ``X^n`` to ``X^I``, ``I = sum(powers)``.

    The lift evaluates ``g`` at the first coordinate of each consecutive
    block (block sizes ``powers``) and vanishes unless every block is constant.
    """
    powers = tuple(int(i) for i in powers)
    if any(i < 1 for i in powers):
        raise ValueError("powers must be >= 1")
    starts = [sum(powers[:j]) for j in range(len(powers))]

    def lifted(*xs):
        if len(xs) != sum(powers):
            raise ValueError(f"expected {sum(powers)} arguments, got {len(xs)}")
        for start, size in zip(starts, powers):
            head = xs[start]
            for other in xs[start + 1:start + size]:
                if not _same_point(head, other):
                    return 0.0
        return g(*(xs[s] for s in starts))

    return lifted


def _same_point(a, b) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    return tuple(a) == tuple(b)


def _pair(omega, phi) -> float:
    return float(sum(s * phi(x) for x, s in zip(omega.locations, omega.weights)))


def wick_pairing(omega, phis: Sequence[Callable]) -> float:
    """Wick polynomial of ``omega`` paired with ``phi_1 (x) ... (x) phi_n``.

    Computed by the recursion

        <:w^n:, f_1..f_n> = n^-2 [ sum_i <w,f_i> <:w^(n-1):, f without f_i>
                                   - 2 sum_{i<j} <w,f_i> <:w^(n-1):, f with f_i -> f_j f_i, f_j removed> ]

    starting from ``<:w:, f> = <w, f>``.  Only product test functions are
    supported.
    """
    phis = list(phis)
    n = len(phis)
    if not 1 <= n <= MAX_PAIRING_SIZE:
        raise ValueError("wick_pairing supports 1 <= n <= 6")
    return _wick(omega, phis)


def _wick(omega, phis):
    n = len(phis)
    if n == 1:
        return _pair(omega, phis[0])
    first = 0.0
    for i in range(n):
        first += _pair(omega, phis[i]) * _wick(omega, phis[:i] + phis[i + 1:])
    second = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            fi, fj = phis[i], phis[j]
            merged = list(phis)
            merged[i] = (lambda x, fi=fi, fj=fj: fj(x) * fi(x))
            del merged[j]
            second += _pair(omega, fi) * _wick(omega, merged)
    return (first - 2.0 * second) / n**2


def iter_subsets(items: Sequence, max_size: int | None = None) -> Iterable[tuple]:
    top = len(items) if max_size is None else min(max_size, len(items))
    for k in range(top + 1):
        yield from itertools.combinations(items, k)
