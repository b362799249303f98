"""Fast oracle checks that run without the test suite (``momentcone selftest``)."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from . import combinatorics as cb
from .measures import DiscreteMeasure, OffDiagonalBox, Window, distinct_tuple_sum
from .models import Gamma
from .momentproblem import atom_at_zero_series, quadrature_from_moments
from .moments import MomentSource, full_moment


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _bell() -> tuple[bool, str]:
    bell = [1]
    for n in range(10):
        bell.append(sum(math.comb(n, k) * bell[k] for k in range(n + 1)))
    got = [cb.bell_number(n) for n in range(1, 11)]
    enum = [len(cb.enumerate_partitions(n)) for n in range(1, 9)]
    ok = got == bell[1:] and enum == bell[1:9]
    return ok, f"Bell(1..10) = {got}"


def _gamma_moments() -> tuple[bool, str]:
    src = MomentSource.analytic(Gamma(1.0))
    w = Window((0.0,), (1.0,))
    got = [full_moment(src, n, w).value for n in range(1, 6)]
    want = [float(math.prod(1 + k for k in range(n))) for n in range(1, 6)]
    return got == want, f"E eta(L)^n = {got}"


def _distinct_tuples() -> tuple[bool, str]:
    eta = DiscreteMeasure.from_atoms([((0.0,), 2.0), ((1.0,), 3.0)])
    delta = OffDiagonalBox.power(Window((-1.0,), (2.0,)), 2)
    got = (distinct_tuple_sum(eta, delta, (1, 1)), distinct_tuple_sum(eta, delta, (2, 1)))
    return got == (12.0, 30.0), f"pair sums {got}"


def _laguerre() -> tuple[bool, str]:
    q = quadrature_from_moments([math.factorial(i) for i in range(6)], max_nodes=3)
    x, w = np.polynomial.laguerre.laggauss(3)
    err = max(np.max(np.abs(q.nodes - x)), np.max(np.abs(q.weights - w)))
    return err < 1e-8, f"max deviation from Gauss-Laguerre {err:.2e}"


def _atom_at_zero() -> tuple[bool, str]:
    cases = {
        "exp(1)": ([math.factorial(i) for i in range(11)], "no_atom"),
        "half at 0": ([1.0] + [0.5] * 10, "atom"),
        "unit at 1": ([1.0] * 11, "no_atom"),
        "diffuse": ([1.0] + [0.0] * 10, "atom"),
    }
    got = {k: atom_at_zero_series(r, 5).outcome for k, (r, _) in cases.items()}
    return all(got[k] == v for k, (_, v) in cases.items()), str(got)


def _k_transform() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    gamma = [((float(i),), Fraction(int(rng.integers(1, 5)))) for i in range(5)]

    def rand_g():
        tabs = {}
        for n in (1, 2):
            vals = {}

            def t(pts, vals=vals):
                key = frozenset(p[0] for p in pts)
                if key not in vals:
                    vals[key] = Fraction(int(rng.integers(-3, 4)))
                return vals[key] * math.prod(p[1] for p in pts)
            tabs[n] = t
        return cb.ConfigFunctional(Fraction(int(rng.integers(-2, 3))), tabs)

    g1, g2 = rand_g(), rand_g()
    lhs = cb.k_transform(cb.star_product(g1, g2), gamma)
    rhs = cb.k_transform(g1, gamma) * cb.k_transform(g2, gamma)
    return lhs == rhs, f"K(G1*G2) = {lhs}, KG1 KG2 = {rhs}"


def _zoo() -> tuple[bool, str]:
    from .correlation import INCONCLUSIVE, model_zoo, point_process_verdict

    wrong = []
    for entry in model_zoo():
        out = point_process_verdict(MomentSource.analytic(entry.model)).outcome
        if out not in (entry.expected, INCONCLUSIVE):
            wrong.append(f"{entry.name}: {out}")
    return not wrong, "all zoo verdicts consistent" if not wrong else "; ".join(wrong)


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "bell_numbers": _bell,
    "gamma_full_moments": _gamma_moments,
    "distinct_tuple_sums": _distinct_tuples,
    "gauss_laguerre": _laguerre,
    "atom_at_zero": _atom_at_zero,
    "k_transform_multiplicative": _k_transform,
    "analytic_zoo": _zoo,
}


def run(names=None) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported with its message
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
