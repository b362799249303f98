import json
import math

import numpy as np
import pytest
from scipy.special import exp1

from conftest import UNIT, cached_batch
from momentcone.combinatorics import ConfigFunctional
from momentcone.correlation import (
    DISCRETE,
    NOT_DISCRETE,
    POINT_PROCESS,
    Tolerances,
    correlation_family,
    direct_correlation_integral,
    discreteness_verdict,
    flatness,
    generalized_correlation,
    lb_check,
    mean_k_square,
    pd_check,
    point_process_verdict,
    product_box,
    random_s_functional,
    recover_rho,
    recover_xi_delta,
)
from momentcone.measures import DiscreteMeasure, OffDiagonalBox, SampleBatch, Window, window_ladder
from momentcone.models import DeterministicDiffuse, FixedAtoms, Gamma, PoissonPP, WeightLaw, sample_many
from momentcone.moments import MomentSource, moment

TWO = Window((0.0,), (2.0,))
LADDER = window_ladder([0.5, 1.0])


def s_band(a, b):
    return lambda x, s: s[:, 0] * ((s[:, 0] >= a) & (s[:, 0] <= b))


# --- reconstruction --------------------------------------------------------

def test_xi_marginal_for_gamma_is_gauss_laguerre():
    rec = recover_xi_delta(MomentSource.analytic(Gamma(1.0)), OffDiagonalBox.power(UNIT, 1), 6)
    x, w = np.polynomial.laguerre.laggauss(3)
    np.testing.assert_allclose(rec.marginals[0].nodes, x, atol=1e-8)
    np.testing.assert_allclose(rec.marginals[0].weights, w, atol=1e-8)
    assert rec.joint is None


def test_xi_marginals_poisson_and_diffuse():
    poisson = recover_xi_delta(MomentSource.analytic(PoissonPP(2.0)), OffDiagonalBox.power(UNIT, 1), 6)
    np.testing.assert_allclose(poisson.marginals[0].nodes, [1.0])
    np.testing.assert_allclose(poisson.marginals[0].weights, [2.0])
    diffuse = recover_xi_delta(MomentSource.analytic(DeterministicDiffuse(1.0)), OffDiagonalBox.power(UNIT, 1), 6)
    np.testing.assert_allclose(diffuse.marginals[0].nodes, [0.0], atol=1e-12)
    np.testing.assert_allclose(diffuse.marginals[0].weights, [1.0])


def test_xi_joint_consistency_for_fixed_atoms():
    model = FixedAtoms((((0.2,), WeightLaw.deterministic(2.0)), ((0.6,), WeightLaw.deterministic(0.5))))
    src = MomentSource.empirical(sample_many(model, UNIT, 0, 20))
    rec = recover_xi_delta(src, OffDiagonalBox.power(UNIT, 2), 4)
    assert rec.consistency < 1e-12
    assert len(rec.joint) == 2 * 20
    json.dumps(rec.to_dict())


def test_gamma_rho_one_band_integral(gamma_unit_batch):
    est = recover_rho(MomentSource.empirical(gamma_unit_batch), 1, UNIT)
    got = est.integrate(s_band(0.5, 1.5))
    want = math.exp(-0.5) - math.exp(-1.5)
    assert abs(got.value - want) <= max(0.05 * want, 3 * got.stderr)
    assert est.representation == "atomic" and len(est.cells) == 2


def test_gamma_rho_two_weight_product():
    batch = cached_batch(Gamma(1.0), UNIT, 13, 4000, 1e-3)
    est = recover_rho(MomentSource.empirical(batch), 2, UNIT)
    got = est.s_moment((1, 1))
    assert abs(got.value - 0.5) <= max(0.025, 3 * got.stderr)


def test_analytic_rho_uses_moments():
    est = recover_rho(MomentSource.analytic(Gamma(1.0)), 2, UNIT)
    assert est.representation == "functional"
    assert est.s_moment((1, 1)).value == pytest.approx(0.5)
    with pytest.raises(ValueError):
        est.integrate(s_band(0, 1))


def test_unit_weight_rho_is_moment_over_factorial(poisson_batch):
    src = MomentSource.empirical(poisson_batch)
    for n in (1, 2, 3):
        est = recover_rho(src, n, UNIT)
        want = moment(src, (1,) * n, OffDiagonalBox.power(UNIT, n)).value / math.factorial(n)
        assert est.atomic.total_mass().value == pytest.approx(want, rel=1e-12)


def test_pipeline_matches_direct_integral(poisson_batch):
    est = recover_rho(MomentSource.empirical(poisson_batch), 2, TWO)
    f = product_box([Window((0.0,), (0.7,)), Window((0.5,), (2.0,))], [(0.5, 1.5), (0.5, 1.5)])
    sym = lambda x, s: 0.5 * (f(x, s) + f(x[:, ::-1], s[:, ::-1]))
    assert est.integrate(sym).value == pytest.approx(direct_correlation_integral(poisson_batch, 2, sym, TWO).value,
                                                     rel=1e-12)


def test_recover_rho_rejects_bad_order():
    with pytest.raises(ValueError):
        recover_rho(MomentSource.analytic(Gamma(1.0)), 0, UNIT)


# --- verdicts --------------------------------------------------------------

@pytest.mark.parametrize("model,want", [
    (Gamma(1.0), DISCRETE),
    (DeterministicDiffuse(1.0), NOT_DISCRETE),
    (FixedAtoms(((0.3, 2.0), (-0.7, 0.5))), DISCRETE),
])
def test_discreteness_verdict_examples(model, want):
    v = discreteness_verdict(MomentSource.analytic(model), LADDER)
    assert v.outcome == want


def test_point_process_verdicts():
    assert point_process_verdict(MomentSource.analytic(PoissonPP(1.0)), LADDER).outcome == POINT_PROCESS
    assert point_process_verdict(MomentSource.analytic(Gamma(1.0)), LADDER).outcome == DISCRETE


def test_empirical_poisson_is_point_process(poisson_batch):
    inner = [Window((0.0,), (1.0,)), TWO]
    v = point_process_verdict(MomentSource.empirical(poisson_batch), inner, shrink_ladder=[])
    assert v.outcome == POINT_PROCESS


def test_verdict_outcome_agrees_with_cells():
    v = discreteness_verdict(MomentSource.analytic(DeterministicDiffuse(1.0)), LADDER)
    assert any(c["status"] == "fail" and c["definitive"] for c in v.cells)
    good = discreteness_verdict(MomentSource.analytic(Gamma(1.0)), LADDER)
    assert all(c["status"] in ("pass", "vacuous") for c in good.cells)


def test_verdict_json_round_trip():
    v = point_process_verdict(MomentSource.analytic(PoissonPP(1.0)), LADDER, seeds={"sampling": 3})
    data = json.loads(v.to_json())
    assert data["outcome"] == POINT_PROCESS
    assert data["seeds"] == {"sampling": 3}
    assert {"psd_rtol", "degeneracy_cutoff", "noise_sigmas"} <= set(data["tolerances"])
    assert sum(data["status_counts"].values()) == len(data["cells"])


def test_verdict_is_deterministic():
    a = discreteness_verdict(MomentSource.analytic(Gamma(1.0)), LADDER).to_json()
    assert discreteness_verdict(MomentSource.analytic(Gamma(1.0)), LADDER).to_json() == a


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError, match="psd_rtol"):
        Tolerances(psd_rtol=0.0)
    with pytest.raises(ValueError, match="noise_sigmas"):
        Tolerances(noise_sigmas=-1.0)


def test_flatness_examples():
    box = OffDiagonalBox.power(UNIT, 2)
    assert flatness(MomentSource.analytic(PoissonPP(1.0)), box)["flat"]
    gamma = flatness(MomentSource.analytic(Gamma(1.0)), box)
    assert not gamma["flat"] and gamma["statistic"] > 0


# --- positive definiteness and the lower bound ----------------------------

@pytest.mark.parametrize("seed", range(5))
def test_pd_equals_mean_k_square(seed):
    batch = sample_many(PoissonPP(1.0), TWO, seed, 60)
    g = random_s_functional(np.random.default_rng(seed), TWO, 2)
    family = correlation_family(batch, 4, TWO)
    assert pd_check(family, g) == pytest.approx(mean_k_square(batch, g, TWO), rel=1e-10, abs=1e-10)
    assert pd_check(family, g) >= 0


def test_pd_with_only_the_empty_set():
    batch = SampleBatch.from_measures([DiscreteMeasure.empty()] * 3, UNIT)
    g = ConfigFunctional(-1.5, {1: lambda pts: 4.0})
    assert pd_check(correlation_family(batch, 2, UNIT), g) == pytest.approx(2.25)


def test_lb_for_gamma():
    batch = cached_batch(Gamma(1.0), TWO, 21, 4000, 1e-3)
    ladder = [Window((0.0,), (2.0 / 2 ** j,)) for j in range(4)]
    rep = lb_check(batch, ladder, (0.5, 2.0))
    # atoms with weight in [0.5, 2] form a Poisson process of this rate
    lam = exp1(0.5) - exp1(2.0)
    for w, row, errs in zip(ladder, rep.masses, rep.mass_stderrs):
        mean = lam * w.volume()
        for n, (m, e) in enumerate(zip(row, errs), 1):
            assert abs(m - mean ** n / math.factorial(n)) <= 4 * e + 1e-3
    assert rep.shrinks


def test_lb_empty_and_single_atom():
    empty = lb_check(SampleBatch.from_measures([DiscreteMeasure.empty()] * 4, UNIT), [UNIT], (0.1, 5.0))
    assert empty.masses == [[0.0, 0.0, 0.0]] and empty.constants == [0.0]
    one = sample_many(FixedAtoms(((0.5, 1.0),)), UNIT, 0, 4)
    rep = lb_check(one, [UNIT], (0.5, 1.5))
    assert rep.masses == [[1.0, 0.0, 0.0]] and rep.constants == [1.0]


# --- Wick pairings ---------------------------------------------------------

def test_wick_first_order_is_exact(gamma_unit_batch):
    cmp = generalized_correlation(MomentSource.empirical(gamma_unit_batch), [lambda x: 1.0 + x[0]])
    assert cmp.left == pytest.approx(cmp.right, rel=1e-12)


def test_wick_single_unit_atom_vanishes():
    batch = sample_many(FixedAtoms(((0.5, 1.0),)), UNIT, 0, 3)
    cmp = generalized_correlation(MomentSource.empirical(batch), [lambda x: 1.0, lambda x: 1.0])
    assert cmp.left == 0.0 and cmp.right == 0.0


def test_wick_poisson_disjoint_supports(poisson_batch):
    phis = [lambda x: float(x[0] < 1.0), lambda x: 2.0 * float(x[0] >= 1.0)]
    cmp = generalized_correlation(MomentSource.empirical(poisson_batch), phis)
    assert cmp.agrees()
    assert cmp.right == pytest.approx(0.5 * 2.0 * 2 * 2.0, rel=0.1)


def test_wick_needs_samples():
    with pytest.raises(ValueError):
        generalized_correlation(MomentSource.analytic(Gamma(1.0)), [lambda x: 1.0])
