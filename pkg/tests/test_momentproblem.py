import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import UNIT
from momentcone.measures import OffDiagonalBox
from momentcone.models import Gamma
from momentcone.momentproblem import (
    IndefiniteMoments,
    atom_at_zero_series,
    carleman_check,
    hankel_psd,
    multiindex_psd,
    quadrature_from_moments,
    stieltjes_shifted_psd,
)
from momentcone.moments import MomentSource, xi_sequence

FACT = [float(math.factorial(i)) for i in range(17)]


def moments_of(nodes, weights, count):
    nodes, weights = np.asarray(nodes, float), np.asarray(weights, float)
    return [float(np.sum(weights * nodes ** i)) for i in range(count)]


atomic = st.integers(1, 6).flatmap(lambda k: st.tuples(
    st.lists(st.integers(0, 100).map(lambda j: j * 0.05), min_size=k, max_size=k, unique=True),
    st.lists(st.floats(0.05, 2.0), min_size=k, max_size=k)))


# --- PSD tests -------------------------------------------------------------

def test_gamma_hankel_positive_definite():
    seq = xi_sequence(MomentSource.analytic(Gamma(1.0)), OffDiagonalBox.power(UNIT, 1), 8)
    rep = multiindex_psd(seq, 4)
    assert rep.passed and rep.min_eigenvalue > 0


def test_rank_one_and_parity_sequences():
    assert hankel_psd([1.0] + [0.0] * 8, 4).passed
    assert hankel_psd([1.0, 0.0, 1.0], 1).passed
    assert not stieltjes_shifted_psd([1.0, 0.0, 1.0, 0.0], 1).passed


def test_stieltjes_examples():
    assert stieltjes_shifted_psd(FACT, 1).passed
    np.testing.assert_allclose(np.linalg.eigvalsh([[1, 2], [2, 6]]) > 0, True)
    assert stieltjes_shifted_psd([1.0] * 6, 2).passed
    assert not stieltjes_shifted_psd([(-1.0) ** i for i in range(4)], 1).passed


def test_psd_needs_enough_moments():
    with pytest.raises(ValueError):
        hankel_psd([1.0, 2.0], 1)
    seq = xi_sequence(MomentSource.analytic(Gamma(1.0)), OffDiagonalBox.power(UNIT, 2), 2)
    with pytest.raises(ValueError):
        multiindex_psd(seq, 1)


@given(atomic)
def test_stieltjes_passes_for_positive_measures(measure):
    nodes, weights = measure
    r = moments_of(nodes, weights, 8)
    assert stieltjes_shifted_psd(r, 3).passed
    assert hankel_psd(r, 3).passed


@given(atomic, st.floats(0.2, 3.0), st.floats(0.1, 1.0))
def test_stieltjes_fails_with_negative_node(measure, where, weight):
    nodes, weights = measure
    r = moments_of(list(nodes) + [-where], list(weights) + [weight], 16)
    # the shifted form is <p, t p> so a negative node shows once p can isolate it
    assert not stieltjes_shifted_psd(r, len(nodes)).passed


# --- quadrature ------------------------------------------------------------

def test_quadrature_examples():
    q = quadrature_from_moments([2.0 ** i for i in range(6)])
    np.testing.assert_allclose(q.nodes, [2.0], atol=1e-10)
    np.testing.assert_allclose(q.weights, [1.0], atol=1e-10)
    q = quadrature_from_moments([1.0] + [0.5] * 5)
    np.testing.assert_allclose(q.nodes, [0.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(q.weights, [0.5, 0.5], atol=1e-10)


def test_quadrature_gauss_laguerre():
    q = quadrature_from_moments(FACT[:6], max_nodes=3)
    x, w = np.polynomial.laguerre.laggauss(3)
    np.testing.assert_allclose(q.nodes, x, atol=1e-8)
    np.testing.assert_allclose(q.weights, w, atol=1e-8)


def test_quadrature_rejects_indefinite():
    with pytest.raises(IndefiniteMoments):
        quadrature_from_moments([1.0, 0.0, -1.0, 0.0])


@pytest.mark.parametrize("seed", range(100))
def test_quadrature_regenerates_moments(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 7))
    nodes = rng.choice(np.linspace(0, 5, 101), size=k, replace=False)
    weights = rng.uniform(0.05, 2.0, k)
    r = moments_of(nodes, weights, 2 * k + 2)
    q = quadrature_from_moments(r)
    assert len(q) == k
    got = q.moments(2 * k)
    assert np.all(np.abs(got - r[:2 * k]) <= 1e-9 * np.maximum(1.0, np.abs(r[:2 * k])))
    assert q.total_mass() == pytest.approx(r[0], rel=1e-10)


# --- atom at zero ----------------------------------------------------------

def test_atom_examples():
    exp1 = atom_at_zero_series(FACT, 6)
    assert exp1.outcome == "no_atom" and exp1.degenerate_rank is None
    assert np.all(np.diff(exp1.partial_sums) > 0)
    half = atom_at_zero_series([1.0] + [0.5] * 10, 5)
    assert half.degenerate_rank == 2 and half.outcome == "atom"
    assert half.atom_mass_estimate == pytest.approx(0.5)
    unit = atom_at_zero_series([1.0] * 11, 5)
    assert unit.degenerate_rank == 1 and unit.outcome == "no_atom"


def test_diffuse_sequence_is_atom_at_zero():
    rep = atom_at_zero_series([2.0] + [0.0] * 10, 5)
    assert rep.outcome == "atom" and rep.atom_mass_estimate == pytest.approx(2.0)


def test_converging_trend_finds_hidden_atom():
    # gamma intensity moments plus a quarter unit of mass at zero
    r = [FACT[0] + 0.25] + FACT[1:11]
    rep = atom_at_zero_series(r, 5)
    assert rep.trend == "converging" and rep.outcome == "atom"
    assert rep.atom_mass_estimate == pytest.approx(0.25, abs=0.03)


def test_series_input_checks():
    with pytest.raises(ValueError):
        atom_at_zero_series([1.0, 1.0], 2)
    with pytest.raises(ValueError):
        atom_at_zero_series([0.0] * 11, 5)


@given(atomic)
def test_partial_sums_nondecreasing(measure):
    nodes, weights = measure
    rep = atom_at_zero_series(moments_of(nodes, weights, 11), 5)
    assert np.all(np.diff(rep.partial_sums) >= 0)
    # the reciprocal partial sum bounds the mass at zero from above
    mass0 = sum(w for x, w in zip(nodes, weights) if x == 0.0)
    if rep.christoffel:
        assert rep.christoffel[-1] >= mass0 * (1 - 1e-9)


def random_case(rng, max_atoms):
    k = int(rng.integers(1, max_atoms + 1))
    nodes = rng.uniform(0.05, 5.0, k)
    has_zero = bool(rng.random() < 0.5)
    if has_zero:
        nodes[0] = 0.0
    return nodes, rng.uniform(0.05, 1.0, k), has_zero


# K <= 6 keeps the per-step determinant ratios of double-precision moments resolvable
@pytest.mark.parametrize("K", [3, 5, 6])
def test_atom_at_zero_random_ensemble(K):
    rng = np.random.default_rng(20 + K)
    wrong = []
    for _ in range(200):
        nodes, weights, has_zero = random_case(rng, K)
        rep = atom_at_zero_series(moments_of(nodes, weights, 2 * K + 1), K)
        if rep.atom_at_zero is not has_zero:
            wrong.append((nodes.round(3).tolist(), rep.outcome))
    assert not wrong


# --- Carleman --------------------------------------------------------------

def test_carleman_examples():
    assert carleman_check(FACT, 8).passed is True
    assert carleman_check([2.0 ** i for i in range(17)], 8).passed is True
    fast = [math.exp(i * i) if i % 2 == 0 else 1.0 for i in range(17)]
    assert carleman_check(fast, 8).passed is False


def test_carleman_needs_positive_even_moments():
    with pytest.raises(ValueError):
        carleman_check([1.0, 0.0, 0.0, 0.0, 1.0], 2)
