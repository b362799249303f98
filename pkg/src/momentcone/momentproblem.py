"""One-dimensional and multi-index moment-problem numerics.

Positive semidefiniteness of moment matrices, the Stieltjes shifted test,
the determinant series that detects an atom at zero, Carleman partial sums,
and Gauss quadrature reconstruction of a finitely atomic measure from its
moments.  Determinants and the recurrence coefficients are computed with
``mpmath`` at 60 significant digits; eigenvalue tests run in double
precision after diagonal equilibration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

from .moments import MultiIndexSequence

PSD_RTOL = 1e-8
DEGENERACY_CUTOFF = 2e-13
ZERO_NODE_TOL = 1e-6
NOISE_SIGMAS = 3.0
WORKING_DIGITS = 60

# atom-at-zero series, all levels relative to r_0: the Christoffel bound
# resolves "no atom" below ATOM_RESOLUTION; the extrapolated limit decides above
ATOM_RESOLUTION = 0.15
DIVERGING_LEVEL = 0.02
CONVERGING_LEVEL = 0.05
_ALPHA_GRID = np.arange(-0.99, 8.0, 0.01)


class IndefiniteMoments(ValueError):
    """The moment data cannot come from a positive measure (beyond tolerance)."""


# ---------------------------------------------------------------------------
# PSD tests


@dataclass
class PsdReport:
    size: int
    min_eigenvalue: float
    tolerance: float
    passed: bool
    noise: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _equilibrate(matrix: np.ndarray, noise: np.ndarray | None):
    d = np.diag(matrix).copy()
    scale = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 1.0)
    h = matrix * scale[:, None] * scale[None, :]
    e = None if noise is None else np.abs(noise) * scale[:, None] * scale[None, :]
    return h, e


def psd_report(matrix, noise=None, rtol: float = PSD_RTOL, sigmas: float = NOISE_SIGMAS) -> PsdReport:
    """PSD test of a symmetric matrix after scaling to unit diagonal.

    Passes iff ``min eig >= -(rtol (1 + ||H||) + sigmas ||E||)``, where ``E`` is
    the entrywise standard error (scaled the same way).  By Weyl's inequality a
    perturbation of spectral norm ``||E||`` moves each eigenvalue at most that far.
    """
    h = np.asarray(matrix, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("need a square matrix")
    if not np.all(np.isfinite(h)):
        raise ValueError("moment matrix has non-finite entries")
    e = None if noise is None else np.nan_to_num(np.asarray(noise, dtype=float), nan=0.0)
    hs, es = _equilibrate(0.5 * (h + h.T), e)
    eig = np.linalg.eigvalsh(hs)
    noise_norm = 0.0 if es is None else float(np.linalg.norm(es, 2)) * sigmas
    tol = rtol * (1.0 + float(np.max(np.abs(eig)))) + noise_norm
    return PsdReport(h.shape[0], float(eig[0]), tol, bool(eig[0] >= -tol), noise_norm)


def hankel(r: Sequence[float], size: int, shift: int = 0) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.array([[r[i + j + shift] for j in range(size)] for i in range(size)])


def hankel_psd(r, N: int, noise=None, rtol: float = PSD_RTOL, sigmas: float = NOISE_SIGMAS) -> PsdReport:
    """PSD test of ``[r_{i+j}]_{i,j=0..N}``."""
    if len(r) < 2 * N + 1:
        raise ValueError(f"need at least {2 * N + 1} moments, got {len(r)}")
    return psd_report(hankel(r, N + 1), None if noise is None else hankel(noise, N + 1), rtol, sigmas)


def stieltjes_shifted_psd(r, N: int, noise=None, rtol: float = PSD_RTOL, sigmas: float = NOISE_SIGMAS) -> PsdReport:
    """PSD test of the shifted matrix ``[r_{i+j+1}]_{i,j=0..N}`` (support in ``[0, inf)``)."""
    if len(r) < 2 * N + 2:
        raise ValueError(f"need at least {2 * N + 2} moments, got {len(r)}")
    return psd_report(hankel(r, N + 1, 1), None if noise is None else hankel(noise, N + 1, 1), rtol, sigmas)


def box_indices(n: int, N: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(N + 1), repeat=n))


def multiindex_psd(seq: MultiIndexSequence, N: int, use_noise: bool = True, rtol: float = PSD_RTOL,
                   sigmas: float = NOISE_SIGMAS) -> PsdReport:
    """PSD test of ``[xi_{i+j}]`` over multi-indices ``i, j`` in ``{0..N}^n``."""
    n = seq.n
    if seq.max_total_degree < 2 * N * n:
        raise ValueError(f"sequence has degree {seq.max_total_degree}, need {2 * N * n}")
    idx = box_indices(n, N)
    mat = np.array([[seq[tuple(a + b for a, b in zip(i, j))] for j in idx] for i in idx])
    noise = None
    if use_noise and seq.kind == "empirical":
        noise = np.array([[seq.stderr(tuple(a + b for a, b in zip(i, j))) for j in idx] for i in idx])
    return psd_report(mat, noise, rtol, sigmas)


# ---------------------------------------------------------------------------
# quadrature


@dataclass
class QuadratureMeasure:
    """Finitely atomic measure ``sum_j w_j delta_{t_j}`` on the real line."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def __len__(self) -> int:
        return self.nodes.size

    def moments(self, count: int) -> np.ndarray:
        return np.array([float(np.sum(self.weights * self.nodes ** i)) for i in range(count)])

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def zero_node(self, tol: float = ZERO_NODE_TOL) -> int | None:
        """Index of a node within ``tol * max(1, max|t|)`` of zero, if any."""
        if not len(self):
            return None
        limit = tol * max(1.0, float(np.max(np.abs(self.nodes))))
        j = int(np.argmin(np.abs(self.nodes)))
        return j if abs(self.nodes[j]) <= limit else None

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "weights": self.weights.tolist()}


def _recurrence(r: Sequence[float], max_nodes: int, cutoff: float):
    """Chebyshev algorithm: three-term recurrence coefficients from ordinary moments.

    Returns ``(alpha, beta, rank)`` in mpmath numbers; ``rank`` is the number of
    usable coefficients before the Hankel determinants degenerate.
    """
    mu = [mpmath.mpf(float(x)) for x in r]
    count = len(mu)
    n = min(max_nodes, count // 2)
    if mu[0] <= 0:
        raise IndefiniteMoments("zeroth moment must be positive")
    alpha, beta = [mu[1] / mu[0]], [mu[0]]
    prev = [mpmath.mpf(0)] * (count + 1)
    cur = list(mu) + [mpmath.mpf(0)]
    for k in range(1, n):
        nxt = [mpmath.mpf(0)] * (count + 1)
        for l in range(k, count - k):
            nxt[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l]
        # nxt[k] = D_k / D_{k-1}, the squared norm of the monic orthogonal polynomial
        if mu[2 * k] <= 0 or nxt[k] <= cutoff * mu[2 * k]:
            if nxt[k] < -cutoff * abs(mu[2 * k]):
                raise IndefiniteMoments(f"Hankel determinant of order {k} is negative")
            return alpha, beta, k
        alpha.append(nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1])
        beta.append(nxt[k] / cur[k - 1])
        prev, cur = cur, nxt
    return alpha, beta, n


def quadrature_from_moments(r: Sequence[float], max_nodes: int | None = None,
                            cutoff: float = DEGENERACY_CUTOFF) -> QuadratureMeasure:
    """Gauss rule with ``k`` nodes matching ``r_0 .. r_{2k-1}``.

    ``k`` is ``len(r) // 2`` unless the Hankel determinants degenerate earlier,
    in which case the rank-limited rule is returned.
    """
    r = list(r)
    if len(r) < 2:
        raise ValueError("need at least two moments")
    max_nodes = len(r) // 2 if max_nodes is None else min(max_nodes, len(r) // 2)
    with mpmath.workdps(WORKING_DIGITS):
        alpha, beta, k = _recurrence(r, max_nodes, cutoff)
        jac = mpmath.zeros(k, k)
        for i in range(k):
            jac[i, i] = alpha[i]
            if i + 1 < k:
                jac[i, i + 1] = jac[i + 1, i] = mpmath.sqrt(beta[i + 1])
        evals, evecs = mpmath.eigsy(jac)
        nodes = [float(evals[i]) for i in range(k)]
        weights = [float(beta[0] * evecs[0, i] ** 2) for i in range(k)]
    order = np.argsort(nodes)
    nodes, weights = np.array(nodes)[order], np.array(weights)[order]
    keep = weights > 0
    return QuadratureMeasure(nodes[keep], weights[keep])


# ---------------------------------------------------------------------------
# atom-at-zero series


@dataclass
class HankelReport:
    """Audit trail of the determinant series ``sum_k E_k^2 / (D_{k-1} D_k)``.

    ``D_k = det[r_{i+j}]_{0..k}``, ``E_k = det[r_{i+j+1}]_{0..k-1}`` (``E_0 = 1``,
    ``D_{-1} = 1``).  The summand is ``P_k(0)^2`` for the orthonormal polynomials of
    the representing measure, so ``1 / partial_sum`` bounds its mass at zero from
    above and the series diverges exactly when there is no atom at zero.
    """

    order: int
    min_eig_hankel: float
    min_eig_shifted: float
    hankel_passed: bool
    shifted_passed: bool
    determinants: list[float]
    shifted_determinants: list[float]
    partial_sums: list[float]
    christoffel: list[float]
    degenerate_rank: int | None
    trend: str
    outcome: str
    atom_mass_estimate: float
    quadrature: dict | None = None
    bound_resolved: bool = False
    tolerances: dict = field(default_factory=dict)

    @property
    def definitive(self) -> bool:
        return self.degenerate_rank is not None or self.bound_resolved

    @property
    def atom_at_zero(self) -> bool | None:
        return {"atom": True, "no_atom": False}.get(self.outcome)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["definitive"] = self.definitive
        return out


def _trend(christoffel: Sequence[float], r0: float) -> tuple[str, float]:
    """Extrapolate ``c_k`` to ``k -> inf`` and classify the limit.

    For a density behaving like ``s^alpha e^-s`` the Christoffel function at 0
    is exactly ``b * k! / Gamma(k + alpha + 2)``, and a mass at 0 adds a
    constant.  The fit ``c_k = a + b k!/Gamma(k + alpha + 2)`` (least squares in
    ``a, b``, grid in ``alpha``) returns the limit ``a``.
    """
    c = np.asarray(christoffel, dtype=float)
    if c.size < 4:
        return "inconclusive", float("nan")
    ks = np.arange(c.size)
    best = (np.inf, float("nan"))
    for alpha in _ALPHA_GRID:
        design = np.column_stack([np.ones(ks.size), np.exp(gammaln(ks + 1) - gammaln(ks + alpha + 2))])
        coef, *_ = np.linalg.lstsq(design, c, rcond=None)
        resid = float(np.sum((design @ coef - c) ** 2))
        if resid < best[0]:
            best = (resid, float(coef[0]))
    a = best[1]
    if a <= DIVERGING_LEVEL * r0:
        return "diverging", max(a, 0.0)
    if a >= CONVERGING_LEVEL * r0:
        return "converging", a
    return "inconclusive", a


def atom_at_zero_series(r: Sequence[float], K: int, degeneracy_cutoff: float = DEGENERACY_CUTOFF,
                        noise: Sequence[float] | None = None, zero_tol: float = ZERO_NODE_TOL,
                        rtol: float = PSD_RTOL, sigmas: float = NOISE_SIGMAS) -> HankelReport:
    """Decide whether the measure with moments ``r`` has an atom at 0.

    Nondegenerate data: no atom when the bound ``1/partial_sum`` is at most
    ``ATOM_RESOLUTION * r_0``, otherwise the extrapolated limit decides.  When
    some ``D_k`` falls below ``cutoff * D_{k-1} r_{2k}`` (or below the noise floor for
    estimated moments) the measure is treated as having ``k`` atoms and the
    answer comes from the Gauss rule's nodes.
    """
    r = [float(x) for x in r]
    if len(r) < 2 * K + 1:
        raise ValueError(f"need {2 * K + 1} moments, got {len(r)}")
    if not r[0] > 0:
        raise ValueError("r_0 must be positive")
    noise_arr = None if noise is None else np.nan_to_num(np.asarray(noise, dtype=float), nan=0.0)
    full = psd_report(hankel(r, K + 1), None if noise_arr is None else hankel(noise_arr, K + 1), rtol, sigmas)
    shifted = psd_report(hankel(r, K, 1), None if noise_arr is None else hankel(noise_arr, K, 1), rtol, sigmas) if K > 0 \
        else PsdReport(0, float("inf"), 0.0, True)

    dets, sdets, sums, chris = [], [], [], []
    rank = None
    with mpmath.workdps(WORKING_DIGITS):
        mr = [mpmath.mpf(x) for x in r]
        total = mpmath.mpf(0)
        d_prev = mpmath.mpf(1)
        for k in range(K + 1):
            d_k = mpmath.det(mpmath.matrix([[mr[i + j] for j in range(k + 1)] for i in range(k + 1)]))
            e_k = mpmath.det(mpmath.matrix([[mr[i + j + 1] for j in range(k)] for i in range(k)])) if k else mpmath.mpf(1)
            dets.append(float(d_k))
            sdets.append(float(e_k))
            degenerate = mr[2 * k] <= 0 or d_k <= degeneracy_cutoff * d_prev * mr[2 * k]
            if not degenerate and noise_arr is not None and k > 0:
                sub = psd_report(hankel(r, k + 1), hankel(noise_arr, k + 1), rtol, sigmas)
                degenerate = sub.min_eigenvalue <= sub.noise
            if degenerate:
                rank = k
                break
            total += e_k ** 2 / (d_prev * d_k)
            sums.append(float(total))
            chris.append(float(1 / total))
            d_prev = d_k

    tolerances = {"psd_rtol": rtol, "degeneracy_cutoff": degeneracy_cutoff, "zero_node_tol": zero_tol,
                  "noise_sigmas": sigmas if noise_arr is not None else 0.0,
                  "atom_resolution": ATOM_RESOLUTION, "diverging_level": DIVERGING_LEVEL,
                  "converging_level": CONVERGING_LEVEL}
    common = dict(order=K, min_eig_hankel=full.min_eigenvalue, min_eig_shifted=shifted.min_eigenvalue,
                  hankel_passed=full.passed, shifted_passed=shifted.passed, determinants=dets,
                  shifted_determinants=sdets, partial_sums=sums, christoffel=chris, tolerances=tolerances)
    if rank is not None:
        if rank == 0:
            raise ValueError("r_0 is numerically zero")
        quad = quadrature_from_moments(r[: 2 * rank], max_nodes=rank, cutoff=degeneracy_cutoff)
        j = quad.zero_node(zero_tol)
        mass = float(quad.weights[j]) if j is not None else 0.0
        return HankelReport(degenerate_rank=rank, trend="degenerate",
                            outcome="atom" if j is not None else "no_atom",
                            atom_mass_estimate=mass, quadrature=quad.to_dict(), **common)
    trend, mass = _trend(chris, r[0])
    # c_K >= mass at zero, so a small bound settles the question without extrapolation
    resolved = chris[-1] <= ATOM_RESOLUTION * r[0]
    if resolved or trend == "diverging":
        outcome = "no_atom"
    elif trend == "converging":
        outcome = "atom"
    else:
        outcome = "inconclusive"
    return HankelReport(degenerate_rank=None, trend=trend, outcome=outcome, atom_mass_estimate=mass,
                        bound_resolved=bool(resolved), **common)


# ---------------------------------------------------------------------------
# Carleman


@dataclass
class CarlemanReport:
    terms: list[float]
    partial_sums: list[float]
    trend: str

    @property
    def passed(self) -> bool | None:
        return {"diverging": True, "converging": False}.get(self.trend)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def carleman_check(r: Sequence[float], K: int) -> CarlemanReport:
    """Partial sums of ``r_{2k}^(-1/(2k))``, ``k = 1..K``, with a trend label.

    Geometric decay of the terms means convergence (the check fails); terms that
    stay above ``const / k`` mean harmonic-type divergence (the check passes).
    """
    if len(r) < 2 * K + 1:
        raise ValueError(f"need {2 * K + 1} moments, got {len(r)}")
    even = [float(r[2 * k]) for k in range(1, K + 1)]
    if any(not v > 0 for v in even):
        raise ValueError("even moments must be positive")
    terms = [math.exp(-math.log(v) / (2 * k)) for k, v in enumerate(even, 1)]
    sums = list(np.cumsum(terms))
    tail = np.asarray(terms[len(terms) // 2:])
    ks = np.arange(K - tail.size + 1, K + 1)
    trend = "inconclusive"
    if tail.size >= 2:
        ratios = tail[1:] / tail[:-1]
        scaled = tail * ks
        if np.max(ratios) < 0.75:
            trend = "converging"
        elif np.min(scaled) >= 0.5 * np.max(scaled) or np.all(np.diff(scaled) >= 0):
            trend = "diverging"
    return CarlemanReport(terms, [float(s) for s in sums], trend)
