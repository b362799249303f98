"""Correlation measures, reconstruction from moments, and the verdict engine.

The correlation measure ``rho^(n)`` of a random discrete measure lives on
``n``-tuples of marked points ``(x, s)``.  With ordered tuples and weight
``1/(S n!)`` per tuple and sample, integrating a symmetric function against
the atomic estimate equals the sample mean of its sum over unordered
sub-configurations.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .combinatorics import (
    ConfigFunctional,
    enumerate_partitions,
    k_transform,
    configuration_points,
    star_product_value,
    symmetrize,
    wick_pairing,
)
from .measures import (
    DEFAULT_LADDER,
    DEFAULT_SHRINK_LADDER,
    OffDiagonalBox,
    SampleBatch,
    Window,
    window_ladder,
)
from .models import (
    DeterministicDiffuse,
    FixedAtoms,
    Gamma,
    LevyIntensity,
    MarkedPoissonCRM,
    MeasureModel,
    Mixture,
    PoissonPP,
    WeightLaw,
    analytic_moment,
    thread_count,
)
from .momentproblem import (
    IndefiniteMoments,
    NOISE_SIGMAS,
    PSD_RTOL,
    DEGENERACY_CUTOFF,
    QuadratureMeasure,
    atom_at_zero_series,
    multiindex_psd,
    psd_report,
    quadrature_from_moments,
    stieltjes_shifted_psd,
)
from .moments import (
    DEFAULT_DEGREE_CAP,
    MomentSource,
    MomentValue,
    MultiIndexSequence,
    growth_constants,
    jackknife_stderr,
    per_sample_moment,
    xi_sequence,
)

DISCRETE = "Discrete"
NOT_DISCRETE = "NotDiscrete"
POINT_PROCESS = "PointProcess"
INCONCLUSIVE = "Inconclusive"

FLATNESS_RTOL = 1e-12


@dataclass(frozen=True)
class Tolerances:
    psd_rtol: float = PSD_RTOL
    degeneracy_cutoff: float = DEGENERACY_CUTOFF
    noise_sigmas: float = NOISE_SIGMAS

    def __post_init__(self):
        for name in ("psd_rtol", "degeneracy_cutoff", "noise_sigmas"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be > 0")


# ---------------------------------------------------------------------------
# tuple enumeration over sample batches


@lru_cache(maxsize=None)
def _perm_index(k: int, n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k), n)), dtype=np.int64).reshape(-1, n)


@lru_cache(maxsize=None)
def _comb_index(k: int, n: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(k), n)), dtype=np.int64).reshape(-1, n)


def _tuples(batch: SampleBatch, n: int, window: Window | None, ordered: bool):
    """All ordered (or unordered) ``n``-tuples of distinct atoms inside ``window``.

    Returns ``(points (T, n, d), marks (T, n), sample_index (T,))``.
    """
    keep = np.ones(batch.weights.size, bool) if window is None else window.contains(batch.locations)
    locs, w, sid = batch.locations[keep], batch.weights[keep], batch.sample_index[keep]
    d = batch.d
    if n == 1:
        return locs[:, None, :], w[:, None], sid
    offsets = np.searchsorted(sid, np.arange(batch.count + 1))
    counts = np.diff(offsets)
    pts, marks, owners = [], [], []
    for k in np.unique(counts):
        if k < n:
            continue
        samples = np.flatnonzero(counts == k)
        base = _perm_index(int(k), n) if ordered else _comb_index(int(k), n)
        idx = (offsets[samples][:, None, None] + base[None]).reshape(-1, n)
        pts.append(locs[idx])
        marks.append(w[idx])
        owners.append(np.repeat(samples, base.shape[0]))
    if not pts:
        return np.empty((0, n, d)), np.empty((0, n)), np.empty(0, np.int64)
    order = np.argsort(np.concatenate(owners), kind="stable")
    return np.concatenate(pts)[order], np.concatenate(marks)[order], np.concatenate(owners)[order]


def _in_delta(points: np.ndarray, delta: OffDiagonalBox) -> np.ndarray:
    n = delta.n
    ok = np.ones(points.shape[0], bool)
    for j, box in enumerate(delta.boxes):
        ok &= box.contains(points[:, j, :])
    if delta.exclusion_radius > 0:
        for a, b in itertools.combinations(range(n), 2):
            ok &= np.linalg.norm(points[:, a, :] - points[:, b, :], axis=1) > delta.exclusion_radius
    return ok


def _cell_ids(points: np.ndarray, window: Window, parts: int) -> np.ndarray:
    """Flat index of the grid cell of each point (half-open cells, last one closed)."""
    lo, hi = np.asarray(window.lower), np.asarray(window.upper)
    k = np.floor((points - lo) / (hi - lo) * parts).astype(np.int64)
    k = np.clip(k, 0, parts - 1)
    flat = np.zeros(points.shape[:-1], np.int64)
    for j in range(points.shape[-1]):
        flat = flat * parts + k[..., j]
    return flat


# ---------------------------------------------------------------------------
# atomic correlation measures


@dataclass(frozen=True)
class AtomicCorrelation:
    """Weighted tuples ``((x_1, s_1), .., (x_n, s_n))`` with distinct ``x``.

    When ``sample_index`` is set, tuple weights already include the ``1/S``
    factor and integrals carry a jackknife error over samples.  An
    ``unordered`` estimate stores each set once and symmetrizes integrands.
    """

    n: int
    points: np.ndarray
    marks: np.ndarray
    weights: np.ndarray
    sample_index: np.ndarray | None = None
    sample_count: int = 0
    unordered: bool = False

    def __post_init__(self):
        if self.points.shape[:2] != self.marks.shape or self.marks.shape[0] != self.weights.size:
            raise ValueError("points, marks and weights disagree in shape")
        if self.marks.shape[1:] != (self.n,):
            raise ValueError(f"tuples must have {self.n} entries")
        if np.any(self.weights <= 0):
            raise ValueError("atomic weights must be positive")

    def __len__(self) -> int:
        return self.weights.size

    def subset(self, mask: np.ndarray) -> "AtomicCorrelation":
        sid = None if self.sample_index is None else self.sample_index[mask]
        return AtomicCorrelation(self.n, self.points[mask], self.marks[mask], self.weights[mask], sid,
                                 self.sample_count, self.unordered)

    def integrate(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> MomentValue:
        """``int f drho``; ``f`` maps ``(points (T,n,d), marks (T,n))`` to ``T`` values."""
        if not len(self):
            vals = np.zeros(0)
        elif self.unordered:
            perms = list(itertools.permutations(range(self.n)))
            vals = sum(np.asarray(f(self.points[:, p, :], self.marks[:, p]), dtype=float).reshape(-1)
                       for p in perms) / len(perms) * self.weights
        else:
            vals = np.asarray(f(self.points, self.marks), dtype=float).reshape(-1) * self.weights
        total = float(vals.sum())
        if self.sample_index is None or self.sample_count < 2:
            return MomentValue(total, 0.0 if self.sample_index is None else float("nan"))
        per = np.bincount(self.sample_index, weights=vals, minlength=self.sample_count) * self.sample_count
        return MomentValue(total, jackknife_stderr(per))

    def s_moment(self, powers: Sequence[int], delta: OffDiagonalBox | None = None) -> MomentValue:
        """``int chi_delta(x) prod s_j^{p_j} drho``."""
        p = np.asarray(powers, dtype=float)

        def f(x, s):
            val = np.prod(s ** p, axis=1)
            return val if delta is None else val * _in_delta(x, delta)

        return self.integrate(f)

    def total_mass(self) -> MomentValue:
        return self.integrate(lambda x, s: np.ones(x.shape[0]))

    def to_dict(self, limit: int | None = None) -> dict:
        m = len(self) if limit is None else min(limit, len(self))
        return {
            "n": self.n,
            "size": len(self),
            "sample_count": self.sample_count,
            "unordered": self.unordered,
            "tuples": [{"x": self.points[t].tolist(), "s": self.marks[t].tolist(), "weight": float(self.weights[t])}
                       for t in range(m)],
        }


def lifted_correlation(batch: SampleBatch, n: int, window: Window | None = None,
                       ordered: bool = True) -> AtomicCorrelation:
    """Empirical ``rho^(n)`` of the lifted configurations.

    Ordered: every ordered tuple weighs ``1/(S n!)``.  Unordered: every
    ``n``-subset weighs ``1/S``.
    """
    pts, marks, sid = _tuples(batch, n, window, ordered=ordered)
    scale = math.factorial(n) if ordered else 1
    w = np.full(sid.size, 1.0 / (batch.count * scale))
    return AtomicCorrelation(n, pts, marks, w, sid, batch.count, unordered=not ordered)


def direct_correlation_integral(batch: SampleBatch, n: int, f: Callable, window: Window | None = None) -> MomentValue:
    """Sample mean of ``sum over n-subsets of Sym f``.

    This is the defining formula of the correlation measure and serves as the
    independent reference for the moment pipeline.
    """
    return lifted_correlation(batch, n, window, ordered=False).integrate(f)


def product_box(x_boxes: Sequence[Window], s_ranges: Sequence[tuple[float, float]]) -> Callable:
    """Indicator of ``prod_j (x_boxes[j] x [a_j, b_j])`` as a vectorized integrand."""

    def f(x, s):
        ok = np.ones(x.shape[0], bool)
        for j, (box, (a, b)) in enumerate(zip(x_boxes, s_ranges)):
            ok &= box.contains(x[:, j, :]) & (s[:, j] >= a) & (s[:, j] <= b)
        return ok.astype(float)

    return f


# ---------------------------------------------------------------------------
# reconstruction


@dataclass
class XiRecovery:
    """Reconstruction of ``xi_delta`` for one off-diagonal box."""

    delta: OffDiagonalBox
    sequence: MultiIndexSequence
    marginals: list[QuadratureMeasure | None]
    marginal_notes: list[str]
    joint: AtomicCorrelation | None
    joint_note: str
    consistency: float | None

    def to_dict(self) -> dict:
        return {
            "delta": self.delta.to_dict(),
            "label": self.delta.label(),
            "xi_axis": self.sequence.axis(0).tolist(),
            "marginals": [None if q is None else q.to_dict() for q in self.marginals],
            "marginal_notes": self.marginal_notes,
            "joint_size": None if self.joint is None else len(self.joint),
            "joint_note": self.joint_note,
            "consistency": self.consistency,
        }


def _marginal(r: np.ndarray) -> tuple[QuadratureMeasure | None, str]:
    if r[0] <= 0:
        return None, "zero mass"
    try:
        return quadrature_from_moments(r, max_nodes=len(r) // 2), ""
    except IndefiniteMoments as exc:
        return None, f"indefinite: {exc}"


def _consistency(joint: AtomicCorrelation, seq: MultiIndexSequence) -> float:
    """Largest relative gap between the joint estimate's moments and ``xi``."""
    worst = 0.0
    scale = max(abs(v) for v in seq.values.values()) or 1.0
    for idx, v in seq.values.items():
        got = joint.s_moment(idx).value
        worst = max(worst, abs(got - v) / max(abs(v), 1e-12 * scale))
    return worst


def _recover(source: MomentSource, delta: OffDiagonalBox, max_degree: int,
             joint: AtomicCorrelation | None) -> XiRecovery:
    seq = xi_sequence(source, delta, max_degree)
    marginals, notes = [], []
    for c in range(delta.n):
        q, note = _marginal(seq.axis(c))
        marginals.append(q)
        notes.append(note)
    if source.is_analytic:
        note = "" if delta.n == 1 else "joint reconstruction needs samples; marginals only"
        return XiRecovery(delta, seq, marginals, notes, None, note, None)
    return XiRecovery(delta, seq, marginals, notes, joint, "", _consistency(joint, seq))


def _xi_weights(rho: AtomicCorrelation) -> AtomicCorrelation:
    return AtomicCorrelation(rho.n, rho.points, rho.marks, rho.weights * np.prod(rho.marks, axis=1),
                             rho.sample_index, rho.sample_count, rho.unordered)


def recover_xi_delta(source: MomentSource, delta: OffDiagonalBox,
                     max_degree: int = DEFAULT_DEGREE_CAP) -> XiRecovery:
    """Marginal quadratures of ``xi_delta`` plus, for samples, the joint atomic estimate.

    Each sample contributes its ordered distinct tuples in ``delta`` with
    weight ``s_1 ... s_n / (S n!)``; ``consistency`` compares the joint
    estimate's moments with the moment sequence.
    """
    joint = None
    if not source.is_analytic:
        source.check_inside(delta.bounding_window())
        rho = lifted_correlation(source.batch, delta.n, delta.bounding_window())
        rho = rho.subset(_in_delta(rho.points, delta))
        joint = _xi_weights(rho)
    return _recover(source, delta, max_degree, joint)


@dataclass
class AnalyticCorrelation:
    """``rho^(n)`` known through its weighted moments ``int chi_delta prod s^p drho = M_p(delta)/n!``."""

    model: MeasureModel
    n: int

    def s_moment(self, powers: Sequence[int], delta: OffDiagonalBox) -> MomentValue:
        if delta.n != self.n:
            raise ValueError(f"box has order {delta.n}, estimate has order {self.n}")
        return MomentValue(analytic_moment(self.model, powers, delta) / math.factorial(self.n), 0.0)


@dataclass
class CorrelationEstimate:
    n: int
    window: Window
    atomic: AtomicCorrelation | None
    functional: AnalyticCorrelation | None
    cells: list[XiRecovery] = field(default_factory=list)

    @property
    def representation(self) -> str:
        return "atomic" if self.atomic is not None else "functional"

    def s_moment(self, powers: Sequence[int], delta: OffDiagonalBox | None = None) -> MomentValue:
        if self.atomic is not None:
            return self.atomic.s_moment(powers, delta)
        return self.functional.s_moment(powers, delta or OffDiagonalBox.power(self.window, self.n))

    def integrate(self, f: Callable) -> MomentValue:
        if self.atomic is None:
            raise ValueError("closed-form estimates integrate only weighted box indicators; use s_moment")
        return self.atomic.integrate(f)

    def to_dict(self, tuple_limit: int = 0) -> dict:
        out = {
            "n": self.n,
            "window": self.window.to_dict(),
            "representation": self.representation,
            "cells": [c.to_dict() for c in self.cells],
        }
        if self.atomic is not None:
            out["atomic"] = self.atomic.to_dict(limit=tuple_limit)
            out["total_mass"] = self.atomic.total_mass().value
        return out


def recover_rho(source: MomentSource, n: int, window: Window, max_degree: int = 6,
                parts: int = 2) -> CorrelationEstimate:
    """Reconstruct ``rho^(n)`` on ``(window x R_+)^n`` off the diagonals.

    The window is cut into ``parts**d`` cells; for every ordered tuple of cells
    the box ``xi_delta`` is reconstructed.  Sample tuples are assigned to
    half-open cells so each tuple is counted once; the atomic ``rho`` weights
    are the ``xi`` weights divided by ``s_1 ... s_n``.
    """
    if n < 1:
        raise ValueError("order must be >= 1")
    cells = window.split(parts)
    boxes = list(itertools.product(range(len(cells)), repeat=n))
    if source.is_analytic:
        recs = [_recover(source, OffDiagonalBox(tuple(cells[c] for c in combo)), max_degree, None)
                for combo in boxes]
        return CorrelationEstimate(n, window, None, AnalyticCorrelation(source.model, n), recs)
    source.check_inside(window)
    rho = lifted_correlation(source.batch, n, window)
    ids = _cell_ids(rho.points, window, parts) if len(rho) else np.zeros((0, n), np.int64)
    recs = []
    for combo in boxes:
        mask = np.all(ids == np.asarray(combo)[None, :], axis=1) if len(rho) else np.zeros(0, bool)
        delta = OffDiagonalBox(tuple(cells[c] for c in combo))
        recs.append(_recover(source, delta, max_degree, _xi_weights(rho.subset(mask))))
    return CorrelationEstimate(n, window, rho, None, recs)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    outcome: str
    source_kind: str
    discreteness: str
    cells: list[dict]
    growth: dict | None
    flatness: list[dict] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    sample_count: int = 0
    notes: list[str] = field(default_factory=list)

    def status_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.cells:
            out[c["status"]] = out.get(c["status"], 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "discreteness": self.discreteness,
            "source_kind": self.source_kind,
            "sample_count": self.sample_count,
            "seeds": self.seeds,
            "tolerances": self.tolerances,
            "status_counts": self.status_counts(),
            "growth": self.growth,
            "cells": self.cells,
            "flatness": self.flatness,
            "notes": self.notes,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=indent, sort_keys=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _fan_out(tasks: Sequence[Callable[[], dict]]) -> list[dict]:
    workers = thread_count()
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: t(), tasks))


def _psd_cell(seq: MultiIndexSequence, level: int | None, degree: int, tol: Tolerances) -> dict:
    n = seq.n
    rep = multiindex_psd(seq, degree // (2 * n), rtol=tol.psd_rtol, sigmas=tol.noise_sigmas)
    return {"condition": "i", "n": n, "level": level, "delta": seq.delta.label(),
            "r0": seq[(0,) * n], "psd": rep.to_dict(),
            "status": "pass" if rep.passed else "fail", "definitive": not rep.passed}


def _series_cell(seq: MultiIndexSequence, level: int, degree: int, tol: Tolerances) -> dict:
    """Stieltjes and atom-at-zero tests on the first axis of ``xi``."""
    r = seq.axis(0)
    noise = seq.axis_stderr(0) if seq.kind == "empirical" else None
    out = {"condition": "ii", "n": seq.n, "level": level, "delta": seq.delta.label(), "r0": float(r[0])}
    if not r[0] > 0:
        out.update(status="vacuous", definitive=False, note="no mass in this box")
        return out
    stj = stieltjes_shifted_psd(r, (degree - 1) // 2, noise, tol.psd_rtol, tol.noise_sigmas)
    out["stieltjes"] = stj.to_dict()
    if not stj.passed:
        out.update(status="fail", definitive=True, note="shifted Hankel matrix indefinite")
        return out
    try:
        series = atom_at_zero_series(r, degree // 2, tol.degeneracy_cutoff, noise=noise, rtol=tol.psd_rtol,
                                     sigmas=tol.noise_sigmas)
    except IndefiniteMoments as exc:
        out.update(status="inconclusive", definitive=False, note=f"quadrature failed: {exc}")
        return out
    out["series"] = series.to_dict()
    if series.outcome == "no_atom":
        out.update(status="pass", definitive=series.definitive)
    elif series.outcome == "atom" and (series.definitive or seq.kind == "analytic"):
        # exact moments make the extrapolated limit trustworthy; estimated ones do not
        out.update(status="fail", definitive=True)
    else:
        out.update(status="inconclusive", definitive=False)
    return out


def mixed_moment(source: MomentSource, cells: Sequence[Window], exponents: Sequence[int]) -> MomentValue:
    """``E prod_j eta(cells[j])^{exponents[j]}`` for disjoint cells.

    Empirically a mean of products of local masses.  In closed form the slots
    are split into blocks of coinciding atoms; a block must stay inside one
    cell and contributes the power of its size.
    """
    exponents = [int(a) for a in exponents]
    if sum(exponents) == 0:
        return MomentValue(1.0, 0.0)
    if not source.is_analytic:
        per = np.ones(source.sample_count)
        for w, a in zip(cells, exponents):
            if a:
                source.check_inside(w)
                per = per * source.batch.local_masses(w) ** a
        return MomentValue(float(per.mean()), jackknife_stderr(per))
    labels = [j for j, a in enumerate(exponents) for _ in range(a)]
    total = 0.0
    for pi in enumerate_partitions(len(labels)):
        owners = [{labels[i - 1] for i in block} for block in pi]
        if any(len(o) != 1 for o in owners):
            continue
        delta = OffDiagonalBox(tuple(cells[next(iter(o))] for o in owners))
        total += analytic_moment(source.model, [len(b) for b in pi], delta)
    return MomentValue(total, 0.0)


def _mixed_psd_cell(source: MomentSource, window: Window, level: int, tol: Tolerances, parts: int = 2,
                    degree: int = 2) -> dict:
    """Positive semidefiniteness of ``[E prod eta(C_j)^{a_j + b_j}]`` over monomials of degree <= ``degree``."""
    cells = window.split(parts)
    monos = [a for a in itertools.product(range(degree + 1), repeat=len(cells)) if sum(a) <= degree]
    cache: dict[tuple[int, ...], MomentValue] = {}

    def entry(e):
        if e not in cache:
            cache[e] = mixed_moment(source, cells, e)
        return cache[e]

    mat = np.array([[entry(tuple(x + y for x, y in zip(a, b))).value for b in monos] for a in monos])
    noise = None
    if not source.is_analytic:
        noise = np.array([[entry(tuple(x + y for x, y in zip(a, b))).stderr for b in monos] for a in monos])
    rep = psd_report(mat, noise, tol.psd_rtol, tol.noise_sigmas)
    return {"condition": "moment_sequence", "n": degree, "level": level, "delta": f"grid {parts}^d of {window.to_dict()}",
            "psd": rep.to_dict(), "status": "pass" if rep.passed else "fail", "definitive": not rep.passed}


def _aggregate(cells: Sequence[dict]) -> str:
    if any(c["status"] == "fail" and c["definitive"] for c in cells):
        return NOT_DISCRETE
    if any(c["status"] in ("fail", "inconclusive") for c in cells):
        return INCONCLUSIVE
    return DISCRETE


def _tolerances(degree: int, tol: Tolerances) -> dict:
    from . import momentproblem as mp
    return {"psd_rtol": tol.psd_rtol, "degeneracy_cutoff": tol.degeneracy_cutoff, "noise_sigmas": tol.noise_sigmas,
            "zero_node_tol": mp.ZERO_NODE_TOL, "atom_resolution": mp.ATOM_RESOLUTION,
            "diverging_level": mp.DIVERGING_LEVEL, "converging_level": mp.CONVERGING_LEVEL,
            "degree_cap": degree, "flatness_rtol": FLATNESS_RTOL}


def _ladders(source: MomentSource, ladder, shrink_ladder):
    d = source.d
    windows = ladder if ladder is not None else window_ladder(DEFAULT_LADDER, d)
    shrink = shrink_ladder if shrink_ladder is not None else window_ladder(DEFAULT_SHRINK_LADDER, d)
    return list(windows), list(shrink)


def discreteness_verdict(source: MomentSource, ladder: Sequence[Window] | None = None, n_max: int = 2,
                         degree_cap: int = DEFAULT_DEGREE_CAP, deltas: Sequence[OffDiagonalBox] = (),
                         shrink_ladder: Sequence[Window] | None = None, growth_order: int = 4,
                         assume_moment_sequence: bool = True, seeds: dict | None = None,
                         tol: Tolerances = Tolerances()) -> Verdict:
    """Check both moment conditions on every ``(n, window)`` cell and aggregate.

    Condition (i) is the multi-index PSD test of ``xi_delta`` for the ladder
    boxes ``L^(n)`` and any extra ``deltas``; condition (ii) runs the shifted
    Hankel and atom-at-zero tests on the first axis of ``xi`` for the ladder
    boxes.  With ``assume_moment_sequence=False`` the mixed moments over grid
    cells are also tested, since the numbers need not come from a random
    measure at all.  Growth constants are reported but do not vote.
    """
    windows, shrink = _ladders(source, ladder, shrink_ladder)
    notes = []
    tasks = []
    for n in range(1, n_max + 1):
        for level, w in enumerate(windows, 1):
            delta = OffDiagonalBox.power(w, n)
            tasks.append(lambda delta=delta, level=level: _ladder_cells(source, delta, level, degree_cap, tol))
        for delta in deltas:
            if delta.n == n:
                tasks.append(lambda delta=delta: [_psd_cell(xi_sequence(source, delta, degree_cap, degree_cap),
                                                            None, degree_cap, tol)])
    if not assume_moment_sequence:
        for level, w in enumerate(windows, 1):
            tasks.append(lambda w=w, level=level: [_mixed_psd_cell(source, w, level, tol)])
    cells = [c for group in _fan_out(tasks) for c in group]

    growth = None
    try:
        valid_shrink = [w for w in shrink if source.is_analytic or source.window.contains_window(w)]
        growth = growth_constants(source, windows, max_order=growth_order, shrink_windows=valid_shrink).to_dict()
    except ValueError as exc:
        notes.append(f"growth constants unavailable: {exc}")
    outcome = _aggregate(cells)
    return Verdict(outcome, source.kind, outcome, cells, growth, tolerances=_tolerances(degree_cap, tol),
                   seeds=dict(seeds or {}), sample_count=source.sample_count, notes=notes)


def _ladder_cells(source: MomentSource, delta: OffDiagonalBox, level: int, degree: int,
                  tol: Tolerances) -> list[dict]:
    seq = xi_sequence(source, delta, degree, degree)
    if not seq[(0,) * delta.n] > 0:
        return [{"condition": c, "n": delta.n, "level": level, "delta": delta.label(), "r0": 0.0,
                 "status": "vacuous", "definitive": False, "note": "no mass in this box"} for c in ("i", "ii")]
    return [_psd_cell(seq, level, degree, tol), _series_cell(seq, level, degree, tol)]


def flatness(source: MomentSource, delta: OffDiagonalBox, degree: int = DEFAULT_DEGREE_CAP,
             sigmas: float = NOISE_SIGMAS) -> dict:
    """How far ``xi_delta[i]`` strays from ``xi_delta[0]`` over all multi-indices.

    Closed forms must agree to ``FLATNESS_RTOL``; estimates within ``sigmas``
    jackknife errors of the per-sample differences.
    """
    n = delta.n
    base = (1,) * n
    scale = 1.0 / math.factorial(n)
    idxs = [i for i in itertools.product(range(degree + 1), repeat=n) if 0 < sum(i) <= degree]
    worst, worst_z, flat = 0.0, 0.0, True
    if source.is_analytic:
        ref = analytic_moment(source.model, base, delta) * scale
        for i in idxs:
            gap = abs(analytic_moment(source.model, [a + 1 for a in i], delta) * scale - ref)
            worst = max(worst, gap)
        flat = worst <= FLATNESS_RTOL * abs(ref)
        return {"n": n, "delta": delta.label(), "statistic": worst, "reference": ref, "flat": bool(flat)}
    ref_per = per_sample_moment(source, base, delta) * scale
    ref = float(ref_per.mean())
    for i in idxs:
        diff = per_sample_moment(source, [a + 1 for a in i], delta) * scale - ref_per
        gap = abs(float(diff.mean()))
        se = jackknife_stderr(diff)
        se = 0.0 if not np.isfinite(se) else se
        worst = max(worst, gap)
        tol = sigmas * se + FLATNESS_RTOL * abs(ref)
        if gap > tol:
            flat = False
        if se > 0:
            worst_z = max(worst_z, gap / se)
    return {"n": n, "delta": delta.label(), "statistic": worst, "reference": ref, "max_z": worst_z,
            "flat": bool(flat)}


def point_process_verdict(source: MomentSource, ladder: Sequence[Window] | None = None, n_max: int = 2,
                          degree_cap: int = DEFAULT_DEGREE_CAP, **kwargs) -> Verdict:
    """``PointProcess`` when every ``xi_delta`` is flat and the discreteness verdict is ``Discrete``."""
    verdict = discreteness_verdict(source, ladder, n_max, degree_cap, **kwargs)
    windows, _ = _ladders(source, ladder, None)
    sigmas = kwargs.get("tol", Tolerances()).noise_sigmas
    tasks = [lambda n=n, w=w: flatness(source, OffDiagonalBox.power(w, n), degree_cap, sigmas)
             for n in range(1, n_max + 1) for w in windows]
    verdict.flatness = _fan_out(tasks)
    if verdict.discreteness == DISCRETE and all(f["flat"] for f in verdict.flatness):
        verdict.outcome = POINT_PROCESS
    return verdict


# ---------------------------------------------------------------------------
# (PD) and (LB)


def correlation_family(batch: SampleBatch, max_order: int, window: Window | None = None,
                       ordered: bool = False) -> dict[int, AtomicCorrelation]:
    """``rho^(1..max_order)`` of the lifted samples; order 0 is the unit mass on the empty set."""
    return {n: lifted_correlation(batch, n, window, ordered) for n in range(1, max_order + 1)}


def _as_ypoints(points: np.ndarray, marks: np.ndarray) -> tuple:
    return tuple((tuple(float(c) for c in x), float(s)) for x, s in zip(points, marks))


def integrate_functional(family: dict[int, AtomicCorrelation], g: ConfigFunctional) -> float:
    """``int G drho = G(empty) + sum_n int G^(n) drho^(n)``.

    On unordered estimates each table is evaluated once per set, so the
    tables must be symmetric (true for the star product of symmetric ``G``).
    """
    total = float(g.constant)
    for n, table in g.tables.items():
        rho = family.get(n)
        if rho is None:
            if n > max(family, default=0):
                raise ValueError(f"correlation family stops below order {n}")
            continue
        vals = np.array([table(_as_ypoints(rho.points[t], rho.marks[t])) for t in range(len(rho))], dtype=float)
        total += float(np.dot(vals, rho.weights))
    return total


def pd_check(family: dict[int, AtomicCorrelation], g: ConfigFunctional) -> float:
    """``int G * G drho``; nonnegative for correlation measures of point processes."""
    gg = ConfigFunctional(g.constant ** 2,
                          {k: (lambda pts: star_product_value(g, g, pts)) for k in range(1, 2 * g.max_order + 1)})
    return integrate_functional(family, gg)


def mean_k_square(batch: SampleBatch, g: ConfigFunctional, window: Window | None = None) -> float:
    """Sample mean of ``(KG)^2`` over lifted configurations."""
    vals = []
    for m in batch.measures():
        if window is not None:
            m = m.restrict(window)
        vals.append(float(k_transform(g, configuration_points(m))) ** 2)
    return float(np.mean(vals))


def symmetric_indicator(boxes: Sequence[tuple[Window, tuple[float, float]]]) -> Callable:
    """``Sym_n`` of ``prod_j chi_{B_j}`` with ``B_j = box_j x [a_j, b_j]`` in ``Y``."""

    def f(points):
        val = 1.0
        for (x, s), (box, (a, b)) in zip(points, boxes):
            if not (a <= s <= b and bool(box.contains(np.asarray(x))[0])):
                return 0.0
        return val

    return symmetrize(f)


def random_s_functional(rng: np.random.Generator, window: Window, max_order: int = 2,
                        s_max: float = 3.0) -> ConfigFunctional:
    """A random element of the span of constants and ``Sym(chi_B1 (x) .. (x) chi_Bn)``."""
    tables = {}
    for n in range(1, max_order + 1):
        coef = float(rng.normal())
        boxes = []
        for _ in range(n):
            lo = rng.uniform(window.lower, window.upper)
            hi = rng.uniform(lo, window.upper)
            if np.any(hi <= lo):
                hi = np.asarray(window.upper, dtype=float)
            a = float(rng.uniform(0, s_max / 2))
            boxes.append((Window(tuple(lo), tuple(hi)), (a, a + float(rng.uniform(0.1, s_max)))))
        ind = symmetric_indicator(boxes)
        tables[n] = (lambda pts, ind=ind, coef=coef: coef * ind(pts))
    return ConfigFunctional(float(rng.normal()), tables)


@dataclass
class LbReport:
    windows: list[Window]
    weight_range: tuple[float, float]
    max_order: int
    masses: list[list[float]]
    mass_stderrs: list[list[float]]
    constants: list[float]
    constant_stderrs: list[float]
    shrinks: bool

    def to_dict(self) -> dict:
        return {"windows": [w.to_dict() for w in self.windows], "weight_range": list(self.weight_range),
                "max_order": self.max_order, "masses": self.masses, "mass_stderrs": self.mass_stderrs,
                "constants": self.constants, "constant_stderrs": self.constant_stderrs, "shrinks": self.shrinks}


def lb_check(batch: SampleBatch, windows: Sequence[Window], weight_range: tuple[float, float],
             max_order: int = 3, sigmas: float = NOISE_SIGMAS) -> LbReport:
    """Constants ``max_n rho^(n)((L x A)^n off-diagonal)^(1/n)`` along a ladder.

    The ``rho^(n)`` mass of ``(L x A)^n`` is the mean of ``C(k, n)`` with ``k``
    the number of atoms in ``L x A``.  ``shrinks`` is true when each constant
    is at most its predecessor plus ``sigmas`` standard errors.
    """
    a, b = weight_range
    masses, errs, consts, cerrs = [], [], [], []
    in_range = (batch.weights >= a) & (batch.weights <= b)
    for w in windows:
        k = batch.per_sample_sum((w.contains(batch.locations) & in_range).astype(float))
        row, erow = [], []
        best, best_se = 0.0, 0.0
        for n in range(1, max_order + 1):
            per = np.array([math.comb(int(c), n) for c in k], dtype=float)
            m = float(per.mean())
            se = jackknife_stderr(per)
            se = 0.0 if not np.isfinite(se) else se
            row.append(m)
            erow.append(se)
            c = m ** (1.0 / n)
            if c > best:
                best = c
                best_se = se / (n * m ** (1.0 - 1.0 / n)) if m > 0 else 0.0
        masses.append(row)
        errs.append(erow)
        consts.append(best)
        cerrs.append(best_se)
    shrinks = all(consts[j + 1] <= consts[j] + sigmas * math.hypot(cerrs[j], cerrs[j + 1])
                  for j in range(len(consts) - 1))
    return LbReport(list(windows), (a, b), max_order, masses, errs, consts, cerrs, bool(shrinks))


# ---------------------------------------------------------------------------
# generalized correlation functions


@dataclass
class WickComparison:
    n: int
    left: float
    left_stderr: float
    right: float
    right_stderr: float
    difference_stderr: float

    def agrees(self, rtol: float = 0.05, sigmas: float = NOISE_SIGMAS) -> bool:
        gap = abs(self.left - self.right)
        return gap <= max(rtol * max(abs(self.left), abs(self.right)), sigmas * self.difference_stderr)

    def to_dict(self) -> dict:
        return {"n": self.n, "left": self.left, "left_stderr": self.left_stderr, "right": self.right,
                "right_stderr": self.right_stderr, "difference_stderr": self.difference_stderr}


def generalized_correlation(source: MomentSource, phis: Sequence[Callable]) -> WickComparison:
    """Sample mean of the Wick pairing against ``int prod phi_j(x_j) prod s_j drho^(n)``.

    Each ``phi`` takes a single location (length-``d`` array) and returns a number.
    """
    if source.is_analytic:
        raise ValueError("generalized correlation needs an empirical source")
    n = len(phis)
    if not 1 <= n <= 4:
        raise ValueError("supported orders are 1..4")
    batch = source.batch
    left = np.array([wick_pairing(m, phis) for m in batch.measures()])
    rows = np.array([[float(phi(x)) for x in batch.locations] for phi in phis]).reshape(n, -1) * batch.weights
    right = batch.distinct_product_sums(rows) / math.factorial(n)

    def se(v):
        e = jackknife_stderr(v)
        return 0.0 if not np.isfinite(e) else e
    return WickComparison(n, float(left.mean()), se(left), float(right.mean()), se(right), se(left - right))


# ---------------------------------------------------------------------------
# model zoo


@dataclass(frozen=True)
class ZooEntry:
    name: str
    model: MeasureModel
    expected: str


def model_zoo() -> list[ZooEntry]:
    """Built-in models with known answers.

    Diffuse mixtures keep the diffuse share of the first moment at or above
    0.2 on every ladder window.
    """
    gamma = Gamma(1.0)
    ts = MarkedPoissonCRM(LevyIntensity.tempered_stable(alpha=1.0, sigma=0.5, tau=1.0))
    compound = MarkedPoissonCRM(LevyIntensity.compound(2.0, WeightLaw.uniform(0.5, 2.0)))
    fixed = FixedAtoms(((0.3, 2.0), (-0.7, 0.5), (2.5, 1.5)))
    fixed_random = FixedAtoms(((0.45, WeightLaw.gamma(2.0)), (-1.5, WeightLaw.uniform(0.2, 1.0))))
    fixed_unit = FixedAtoms(((0.35, 1.0), (-0.75, 1.0), (1.9, 1.0)))
    poisson = PoissonPP(1.0)
    return [
        ZooEntry("gamma", gamma, DISCRETE),
        ZooEntry("gamma_rate_0.5", Gamma(0.5), DISCRETE),
        ZooEntry("tempered_stable", ts, DISCRETE),
        ZooEntry("compound_uniform", compound, DISCRETE),
        ZooEntry("fixed_atoms", fixed, DISCRETE),
        ZooEntry("fixed_random_weights", fixed_random, DISCRETE),
        ZooEntry("fixed_unit_atoms", fixed_unit, POINT_PROCESS),
        ZooEntry("poisson", poisson, POINT_PROCESS),
        ZooEntry("poisson_rate_3", PoissonPP(3.0), POINT_PROCESS),
        ZooEntry("gamma+poisson", Mixture((gamma, poisson)), DISCRETE),
        ZooEntry("gamma+fixed", Mixture((gamma, fixed)), DISCRETE),
        ZooEntry("gamma+tempered_stable", Mixture((gamma, ts)), DISCRETE),
        ZooEntry("poisson+fixed_unit", Mixture((poisson, fixed_unit)), POINT_PROCESS),
        ZooEntry("fixed_random+poisson", Mixture((fixed_random, PoissonPP(0.5))), DISCRETE),
        ZooEntry("diffuse", DeterministicDiffuse(1.0), NOT_DISCRETE),
        ZooEntry("diffuse_light", DeterministicDiffuse(0.2), NOT_DISCRETE),
        ZooEntry("gamma+diffuse_0.2", Mixture((gamma, DeterministicDiffuse(0.25))), NOT_DISCRETE),
        ZooEntry("gamma+diffuse_0.5", Mixture((gamma, DeterministicDiffuse(1.0))), NOT_DISCRETE),
        ZooEntry("poisson+diffuse", Mixture((poisson, DeterministicDiffuse(0.5))), NOT_DISCRETE),
        ZooEntry("fixed+diffuse", Mixture((fixed, DeterministicDiffuse(1.0))), NOT_DISCRETE),
        ZooEntry("tempered_stable+diffuse", Mixture((ts, DeterministicDiffuse(0.5))), NOT_DISCRETE),
    ]
