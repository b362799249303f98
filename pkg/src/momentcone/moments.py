"""Moment engine: ``M_{i_1..i_n}(delta)`` from closed forms or Monte Carlo samples.

``M_{i_1..i_n}(delta)`` is the expected sum, over ordered ``n``-tuples of
distinct atoms whose locations lie in ``delta``, of ``prod_j s_j^{i_j}``.
Dividing the shifted values by ``n!`` gives the multi-index sequence
``xi[i] = M_{i+1}(delta) / n!`` whose moment problems drive the verdicts.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .combinatorics import count_partitions_with_block_sizes, integer_partitions
from .measures import OffDiagonalBox, SampleBatch, Window
from .models import MeasureModel, analytic_moment, model_dimension

DEFAULT_DEGREE_CAP = 10
MAX_DEGREE_CAP = 16
MAX_FULL_MOMENT_ORDER = 8


class MomentValue(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class MomentSource:
    """Either a model with closed-form moments or a batch of samples (each weighted ``1/S``)."""

    model: MeasureModel | None = None
    batch: SampleBatch | None = None
    d: int = 1

    def __post_init__(self):
        if (self.model is None) == (self.batch is None):
            raise ValueError("a moment source needs exactly one of model or batch")
        if self.batch is not None:
            if len(self.batch) < 1:
                raise ValueError("an empirical source needs at least one sample")
            object.__setattr__(self, "d", self.batch.d)
        elif (fixed := model_dimension(self.model)) is not None and fixed != self.d:
            raise ValueError(f"model lives in dimension {fixed}, source declares {self.d}")

    @classmethod
    def analytic(cls, model: MeasureModel, d: int | None = None) -> "MomentSource":
        return cls(model=model, d=d or model_dimension(model) or 1)

    @classmethod
    def empirical(cls, batch: SampleBatch) -> "MomentSource":
        return cls(batch=batch)

    @property
    def kind(self) -> str:
        return "analytic" if self.model is not None else "empirical"

    @property
    def is_analytic(self) -> bool:
        return self.model is not None

    @property
    def sample_count(self) -> int:
        return len(self.batch) if self.batch is not None else 0

    @property
    def window(self) -> Window | None:
        return self.batch.window if self.batch is not None else None

    def check_inside(self, region: Window):
        w = self.window
        if w is not None and not w.contains_window(region):
            raise ValueError(f"region {region.to_dict()} is not inside the sampled window {w.to_dict()}")


# ---------------------------------------------------------------------------
# jackknife


def jackknife_stderr(values, statistic: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Delete-1 jackknife standard error of ``statistic(mean of rows)``.

    ``values`` has one row per sample (shape ``(S,)`` or ``(S, k)``).  The
    statistic maps an array of column means (leading axis = replicate) to the
    estimate.  Without a statistic this is the plain standard error of the mean.
    """
    x = np.asarray(values, dtype=float)
    s = x.shape[0]
    if s < 2:
        return float("nan")
    total = x.sum(axis=0)
    loo = (total - x) / (s - 1)
    if statistic is None:
        theta = loo
    else:
        theta = np.asarray(statistic(loo), dtype=float)
    theta = theta.reshape(s, -1)
    dev = theta - theta.mean(axis=0)
    se = np.sqrt((s - 1) / s * np.sum(dev * dev, axis=0))
    return float(se[0]) if se.size == 1 else se


def _mean_with_error(per_sample: np.ndarray) -> MomentValue:
    return MomentValue(float(np.mean(per_sample)), jackknife_stderr(per_sample))


# ---------------------------------------------------------------------------
# moments


def per_sample_moment(source: MomentSource, powers: Sequence[int], delta: OffDiagonalBox) -> np.ndarray:
    """Per-sample ordered distinct-tuple sums (empirical sources only)."""
    if source.is_analytic:
        raise ValueError("per-sample values need an empirical source")
    source.check_inside(delta.bounding_window())
    return source.batch.distinct_tuple_sums(delta, powers)


def moment(source: MomentSource, powers: Sequence[int], delta: OffDiagonalBox) -> MomentValue:
    """``M_{i_1..i_n}(delta)`` with a standard error (0 for closed forms)."""
    powers = tuple(int(p) for p in powers)
    if any(p < 1 for p in powers):
        raise ValueError("powers must be >= 1")
    if len(powers) != delta.n:
        raise ValueError(f"need {delta.n} powers, got {len(powers)}")
    if delta.d != source.d:
        raise ValueError(f"region has dimension {delta.d}, source has {source.d}")
    if source.is_analytic:
        return MomentValue(analytic_moment(source.model, powers, delta), 0.0)
    return _mean_with_error(per_sample_moment(source, powers, delta))


def full_moment(source: MomentSource, n: int, window: Window, method: str = "auto") -> MomentValue:
    """``E[eta(window)^n]``.

    ``method="partitions"`` always goes through the decomposition over set
    partitions, ``sum_lambda N_lambda M_lambda(window^(k) off-diagonal)``;
    ``"auto"`` uses it for closed forms and the direct power of the local mass
    for samples.
    """
    if n < 0 or n > MAX_FULL_MOMENT_ORDER:
        raise ValueError(f"order must be in 0..{MAX_FULL_MOMENT_ORDER}")
    if n == 0:
        return MomentValue(1.0, 0.0)
    if method not in ("auto", "partitions", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if method == "direct" or (method == "auto" and not source.is_analytic):
        if source.is_analytic:
            raise ValueError("the direct method needs samples")
        source.check_inside(window)
        return _mean_with_error(source.batch.local_masses(window) ** n)
    if source.is_analytic:
        total = 0.0
        for sizes in integer_partitions(n):
            count = count_partitions_with_block_sizes(sizes)
            total += count * analytic_moment(source.model, sizes, OffDiagonalBox.power(window, len(sizes)))
        return MomentValue(total, 0.0)
    per_sample = np.zeros(len(source.batch))
    for sizes in integer_partitions(n):
        count = count_partitions_with_block_sizes(sizes)
        per_sample += count * per_sample_moment(source, sizes, OffDiagonalBox.power(window, len(sizes)))
    return _mean_with_error(per_sample)


def off_diagonal_mass(source: MomentSource, n: int, window: Window) -> MomentValue:
    """``M^(n)`` of the off-diagonal part of ``window^n``."""
    if n == 0:
        return MomentValue(1.0, 0.0)
    return moment(source, (1,) * n, OffDiagonalBox.power(window, n))


# ---------------------------------------------------------------------------
# multi-index sequences


def multi_indices(n: int, max_total_degree: int) -> list[tuple[int, ...]]:
    """All ``i`` in ``Z_+^n`` with ``|i| <= max_total_degree``, graded then lexicographic."""
    out = []
    for total in range(max_total_degree + 1):
        for combo in itertools.product(range(total + 1), repeat=n):
            if sum(combo) == total:
                out.append(combo)
    return out


@dataclass
class MultiIndexSequence:
    """``xi[i] = M_{i+1}(delta) / n!`` for all ``|i| <= max_total_degree``."""

    n: int
    delta: OffDiagonalBox
    max_total_degree: int
    values: dict[tuple[int, ...], float]
    stderrs: dict[tuple[int, ...], float] = field(default_factory=dict)
    kind: str = "analytic"
    sample_count: int = 0

    def __getitem__(self, index) -> float:
        return self.values[tuple(index)]

    def stderr(self, index) -> float:
        return self.stderrs.get(tuple(index), 0.0)

    def indices(self) -> list[tuple[int, ...]]:
        return list(self.values)

    def axis(self, coordinate: int = 0) -> np.ndarray:
        """The one-dimensional sequence ``xi[k e_coordinate]``, ``k = 0..max_total_degree``."""
        out = []
        for k in range(self.max_total_degree + 1):
            idx = [0] * self.n
            idx[coordinate] = k
            out.append(self.values[tuple(idx)])
        return np.array(out)

    def axis_stderr(self, coordinate: int = 0) -> np.ndarray:
        out = []
        for k in range(self.max_total_degree + 1):
            idx = [0] * self.n
            idx[coordinate] = k
            out.append(self.stderr(tuple(idx)))
        return np.nan_to_num(np.array(out), nan=0.0)

    def diagonal(self) -> np.ndarray:
        """``r_k = xi[k, .., k]`` for ``n * k <= max_total_degree``: moments of ``s_1 ... s_n``."""
        return np.array([self.values[(k,) * self.n] for k in range(self.max_total_degree // self.n + 1)])

    def diagonal_stderr(self) -> np.ndarray:
        return np.nan_to_num(np.array([self.stderr((k,) * self.n)
                                       for k in range(self.max_total_degree // self.n + 1)]), nan=0.0)

    def symmetry_defect(self) -> float:
        """Largest ``|xi[i] - xi[sigma i]|`` over index permutations."""
        worst = 0.0
        for idx, v in self.values.items():
            for perm in itertools.permutations(idx):
                worst = max(worst, abs(v - self.values[perm]))
        return worst

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta.to_dict(),
            "max_total_degree": self.max_total_degree,
            "kind": self.kind,
            "sample_count": self.sample_count,
            "values": [{"index": list(k), "value": v, "stderr": self.stderr(k)} for k, v in self.values.items()],
        }


def xi_sequence(source: MomentSource, delta: OffDiagonalBox, max_total_degree: int,
                cap: int = DEFAULT_DEGREE_CAP) -> MultiIndexSequence:
    """Build ``xi[i] = M_{i+1}(delta)/n!`` up to total degree ``max_total_degree``."""
    if max_total_degree < 0:
        raise ValueError("degree must be non-negative")
    if max_total_degree > min(cap, MAX_DEGREE_CAP):
        raise ValueError(f"degree {max_total_degree} exceeds the cap {min(cap, MAX_DEGREE_CAP)}")
    n = delta.n
    scale = 1.0 / math.factorial(n)
    values, errors = {}, {}
    for idx in multi_indices(n, max_total_degree):
        m = moment(source, tuple(i + 1 for i in idx), delta)
        values[idx] = m.value * scale
        errors[idx] = m.stderr * scale
    return MultiIndexSequence(n, delta, max_total_degree, values, errors, source.kind, source.sample_count)


# ---------------------------------------------------------------------------
# growth constants


@dataclass
class GrowthReport:
    """Estimates of ``C`` with ``M^(n)(L^n) <= C^n n!`` and ``C'`` for the off-diagonal part."""

    windows: list[Window]
    c: list[float]
    c_prime: list[float]
    max_order: int
    shrink_windows: list[Window]
    c_shrink: list[float]
    c_prime_shrink: list[float]
    c_prime_slope: float
    c_slope: float

    SLOPE_THRESHOLD = 0.5

    @property
    def c_prime_shrinks(self) -> bool:
        """``C'`` tends to zero along the shrinking ladder (log-log slope above the threshold)."""
        return self.c_prime_slope > self.SLOPE_THRESHOLD

    @property
    def c_shrinks(self) -> bool:
        return self.c_slope > self.SLOPE_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "windows": [w.to_dict() for w in self.windows],
            "c": self.c,
            "c_prime": self.c_prime,
            "max_order": self.max_order,
            "shrink_windows": [w.to_dict() for w in self.shrink_windows],
            "c_shrink": self.c_shrink,
            "c_prime_shrink": self.c_prime_shrink,
            "c_prime_slope": self.c_prime_slope,
            "c_slope": self.c_slope,
            "c_prime_shrinks": self.c_prime_shrinks,
            "c_shrinks": self.c_shrinks,
        }


def _growth(values: Iterable[float]) -> float:
    return max(max(v, 0.0) ** (1.0 / n) / math.factorial(n) ** (1.0 / n) for n, v in enumerate(values, 1))


def _log_slope(windows: Sequence[Window], constants: Sequence[float]) -> float:
    """Slope of ``log C`` against ``log vol``; ``inf`` when ``C`` reaches zero on the ladder."""
    vols = np.log([w.volume() for w in windows])
    c = np.asarray(constants, dtype=float)
    if len(windows) < 2:
        return float("nan")
    if np.any(c <= 0):
        return float("inf")
    return float(np.polyfit(vols, np.log(c), 1)[0])


def growth_constants(source: MomentSource, windows: Sequence[Window], max_order: int = 4,
                     shrink_windows: Sequence[Window] | None = None) -> GrowthReport:
    """``C = max_{n<=N} (M^(n)(L^n)/n!)^(1/n)`` and the analogous off-diagonal ``C'`` per window."""
    if not windows:
        raise ValueError("the window ladder must not be empty")
    if not 1 <= max_order <= MAX_FULL_MOMENT_ORDER:
        raise ValueError(f"max order must be in 1..{MAX_FULL_MOMENT_ORDER}")
    shrink_windows = list(shrink_windows or [])

    def constants(w):
        full = [full_moment(source, n, w).value for n in range(1, max_order + 1)]
        off = [off_diagonal_mass(source, n, w).value for n in range(1, max_order + 1)]
        return _growth(full), _growth(off)

    main = [constants(w) for w in windows]
    small = [constants(w) for w in shrink_windows]
    c_small = [a for a, _ in small]
    cp_small = [b for _, b in small]
    return GrowthReport(
        windows=list(windows), c=[a for a, _ in main], c_prime=[b for _, b in main], max_order=max_order,
        shrink_windows=shrink_windows, c_shrink=c_small, c_prime_shrink=cp_small,
        c_prime_slope=_log_slope(shrink_windows, cp_small), c_slope=_log_slope(shrink_windows, c_small))


# ---------------------------------------------------------------------------
# CSV tables


class MomentRow(NamedTuple):
    n: int
    index: tuple[int, ...]
    delta_id: str
    value: float
    stderr: float


def moment_table(source: MomentSource, deltas: dict[str, OffDiagonalBox], max_total_degree: int) -> list[MomentRow]:
    """Rows ``M_{i}(delta)`` for every named region and every power vector with ``|i - 1| <= degree``.

    The first row is the order-0 moment, which is 1.
    """
    rows = [MomentRow(0, (), "", 1.0, 0.0)]
    for name, delta in deltas.items():
        for idx in multi_indices(delta.n, max_total_degree):
            powers = tuple(i + 1 for i in idx)
            m = moment(source, powers, delta)
            rows.append(MomentRow(delta.n, powers, name, m.value, m.stderr))
    return rows


def write_moment_csv(rows: Sequence[MomentRow], stream=None) -> str:
    """Write ``n, i_1..i_N, delta_id, value, stderr`` (N = largest order) and return the text."""
    width = max((r.n for r in rows), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", *[f"i_{k}" for k in range(1, width + 1)], "delta_id", "value", "stderr"])
    for r in rows:
        idx = list(r.index) + [""] * (width - len(r.index))
        writer.writerow([r.n, *idx, r.delta_id, repr(float(r.value)), repr(float(r.stderr))])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_moment_csv(text: str) -> list[MomentRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        n = int(rec["n"])
        idx = tuple(int(rec[f"i_{k}"]) for k in range(1, n + 1))
        rows.append(MomentRow(n, idx, rec["delta_id"], float(rec["value"]), float(rec["stderr"])))
    return rows
