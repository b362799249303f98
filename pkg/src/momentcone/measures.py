"""Windows, discrete measures on R^d and sums over tuples of their atoms.

A :class:`DiscreteMeasure` ``sum_i s_i delta_{x_i}`` doubles as the
configuration ``{(x_i, s_i)}`` in ``R^d x (0, inf)``.  Many samples of random
measures are kept in a :class:`SampleBatch`, a flat array layout that lets
per-sample power sums be computed with ``np.bincount``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .combinatorics import enumerate_partitions, mobius_zero


class WeightedAtom(NamedTuple):
    x: np.ndarray
    s: float


@dataclass(frozen=True)
class Window:
    """Axis-aligned box ``[lower, upper]`` in ``R^d``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must have the same positive length")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("window bounds must be finite")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, half_width: float, d: int = 1) -> "Window":
        """``[-l, l]^d``."""
        return cls((-half_width,) * d, (half_width,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def contains_window(self, other: "Window") -> bool:
        return all(a <= c for a, c in zip(self.lower, other.lower)) and \
            all(b >= e for b, e in zip(self.upper, other.upper))

    def intersect(self, other: "Window") -> "Window | None":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if np.any(lo >= hi):
            return None
        return Window(tuple(lo), tuple(hi))

    def split(self, parts: int) -> list["Window"]:
        """Grid of ``parts**d`` equal sub-boxes."""
        edges = [np.linspace(a, b, parts + 1) for a, b in zip(self.lower, self.upper)]
        cells = []
        for idx in itertools.product(range(parts), repeat=self.d):
            lo = tuple(edges[k][i] for k, i in enumerate(idx))
            hi = tuple(edges[k][i + 1] for k, i in enumerate(idx))
            cells.append(Window(lo, hi))
        return cells

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


def window_ladder(levels: Iterable[float], d: int = 1) -> list[Window]:
    return [Window.cube(l, d) for l in levels]


DEFAULT_LADDER = (1.0, 2.0, 3.0, 4.0)
DEFAULT_SHRINK_LADDER = tuple(2.0 ** -j for j in range(5))


class DiscreteMeasure:
    """Finitely many weighted atoms with pairwise distinct locations.

    Parameters
    ----------
    locations : array_like, shape (k, d)
    weights : array_like, shape (k,)
        Strictly positive.
    """

    __slots__ = ("_locations", "_weights")

    def __init__(self, locations, weights, d: int | None = None, *, check: bool = True):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if d is None:
            d = 1 if w.size == 0 else int(np.asarray(locations, dtype=float).size // max(w.size, 1))
        x = np.asarray(locations, dtype=float).reshape(w.size, d)
        if check:
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise ValueError("atom weights must be finite and > 0")
            if not np.all(np.isfinite(x)):
                raise ValueError("atom locations must be finite")
            if w.size > 1 and np.unique(x, axis=0).shape[0] != w.size:
                raise ValueError("atom locations must be pairwise distinct")
        x.setflags(write=False)
        w.setflags(write=False)
        self._locations = x
        self._weights = w

    @classmethod
    def empty(cls, d: int = 1) -> "DiscreteMeasure":
        return cls(np.empty((0, d)), np.empty(0), d)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple], d: int | None = None) -> "DiscreteMeasure":
        if not atoms:
            return cls.empty(d or 1)
        xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x, _ in atoms]
        return cls(np.vstack(xs), [s for _, s in atoms], xs[0].size)

    @property
    def locations(self) -> np.ndarray:
        return self._locations

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def d(self) -> int:
        return self._locations.shape[1]

    @property
    def atoms(self) -> list[WeightedAtom]:
        return [WeightedAtom(x, float(s)) for x, s in zip(self._locations, self._weights)]

    def __len__(self) -> int:
        return self._weights.size

    def __eq__(self, other) -> bool:
        return (isinstance(other, DiscreteMeasure)
                and np.array_equal(self._locations, other._locations)
                and np.array_equal(self._weights, other._weights))

    def __repr__(self) -> str:
        return f"DiscreteMeasure({len(self)} atoms, d={self.d})"

    def restrict(self, window: Window) -> "DiscreteMeasure":
        keep = window.contains(self._locations)
        return DiscreteMeasure(self._locations[keep], self._weights[keep], self.d, check=False)

    def total_mass(self) -> float:
        return float(self._weights.sum())

    def to_dict(self) -> dict:
        return {"atoms": [{"x": [float(c) for c in x], "s": float(s)}
                          for x, s in zip(self._locations, self._weights)]}

    @classmethod
    def from_dict(cls, data: dict, d: int | None = None) -> "DiscreteMeasure":
        atoms = [(a["x"], a["s"]) for a in data["atoms"]]
        return cls.from_atoms(atoms, d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class OffDiagonalBox:
    """``{(x_1..x_n): x_j in boxes[j], |x_i - x_j| > exclusion_radius for i != j}``.

    With ``exclusion_radius == 0`` this is the box intersected with the set of
    tuples having pairwise distinct coordinates.
    """

    boxes: tuple[Window, ...]
    exclusion_radius: float = 0.0

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise ValueError("need at least one box")
        if len({b.d for b in boxes}) != 1:
            raise ValueError("boxes must share the dimension")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion radius must be >= 0")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def power(cls, window: Window, n: int, exclusion_radius: float = 0.0) -> "OffDiagonalBox":
        """``window^(n)`` off the diagonals."""
        return cls((window,) * n, exclusion_radius)

    @property
    def n(self) -> int:
        return len(self.boxes)

    @property
    def d(self) -> int:
        return self.boxes[0].d

    def is_symmetric(self) -> bool:
        return all(b == self.boxes[0] for b in self.boxes)

    def bounding_window(self) -> Window:
        lo = np.min([b.lower for b in self.boxes], axis=0)
        hi = np.max([b.upper for b in self.boxes], axis=0)
        return Window(tuple(lo), tuple(hi))

    def label(self) -> str:
        parts = ["x".join(f"[{a:g},{b:g}]" for a, b in zip(w.lower, w.upper)) for w in self.boxes]
        tag = "*".join(parts)
        return tag if self.exclusion_radius == 0 else f"{tag}|eps={self.exclusion_radius:g}"

    def to_dict(self) -> dict:
        return {"boxes": [b.to_dict() for b in self.boxes], "exclusion_radius": self.exclusion_radius}


# ---------------------------------------------------------------------------
# tuple sums on a single measure


def tensor_pairing(eta: DiscreteMeasure, f: Callable[..., float], n: int) -> float:
    """``<eta^{(x)n}, f>``: sum over all ordered n-tuples of atoms, repeats allowed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 0.0
    idx = range(len(eta))
    x, s = eta.locations, eta.weights
    for tup in itertools.product(idx, repeat=n):
        v = f(*(x[i] for i in tup))
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite integrand at atoms {tup}")
        total += v * float(np.prod(s[list(tup)]))
    return total


def local_mass(gamma: DiscreteMeasure, window: Window) -> float:
    """Total weight of the atoms lying in ``window``."""
    if len(gamma) == 0:
        return 0.0
    return float(gamma.weights[window.contains(gamma.locations)].sum())


def distinct_product_sum(values: np.ndarray) -> float | np.ndarray:
    """``sum over ordered tuples of distinct atoms (a_1..a_n) of prod_j values[j, a_j]``.

    Uses inclusion-exclusion over set partitions of the slots, so only power
    sums over single atoms are needed.  ``values`` has shape ``(n, k)``.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    total = 0.0
    for pi in enumerate_partitions(n):
        term = float(mobius_zero(pi))
        for block in pi:
            term *= float(np.prod(values[[j - 1 for j in block]], axis=0).sum())
        total += term
    return total


def _box_values(eta: DiscreteMeasure, delta: OffDiagonalBox, powers: Sequence[int]) -> np.ndarray:
    rows = []
    for box, p in zip(delta.boxes, powers):
        rows.append(box.contains(eta.locations) * eta.weights ** p)
    return np.array(rows).reshape(delta.n, len(eta))


def _check_powers(powers, n: int, allow_zero: bool = False) -> tuple[int, ...]:
    powers = tuple(int(p) for p in powers)
    if len(powers) != n:
        raise ValueError(f"expected {n} powers, got {len(powers)}")
    low = 0 if allow_zero else 1
    if any(p < low for p in powers):
        raise ValueError(f"powers must be >= {low}")
    return powers


def distinct_tuple_sum(eta: DiscreteMeasure, delta: OffDiagonalBox, powers: Sequence[int]) -> float:
    """Sum over ordered tuples of distinct atoms with locations in ``delta`` of ``prod s_j**powers[j]``.

    Its expectation under a random measure is ``M_{powers}(delta)``.
    """
    powers = _check_powers(powers, delta.n, allow_zero=True)
    if delta.exclusion_radius > 0:
        return brute_distinct_tuple_sum(eta, delta, powers)
    if len(eta) < delta.n:
        return 0.0
    return distinct_product_sum(_box_values(eta, delta, powers))


def brute_distinct_tuple_sum(eta: DiscreteMeasure, delta: OffDiagonalBox, powers: Sequence[int]) -> float:
    """Direct enumeration of ordered distinct tuples (reference path, honours the exclusion radius)."""
    powers = _check_powers(powers, delta.n, allow_zero=True)
    x, s = eta.locations, eta.weights
    inside = [box.contains(x) for box in delta.boxes]
    total = 0.0
    for tup in itertools.permutations(range(len(eta)), delta.n):
        if not all(inside[j][a] for j, a in enumerate(tup)):
            continue
        if delta.exclusion_radius > 0 and any(
                np.linalg.norm(x[a] - x[b]) <= delta.exclusion_radius
                for a, b in itertools.combinations(tup, 2)):
            continue
        total += float(np.prod([s[a] ** p for a, p in zip(tup, powers)]))
    return total


# ---------------------------------------------------------------------------
# batches of samples


class SampleBatch:
    """Many discrete measures stored as flat arrays.

    ``locations[k]``, ``weights[k]`` belong to sample ``sample_index[k]``;
    ``count`` is the number of samples (some may be empty).
    """

    def __init__(self, locations, weights, sample_index, count: int, window: Window | None = None):
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.sample_index = np.asarray(sample_index, dtype=np.int64).reshape(-1)
        d = window.d if window is not None else (
            np.asarray(locations).shape[1] if np.asarray(locations).ndim == 2 else 1)
        self.locations = np.asarray(locations, dtype=float).reshape(self.weights.size, d)
        self.count = int(count)
        self.window = window
        if self.count < 1:
            raise ValueError("a sample batch needs at least one sample")
        if self.sample_index.size and (self.sample_index.min() < 0 or self.sample_index.max() >= self.count):
            raise ValueError("sample index out of range")
        order = np.argsort(self.sample_index, kind="stable")
        if not np.all(order == np.arange(order.size)):
            self.locations = self.locations[order]
            self.weights = self.weights[order]
            self.sample_index = self.sample_index[order]
        self.offsets = np.searchsorted(self.sample_index, np.arange(self.count + 1))

    @classmethod
    def from_measures(cls, measures: Sequence[DiscreteMeasure], window: Window | None = None) -> "SampleBatch":
        if not measures:
            raise ValueError("a sample batch needs at least one sample")
        d = measures[0].d
        locs = np.vstack([m.locations for m in measures]) if measures else np.empty((0, d))
        w = np.concatenate([m.weights for m in measures])
        idx = np.repeat(np.arange(len(measures)), [len(m) for m in measures])
        return cls(locs.reshape(-1, d), w, idx, len(measures), window)

    @property
    def d(self) -> int:
        return self.locations.shape[1]

    def __len__(self) -> int:
        return self.count

    def measure(self, i: int) -> DiscreteMeasure:
        a, b = self.offsets[i], self.offsets[i + 1]
        return DiscreteMeasure(self.locations[a:b], self.weights[a:b], self.d, check=False)

    def measures(self) -> list[DiscreteMeasure]:
        return [self.measure(i) for i in range(self.count)]

    def atom_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def restrict(self, window: Window) -> "SampleBatch":
        keep = window.contains(self.locations)
        return SampleBatch(self.locations[keep], self.weights[keep], self.sample_index[keep],
                           self.count, window)

    def per_sample_sum(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.sample_index, weights=values, minlength=self.count)

    def local_masses(self, window: Window) -> np.ndarray:
        return self.per_sample_sum(window.contains(self.locations) * self.weights)

    def distinct_product_sums(self, values: np.ndarray) -> np.ndarray:
        """Batched :func:`distinct_product_sum`: ``values`` has shape ``(n, total_atoms)``."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        out = np.zeros(self.count)
        cache: dict[tuple[int, ...], np.ndarray] = {}
        for pi in enumerate_partitions(n):
            term = np.full(self.count, float(mobius_zero(pi)))
            for block in pi:
                if block not in cache:
                    cache[block] = self.per_sample_sum(np.prod(values[[j - 1 for j in block]], axis=0))
                term = term * cache[block]
            out += term
        return out

    def distinct_tuple_sums(self, delta: OffDiagonalBox, powers: Sequence[int]) -> np.ndarray:
        """Per-sample :func:`distinct_tuple_sum`."""
        powers = _check_powers(powers, delta.n, allow_zero=True)
        if delta.exclusion_radius > 0:
            return np.array([brute_distinct_tuple_sum(self.measure(i), delta, powers)
                             for i in range(self.count)])
        rows = np.array([box.contains(self.locations) * self.weights ** p
                         for box, p in zip(delta.boxes, powers)]).reshape(delta.n, -1)
        return self.distinct_product_sums(rows)

    def to_dicts(self) -> list[dict]:
        return [self.measure(i).to_dict() for i in range(self.count)]

    @classmethod
    def from_dicts(cls, data: Sequence[dict], window: Window | None = None, d: int | None = None) -> "SampleBatch":
        if d is None:
            d = window.d if window is not None else next(
                (len(a["x"]) for m in data for a in m["atoms"]), 1)
        return cls.from_measures([DiscreteMeasure.from_dict(m, d) for m in data], window)
