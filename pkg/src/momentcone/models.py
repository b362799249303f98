"""Reference laws of random measures: samplers and closed-form moments.

Every law here is a sum of independent pieces of three kinds: a deterministic
diffuse measure, finitely many atoms at fixed locations with random weights,
and a marked Poisson process on ``R^d x (0, inf)`` whose points are read as
weighted atoms.  The gamma random measure is the marked Poisson case with
weight intensity ``s^-1 e^-s ds``.

Randomness is counter based: sample ``i`` of seed ``k`` always comes from the
Philox stream with key ``k`` and counter ``(0, 0, 0, i)``, so batches can be
produced in any order or in pieces and still agree bit for bit.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, special, stats

from .measures import DiscreteMeasure, OffDiagonalBox, SampleBatch, Window, distinct_product_sum

DEFAULT_TRUNC_EPS = 1e-6


class UnavailableMoment(Exception):
    """No closed form is implemented for the requested moment."""


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for sample ``index`` under ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def thread_count() -> int:
    """Worker cap taken from ``MOMENTCONE_THREADS`` (default 1)."""
    raw = os.environ.get("MOMENTCONE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MOMENTCONE_THREADS must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# weight laws and Levy intensities


@dataclass(frozen=True)
class WeightLaw:
    """Law of a single positive weight.

    ``deterministic``: the value ``a``.  ``gamma``: shape ``a``, scale ``b``.
    ``uniform``: on ``[a, b]`` with ``a >= 0``.
    """

    kind: str = "deterministic"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "deterministic":
            ok = self.a > 0
        elif self.kind == "gamma":
            ok = self.a > 0 and self.b > 0
        elif self.kind == "uniform":
            ok = 0 <= self.a < self.b
        else:
            raise ValueError(f"unknown weight law {self.kind!r}")
        if not ok:
            raise ValueError(f"invalid parameters for {self.kind} law: a={self.a}, b={self.b}")

    @classmethod
    def deterministic(cls, value: float) -> "WeightLaw":
        return cls("deterministic", float(value), 1.0)

    @classmethod
    def gamma(cls, shape: float, scale: float = 1.0) -> "WeightLaw":
        return cls("gamma", float(shape), float(scale))

    @classmethod
    def uniform(cls, low: float, high: float) -> "WeightLaw":
        return cls("uniform", float(low), float(high))

    def moment(self, i: int) -> float:
        if self.kind == "deterministic":
            return self.a ** i
        if self.kind == "gamma":
            return self.b ** i * math.exp(math.lgamma(self.a + i) - math.lgamma(self.a))
        return (self.b ** (i + 1) - self.a ** (i + 1)) / ((i + 1) * (self.b - self.a))

    def ppf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "deterministic":
            return np.full(u.shape, self.a)
        if self.kind == "gamma":
            # keep weights strictly positive even for u == 0
            return np.maximum(stats.gamma.ppf(u, self.a, scale=self.b), np.finfo(float).tiny)
        return np.maximum(self.a + u * (self.b - self.a), np.finfo(float).tiny)

    def to_dict(self) -> dict:
        if self.kind == "deterministic":
            return {"kind": "deterministic", "value": self.a}
        if self.kind == "gamma":
            return {"kind": "gamma", "shape": self.a, "scale": self.b}
        return {"kind": "uniform", "low": self.a, "high": self.b}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightLaw":
        kind = data.get("kind", "deterministic")
        if kind == "deterministic":
            return cls.deterministic(data["value"])
        if kind == "gamma":
            return cls.gamma(data["shape"], data.get("scale", 1.0))
        if kind == "uniform":
            return cls.uniform(data["low"], data["high"])
        raise ValueError(f"unknown weight law {kind!r}")


def _upper_gamma_neg(sigma: float, x):
    """``Gamma(-sigma, x)`` for ``0 < sigma < 1`` via one downward recurrence step."""
    x = np.asarray(x, dtype=float)
    upper = special.gammaincc(1 - sigma, x) * special.gamma(1 - sigma)
    return (x ** -sigma * np.exp(-x) - upper) / sigma


@dataclass(frozen=True)
class LevyIntensity:
    """Intensity ``spatial_density(x) dx * weight_density(s) ds`` of a marked Poisson process.

    Named families get closed-form tails and moments:

    * ``gamma`` with ``params = (beta,)``: ``s^-1 exp(-beta s)``;
    * ``tempered_stable`` with ``params = (alpha, sigma, tau)``:
      ``alpha / Gamma(1 - sigma) * s^(-1 - sigma) exp(-tau s)``, ``0 <= sigma < 1``;
    * ``compound`` with ``params = (rate,)`` and ``law``: ``rate`` times the
      density of ``law`` (finite activity, never truncated).

    ``custom`` uses ``weight_density`` with numerical quadrature.  A callable
    ``spatial_density`` needs ``spatial_bound`` (a sup bound) for thinning.
    """

    spatial_density: Union[float, Callable] = 1.0
    family: str = "gamma"
    params: tuple = (1.0,)
    law: WeightLaw | None = None
    weight_density: Callable | None = None
    spatial_bound: float | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not callable(self.spatial_density) and not float(self.spatial_density) > 0:
            raise ValueError("spatial density must be positive")
        if callable(self.spatial_density) and not (self.spatial_bound and self.spatial_bound > 0):
            raise ValueError("a callable spatial density needs a positive spatial_bound")
        fam, p = self.family, self.params
        if fam == "gamma":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("gamma intensity needs params=(beta,) with beta > 0")
        elif fam == "tempered_stable":
            if len(p) != 3 or p[0] <= 0 or not 0 <= p[1] < 1 or p[2] <= 0:
                raise ValueError("tempered_stable needs (alpha > 0, 0 <= sigma < 1, tau > 0)")
        elif fam == "compound":
            if len(p) != 1 or p[0] <= 0 or self.law is None:
                raise ValueError("compound intensity needs params=(rate,) and a weight law")
        elif fam == "custom":
            if self.weight_density is None:
                raise ValueError("custom intensity needs a weight_density")
        else:
            raise ValueError(f"unknown intensity family {fam!r}")

    # constructors -----------------------------------------------------------

    @classmethod
    def gamma(cls, rate: float = 1.0, beta: float = 1.0) -> "LevyIntensity":
        return cls(float(rate), "gamma", (beta,))

    @classmethod
    def tempered_stable(cls, alpha: float, sigma: float, tau: float, rate: float = 1.0) -> "LevyIntensity":
        return cls(float(rate), "tempered_stable", (alpha, sigma, tau))

    @classmethod
    def compound(cls, rate: float, law: WeightLaw, spatial_rate: float = 1.0) -> "LevyIntensity":
        return cls(float(spatial_rate), "compound", (rate,), law=law)

    @classmethod
    def custom(cls, weight_density: Callable, spatial_density: Union[float, Callable] = 1.0,
               spatial_bound: float | None = None) -> "LevyIntensity":
        return cls(spatial_density, "custom", (), weight_density=weight_density, spatial_bound=spatial_bound)

    # weight marginal --------------------------------------------------------

    @property
    def finite_activity(self) -> bool:
        return self.family == "compound"

    def density(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        fam, p = self.family, self.params
        if fam == "gamma":
            return np.exp(-p[0] * s) / s
        if fam == "tempered_stable":
            a, sig, tau = p
            return a / special.gamma(1 - sig) * s ** (-1 - sig) * np.exp(-tau * s)
        if fam == "compound":
            law = self.law
            if law.kind == "gamma":
                return p[0] * stats.gamma.pdf(s, law.a, scale=law.b)
            if law.kind == "uniform":
                return p[0] * stats.uniform.pdf(s, law.a, law.b - law.a)
            raise ValueError("a deterministic weight law has no density")
        return np.vectorize(self.weight_density, otypes=[float])(s)

    def weight_moment(self, i: int) -> float:
        """``int s^i weight_density(s) ds`` for ``i >= 1``."""
        if i < 1:
            raise ValueError("weight moments are only finite from order 1")
        fam, p = self.family, self.params
        if fam == "gamma":
            return math.gamma(i) / p[0] ** i
        if fam == "tempered_stable":
            a, sig, tau = p
            return a * math.gamma(i - sig) / (math.gamma(1 - sig) * tau ** (i - sig))
        if fam == "compound":
            return p[0] * self.law.moment(i)
        key = ("moment", i)
        if key not in self._cache:
            f = self.weight_density
            lo = integrate.quad(lambda s: s ** i * f(s), 0.0, 1.0, limit=200)[0]
            hi = integrate.quad(lambda s: s ** i * f(s), 1.0, np.inf, limit=200)[0]
            self._cache[key] = lo + hi
        return self._cache[key]

    def tail(self, t) -> np.ndarray:
        """``int_t^inf weight_density(s) ds`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        fam, p = self.family, self.params
        if fam == "gamma":
            return special.exp1(p[0] * t)
        if fam == "tempered_stable":
            a, sig, tau = p
            if sig == 0:
                return a * special.exp1(tau * t)
            return a / special.gamma(1 - sig) * tau ** sig * _upper_gamma_neg(sig, tau * t)
        if fam == "compound":
            law = self.law
            if law.kind == "deterministic":
                return np.where(t < law.a, p[0], 0.0)
            if law.kind == "gamma":
                return p[0] * stats.gamma.sf(t, law.a, scale=law.b)
            return p[0] * stats.uniform.sf(t, law.a, law.b - law.a)
        grid, logtail = self._tail_table(float(np.min(t)) if t.size else 1.0)
        return np.exp(np.interp(np.log(t), grid, logtail))

    def atom_rate(self, eps: float) -> float:
        """Expected number of atoms per unit spatial intensity with weight ``>= eps``."""
        if self.finite_activity:
            return self.params[0]
        if eps <= 0:
            raise ValueError("trunc_eps must be positive for an infinite-activity intensity")
        value = float(self.tail(eps))
        if not np.isfinite(value):
            raise ValueError("weight density has a non-integrable tail above trunc_eps")
        return value

    def lost_mass(self, eps: float) -> float:
        """Expected weight below ``eps`` per unit spatial intensity (truncation bias)."""
        if self.finite_activity or eps <= 0:
            return 0.0
        fam, p = self.family, self.params
        if fam == "gamma":
            return -math.expm1(-p[0] * eps) / p[0]
        if fam == "tempered_stable":
            a, sig, tau = p
            return a * special.gammainc(1 - sig, tau * eps) / tau ** (1 - sig)
        return integrate.quad(lambda s: s * self.weight_density(s), 0.0, eps, limit=200)[0]

    def _tail_table(self, eps: float):
        key = ("tail", eps)
        if key not in self._cache:
            f = self.weight_density
            hi = max(1.0, eps)
            while integrate.quad(f, hi, np.inf, limit=200)[0] > 1e-14 * integrate.quad(f, eps, hi, limit=200)[0]:
                hi *= 2.0
                if hi > 1e8:
                    raise ValueError("weight density has a non-integrable tail")
            grid = np.geomspace(eps, hi, 400)
            pieces = np.array([integrate.quad(f, a, b, limit=100)[0] for a, b in zip(grid[:-1], grid[1:])])
            last = integrate.quad(f, hi, np.inf, limit=200)[0]
            tails = np.concatenate([np.cumsum(pieces[::-1])[::-1] + last, [last]])
            tails = np.maximum(tails, 1e-300)
            self._cache[key] = (np.log(grid), np.log(tails))
        return self._cache[key]

    def weights_from_uniforms(self, u, eps: float) -> np.ndarray:
        """Map uniforms in ``(0, 1]`` to weights drawn from the normalized intensity on ``[eps, inf)``."""
        u = np.asarray(u, dtype=float)
        if u.size == 0:
            return np.empty(0)
        if self.family == "compound":
            return self.law.ppf(1.0 - u)
        if self.family == "custom":
            grid, logtail = self._tail_table(eps)
            target = np.log(u) + logtail[0]
            # log-tail is decreasing in log-s; np.interp needs increasing abscissae
            return np.exp(np.interp(target, logtail[::-1], grid[::-1]))
        return self._invert_tail(u * float(self.tail(eps)), eps)

    def _invert_tail(self, target: np.ndarray, eps: float) -> np.ndarray:
        # start from a log-log table of the tail, then Newton on log T(exp(x))
        x_hi = math.log(max(eps, 1.0))
        floor = float(target.min())
        while float(self.tail(math.exp(x_hi))) > floor:
            x_hi += 2.0
        grid = np.linspace(math.log(eps), x_hi, 2048)
        log_tail = np.log(np.maximum(self.tail(np.exp(grid)), 1e-300))
        log_target = np.log(target)
        x = np.interp(log_target, log_tail[::-1], grid[::-1])
        for _ in range(4):
            s = np.exp(x)
            tail = self.tail(s)
            slope = self.density(s) * s / tail
            x = np.maximum(x + (np.log(tail) - log_target) / slope, grid[0])
        return np.exp(x)


# ---------------------------------------------------------------------------
# model variants


def _spatial_integral(density, window: Window) -> float:
    if not callable(density):
        return float(density) * window.volume()
    ranges = list(zip(window.lower, window.upper))
    return integrate.nquad(lambda *x: density(np.array(x)), ranges)[0]


@dataclass(frozen=True)
class MarkedPoissonCRM:
    """Completely random measure given by a marked Poisson process with intensity ``intensity``."""

    intensity: LevyIntensity

    def spatial_mass(self, window: Window) -> float:
        return _spatial_integral(self.intensity.spatial_density, window)

    def weight_moment(self, i: int) -> float:
        return self.intensity.weight_moment(i)


@dataclass(frozen=True)
class Gamma:
    """Gamma random measure: intensity ``rate dx * s^-1 e^-s ds``."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("gamma rate must be positive")

    @property
    def intensity(self) -> LevyIntensity:
        return LevyIntensity.gamma(self.rate)

    def spatial_mass(self, window: Window) -> float:
        return self.rate * window.volume()

    def weight_moment(self, i: int) -> float:
        return math.gamma(i)


@dataclass(frozen=True)
class PoissonPP:
    """Homogeneous Poisson point process, every atom of weight one."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Poisson rate must be positive")

    def spatial_mass(self, window: Window) -> float:
        return self.rate * window.volume()

    def weight_moment(self, i: int) -> float:
        return 1.0


@dataclass(frozen=True)
class DeterministicDiffuse:
    """Non-random measure with a density (constant or callable) w.r.t. Lebesgue measure."""

    density: Union[float, Callable] = 1.0

    def __post_init__(self):
        if not callable(self.density) and not float(self.density) > 0:
            raise ValueError("diffuse density must be positive")

    def mass(self, window: Window) -> float:
        return _spatial_integral(self.density, window)


@dataclass(frozen=True)
class FixedAtoms:
    """Atoms at fixed locations with independent random weights."""

    atoms: tuple

    def __post_init__(self):
        cleaned = []
        for x, law in self.atoms:
            if not isinstance(law, WeightLaw):
                law = WeightLaw.deterministic(law)
            cleaned.append((tuple(float(v) for v in np.atleast_1d(x)), law))
        locs = [x for x, _ in cleaned]
        if len(set(locs)) != len(locs):
            raise ValueError("fixed atom locations must be distinct")
        if len({len(x) for x in locs}) > 1:
            raise ValueError("fixed atoms must share one dimension")
        object.__setattr__(self, "atoms", tuple(cleaned))

    @property
    def locations(self) -> np.ndarray:
        if not self.atoms:
            return np.empty((0, 1))
        return np.array([x for x, _ in self.atoms], dtype=float)


@dataclass(frozen=True)
class Mixture:
    """Sum of independent components (nested mixtures are flattened)."""

    components: tuple

    def __post_init__(self):
        flat = []
        for c in self.components:
            flat.extend(c.components if isinstance(c, Mixture) else [c])
        if not flat:
            raise ValueError("a mixture needs at least one component")
        fixed = [x for c in flat if isinstance(c, FixedAtoms) for x, _ in c.atoms]
        if len(set(fixed)) != len(fixed):
            raise ValueError("fixed atoms of different components must not share a location")
        object.__setattr__(self, "components", tuple(flat))


MeasureModel = Union[Gamma, MarkedPoissonCRM, PoissonPP, DeterministicDiffuse, FixedAtoms, Mixture]

_POISSON_TYPES = (Gamma, MarkedPoissonCRM, PoissonPP)


def components(model: MeasureModel) -> tuple:
    return model.components if isinstance(model, Mixture) else (model,)


def has_diffuse_part(model: MeasureModel) -> bool:
    return any(isinstance(c, DeterministicDiffuse) for c in components(model))


def is_unit_weight(model: MeasureModel) -> bool:
    """True when every atom the model can produce has weight exactly one."""
    for c in components(model):
        if isinstance(c, PoissonPP):
            continue
        if isinstance(c, FixedAtoms) and all(l.kind == "deterministic" and l.a == 1.0 for _, l in c.atoms):
            continue
        if isinstance(c, MarkedPoissonCRM) and c.intensity.family == "compound" \
                and c.intensity.law.kind == "deterministic" and c.intensity.law.a == 1.0:
            continue
        return False
    return True


# ---------------------------------------------------------------------------
# closed-form moments


def _component_moment(comp, boxes: Sequence[Window], powers: Sequence[int]) -> float:
    """Expected ordered distinct-tuple sum of one component over the given slots."""
    if not boxes:
        return 1.0
    if isinstance(comp, _POISSON_TYPES):
        return float(np.prod([comp.spatial_mass(b) * comp.weight_moment(p) for b, p in zip(boxes, powers)]))
    if isinstance(comp, DeterministicDiffuse):
        if any(p != 1 for p in powers):
            return 0.0
        return float(np.prod([comp.mass(b) for b in boxes]))
    if isinstance(comp, FixedAtoms):
        if not comp.atoms:
            return 0.0
        locs = comp.locations
        rows = np.array([[law.moment(p) for _, law in comp.atoms] for p in powers])
        rows *= np.array([b.contains(locs) for b in boxes])
        return float(distinct_product_sum(rows))
    raise TypeError(f"not a measure model component: {comp!r}")


def analytic_moment(model: MeasureModel, powers: Sequence[int], delta: OffDiagonalBox) -> float:
    """Exact ``M_{i_1..i_n}(delta)``: expected sum over ordered tuples of distinct atoms in ``delta``
    of ``prod s_j^{i_j}``.

    Independent components combine by assigning each slot to one component.
    Raises :class:`UnavailableMoment` for a positive exclusion radius.
    """
    powers = tuple(int(p) for p in powers)
    if len(powers) != delta.n:
        raise ValueError(f"need {delta.n} powers, got {len(powers)}")
    if any(p < 1 for p in powers):
        raise ValueError("powers must be >= 1")
    if delta.exclusion_radius > 0 and delta.n >= 2:
        raise UnavailableMoment("closed forms exist only for the exact off-diagonal set (exclusion radius 0)")
    comps = components(model)
    n = delta.n
    cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def part(c: int, slots: tuple[int, ...]) -> float:
        key = (c, slots)
        if key not in cache:
            cache[key] = _component_moment(comps[c], [delta.boxes[j] for j in slots], [powers[j] for j in slots])
        return cache[key]

    total = 0.0
    for assignment in itertools.product(range(len(comps)), repeat=n):
        term = 1.0
        for c in range(len(comps)):
            slots = tuple(j for j in range(n) if assignment[j] == c)
            term *= part(c, slots)
            if term == 0.0:
                break
        total += term
    return total


def mean_atom_count(model: MeasureModel, window: Window, trunc_eps: float = DEFAULT_TRUNC_EPS) -> float:
    """Expected number of atoms a sampler puts in ``window``."""
    total = 0.0
    for c in components(model):
        if isinstance(c, PoissonPP):
            total += c.spatial_mass(window)
        elif isinstance(c, (Gamma, MarkedPoissonCRM)):
            total += c.spatial_mass(window) * c.intensity.atom_rate(trunc_eps)
        elif isinstance(c, FixedAtoms):
            total += float(window.contains(c.locations).sum()) if c.atoms else 0.0
        else:
            raise ValueError("diffuse components have no atoms")
    return total


def truncation_bias(model: MeasureModel, window: Window, trunc_eps: float = DEFAULT_TRUNC_EPS) -> float:
    """Expected mass in ``window`` discarded by truncating weights below ``trunc_eps``."""
    return sum(c.spatial_mass(window) * c.intensity.lost_mass(trunc_eps)
               for c in components(model) if isinstance(c, (Gamma, MarkedPoissonCRM)))


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class DiffuseMarker:
    """Returned instead of atoms when the law is a deterministic diffuse measure."""

    density: Union[float, Callable]
    window: Window

    def mass(self) -> float:
        return _spatial_integral(self.density, self.window)


def _uniform_points(rng, window: Window, k: int) -> np.ndarray:
    lo, hi = window.lower, window.upper
    return np.asarray(lo) + rng.random((k, window.d)) * np.subtract(hi, lo)


def _poisson_points(rng, window: Window, density, bound) -> np.ndarray:
    """Spatial Poisson points with the given intensity (thinning for callables)."""
    if not callable(density):
        k = rng.poisson(density * window.volume())
        return _uniform_points(rng, window, k)
    k = rng.poisson(bound * window.volume())
    pts = _uniform_points(rng, window, k)
    keep = rng.random(k) * bound < np.array([density(p) for p in pts])
    return pts[keep]


def _draw_plan(comp, window: Window, eps: float) -> Callable:
    """Sampler of one component: ``rng -> (locations, values, needs_transform)``.

    For marked Poisson parts ``values`` are uniforms in ``(0, 1]`` that still
    have to be mapped to weights; the mapping is vectorized over a batch.
    """
    if isinstance(comp, PoissonPP):
        def draw(rng):
            pts = _poisson_points(rng, window, comp.rate, None)
            return pts, np.ones(len(pts)), False
        return draw
    if isinstance(comp, (Gamma, MarkedPoissonCRM)):
        lev = comp.intensity
        rate = lev.atom_rate(eps)
        density = lev.spatial_density
        if callable(density):
            thinned = lambda x: rate * density(x)  # noqa: E731
            bound = rate * lev.spatial_bound
        else:
            thinned, bound = rate * float(density), None

        def draw(rng):
            pts = _poisson_points(rng, window, thinned, bound)
            return pts, 1.0 - rng.random(len(pts)), True
        return draw
    if isinstance(comp, FixedAtoms):
        if not comp.atoms:
            return lambda rng: (np.empty((0, window.d)), np.empty(0), False)
        inside = window.contains(comp.locations)
        locs = comp.locations[inside]

        def draw(rng):
            u = rng.random(len(comp.atoms))
            w = np.array([law.ppf(ui) for (_, law), ui in zip(comp.atoms, u)], dtype=float)
            return locs, w[inside], False
        return draw
    if isinstance(comp, DeterministicDiffuse):
        raise ValueError("diffuse components cannot be sampled as atoms; use analytic moments")
    raise TypeError(f"not a measure model component: {comp!r}")


def _check_window(model: MeasureModel, window: Window):
    for c in components(model):
        if isinstance(c, FixedAtoms) and c.atoms and len(c.atoms[0][0]) != window.d:
            raise ValueError("fixed atom dimension does not match the window")


def sample_many(model: MeasureModel, window: Window, seed: int, count: int,
                trunc_eps: float = DEFAULT_TRUNC_EPS, start: int = 0,
                workers: int | None = None) -> SampleBatch:
    """Samples ``start .. start + count - 1`` of ``seed`` restricted to ``window``."""
    if count < 1:
        raise ValueError("sample count must be >= 1")
    if has_diffuse_part(model):
        raise ValueError("models with a diffuse part are analytic-only and cannot be sampled as atoms")
    _check_window(model, window)
    comps = components(model)
    workers = thread_count() if workers is None else max(1, workers)

    plans = [_draw_plan(c, window, trunc_eps) for c in comps]

    def run(indices):
        out = []
        for i in indices:
            rng = rng_for(seed, start + i)
            out.append([plan(rng) for plan in plans])
        return out

    chunks = np.array_split(np.arange(count), workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            draws = [d for part in pool.map(run, chunks) for d in part]
    else:
        draws = run(chunks[0])

    locs, vals, idx = [], [], []
    for c_pos, comp in enumerate(comps):
        c_locs = [draws[i][c_pos][0] for i in range(count)]
        c_vals = [draws[i][c_pos][1] for i in range(count)]
        sizes = [len(v) for v in c_vals]
        flat = np.concatenate(c_vals) if c_vals else np.empty(0)
        if draws[0][c_pos][2]:
            flat = comp.intensity.weights_from_uniforms(flat, trunc_eps)
        locs.append(np.vstack(c_locs).reshape(-1, window.d))
        vals.append(flat)
        idx.append(np.repeat(np.arange(count), sizes))
    locs = np.vstack(locs)
    weights = np.concatenate(vals)
    index = np.concatenate(idx)
    if __debug__ and len(comps) > 1 and weights.size:
        # atoms of independent continuous components collide with probability zero
        order = np.lexsort((*locs.T[::-1], index))
        same = np.all(locs[order][1:] == locs[order][:-1], axis=1) & (index[order][1:] == index[order][:-1])
        assert not same.any(), "two atoms of one sample share a location"
    return SampleBatch(locs, weights, index, count, window)


def sample(model: MeasureModel, window: Window, seed: int, index: int = 0,
           trunc_eps: float = DEFAULT_TRUNC_EPS) -> DiscreteMeasure | DiffuseMarker:
    """One sample restricted to ``window``; a :class:`DiffuseMarker` for a purely diffuse law."""
    if isinstance(model, DeterministicDiffuse):
        return DiffuseMarker(model.density, window)
    batch = sample_many(model, window, seed, 1, trunc_eps, start=index, workers=1)
    return DiscreteMeasure(batch.locations, batch.weights, window.d)


# ---------------------------------------------------------------------------
# JSON configuration


def _intensity_to_dict(lev: LevyIntensity) -> dict:
    if callable(lev.spatial_density) or lev.family == "custom":
        raise ValueError("intensities with callables cannot be serialized")
    out = {"spatial_rate": float(lev.spatial_density), "family": lev.family}
    if lev.family == "gamma":
        out["beta"] = lev.params[0]
    elif lev.family == "tempered_stable":
        out.update(alpha=lev.params[0], sigma=lev.params[1], tau=lev.params[2])
    else:
        out.update(rate=lev.params[0], law=lev.law.to_dict())
    return out


def _intensity_from_dict(data: dict) -> LevyIntensity:
    fam = data.get("family", "gamma")
    rate = data.get("spatial_rate", 1.0)
    if fam == "gamma":
        return LevyIntensity.gamma(rate, data.get("beta", 1.0))
    if fam == "tempered_stable":
        return LevyIntensity.tempered_stable(data["alpha"], data["sigma"], data["tau"], rate)
    if fam == "compound":
        return LevyIntensity.compound(data["rate"], WeightLaw.from_dict(data["law"]), rate)
    raise ValueError(f"unknown intensity family {fam!r}")


def model_to_dict(model: MeasureModel) -> dict:
    if isinstance(model, Gamma):
        return {"variant": "gamma", "rate": model.rate}
    if isinstance(model, PoissonPP):
        return {"variant": "poisson", "rate": model.rate}
    if isinstance(model, MarkedPoissonCRM):
        return {"variant": "marked_poisson", "intensity": _intensity_to_dict(model.intensity)}
    if isinstance(model, DeterministicDiffuse):
        if callable(model.density):
            raise ValueError("callable densities cannot be serialized")
        return {"variant": "diffuse", "density": float(model.density)}
    if isinstance(model, FixedAtoms):
        return {"variant": "fixed_atoms",
                "atoms": [{"x": list(x), "law": law.to_dict()} for x, law in model.atoms]}
    if isinstance(model, Mixture):
        return {"variant": "mixture", "components": [model_to_dict(c) for c in model.components]}
    raise TypeError(f"not a measure model: {model!r}")


def model_from_dict(data: dict) -> MeasureModel:
    """Build a model from its JSON form, e.g. ``{"variant": "gamma", "rate": 1.0}``."""
    if not isinstance(data, dict) or "variant" not in data:
        raise ValueError("model config must be an object with a 'variant' key")
    v = data["variant"]
    try:
        if v == "gamma":
            return Gamma(float(data.get("rate", 1.0)))
        if v == "poisson":
            return PoissonPP(float(data.get("rate", 1.0)))
        if v == "marked_poisson":
            return MarkedPoissonCRM(_intensity_from_dict(data["intensity"]))
        if v == "diffuse":
            return DeterministicDiffuse(float(data.get("density", 1.0)))
        if v == "fixed_atoms":
            return FixedAtoms(tuple((tuple(a["x"]), WeightLaw.from_dict(a.get("law", {"value": 1.0})))
                                   for a in data["atoms"]))
        if v == "mixture":
            return Mixture(tuple(model_from_dict(c) for c in data["components"]))
    except KeyError as exc:
        raise ValueError(f"model config for {v!r} is missing key {exc.args[0]!r}") from None
    raise ValueError(f"unknown model variant {v!r}")


def model_dimension(model: MeasureModel) -> int | None:
    """Spatial dimension forced by fixed atoms, or None when any dimension works."""
    dims = {len(x) for c in components(model) if isinstance(c, FixedAtoms) for x, _ in c.atoms}
    if len(dims) > 1:
        raise ValueError("fixed atoms of different dimensions")
    return dims.pop() if dims else None
