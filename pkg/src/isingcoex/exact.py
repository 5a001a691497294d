"""Exact finite-volume Ising measures by full enumeration.

Configuration ids enumerate sites in region order with bit i = (1 + s_i) / 2.
Everything is accumulated in the log domain so fields up to |h| = 5 and beta
up to 3 on twenty sites stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import kernels
from .lattice import Region, Site

ENUMERATION_CAP = 20


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpinConfig:
    region: Region
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8).copy()
        if v.shape != (len(self.region),):
            raise ValueError("spin configuration must cover the region exactly")
        if not np.all((v == 1) | (v == -1)):
            raise ValueError("spins must be +1 or -1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, region: Region, sign: int) -> "SpinConfig":
        return cls(region, np.full(len(region), sign, dtype=np.int8))

    @classmethod
    def from_id(cls, region: Region, cid: int) -> "SpinConfig":
        bits = (cid >> np.arange(len(region))) & 1
        return cls(region, (2 * bits - 1).astype(np.int8))

    @classmethod
    def from_mapping(cls, region: Region, spins: Mapping[Site, int], default: int = -1) -> "SpinConfig":
        v = np.full(len(region), default, dtype=np.int8)
        for s, val in spins.items():
            v[region.id_of(s)] = val
        return cls(region, v)

    def __getitem__(self, site) -> int:
        return int(self.values[self.region.id_of(site)])

    def config_id(self) -> int:
        bits = (self.values > 0).astype(np.int64)
        return int((bits << np.arange(len(bits), dtype=np.int64)).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpinConfig)
            and other.region.sites == self.region.sites
            and np.array_equal(other.values, self.values)
        )

    def __hash__(self):
        return hash((self.region.sites, self.values.tobytes()))


BoundarySpec = Union[str, Mapping[Site, int], None]


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Region, inverse temperature, per-site field and boundary spins.

    ``boundary`` maps lattice sites outside the region to -1, 0 or +1;
    missing entries are free (0).
    """

    region: Region
    beta: float
    field: np.ndarray
    boundary: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        f = np.asarray(self.field, dtype=np.float64)
        if f.ndim == 0:
            f = np.full(len(self.region), float(f))
        if f.shape != (len(self.region),):
            raise ValueError("field must have one entry per region site")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "field", f)
        outer = set(self.region.outer_boundary())
        clean = {}
        for s, v in dict(self.boundary).items():
            s = tuple(int(c) for c in s)
            if s not in outer:
                raise ValueError(f"boundary site {s} is not an outer neighbour of the region")
            if v not in (-1, 0, 1):
                raise ValueError("boundary spins must be -1, 0 or +1")
            if v != 0:
                clean[s] = int(v)
        object.__setattr__(self, "boundary", dict(sorted(clean.items())))

    @property
    def homogeneous_h(self) -> float | None:
        if len(self.field) == 0:
            return 0.0
        h0 = float(self.field[0])
        return h0 if np.all(self.field == h0) else None

    def boundary_field(self) -> np.ndarray:
        """Sum of boundary spins adjacent to each site (without beta)."""
        out = np.zeros(len(self.region))
        for i, s in enumerate(self.region.sites):
            for y in self.region.lattice_neighbors(s):
                out[i] += self.boundary.get(y, 0)
        return out

    def boundary_counts(self) -> tuple[np.ndarray, np.ndarray]:
        plus = np.zeros(len(self.region), dtype=np.int64)
        minus = np.zeros(len(self.region), dtype=np.int64)
        for i, s in enumerate(self.region.sites):
            for y in self.region.lattice_neighbors(s):
                v = self.boundary.get(y, 0)
                if v > 0:
                    plus[i] += 1
                elif v < 0:
                    minus[i] += 1
        return plus, minus

    def effective_field(self) -> np.ndarray:
        return self.field + self.beta * self.boundary_field()

    def with_field(self, field) -> "MeasureSpec":
        return MeasureSpec(self.region, self.beta, field, self.boundary)

    def flipped(self) -> "MeasureSpec":
        return MeasureSpec(self.region, self.beta, -self.field, {s: -v for s, v in self.boundary.items()})

    def to_json(self) -> dict:
        return {
            "lattice": self.region.kind.name,
            "sites": [list(s) for s in self.region.sites],
            "beta": self.beta,
            "field": [float(x) for x in self.field],
            "boundary": [[list(s), v] for s, v in self.boundary.items()],
        }


def measure(region: Region, beta: float, h=0.0, bc: BoundarySpec = "free") -> MeasureSpec:
    """Convenience constructor; ``bc`` is 'free', 'plus', 'minus' or a mapping."""
    if bc is None or bc == "free":
        boundary = {}
    elif bc in ("plus", "minus"):
        v = 1 if bc == "plus" else -1
        boundary = {s: v for s in region.outer_boundary()}
    elif isinstance(bc, str):
        raise ValueError(f"unknown boundary condition {bc!r}")
    else:
        boundary = dict(bc)
    return MeasureSpec(region, float(beta), h, boundary)


class GibbsEngine:
    """All 2^N log-weights of a measure, normalised once.

    Functionals passed to :meth:`expectation` may be arrays over configuration
    ids, callables taking the (2^N, N) spin matrix, or events.
    """

    def __init__(self, spec: MeasureSpec, cap: int = ENUMERATION_CAP):
        n = len(spec.region)
        if n > cap:
            raise EnumerationTooLarge(f"enumeration too large: {n} sites > cap {cap}")
        self.spec = spec
        self.region = spec.region
        self.n = n
        self.log_weights = kernels.log_weights(
            n, spec.region.edges(), float(spec.beta), spec.effective_field()
        )
        m = float(self.log_weights.max())
        self.log_Z = m + float(np.log(np.sum(np.exp(self.log_weights - m))))
        self.probs = np.exp(self.log_weights - self.log_Z)
        self._ids = None
        self._spin_cache: dict[int, np.ndarray] = {}

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def ids(self) -> np.ndarray:
        if self._ids is None:
            self._ids = np.arange(self.size, dtype=np.int64)
        return self._ids

    def _pos(self, site) -> int:
        if isinstance(site, (int, np.integer)):
            return int(site)
        return self.region.id_of(site)

    def spin(self, site) -> np.ndarray:
        i = self._pos(site)
        if i not in self._spin_cache:
            self._spin_cache[i] = (2 * ((self.ids >> i) & 1) - 1).astype(np.int8)
        return self._spin_cache[i]

    def magnetization(self) -> np.ndarray:
        return 2 * np.bitwise_count(self.ids).astype(np.int64) - self.n

    def spin_matrix(self) -> np.ndarray:
        return np.stack([self.spin(i) for i in range(self.n)], axis=1)

    def project(self, sites: Sequence) -> np.ndarray:
        return kernels.project_bits(self.ids, [self._pos(s) for s in sites])

    def indicator(self, event) -> np.ndarray:
        """Boolean array over configuration ids for an event on this region."""
        pos = [self._pos(s) for s in event.support]
        return event.table()[kernels.project_bits(self.ids, pos)]

    def marginal(self, sites: Sequence, weights: np.ndarray | None = None) -> np.ndarray:
        """Sum of ``probs * weights`` grouped by the configuration on ``sites``."""
        w = self.probs if weights is None else self.probs * weights
        return np.bincount(self.project(sites), weights=w, minlength=1 << len(sites))

    def _values(self, f) -> np.ndarray:
        if isinstance(f, np.ndarray):
            if f.shape != (self.size,):
                raise ValueError("functional array must have one entry per configuration")
            return f
        if hasattr(f, "table") and hasattr(f, "support"):
            return self.indicator(f)
        if callable(f):
            return np.asarray(f(self.spin_matrix()))
        raise TypeError("unsupported functional")

    def prob(self, sigma) -> float:
        cid = sigma.config_id() if isinstance(sigma, SpinConfig) else int(sigma)
        return float(np.exp(self.log_weights[cid] - self.log_Z))

    def expectation(self, f) -> float:
        return float(np.dot(self.probs, self._values(f)))

    def covariance(self, f, g) -> float:
        fv = self._values(f).astype(np.float64)
        gv = self._values(g).astype(np.float64)
        return float(np.dot(self.probs, fv * gv) - np.dot(self.probs, fv) * np.dot(self.probs, gv))

    def conditional(self, constraints: Mapping[Site, int]) -> "GibbsEngine":
        return conditional(self, constraints)


def log_partition(spec: MeasureSpec, cap: int = ENUMERATION_CAP) -> float:
    return GibbsEngine(spec, cap).log_Z


def prob(engine: GibbsEngine, sigma) -> float:
    return engine.prob(sigma)


def expectation(engine: GibbsEngine, f) -> float:
    return engine.expectation(f)


def covariance(engine: GibbsEngine, f, g) -> float:
    return engine.covariance(f, g)


def conditional(engine: GibbsEngine, constraints: Mapping[Site, int]) -> GibbsEngine:
    """Engine over the unconstrained sites; pinned spins become boundary spins."""
    pins: dict[Site, int] = {}
    for s, v in constraints.items():
        s = tuple(int(c) for c in s)
        engine.region.id_of(s)
        if v not in (-1, 1):
            raise ValueError("constraint values must be +1 or -1")
        if pins.get(s, v) != v:
            raise ValueError(f"contradictory constraints at {s}")
        pins[s] = v
    spec = engine.spec
    region = spec.region
    free = [s for s in region.sites if s not in pins]
    sub = region.subregion(free, allow_empty=True)
    fld = np.array([spec.field[region.id_of(s)] for s in free], dtype=np.float64)
    outer = set(sub.outer_boundary())
    boundary = {s: v for s, v in spec.boundary.items() if s in outer}
    for s, v in pins.items():
        if s in outer:
            boundary[s] = v
    return GibbsEngine(MeasureSpec(sub, spec.beta, fld, boundary))

