"""The hybrid measure mu_{Lambda,p,h}: Bernoulli(p) availability on the top
layer Lambda_(1) = {x(3) = 1} on top of the Gibbs measure.

All p-dependence sits in binomial weights over masks omega, so a
:class:`HybridTables` built once per (measure, event) answers mu and both
partial derivatives at every p for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .events import IncreasingEvent
from .exact import ENUMERATION_CAP, GibbsEngine, MeasureSpec
from .lattice import layer_sites

MASK_CAP = 10
DP_ZERO = 1e-14


class MaskCapExceeded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HybridSpec:
    measure: MeasureSpec
    p: float
    event: IncreasingEvent
    crossing_n: int | None = None
    mask_cap: int = MASK_CAP

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        region = self.measure.region
        self.event.check_in(region)
        bad = [s for s in self.event.support if s[2] not in (0, 1)]
        if bad:
            raise ValueError(f"event support must lie in the slab x(3) in {{0,1}}: {bad[:3]}")

    def with_p(self, p: float) -> "HybridSpec":
        return HybridSpec(self.measure, p, self.event, self.crossing_n, self.mask_cap)

    def with_h(self, h: float) -> "HybridSpec":
        m = self.measure.with_field(np.full(len(self.measure.region), float(h)))
        return HybridSpec(m, self.p, self.event, self.crossing_n, self.mask_cap)


@dataclass(frozen=True)
class DerivativePair:
    p: float
    h: float
    mu: float
    d_dh: float
    d_dp: float

    @property
    def dp_zero(self) -> bool:
        return self.d_dp < DP_ZERO

    @property
    def ratio(self) -> float:
        return math.inf if self.dp_zero else self.d_dh / self.d_dp

    @property
    def flags(self) -> str:
        return "dp_zero" if self.dp_zero else ""


def binomial_weights(p: float, n_bits: int, omegas: np.ndarray) -> np.ndarray:
    ones = np.bitwise_count(omegas.astype(np.uint64)).astype(np.int64)
    return np.power(p, ones) * np.power(1.0 - p, n_bits - ones)


class HybridTables:
    """Per-mask probabilities for one measure and one event.

    ``G[w]`` is P(event occurs on S_0 u omega^{-1}(1)) for the mask with
    integer code ``w`` (bit l <-> ``layer1[l]``).
    """

    def __init__(self, engine: GibbsEngine, event: IncreasingEvent, mask_cap: int = MASK_CAP):
        region = engine.region
        event.check_in(region)
        self.engine = engine
        self.event = event
        self.layer1 = layer_sites(region, 1)
        self.L = len(self.layer1)
        if self.L > mask_cap:
            raise MaskCapExceeded(
                f"|Lambda_(1)| = {self.L} exceeds the mask cap {mask_cap}; use the Monte Carlo estimator mu_mc"
            )
        self.table = event.table()
        self.q = engine.marginal(event.support)
        self.fixed = event.bits_of(s for s in event.support if s[2] == 0)
        self.vbits = np.array([event.bits_of([x]) for x in self.layer1], dtype=np.int64)
        self.omegas = np.arange(1 << self.L, dtype=np.int64)
        self.masks = np.array([self.mask(w) for w in self.omegas], dtype=np.int64)
        self.G = subset_lattice_sums(self.table, self.q[None, :], self.vbits)[0]
        self._WM: np.ndarray | None = None
        self._pivots: np.ndarray | None = None

    @property
    def WM(self) -> np.ndarray:
        """E[M; I{occurs on mask}] pieces: sum over sigma of P * M * I, per omega."""
        if self._WM is None:
            e = self.engine
            mag = e.magnetization()
            self.mean_mag = e.expectation(mag)
            wm = e.marginal(self.event.support, weights=mag)
            self._WM = subset_lattice_sums(self.table, wm[None, :], self.vbits)[0]
        return self._WM

    def mask(self, omega: int) -> int:
        m = self.fixed
        for l in range(self.L):
            if omega >> l & 1:
                m |= int(self.vbits[l])
        return m

    def mask_of_sites(self, available: Iterable[Sequence[int]]) -> int:
        """Support mask for S_0 plus the given top-layer sites."""
        return self.fixed | self.event.bits_of(s for s in available if s[2] == 1)

    def sums(self, weights: np.ndarray, masks: np.ndarray) -> np.ndarray:
        uniq, inv = np.unique(masks, return_inverse=True)
        r = kernels.masked_sums(self.table, np.ascontiguousarray(weights, dtype=np.float64), uniq)
        return r[:, inv]

    def site_covariances(self, site, masks: np.ndarray) -> np.ndarray:
        """<sigma_site ; I{A occurs on mask}> for each support mask."""
        e = self.engine
        spin = e.spin(site)
        w = e.marginal(self.event.support, weights=spin)
        both = self.sums(np.stack([w, self.q]), masks)
        return both[0] - e.expectation(spin) * both[1]

    @property
    def pivots(self) -> np.ndarray:
        """pivots[l, w] = P(layer1[l] is +pivotal for H(layer1[l], w)); 0 where w has bit l."""
        if self._pivots is None:
            piv = np.zeros((self.L, self.omegas.size))
            ids = np.arange(self.table.size, dtype=np.int64)
            for l in range(self.L):
                xbit = int(self.vbits[l])
                if xbit == 0:
                    continue
                # D(u) = T[u | x] and not T[u minus x] only looks at s & (M u {x})
                d = self.table[ids | xbit] & ~self.table[ids & ~xbit]
                w = np.where(ids & xbit, self.q, 0.0)
                r = subset_lattice_sums(d, w[None, :], self.vbits)[0]
                sel = (self.omegas >> l & 1) == 0
                piv[l, sel] = r[self.omegas[sel] | (1 << l)]
            self._pivots = piv
        return self._pivots

    def pivots_direct(self) -> np.ndarray:
        """Same as :attr:`pivots` by a per-mask scan; kept as an oracle."""
        piv = np.zeros((self.L, self.omegas.size))
        for l in range(self.L):
            xbit = int(self.vbits[l])
            if xbit == 0:
                continue
            sel = (self.omegas >> l & 1) == 0
            uniq, inv = np.unique(self.masks[sel], return_inverse=True)
            vals = kernels.plus_pivot_sums(self.table, self.q, xbit, uniq)
            piv[l, sel] = vals[inv]
        return piv

    def mu(self, p: float) -> float:
        return float(np.dot(binomial_weights(p, self.L, self.omegas), self.G))

    def dmu_dp(self, p: float) -> float:
        total = 0.0
        piv = self.pivots
        for l in range(self.L):
            sel = (self.omegas >> l & 1) == 0
            w = self.omegas[sel]
            # drop bit l so the weight counts the L - 1 remaining sites
            rest = (w & ((1 << l) - 1)) | ((w >> (l + 1)) << l)
            total += float(np.dot(binomial_weights(p, self.L - 1, rest), piv[l, sel]))
        return total

    def dmu_dh(self, p: float) -> float:
        wm = self.WM
        cov = wm - self.mean_mag * self.G
        return float(np.dot(binomial_weights(p, self.L, self.omegas), cov))

    def pair(self, p: float, h: float = math.nan) -> DerivativePair:
        return DerivativePair(p, h, self.mu(p), self.dmu_dh(p), self.dmu_dp(p))


def subset_lattice_sums(table: np.ndarray, weights: np.ndarray, vbits: np.ndarray) -> np.ndarray:
    """R[a, w] = sum_s W[a, s] T[s & M(w)] for every omega code w.

    M(w) keeps every support bit except the ``vbits[l]`` with w_l = 0.  The
    sum equals <marginal of W on M(w), T restricted to M(w)>, and marginals
    are shared down a depth-first walk of the subset lattice, so each step
    halves the tensors.
    """
    n_w, size = weights.shape
    k = size.bit_length() - 1
    L = len(vbits)
    out = np.zeros((n_w, 1 << L))
    # bit j of a support index is tensor axis k - j (axis 0 holds the weight rows)
    axes = [k - (int(b).bit_length() - 1) if b else None for b in vbits]
    W0 = weights.reshape((n_w,) + (2,) * k)
    T0 = table.astype(np.float64).reshape((1,) + (2,) * k)

    def walk(W, T, code, start):
        out[:, code] = (W * T).reshape(n_w, -1).sum(axis=1)
        for l in range(start, L):
            ax = axes[l]
            if ax is None:
                walk(W, T, code & ~(1 << l), l + 1)
            else:
                walk(W.sum(axis=ax, keepdims=True), T[(slice(None),) * ax + (slice(0, 1),)], code & ~(1 << l), l + 1)

    walk(W0, T0, (1 << L) - 1, 0)
    return out


_CACHE: dict = {}


def tables(spec: HybridSpec, cap: int = ENUMERATION_CAP) -> HybridTables:
    key = (id(spec.measure), id(spec.event))
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is spec.measure and hit[1] is spec.event:
        return hit[2]
    if len(_CACHE) > 64:
        _CACHE.clear()
    t = HybridTables(GibbsEngine(spec.measure, cap), spec.event, spec.mask_cap)
    _CACHE[key] = (spec.measure, spec.event, t)
    return t


def mu(spec: HybridSpec) -> float:
    return tables(spec).mu(spec.p)


def dmu_dp(spec: HybridSpec) -> float:
    return tables(spec).dmu_dp(spec.p)


def dmu_dh(spec: HybridSpec) -> float:
    """Directional derivative along the homogeneous field, sum_x d/dh_x."""
    return tables(spec).dmu_dh(spec.p)


def gamma_ratio_grid(
    base: MeasureSpec, p_grid: Sequence[float], h_grid: Sequence[float], event: IncreasingEvent, mask_cap: int = MASK_CAP
) -> list[DerivativePair]:
    """DerivativePair for every (p, h); one enumeration per h value."""
    rows = []
    for h in h_grid:
        m = base.with_field(np.full(len(base.region), float(h)))
        t = HybridTables(GibbsEngine(m), event, mask_cap)
        for p in p_grid:
            rows.append(t.pair(float(p), float(h)))
    return rows


def grid_sup(rows: Sequence[DerivativePair]) -> float:
    """Largest dmu_dh / dmu_dp over the grid (inf if any flagged point has dmu_dh > 0)."""
    sup = 0.0
    for r in rows:
        if r.dp_zero:
            if r.d_dh > DP_ZERO:
                return math.inf
            continue
        sup = max(sup, r.ratio)
    return sup


def gamma_rows_csv(rows: Sequence[DerivativePair]) -> list[list]:
    return [[r.p, r.h, r.mu, r.d_dh, r.d_dp, r.ratio, r.flags] for r in rows]


GAMMA_COLUMNS = ["p", "h", "mu", "dmu_dh", "dmu_dp", "ratio", "flags"]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    samples: int
    equilibrated: bool = True

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.se


def batch_se(x: np.ndarray, batches: int = 20) -> float:
    """Standard error from batch means."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        return math.inf
    b = min(batches, n)
    size = n // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


def mu_mc(spec: HybridSpec, chain, samples: int, sweeps_between: int = 10) -> MCEstimate:
    """Monte Carlo estimate of mu: sigma from ``chain``, omega iid Bernoulli(p)."""
    from .montecarlo import sample_occurs

    if samples <= 0:
        raise ValueError("empty sample")
    hits = sample_occurs(chain, spec.event, spec.p, samples, sweeps_between)
    return MCEstimate(float(hits.mean()), batch_se(hits), samples, chain.equilibrated)
