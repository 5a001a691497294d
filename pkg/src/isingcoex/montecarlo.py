"""Monte Carlo sampling of the Ising measure beyond enumeration caps.

Two samplers share one chain state: a heat-bath sweep in a fixed
colour-class-major site order, and a Swendsen-Wang move with a ghost vertex
that carries the homogeneous field.  Random numbers come from the
counter-based generator in :mod:`isingcoex.rng`, keyed by
(seed, stream, sweep, site, slot).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .events import IncreasingEvent, PathEvent, connection_event, lr_crossing
from .exact import MeasureSpec, SpinConfig, measure
from .hybrid import MCEstimate, batch_se
from .lattice import Box, LatticeKind, Region, build_region, tri_times_z
from .rng import SLOTS, stream_key, sweep_key, uniforms

SAMPLERS = ("heatbath", "cluster")
# sweep index reserved for the initial configuration
_INIT_SWEEP = 1 << 40
_OMEGA_SLOT = SLOTS - 1


class Chain:
    """A single Markov chain; strictly sequential, owns its RNG coordinates."""

    def __init__(
        self,
        spec: MeasureSpec,
        seed: int = 0,
        stream: int = 0,
        init: str = "random",
        min_thermalization: int = 0,
    ):
        self.spec = spec
        self.region = spec.region
        self.seed = int(seed)
        self.stream = int(stream)
        self.key = stream_key(self.seed, self.stream)
        self.nbr = np.ascontiguousarray(self.region.nbr, dtype=np.int64)
        self.order, self.colour_slices = kernels.colour_order(self.nbr)
        self.beta = float(spec.beta)
        self.ext = np.ascontiguousarray(spec.effective_field(), dtype=np.float64)
        self.bplus, self.bminus = spec.boundary_counts()
        self.h = spec.homogeneous_h
        self.min_thermalization = int(min_thermalization)
        n = len(self.region)
        if init == "random":
            u = uniforms(sweep_key(self.key, _INIT_SWEEP), np.arange(n, dtype=np.int64) * SLOTS)
            self.spins = np.where(u < 0.5, 1, -1).astype(np.int8)
        elif init in ("plus", "minus"):
            self.spins = np.full(n, 1 if init == "plus" else -1, dtype=np.int8)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.sweeps_done = 0

    @property
    def equilibrated(self) -> bool:
        return self.sweeps_done >= self.min_thermalization

    @property
    def config(self) -> SpinConfig:
        return SpinConfig(self.region, self.spins)

    def _next_key(self) -> int:
        k = sweep_key(self.key, self.sweeps_done)
        self.sweeps_done += 1
        return k

    def heat_bath_sweep(self) -> "Chain":
        kernels.heat_bath_sweep(self.spins, self.order, self.nbr, self.beta, self.ext, self._next_key(), self.colour_slices)
        return self

    def ghost_cluster_update(self) -> "Chain":
        if self.h is None:
            raise ValueError("ghost update requires homogeneous h")
        kernels.ghost_update(self.spins, self.nbr, self.beta, float(self.h), self.bplus, self.bminus, self._next_key())
        return self

    def step(self, sampler: str = "heatbath", sweeps: int = 1) -> "Chain":
        if sampler == "heatbath":
            for _ in range(sweeps):
                self.heat_bath_sweep()
        elif sampler == "cluster":
            for _ in range(sweeps):
                self.ghost_cluster_update()
        else:
            raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
        return self

    def magnetization(self) -> float:
        return float(self.spins.sum()) / len(self.spins)


def heat_bath_sweep(chain: Chain) -> Chain:
    return chain.heat_bath_sweep()


def ghost_cluster_update(chain: Chain) -> Chain:
    return chain.ghost_cluster_update()


def default_thermalization(n: int) -> int:
    return 100 * max(int(n), 1)


# ---------------------------------------------------------------------------
# cluster statistics


@dataclass(frozen=True)
class ClusterStats:
    plus_clusters: int
    minus_clusters: int
    largest_plus: int
    largest_minus: int
    plus_spanning: bool
    minus_spanning: bool
    second_largest_plus: int
    second_largest_minus: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _box_mask(region: Region, box: Box | None, layers=None) -> np.ndarray:
    c = region.coords
    active = np.ones(len(region), dtype=bool)
    if box is not None:
        active &= np.all(np.abs(c - np.asarray(box.center)) <= box.radius, axis=1)
    if layers is not None:
        active &= np.isin(c[:, 2], list(layers))
    return active


def cluster_labels(config: SpinConfig, box: Box | None = None, layers=None, backend=None) -> np.ndarray:
    """Same-sign cluster labels (smallest member id) on the active sites; -1 elsewhere."""
    region = config.region
    active = _box_mask(region, box, layers)
    fn = kernels.sign_labels if backend is None else backend
    return fn(np.ascontiguousarray(config.values), np.ascontiguousarray(region.nbr), active)


def cluster_stats(config: SpinConfig, kind: LatticeKind | None = None, box: Box | None = None, layers=None) -> ClusterStats:
    """Union-find cluster census; spanning means touching both faces x(1) = c -/+ n."""
    region = config.region
    if kind is not None and kind != region.kind:
        raise ValueError("configuration region uses a different lattice kind")
    labels = cluster_labels(config, box, layers)
    active = labels >= 0
    x1 = region.coords[:, 0]
    if box is not None:
        lo_face, hi_face = box.center[0] - box.radius, box.center[0] + box.radius
    else:
        lo_face, hi_face = int(x1.min()), int(x1.max())
    out = {}
    for sign, name in ((1, "plus"), (-1, "minus")):
        sel = active & (config.values == sign)
        labs = labels[sel]
        sizes = np.bincount(labs, minlength=len(region))[np.unique(labs)] if labs.size else np.zeros(0, dtype=np.int64)
        sizes = np.sort(sizes)[::-1]
        left = set(labels[sel & (x1 == lo_face)].tolist())
        right = set(labels[sel & (x1 == hi_face)].tolist())
        out[name] = (len(sizes), int(sizes[0]) if sizes.size else 0, int(sizes[1]) if sizes.size > 1 else 0, bool(left & right))
    return ClusterStats(
        plus_clusters=out["plus"][0],
        minus_clusters=out["minus"][0],
        largest_plus=out["plus"][1],
        largest_minus=out["minus"][1],
        plus_spanning=out["plus"][3],
        minus_spanning=out["minus"][3],
        second_largest_plus=out["plus"][2],
        second_largest_minus=out["minus"][2],
    )


def bfs_labels(config: SpinConfig, box: Box | None = None, layers=None) -> np.ndarray:
    """Plain breadth-first labelling; the independent oracle for union-find."""
    region = config.region
    active = _box_mask(region, box, layers)
    n = len(region)
    labels = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if not active[start] or labels[start] >= 0:
            continue
        labels[start] = start
        queue = [start]
        sign = config.values[start]
        while queue:
            i = queue.pop()
            for j in region.nbr[i]:
                if j >= 0 and active[j] and labels[j] < 0 and config.values[j] == sign:
                    labels[j] = start
                    queue.append(j)
    return labels


# ---------------------------------------------------------------------------
# sampling events


def sample_occurs(chain: Chain, event: IncreasingEvent, p: float, samples: int, sweeps_between: int = 10, sampler: str = "heatbath") -> np.ndarray:
    """Indicator of {event occurs on S_0 u omega^{-1}(1)} per sample.

    omega is iid Bernoulli(p) on top-layer sites, drawn from the chain's
    counter stream at the sweep the sample is taken.
    """
    reader = _AvailablePlus(chain, event, p)
    plus = np.empty((samples, event.k), dtype=np.bool_)
    for t in range(samples):
        chain.step(sampler, sweeps_between)
        plus[t] = reader()
    return occurs_batch(event, plus)


class _AvailablePlus:
    """Support sites that are + and available (bottom layer, or top with omega = 1)."""

    def __init__(self, chain: Chain, event: IncreasingEvent, p: float):
        event.check_in(chain.region)
        self.chain = chain
        self.p = p
        self.pos = np.array(chain.region.ids(event.support), dtype=np.int64)
        self.top = np.array([s[2] == 1 for s in event.support], dtype=bool)

    def __call__(self) -> np.ndarray:
        c = self.chain
        row = c.spins[self.pos] > 0
        if self.top.any() and self.p < 1.0:
            u = uniforms(sweep_key(c.key, c.sweeps_done), self.pos * SLOTS + _OMEGA_SLOT)
            row &= ~self.top | (u < self.p)
        return row


def occurs_batch(event: IncreasingEvent, plus: np.ndarray) -> np.ndarray:
    if isinstance(event, PathEvent):
        return event.evaluate_batch(plus).astype(np.float64)
    tab = event.table()
    codes = (plus.astype(np.int64) << np.arange(event.k, dtype=np.int64)).sum(axis=1)
    return tab[codes].astype(np.float64)


def box_measure(kind: LatticeKind, n: int, beta: float, h: float, bc: str = "free") -> MeasureSpec:
    return measure(build_region(kind, Box((0, 0, 0), n)), beta, h, bc)


def estimate_crossing(
    spec: MeasureSpec,
    n: int,
    layers=(0,),
    sweeps: int | None = None,
    samples: int = 1000,
    seed: int = 0,
    stream: int = 0,
    sampler: str = "heatbath",
    p: float = 0.0,
    sweeps_between: int = 10,
) -> MCEstimate:
    """Fraction of samples with an LR + crossing of B_n in ``layers``."""
    thermal = default_thermalization(n) if sweeps is None else int(sweeps)
    chain = Chain(spec, seed, stream, min_thermalization=thermal)
    chain.step(sampler, thermal)
    ev = lr_crossing(spec.region.kind, n, layers)
    hits = sample_occurs(chain, ev, p, samples, sweeps_between, sampler)
    return MCEstimate(float(hits.mean()), batch_se(hits), samples, chain.equilibrated)


@dataclass
class SampleRecord:
    sample_id: int
    magnetization: float
    plus_span: bool
    minus_span: bool
    largest_plus: int
    largest_minus: int
    second_largest_plus: int
    second_largest_minus: int


def sample_records(chain: Chain, box: Box, samples: int, sweeps_between: int = 10, sampler: str = "heatbath") -> list[SampleRecord]:
    out = []
    for t in range(samples):
        chain.step(sampler, sweeps_between)
        st = cluster_stats(chain.config, box=box)
        out.append(
            SampleRecord(
                t, chain.magnetization(), st.plus_spanning, st.minus_spanning,
                st.largest_plus, st.largest_minus, st.second_largest_plus, st.second_largest_minus,
            )
        )
    return out


@dataclass
class MCRun:
    crossing: MCEstimate
    records: list[SampleRecord]
    sweeps: int

    def summary(self) -> dict:
        both = np.array([r.plus_span and r.minus_span for r in self.records], dtype=np.float64)
        mags = np.array([r.magnetization for r in self.records])
        return {
            "crossing": self.crossing.mean,
            "crossing_se": self.crossing.se,
            "samples": self.crossing.samples,
            "equilibrated": self.crossing.equilibrated,
            "thermalization_sweeps": self.sweeps,
            "magnetization": float(mags.mean()),
            "magnetization_se": batch_se(mags),
            "both_span": float(both.mean()),
            "both_span_se": batch_se(both),
        }


def run_chain(
    spec: MeasureSpec,
    box: Box,
    event: IncreasingEvent,
    p: float,
    samples: int,
    seed: int = 0,
    stream: int = 0,
    sampler: str = "heatbath",
    sweeps: int | None = None,
    sweeps_between: int = 10,
) -> MCRun:
    """One chain; per sample the crossing indicator and the cluster record."""
    if samples <= 0:
        raise ValueError("empty sample")
    thermal = default_thermalization(box.radius) if sweeps is None else int(sweeps)
    chain = Chain(spec, seed, stream, min_thermalization=thermal)
    chain.step(sampler, thermal)
    reader = _AvailablePlus(chain, event, p)
    plus = np.empty((samples, event.k), dtype=np.bool_)
    recs = []
    for t in range(samples):
        chain.step(sampler, sweeps_between)
        plus[t] = reader()
        st = cluster_stats(chain.config, box=box)
        recs.append(
            SampleRecord(
                t, chain.magnetization(), st.plus_spanning, st.minus_spanning,
                st.largest_plus, st.largest_minus, st.second_largest_plus, st.second_largest_minus,
            )
        )
    hits = occurs_batch(event, plus)
    est = MCEstimate(float(hits.mean()), batch_se(hits), samples, chain.equilibrated)
    return MCRun(est, recs, thermal)


def coexistence_scan(
    beta: float,
    h: float,
    n_list: Sequence[int],
    samples: int,
    seed: int = 0,
    kind: LatticeKind | None = None,
    sampler: str = "heatbath",
    sweeps: int | None = None,
    sweeps_between: int = 10,
) -> list[dict]:
    """Per n: P(both signs span), and mean second/largest size ratio per sign."""
    kind = kind or tri_times_z()
    rows = []
    for stream, n in enumerate(n_list):
        spec = box_measure(kind, n, beta, h)
        thermal = default_thermalization(n) if sweeps is None else int(sweeps)
        chain = Chain(spec, seed, stream, min_thermalization=thermal)
        chain.step(sampler, thermal)
        recs = sample_records(chain, Box((0, 0, 0), n), samples, sweeps_between, sampler)
        both = np.array([r.plus_span and r.minus_span for r in recs], dtype=np.float64)
        rp = np.array([r.second_largest_plus / r.largest_plus if r.largest_plus else 0.0 for r in recs])
        rm = np.array([r.second_largest_minus / r.largest_minus if r.largest_minus else 0.0 for r in recs])
        rows.append(
            {
                "n": int(n),
                "beta": float(beta),
                "h": float(h),
                "samples": int(samples),
                "both_span": float(both.mean()),
                "both_span_se": batch_se(both),
                "plus_span": float(np.mean([r.plus_span for r in recs])),
                "minus_span": float(np.mean([r.minus_span for r in recs])),
                "second_over_largest_plus": float(rp.mean()),
                "second_over_largest_minus": float(rm.mean()),
                "equilibrated": chain.equilibrated,
            }
        )
    return rows


@dataclass
class HcResult:
    beta: float
    threshold: float
    h_grid: list[float]
    n_list: list[int]
    probs: dict = field(default_factory=dict)
    ses: dict = field(default_factory=dict)
    crossings: dict = field(default_factory=dict)
    bracket: tuple[float, float] = (math.nan, math.nan)

    @property
    def strictly_negative(self) -> bool:
        return self.bracket[1] < 0

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "threshold": self.threshold,
            "h_grid": self.h_grid,
            "n_list": self.n_list,
            "probs": {str(k): v for k, v in self.probs.items()},
            "ses": {str(k): v for k, v in self.ses.items()},
            "crossings": {str(k): v for k, v in self.crossings.items()},
            "bracket": list(self.bracket),
            "strictly_negative": self.strictly_negative,
        }


def connection_probability(
    beta: float, h: float, n: int, samples: int, seed: int, stream: int,
    kind: LatticeKind | None = None, sampler: str = "heatbath", sweeps: int | None = None,
    sweeps_between: int = 10, bc: str = "free",
) -> MCEstimate:
    """P(0 <-> dB_n by a + path inside layers {0, 1}) on Lambda = B_n."""
    kind = kind or tri_times_z()
    spec = box_measure(kind, n, beta, h, bc)
    thermal = default_thermalization(n) if sweeps is None else int(sweeps)
    chain = Chain(spec, seed, stream, min_thermalization=thermal)
    chain.step(sampler, thermal)
    ev = connection_event(kind, (0, 0, 0), n, (0, 1))
    hits = sample_occurs(chain, ev, 1.0, samples, sweeps_between, sampler)
    return MCEstimate(float(hits.mean()), batch_se(hits), samples, chain.equilibrated)


def locate_drop(h_grid: Sequence[float], probs: Sequence[float], threshold: float) -> tuple[float, float, float]:
    """Grid interval where the probability first reaches ``threshold`` from below.

    Returns (h_lo, h_hi, interpolated crossing).
    """
    h = list(h_grid)
    pr = list(probs)
    if pr[0] >= threshold or pr[-1] < threshold:
        raise ValueError("widen h-grid: probabilities do not straddle the threshold")
    last_below = max(i for i, v in enumerate(pr) if v < threshold)
    if last_below == len(pr) - 1:
        raise ValueError("widen h-grid: probabilities do not straddle the threshold")
    i = last_below
    a, b = pr[i], pr[i + 1]
    frac = (threshold - a) / (b - a) if b != a else 0.5
    return h[i], h[i + 1], h[i] + frac * (h[i + 1] - h[i])


def estimate_hc(
    beta: float,
    n_list: Sequence[int],
    h_grid: Sequence[float],
    samples: int,
    seed: int = 0,
    threshold: float = 0.2,
    kind: LatticeKind | None = None,
    sampler: str = "heatbath",
    sweeps: int | None = None,
    sweeps_between: int = 10,
) -> HcResult:
    """Finite-size location of the drop of P(0 <-> dB_n in the two-layer slab)."""
    h_grid = sorted(float(h) for h in h_grid)
    res = HcResult(float(beta), float(threshold), h_grid, [int(n) for n in n_list])
    lo, hi = math.inf, -math.inf
    stream = 0
    for n in n_list:
        ps, ses = [], []
        for h in h_grid:
            est = connection_probability(beta, h, n, samples, seed, stream, kind, sampler, sweeps, sweeps_between)
            stream += 1
            ps.append(est.mean)
            ses.append(est.se)
        res.probs[int(n)] = ps
        res.ses[int(n)] = ses
        a, b, x = locate_drop(h_grid, ps, threshold)
        res.crossings[int(n)] = x
        lo, hi = min(lo, a), max(hi, b)
    res.bracket = (lo, hi)
    return res


def binder_cumulant(beta: float, n: int, samples: int, seed: int = 0, stream: int = 0,
                    kind: LatticeKind | None = None, sampler: str = "cluster", sweeps: int | None = None) -> float:
    """U_4 = 1 - <m^4> / (3 <m^2>^2) at h = 0 on B_n."""
    kind = kind or tri_times_z()
    spec = box_measure(kind, n, beta, 0.0)
    thermal = default_thermalization(n) if sweeps is None else int(sweeps)
    chain = Chain(spec, seed, stream, min_thermalization=thermal)
    chain.step(sampler, thermal)
    m = np.empty(samples)
    for t in range(samples):
        chain.step(sampler, 2)
        m[t] = chain.magnetization()
    m2 = float(np.mean(m**2))
    return 1.0 - float(np.mean(m**4)) / (3.0 * m2 * m2)


def bracket_beta_c(beta_grid: Sequence[float], n_pair: tuple[int, int], samples: int, seed: int = 0,
                   kind: LatticeKind | None = None) -> dict:
    """Pseudo-critical bracket from where the Binder curves of two sizes cross."""
    small, large = n_pair
    rows = []
    for s, b in enumerate(sorted(beta_grid)):
        u_small = binder_cumulant(b, small, samples, seed, 2 * s, kind)
        u_large = binder_cumulant(b, large, samples, seed, 2 * s + 1, kind)
        rows.append({"beta": float(b), "U_small": u_small, "U_large": u_large})
    bracket = None
    for a, c in zip(rows, rows[1:]):
        if (a["U_large"] - a["U_small"]) <= 0 <= (c["U_large"] - c["U_small"]):
            bracket = (a["beta"], c["beta"])
            break
    return {"n_pair": list(n_pair), "rows": rows, "bracket": bracket}


# ---------------------------------------------------------------------------
# sampler validation


def exact_comparison(
    spec: MeasureSpec,
    events: Sequence[IncreasingEvent],
    sampler: str,
    samples: int,
    seed: int = 0,
    stream: int = 0,
    sweeps: int = 200,
    sweeps_between: int = 2,
) -> list[dict]:
    """Sampled event frequencies against exact enumeration, one chain for all events."""
    from .exact import GibbsEngine

    eng = GibbsEngine(spec)
    chain = Chain(spec, seed, stream, min_thermalization=sweeps)
    chain.step(sampler, sweeps)
    spins = np.empty((samples, len(spec.region)), dtype=np.int8)
    for t in range(samples):
        chain.step(sampler, sweeps_between)
        spins[t] = chain.spins
    rows = []
    for ev in events:
        pos = spec.region.ids(ev.support)
        hits = occurs_batch(ev, spins[:, pos] > 0)
        exact = eng.expectation(eng.indicator(ev))
        mean = float(hits.mean())
        # batch SE is 0 when every sample agrees; floor it at one count
        se = max(batch_se(hits), 1.0 / samples)
        rows.append({"event": ev.label, "exact": exact, "mc": mean, "se": se, "z": (mean - exact) / se})
    return rows


def sampler_agreement(
    spec: MeasureSpec, box: Box, event: IncreasingEvent, samples: int, seed: int = 0,
    sweeps: int | None = None, sweeps_between: int = 10,
) -> list[dict]:
    """Heat bath against the ghost cluster sampler on crossing, magnetization and spanning."""
    runs = {
        s: run_chain(spec, box, event, 1.0, samples, seed, i, s, sweeps, sweeps_between)
        for i, s in enumerate(SAMPLERS)
    }
    series = {}
    for s, run in runs.items():
        mag = np.array([r.magnetization for r in run.records])
        plus = np.array([r.plus_span for r in run.records], dtype=np.float64)
        series[s] = {"crossing": (run.crossing.mean, run.crossing.se), "magnetization": (float(mag.mean()), batch_se(mag)),
                     "plus_span": (float(plus.mean()), batch_se(plus))}
    rows = []
    a, b = SAMPLERS
    for name in series[a]:
        (ma, sa), (mb, sb) = series[a][name], series[b][name]
        se = math.hypot(sa, sb)
        rows.append({"observable": name, a: ma, b: mb, "diff": ma - mb, "combined_se": se,
                     "z": (ma - mb) / se if se > 0 else (0.0 if ma == mb else math.inf)})
    return rows
