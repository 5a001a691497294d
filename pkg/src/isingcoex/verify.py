"""Executable checks of the finite-volume identities and inequalities.

Every check draws its own randomized instances from a seed and compares
exact enumerations.  A check returns a :class:`CheckReport`; slack is
measured so that a negative value beyond the tolerance is a violation.
Measurement checks (mixing, field boost, cov-to-pivotal constants) report
fitted numbers instead of asserting constants that are only known to exist.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import hybrid
from .events import CylinderUnion, IncreasingEvent, full_event, lr_crossing, occurs_on, occurs_on_bruteforce, tb_minus_crossing_complement_check
from .exact import GibbsEngine, MeasureSpec, SpinConfig, measure
from .hybrid import HybridSpec, HybridTables, binomial_weights
from .lattice import Box, LatticeKind, Region, ball_boundary_size, layer_sites, tri_times_z

IDENTITY_TOL = 1e-10
INEQUALITY_TOL = 1e-12
FD_STEP = 1e-4
FD_RTOL = 1e-6
# absolute floor for the relative finite-difference test, for derivatives that vanish
FD_ATOL = 1e-11
MAX_DETAILS = 20


@dataclass
class CheckReport:
    check_name: str
    kind: str = "inequality"  # identity, inequality or measurement
    instances: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    details: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, slack: float, tol: float, instance=None, **info) -> bool:
        """Log one comparison; ``slack`` < -tol counts as a violation."""
        slack = float(slack)
        if slack < self.worst_margin:
            self.worst_margin = slack
        if slack < -tol:
            self.violations += 1
            if len(self.details) < MAX_DETAILS:
                self.details.append({"slack": slack, "instance": instance, **info})
            return False
        return True

    def merge(self, other: "CheckReport") -> "CheckReport":
        if other.check_name != self.check_name:
            raise ValueError("cannot merge reports of different checks")
        out = CheckReport(self.check_name, self.kind)
        out.instances = self.instances + other.instances
        out.violations = self.violations + other.violations
        out.worst_margin = min(self.worst_margin, other.worst_margin)
        out.details = (self.details + other.details)[:MAX_DETAILS]
        out.extras = {**self.extras, **other.extras}
        return out

    def to_json(self) -> dict:
        wm = self.worst_margin
        return {
            "check_name": self.check_name,
            "kind": self.kind,
            "instances": self.instances,
            "violations": self.violations,
            "worst_margin": None if math.isinf(wm) else wm,
            "passed": self.passed,
            "details": self.details,
            "extras": _jsonable(self.extras),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def rng_for(name: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


# ---------------------------------------------------------------------------
# random instances


def random_box_region(rng, kind: LatticeKind, max_sites: int, min_sites: int = 2, zs: Sequence[int] | None = None) -> Region:
    """Axis-aligned block with random side lengths and a random corner."""
    for _ in range(1000):
        if zs is None:
            dims = rng.integers(1, max_sites + 1, size=3)
        else:
            dims = np.array([rng.integers(1, max_sites + 1), rng.integers(1, max_sites + 1), len(zs)])
        if not min_sites <= int(np.prod(dims)) <= max_sites:
            continue
        c = rng.integers(-2, 3, size=2)
        z0 = int(rng.integers(-1, 2))
        zvals = list(zs) if zs is not None else list(range(z0, z0 + int(dims[2])))
        sites = [(int(c[0]) + a, int(c[1]) + b, z) for a in range(dims[0]) for b in range(dims[1]) for z in zvals]
        return Region.from_sites(kind, sites)
    raise RuntimeError("could not draw a region")


def random_boundary(rng, region: Region, mode: str = "mixed") -> dict:
    outer = region.outer_boundary()
    if mode == "free":
        return {}
    if mode == "nonneg":
        vals = rng.integers(0, 2, size=len(outer))
    else:
        vals = rng.integers(-1, 2, size=len(outer))
    return {s: int(v) for s, v in zip(outer, vals)}


def random_measure(rng, region: Region, beta_max: float = 2.0, h_max: float = 2.0, bc: str = "mixed", h_min: float | None = None) -> MeasureSpec:
    beta = float(rng.uniform(0, beta_max))
    lo = -h_max if h_min is None else h_min
    h = rng.uniform(lo, h_max, size=len(region))
    boundary = random_boundary(rng, region, bc) if rng.random() < 0.6 or bc == "nonneg" else {}
    return MeasureSpec(region, beta, h, boundary)


def random_increasing_event(rng, sites: Sequence, max_support: int = 8, max_cylinders: int = 4, must_include=None) -> CylinderUnion:
    """Union of all-plus cylinders on random subsets; increasing by construction."""
    sites = list(sites)
    k = int(rng.integers(1, min(max_support, len(sites)) + 1))
    idx = rng.choice(len(sites), size=k, replace=False)
    support = [sites[i] for i in sorted(idx)]
    if must_include is not None and tuple(must_include) not in support:
        support[int(rng.integers(len(support)))] = tuple(must_include)
        support = sorted(set(support))
    cyls = []
    for _ in range(int(rng.integers(1, max_cylinders + 1))):
        size = int(rng.integers(1, len(support) + 1))
        pick = rng.choice(len(support), size=size, replace=False)
        cyls.append([support[i] for i in pick])
    return CylinderUnion(support, cyls, label="random")


def serialize(spec: MeasureSpec, event: IncreasingEvent | None = None, **extra) -> dict:
    out = {"measure": spec.to_json()}
    if event is not None:
        out["event"] = event.to_json() if hasattr(event, "to_json") else {"label": event.label, "support": [list(s) for s in event.support]}
    for k, v in extra.items():
        out[k] = _jsonable(list(v) if isinstance(v, tuple) else v)
    return out


def random_hybrid(rng, max_sites: int = 12, max_top: int = 6, p_range=(0.05, 0.95), beta_max: float = 1.0, h_max: float = 1.0, homogeneous: bool = True):
    """Region of the slab x(3) in {0, 1}, sometimes with a layer below, plus an event on it."""
    kind = tri_times_z()
    for _ in range(1000):
        a, b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        below = rng.random() < 0.3
        nz = 3 if below else 2
        if a * b > max_top or a * b * nz > max_sites or a * b * nz < 2:
            continue
        zs = (-1, 0, 1) if below else (0, 1)
        sites = [(x, y, z) for x in range(a) for y in range(b) for z in zs]
        region = Region.from_sites(kind, sites)
        break
    beta = float(rng.uniform(0, beta_max))
    if homogeneous:
        h = float(rng.uniform(-h_max, h_max))
    else:
        h = rng.uniform(-h_max, h_max, size=len(region))
    spec = MeasureSpec(region, beta, h, random_boundary(rng, region) if rng.random() < 0.3 else {})
    slab = layer_sites(region, (0, 1))
    top = layer_sites(region, 1)
    ev = random_increasing_event(rng, slab, max_support=8, must_include=top[int(rng.integers(len(top)))])
    p = float(rng.uniform(*p_range))
    return HybridSpec(spec, p, ev)


# ---------------------------------------------------------------------------
# basic measure checks


def check_normalization(instances: int = 1000, seed: int = 0) -> CheckReport:
    """Sum of probabilities is 1 and the spin flip maps (h, eta) to (-h, -eta)."""
    rep = CheckReport("normalization", "identity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 1)
        spec = random_measure(rng, region)
        eng = GibbsEngine(spec)
        flip = GibbsEngine(spec.flipped())
        ids = eng.ids
        err_norm = abs(float(eng.probs.sum()) - 1.0)
        err_flip = float(np.max(np.abs(eng.log_weights - flip.log_weights[ids ^ (eng.size - 1)])))
        rep.record(-max(err_norm, err_flip), IDENTITY_TOL, serialize(spec))
        rep.instances += 1
    return rep


def check_conditional(instances: int = 1000, seed: int = 0) -> CheckReport:
    rep = CheckReport("conditional", "identity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 10, 2)
        spec = random_measure(rng, region)
        eng = GibbsEngine(spec)
        k = int(rng.integers(1, len(region)))
        pins_idx = rng.choice(len(region), size=k, replace=False)
        pins = {region.sites[i]: int(rng.choice([-1, 1])) for i in pins_idx}
        rest = [s for s in region.sites if s not in pins]
        ev = random_increasing_event(rng, rest or list(region.sites)) if rest else None
        sel = np.ones(eng.size, dtype=bool)
        for s, v in pins.items():
            sel &= eng.spin(s) == v
        cond = eng.conditional(pins)
        if ev is None:
            direct, via = 1.0, float(cond.probs.sum())
        else:
            ind = eng.indicator(ev)
            direct = float(eng.probs[sel & ind].sum() / eng.probs[sel].sum())
            via = cond.expectation(ev)
        rep.record(-abs(direct - via), IDENTITY_TOL, serialize(spec, ev, pins=[[list(s), v] for s, v in pins.items()]))
        rep.instances += 1
    return rep


def check_fkg(instances: int = 1000, seed: int = 0) -> CheckReport:
    """Covariance of two increasing functionals is nonnegative."""
    rep = CheckReport("fkg")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 2)
        spec = random_measure(rng, region)
        eng = GibbsEngine(spec)
        a = random_increasing_event(rng, region.sites)
        b = random_increasing_event(rng, region.sites)
        x = region.sites[int(rng.integers(len(region)))]
        slack = min(eng.covariance(a, b), spin_covariance(eng, x, a))
        rep.record(slack, INEQUALITY_TOL, serialize(spec, a, other=b.to_json(), x=x))
        rep.instances += 1
    return rep


def check_gks(instances: int = 1000, seed: int = 0) -> CheckReport:
    """<s_x s_y> >= 0 and <s_x> >= 0 for h >= 0 and eta in {0, +1}."""
    rep = CheckReport("gks")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 1)
        spec = random_measure(rng, region, h_min=0.0, bc="nonneg")
        eng = GibbsEngine(spec)
        S = eng.spin_matrix().astype(np.float64)
        m1 = eng.probs @ S
        m2 = (S * eng.probs[:, None]).T @ S
        rep.record(min(float(m1.min()), float(m2.min())), INEQUALITY_TOL, serialize(spec))
        rep.instances += 1
    return rep


def check_boundary_monotonicity(instances: int = 1000, seed: int = 0) -> CheckReport:
    """P^+(A) >= P^eta(A) >= P^-(A) for increasing A."""
    rep = CheckReport("boundary_monotonicity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 1)
        beta = float(rng.uniform(0, 2))
        h = rng.uniform(-2, 2, size=len(region))
        eta = MeasureSpec(region, beta, h, random_boundary(rng, region))
        plus = measure(region, beta, h, "plus")
        minus = measure(region, beta, h, "minus")
        a = random_increasing_event(rng, region.sites)
        pp, pe, pm = (GibbsEngine(s).expectation(a) for s in (plus, eta, minus))
        rep.record(min(pp - pe, pe - pm), INEQUALITY_TOL, serialize(eta, a))
        rep.instances += 1
    return rep


def check_cov_inequality(instances: int = 1000, seed: int = 0) -> CheckReport:
    """|<s_y s_z; I_A>| <= <s_y; I_A> + <s_z; I_A> for increasing A."""
    rep = CheckReport("cov_inequality")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    negative = 0
    witnesses = 0
    for i in range(instances):
        if i % 10 == 0:
            # two symmetric sites with equal negative magnetization and A = {s_y = +1}
            region = Region.from_sites(kind, [(0, 0, 0), (1, 0, 0)])
            spec = MeasureSpec(region, float(rng.uniform(0, 2)), -float(rng.uniform(0.05, 2)))
            y, z = region.sites
            a = CylinderUnion([y], [[y]], label="plus_at_y")
        else:
            region = random_box_region(rng, kind, 12, 1)
            spec = random_measure(rng, region)
            a = random_increasing_event(rng, region.sites)
            y = region.sites[int(rng.integers(len(region)))]
            z = region.sites[int(rng.integers(len(region)))]
        eng = GibbsEngine(spec)
        sy, sz = eng.spin(y).astype(np.float64), eng.spin(z).astype(np.float64)
        lhs = eng.covariance(sy * sz, a)
        rhs = eng.covariance(sy, a) + eng.covariance(sz, a)
        if lhs < -1e-12:
            negative += 1
            if i % 10 == 0:
                witnesses += 1
        rep.record(rhs - abs(lhs), INEQUALITY_TOL, serialize(spec, a, y=y, z=z))
        rep.instances += 1
    rep.extras = {"negative_lhs_instances": negative, "negative_witness_family": witnesses}
    return rep


def spin_covariance(eng: GibbsEngine, x, g) -> float:
    """<sigma_x; g> as 2 (P(-) E[g; +] - P(+) E[g; -]).

    Same value as E[fg] - E[f]E[g] but without the cancellation that costs
    ~9 digits once one spin value has probability ~1e-7.
    """
    pr = eng.probs
    up = eng.spin(x) > 0
    g = np.asarray(eng._values(g), dtype=np.float64)
    p_up, p_down = float(pr[up].sum()), float(pr[~up].sum())
    return 2.0 * (p_down * float(pr[up] @ g[up]) - p_up * float(pr[~up] @ g[~up]))


def sup_ring(region: Region, x, m: int) -> list:
    """dB_m(x) intersected with the region: sites at sup-distance exactly m."""
    return [s for s in region.sites if max(abs(s[i] - x[i]) for i in range(3)) == m]


def outside_ball(region: Region, x, m: int) -> list:
    return [s for s in region.sites if max(abs(s[i] - x[i]) for i in range(3)) > m]


def _ring_instance(rng, m: int, max_sites: int = 12):
    """Region, centre x and increasing A supported off B_m(x)."""
    kind = tri_times_z()
    for _ in range(1000):
        region = random_box_region(rng, kind, max_sites, 2)
        x = region.sites[int(rng.integers(len(region)))]
        off = outside_ball(region, x, m)
        if off:
            return region, x, random_increasing_event(rng, off, max_support=6)
    raise RuntimeError("generator unable to place an event outside the ball")


def ring_field(spec: MeasureSpec, ring: Sequence, t: float) -> MeasureSpec:
    f = np.array(spec.field, dtype=np.float64)
    for s in ring:
        f[spec.region.id_of(s)] += t
    return spec.with_field(f)


GRONWALL_TS = (-0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5)


def check_gronwall_sandwich(instances: int = 1000, seed: int = 0, ts: Sequence[float] = GRONWALL_TS) -> CheckReport:
    """exp(-4|dB_m||t|) f(0) <= f(t) <= exp(4|dB_m||t|) f(0)."""
    rep = CheckReport("gronwall")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for i in range(instances):
        m = 1 + (i % 2)
        region, x, a = _ring_instance(rng, m)
        ring = sup_ring(region, x, m)
        base = random_measure(rng, region, beta_max=1.5, h_max=1.5)
        d = ball_boundary_size(kind, m)

        def f(t):
            eng = GibbsEngine(ring_field(base, ring, t))
            ind = eng.indicator(a)
            return sum(spin_covariance(eng, y, ind) for y in ring)

        f0 = f(0.0)
        for t in ts:
            ft = f0 if t == 0 else f(t)
            shrink = math.exp(-4 * d * abs(t))
            # upper side as f(0) - shrink f(t): multiplying by exp(+4d|t|) would blow rounding up to ~1e70
            rep.record(min(ft - shrink * f0, f0 - shrink * ft), INEQUALITY_TOL, serialize(base, a, x=x, m=m, t=t))
        rep.instances += 1
    return rep


# ---------------------------------------------------------------------------
# pivotality calculus


def _subsets_of(mask: int) -> list[int]:
    out, s = [], mask
    while True:
        out.append(s)
        if s == 0:
            return out
        s = (s - 1) & mask


def occurs_table_bruteforce(table: np.ndarray, k: int, keep: int) -> np.ndarray:
    """{A occurs on Delta} by quantifying over every tau off ``keep``."""
    ids = np.arange(1 << k, dtype=np.int64)
    free = ((1 << k) - 1) & ~keep
    out = np.ones(ids.size, dtype=bool)
    for t in _subsets_of(free):
        out &= table[(ids & keep) | t]
    return out


def check_monotone_shortcut(instances: int = 1000, seed: int = 0) -> CheckReport:
    """occurs_on via the all-minus shortcut equals the quantified definition."""
    rep = CheckReport("monotone_shortcut", "identity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 1)
        a = random_increasing_event(rng, region.sites, max_support=10)
        delta_mask = int(rng.integers(0, 1 << a.k))
        t = a.table()
        ids = np.arange(t.size, dtype=np.int64)
        bad = int(np.count_nonzero(t[ids & delta_mask] != occurs_table_bruteforce(t, a.k, delta_mask)))
        # spot-check the SpinConfig-level API on one configuration
        sigma = SpinConfig(region, rng.choice(np.array([-1, 1], dtype=np.int8), size=len(region)))
        delta = [a.support[j] for j in range(a.k) if delta_mask >> j & 1]
        bad += int(occurs_on(a, delta, sigma) != occurs_on_bruteforce(a, delta, sigma))
        rep.record(-float(bad), 0.5, {"event": a.to_json(), "delta_mask": delta_mask})
        rep.instances += 1
    return rep


def check_pivotal_complement(instances: int = 1000, seed: int = 0) -> CheckReport:
    """A minus {Delta pivotal for A} equals {A occurs on the complement of Delta}."""
    rep = CheckReport("pivotal_complement", "identity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    for _ in range(instances):
        region = random_box_region(rng, kind, 12, 1)
        a = random_increasing_event(rng, region.sites, max_support=12)
        k = a.k
        t = a.table()
        ids = np.arange(t.size, dtype=np.int64)
        d = int(rng.integers(0, 1 << k))
        pivotal = t[ids | d] & ~t[ids & ~d]
        lhs = t & ~pivotal
        rhs = occurs_table_bruteforce(t, k, ((1 << k) - 1) & ~d)
        bad = int(np.count_nonzero(lhs != rhs))
        rep.record(-float(bad), 0.5, {"event": a.to_json(), "delta_mask": d})
        rep.instances += 1
    return rep


def check_plus_pivotal(instances: int = 1000, seed: int = 0) -> CheckReport:
    """{x +pivotal for H(x, w)} = {H on S_0 u w u {x}} minus {H on S_0 u w}."""
    rep = CheckReport("plus_pivotal", "identity")
    rng = rng_for(rep.check_name, seed)
    for _ in range(instances):
        hs = random_hybrid(rng)
        ev = hs.event
        region = hs.measure.region
        top = layer_sites(region, 1)
        x = top[int(rng.integers(len(top)))]
        omega = [s for s in top if s != x and rng.random() < 0.5]
        k = ev.k
        t = ev.table()
        ids = np.arange(t.size, dtype=np.int64)
        fixed = ev.bits_of(s for s in ev.support if s[2] == 0)
        m0 = fixed | ev.bits_of(omega)
        xb = ev.bits_of([x])
        m1 = m0 | xb
        h1 = occurs_table_bruteforce(t, k, m1)
        h0 = occurs_table_bruteforce(t, k, m0)
        piv = h1[ids | xb] & ~h1[ids & ~xb]
        lhs = piv & ((ids & xb) != 0) if xb else np.zeros(ids.size, dtype=bool)
        rhs = h1 & ~h0
        bad = int(np.count_nonzero(lhs != rhs))
        rep.record(-float(bad), 0.5, serialize(hs.measure, ev, x=x, omega=omega))
        rep.instances += 1
    return rep


def _pivotal_prob(tabs: HybridTables, y, mask: int) -> float:
    """P(y pivotal for {H occurs on mask u {y}}), both signs of sigma_y."""
    yb = tabs.event.bits_of([y])
    if yb == 0:
        return 0.0
    t = tabs.table
    ids = np.arange(t.size, dtype=np.int64)
    m = mask | yb
    piv = t[(ids & m) | yb] & ~t[ids & m & ~yb]
    return float(np.dot(tabs.q, piv))


def _omega_codes(tabs: HybridTables, exclude) -> np.ndarray:
    """Mask codes for omega on Lambda_(1) minus ``exclude`` (bit of ``exclude`` cleared)."""
    codes = tabs.omegas
    if exclude is not None and tuple(exclude) in tabs.layer1:
        l = tabs.layer1.index(tuple(exclude))
        codes = codes[(codes >> l & 1) == 0]
    return codes


def check_omega_exchange(instances: int = 1000, seed: int = 0) -> CheckReport:
    """Both omega-exchange inequalities, by exhaustive mask summation."""
    rep = CheckReport("omega_exchange")
    rng = rng_for(rep.check_name, seed)
    shown = {1: 0, 2: 0}
    for i in range(instances):
        hs = random_hybrid(rng)
        tabs = hybrid.tables(hs)
        region = hs.measure.region
        p = hs.p
        L = tabs.L
        x = region.sites[int(rng.integers(len(region)))]
        y = region.sites[int(rng.integers(len(region)))]
        yb = tabs.event.bits_of([y])

        def weights(codes, exclude):
            n = L - (1 if exclude is not None and tuple(exclude) in tabs.layer1 else 0)
            return binomial_weights(p, n, codes)

        cx, cy = _omega_codes(tabs, x), _omega_codes(tabs, y)
        # first display: covariances for H(y, omega)
        cov_x = tabs.site_covariances(y, tabs.masks[cx] | yb)
        cov_y = tabs.site_covariances(y, tabs.masks[cy] | yb)
        lhs = float(np.dot(weights(cx, x), cov_x))
        rhs = float(np.dot(weights(cy, y), cov_y)) / (1 - p)
        rep.record(rhs - lhs, INEQUALITY_TOL, serialize(hs.measure, hs.event, p=p, x=x, y=y, display=1))
        shown[1] += 1
        # second display: pivotality for H(y', omega^(y')), y' in the top layer
        y2 = tuple(y) if tuple(y) in tabs.layer1 else tabs.layer1[int(rng.integers(L))]
        m = i % 2
        opened = tabs.mask_of_sites(s for s in tabs.layer1 if max(abs(s[j] - y2[j]) for j in range(3)) <= 3 * m)

        def piv_sum(codes, exclude):
            vals = np.array([_pivotal_prob(tabs, y2, int(tabs.masks[c]) | opened) for c in codes])
            return float(np.dot(weights(codes, exclude), vals))

        c2 = _omega_codes(tabs, y2)
        lhs2 = piv_sum(cx, x)
        rhs2 = piv_sum(c2, y2) / (1 - p)
        rep.record(rhs2 - lhs2, INEQUALITY_TOL, serialize(hs.measure, hs.event, p=p, x=x, y=y2, m=m, display=2))
        shown[2] += 1
        rep.instances += 1
    rep.extras = {"display_1": shown[1], "display_2": shown[2]}
    return rep


# ---------------------------------------------------------------------------
# appendix identities


def appendix_terms(eng: GibbsEngine, event: IncreasingEvent, x) -> dict:
    """All quantities of the reversed-inequality lemma for one (A, x)."""
    ix = eng.region.id_of(x)
    ids = eng.ids
    bit = 1 << ix
    ind = eng.indicator(event)
    a_plus = ind[ids | bit]
    a_minus = ind[ids & ~bit]
    piv = a_plus & ~a_minus
    sx = eng.spin(x).astype(np.float64)
    pr = eng.probs
    up = sx > 0

    def P(mask):
        return float(pr[mask].sum())

    def cond_up(given):
        return P(given & up) / P(given)

    def cond_down(given):
        return P(given & ~up) / P(given)

    return {
        "a_minus_empty": not bool(a_minus.any()),
        "p_piv": P(piv),
        "p_plus": P(up),
        "p_minus": P(~up),
        "cov_A": spin_covariance(eng, x, ind),
        "cov_Aplus": spin_covariance(eng, x, a_plus),
        "cov_Aminus": spin_covariance(eng, x, a_minus),
        "piv": piv,
        "A": ind,
        "A_plus": a_plus,
        "A_minus": a_minus,
        "cond_up": cond_up,
        "cond_down": cond_down,
    }


def appendix_first(eng: GibbsEngine, event: IncreasingEvent, x) -> tuple[float, float]:
    t = appendix_terms(eng, event, x)
    rhs = t["cov_A"] / (2 * t["p_minus"]) / t["cond_up"](t["piv"])
    return t["p_piv"], rhs


def appendix_second(eng: GibbsEngine, event: IncreasingEvent, x) -> tuple[float, float]:
    t = appendix_terms(eng, event, x)
    cu, cd = t["cond_up"], t["cond_down"]
    rhs = (
        t["cov_A"] / (2 * cu(t["A_plus"]))
        + t["cov_A"] / (2 * cd(t["A_minus"]))
        - t["cov_Aplus"] / (2 * cu(t["A"]))
        - t["cov_Aminus"] / (2 * cd(t["A"]))
    )
    return t["p_piv"], rhs


def _appendix_event(rng, region: Region, x, want_empty: bool) -> CylinderUnion:
    """want_empty: every cylinder contains x, so A_x^- is empty."""
    others = [s for s in region.sites if s != x]
    sup = [x] + [others[i] for i in rng.choice(len(others), size=min(len(others), int(rng.integers(0, 6))), replace=False)] if others else [x]
    sup = sorted(set(sup))
    cyls = []
    for _ in range(int(rng.integers(1, 4))):
        size = int(rng.integers(0, len(sup) + 1))
        c = [sup[i] for i in rng.choice(len(sup), size=size, replace=False)]
        if want_empty and x not in c:
            c.append(x)
        cyls.append(c)
    if not want_empty and all(x in c for c in cyls):
        cyls.append([s for s in cyls[0] if s != x])
    return CylinderUnion(sup, cyls, label="appendix")


def check_appendix_identities(instances: int = 1000, seed: int = 0) -> CheckReport:
    rep = CheckReport("appendix", "identity")
    rng = rng_for(rep.check_name, seed)
    kind = tri_times_z()
    branches = {"a_minus_empty": 0, "a_minus_nonempty": 0}
    for i in range(instances):
        region = random_box_region(rng, kind, 10, 1)
        spec = random_measure(rng, region, beta_max=1.5, h_max=1.5)
        eng = GibbsEngine(spec)
        x = region.sites[int(rng.integers(len(region)))]
        want_empty = i % 2 == 0
        ev = _appendix_event(rng, region, x, want_empty)
        t = appendix_terms(eng, ev, x)
        if t["a_minus_empty"]:
            if t["p_piv"] == 0:
                continue
            lhs, rhs = appendix_first(eng, ev, x)
            branches["a_minus_empty"] += 1
        else:
            lhs, rhs = appendix_second(eng, ev, x)
            branches["a_minus_nonempty"] += 1
        rep.record(-abs(lhs - rhs), IDENTITY_TOL, serialize(spec, ev, x=x))
        rep.instances += 1
    missing = [b for b, c in branches.items() if c == 0]
    if missing and instances >= 2:
        raise RuntimeError(f"generator unable to produce a required case: {missing}")
    rep.extras = {"branches": branches}
    return rep


# ---------------------------------------------------------------------------
# hybrid measure


def finite_differences(hs: HybridSpec, step: float = FD_STEP) -> tuple[float, float]:
    """Central differences of mu in p and in the homogeneous h (one-sided at p = 0, 1)."""
    t = hybrid.tables(hs)
    p = hs.p
    lo, hi = max(p - step, 0.0), min(p + step, 1.0)
    fd_p = (t.mu(hi) - t.mu(lo)) / (hi - lo)
    h0 = hs.measure.homogeneous_h
    if h0 is None:
        raise ValueError("finite difference in h needs a homogeneous field")
    mus = []
    for dh in (step, -step):
        e = GibbsEngine(hs.measure.with_field(np.full(len(hs.measure.region), h0 + dh)))
        mus.append(HybridTables(e, hs.event, hs.mask_cap).mu(p))
    fd_h = (mus[0] - mus[1]) / (2 * step)
    return fd_p, fd_h


def check_derivatives(instances: int = 100, seed: int = 0) -> CheckReport:
    """dmu/dp and dmu/dh against central finite differences at relative 1e-6."""
    rep = CheckReport("derivatives", "identity")
    rng = rng_for(rep.check_name, seed)
    worst_rel = 0.0
    for _ in range(instances):
        hs = random_hybrid(rng, max_sites=16, max_top=6, p_range=(0.1, 0.9))
        t = hybrid.tables(hs)
        dp, dh = t.dmu_dp(hs.p), t.dmu_dh(hs.p)
        fd_p, fd_h = finite_differences(hs)
        for name, an, fd in (("p", dp, fd_p), ("h", dh, fd_h)):
            err = abs(an - fd)
            allowed = FD_RTOL * abs(an) + FD_ATOL
            if abs(an) > FD_ATOL:
                worst_rel = max(worst_rel, err / abs(an))
            rep.record(allowed - err, 0.0, serialize(hs.measure, hs.event, p=hs.p, wrt=name, formula=an, fd=fd))
        # each summand is a probability or an FKG covariance
        rep.record(min(dp, dh) + 1e-10, 0.0, serialize(hs.measure, hs.event, p=hs.p, sign_check=True))
        rep.instances += 1
    rep.extras = {"worst_relative_error": worst_rel}
    return rep


def b1_in_b2_region(kind: LatticeKind | None = None) -> Region:
    """B_1 within the slab plus the two x(1) = +-2 sites on the axis: 20 sites, 9 on top."""
    kind = kind or tri_times_z()
    sites = [s for s in Box((0, 0, 0), 1).points(kind) if s[2] in (0, 1)]
    sites += [(-2, 0, 0), (2, 0, 0)]
    return Region.from_sites(kind, sites)


def path_instance(beta: float = 0.1):
    region = b1_in_b2_region()
    base = measure(region, beta, 0.0)
    ev = lr_crossing(region.kind, 1, (0, 1))
    return base, ev


def measured_gamma(beta: float = 0.1, p_grid=None, h_grid=None, base=None, event=None) -> tuple[float, list]:
    if base is None or event is None:
        base, event = path_instance(beta)
    p_grid = np.linspace(0.2, 0.8, 25) if p_grid is None else p_grid
    h_grid = np.linspace(-0.5, 0.5, 21) if h_grid is None else h_grid
    rows = hybrid.gamma_ratio_grid(base, p_grid, h_grid, event)
    return hybrid.grid_sup(rows), rows


def check_path_monotonicity(
    beta: float = 0.1,
    base_point: tuple[float, float] = (0.5, 0.0),
    Gamma: float | None = None,
    steps: int = 50,
    delta: float | None = None,
    rect: tuple[float, float, float, float] = (0.2, 0.8, -0.5, 0.5),
    base: MeasureSpec | None = None,
    event: IncreasingEvent | None = None,
    tol: float = 1e-9,
) -> CheckReport:
    """mu along (p0, h0) + t delta (cos th, -sin th), tan th = 1 / Gamma, is nondecreasing."""
    rep = CheckReport("path_monotonicity")
    if base is None or event is None:
        base, event = path_instance(beta)
    if Gamma is None:
        Gamma, _ = measured_gamma(beta, base=base, event=event)
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    theta = math.atan(1.0 / Gamma) if math.isfinite(Gamma) else 0.0
    p0, h0 = base_point
    p_lo, p_hi, h_lo, h_hi = rect
    if delta is None:
        cands = []
        if math.cos(theta) > 0:
            cands.append((p_hi - p0) / math.cos(theta))
        if math.sin(theta) > 0:
            cands.append((h0 - h_lo) / math.sin(theta))
        delta = min(cands)
    ts = np.linspace(0.0, 1.0, steps)
    ps = p0 + ts * delta * math.cos(theta)
    hs = h0 - ts * delta * math.sin(theta)
    if ps.min() < 0 or ps.max() > 1:
        raise ValueError("path leaves [0,1] in p")
    mus = []
    for p, h in zip(ps, hs):
        e = GibbsEngine(base.with_field(np.full(len(base.region), float(h))))
        mus.append(HybridTables(e, event).mu(float(p)))
    for k in range(1, steps):
        rep.record(mus[k] - mus[k - 1], tol, {"step": k, "p": float(ps[k]), "h": float(hs[k])})
    rep.instances = steps
    rep.extras = {
        "beta": beta,
        "Gamma": Gamma,
        "theta": theta,
        "delta": delta,
        "path": [[float(p), float(h), float(m)] for p, h, m in zip(ps, hs, mus)],
    }
    return rep


def check_duality(instances: int = 0, seed: int = 0) -> CheckReport:
    """P(LR + crossing of B_1 in layer 0) = 1/2 at h = 0 on swap-symmetric regions."""
    rep = CheckReport("duality", "identity")
    kind = tri_times_z()
    ev = lr_crossing(kind, 1, (0,))
    for layers in ((0,), (0, 1)):
        region = Region.from_sites(kind, [s for s in Box((0, 0, 0), 1).points(kind) if s[2] in layers])
        for beta in (0.0, 0.2, 0.5):
            val = GibbsEngine(measure(region, beta, 0.0)).expectation(ev)
            rep.record(-abs(val - 0.5), 1e-12, {"beta": beta, "layers": list(layers), "value": val})
            rep.instances += 1
    for n in (1, 2):
        ok = tb_minus_crossing_complement_check(kind, n, samples=20_000, seed=seed)
        rep.record(0.0 if ok else -1.0, 0.5, {"complement_check_n": n})
        rep.instances += 1
    return rep


# ---------------------------------------------------------------------------
# measurements


@dataclass
class MixingFit:
    distances: list
    deviations: list
    lambda_hat: float
    K_hat: float
    residuals: list = field(default_factory=list)
    monotone: bool = True

    def to_json(self) -> dict:
        return _jsonable(self.__dict__)


def ratio_deviation(eng: GibbsEngine, a, b) -> float:
    """|P(s_a=+, s_b=+) / (P(s_a=+) P(s_b=+)) - 1|, exactly 0 across disconnected parts."""
    spec = eng.spec
    if spec.beta == 0 or not _connected(spec.region, a, b):
        return 0.0
    ua = eng.spin(a) > 0
    ub = eng.spin(b) > 0
    pa, pb = float(eng.probs[ua].sum()), float(eng.probs[ub].sum())
    pab = float(eng.probs[ua & ub].sum())
    return abs(pab / (pa * pb) - 1.0)


def _connected(region: Region, a, b) -> bool:
    ia, ib = region.id_of(a), region.id_of(b)
    seen = {ia}
    stack = [ia]
    while stack:
        i = stack.pop()
        if i == ib:
            return True
        for j in region.nbr[i]:
            if j >= 0 and j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return False


def measure_ratio_mixing(beta: float, h: float, shape: Sequence[int] = (1, 1, 12), pairs: Sequence[int] | None = None) -> MixingFit:
    """Deviation from independence of {s_0 = +} and {s_d = +} along the long axis of a thin box."""
    kind = tri_times_z()
    a_, b_, c_ = (int(v) for v in shape)
    region = Region.from_sites(kind, [(i, j, k) for i in range(a_) for j in range(b_) for k in range(c_)])
    axis = int(np.argmax(shape))
    length = int(shape[axis])
    dists = list(range(1, length)) if pairs is None else [int(d) for d in pairs]
    if len(dists) < 3:
        raise ValueError("insufficient fit data: need at least 3 distances")
    if max(dists) >= length:
        raise ValueError("distance exceeds the box")
    eng = GibbsEngine(measure(region, beta, h))
    origin = (0, 0, 0)
    devs = []
    for d in dists:
        other = [0, 0, 0]
        other[axis] = d
        devs.append(ratio_deviation(eng, origin, tuple(other)))
    pos = [(d, v) for d, v in zip(dists, devs) if v > 0]
    if len(pos) >= 2:
        xs = np.array([d for d, _ in pos], dtype=float)
        ys = np.log([v for _, v in pos])
        slope, icpt = np.polyfit(xs, ys, 1)
        lam, K = float(-slope), float(math.exp(icpt))
        resid = (ys - (icpt + slope * xs)).tolist()
    else:
        lam, K, resid = math.inf, 0.0, []
    mono = all(devs[i + 1] <= devs[i] + 1e-15 for i in range(len(devs) - 1))
    return MixingFit(dists, devs, lam, K, resid, mono)


def check_mixing(instances: int = 0, seed: int = 0) -> CheckReport:
    rep = CheckReport("mixing", "measurement")
    fits = {}
    for beta in (0.0, 0.1, 0.2, 0.3):
        fit = measure_ratio_mixing(beta, 0.0, (1, 1, 12))
        fits[str(beta)] = fit.to_json()
        rep.instances += 1
    rep.extras = {"fits": fits}
    return rep


@dataclass
class FieldBoostResult:
    x: tuple
    m: int
    t_star: float
    monotone_in_t: bool
    target: float = math.nan
    achieved: float = math.nan
    trace: list = field(default_factory=list)

    def to_json(self) -> dict:
        return _jsonable(self.__dict__)


def min_field_boost(
    beta: float, h, region: Region, x, m: int, A: IncreasingEvent,
    boundary: dict | None = None, tol: float = 1e-12, t_max: float = 64.0, t_resolution: float = 1e-9,
) -> FieldBoostResult:
    """Smallest t >= 0 with P_{g(t)}(A) >= P_h(A | s_x = +1), by doubling then bisection."""
    A.check_in(region)
    x = tuple(x)
    inside = [s for s in A.support if max(abs(s[i] - x[i]) for i in range(3)) <= m]
    if inside:
        raise ValueError("event must be supported off B_m(x)")
    spec = MeasureSpec(region, beta, h, boundary or {})
    eng = GibbsEngine(spec)
    up = eng.spin(x) > 0
    ind = eng.indicator(A)
    target = float(eng.probs[up & ind].sum() / eng.probs[up].sum())
    ring = sup_ring(region, x, m)
    trace: list[tuple[float, float]] = []

    def prob(t: float) -> float:
        v = GibbsEngine(ring_field(spec, ring, t)).expectation(A) if t else eng.expectation(A)
        trace.append((t, v))
        return v

    def ok(v):
        return v >= target - tol

    if ok(prob(0.0)):
        t_star = 0.0
    else:
        lo, hi = 0.0, 1.0
        while not ok(prob(hi)):
            lo, hi = hi, 2 * hi
            if hi > t_max:
                hi = math.inf
                break
        if math.isfinite(hi):
            while hi - lo > t_resolution:
                mid = 0.5 * (lo + hi)
                if ok(prob(mid)):
                    hi = mid
                else:
                    lo = mid
        t_star = hi
    ordered = sorted(trace)
    mono = all(b[1] >= a[1] - tol for a, b in zip(ordered, ordered[1:]))
    achieved = max(v for t, v in trace if t <= t_star) if math.isfinite(t_star) else math.nan
    return FieldBoostResult(x, m, t_star, mono, target, achieved, ordered)


def check_field_boost(instances: int = 200, seed: int = 0) -> CheckReport:
    """Finite t_star and a monotone bisection trace on random admissible instances."""
    rep = CheckReport("field_boost", "measurement")
    rng = rng_for(rep.check_name, seed)
    t_stars = []
    for i in range(instances):
        m = 1
        region, x, a = _ring_instance(rng, m, max_sites=10)
        beta = float(rng.uniform(0, 1.0))
        h = float(rng.uniform(-1, 1))
        res = min_field_boost(beta, h, region, x, m, a)
        good = math.isfinite(res.t_star) and res.monotone_in_t and res.achieved >= res.target - 1e-12
        inst = serialize(measure(region, beta, h), a, x=x, m=m)
        rep.record(0.0 if good else -1.0, 0.5, inst, t_star=res.t_star, monotone=res.monotone_in_t)
        t_stars.append(res.t_star)
        rep.instances += 1
    fin = [t for t in t_stars if math.isfinite(t)]
    rep.extras = {
        "t_star_max": max(fin) if fin else None,
        "t_star_mean": float(np.mean(fin)) if fin else None,
        "t_star_zero_fraction": float(np.mean([t == 0 for t in fin])) if fin else None,
        "m_trend": field_boost_m_trend(),
    }
    return rep


def field_boost_m_trend(beta: float = 0.3, h: float = 0.0) -> list:
    """t_star for m = 1, 2 on a column with the event at its far end."""
    kind = tri_times_z()
    region = Region.from_sites(kind, [(0, 0, z) for z in range(8)])
    x = (0, 0, 0)
    a = CylinderUnion([(0, 0, 7)], [[(0, 0, 7)]], label="far")
    return [[m, min_field_boost(beta, h, region, x, m, a).t_star] for m in (1, 2, 3)]


def check_covtopiv_bound(hs: HybridSpec, m: int, xs=None, omegas=None) -> CheckReport:
    """Implied constants in <s_x; I_H(x,w)> <= C piv_sum + eps ring_sum (measurement only)."""
    rep = CheckReport("covtopiv", "measurement")
    tabs = hybrid.tables(hs)
    region = hs.measure.region
    xs = region.sites if xs is None else xs
    omegas = [0, (1 << tabs.L) - 1] if omegas is None else omegas
    rows = []
    for x in xs:
        xb = hs.event.bits_of([x])
        for w in omegas:
            mask = int(tabs.mask(int(w)))
            lhs = float(tabs.site_covariances(x, np.array([mask | xb]))[0])
            piv_sum = 0.0
            for y in tabs.layer1:
                if max(abs(y[j] - x[j]) for j in range(3)) <= m + 1:
                    opened = tabs.mask_of_sites(s for s in tabs.layer1 if max(abs(s[j] - y[j]) for j in range(3)) <= 3 * m)
                    piv_sum += _pivotal_prob(tabs, y, mask | opened)
            ring_sum = 0.0
            for y in sup_ring(region, x, m):
                yb = hs.event.bits_of([y])
                ring_sum += float(tabs.site_covariances(y, np.array([mask | yb]))[0])
            rows.append(
                {
                    "x": list(x), "omega": int(w), "m": m, "lhs": lhs, "pivotal_sum": piv_sum, "ring_sum": ring_sum,
                    "C_at_eps0": _ratio(lhs, piv_sum), "eps_at_C0": _ratio(lhs, ring_sum),
                }
            )
            rep.instances += 1
    rep.extras = {"rows": rows}
    return rep


def _ratio(a: float, b: float) -> float:
    if a <= 1e-15:
        return 0.0
    return a / b if b > 1e-15 else math.inf


def check_covtopiv(instances: int = 0, seed: int = 0) -> CheckReport:
    base, ev = path_instance(0.1)
    hs = HybridSpec(base.with_field(np.full(len(base.region), 0.0)), 0.5, ev)
    xs = [(0, 0, 0), (0, 0, 1), (1, 1, 1), (-2, 0, 0)]
    out = None
    for m in (0, 1):
        r = check_covtopiv_bound(hs, m, xs)
        if out is None:
            out = r
        else:
            out.instances += r.instances
            out.extras["rows"] += r.extras["rows"]
    return out


# ---------------------------------------------------------------------------
# registry

CheckFn = Callable[[int, int], CheckReport]

REGISTRY: dict[str, tuple[CheckFn, int]] = {
    "normalization": (check_normalization, 1000),
    "conditional": (check_conditional, 1000),
    "fkg": (check_fkg, 1000),
    "gks": (check_gks, 1000),
    "boundary_monotonicity": (check_boundary_monotonicity, 1000),
    "cov_inequality": (check_cov_inequality, 1000),
    "gronwall": (check_gronwall_sandwich, 1000),
    "monotone_shortcut": (check_monotone_shortcut, 1000),
    "pivotal_complement": (check_pivotal_complement, 1000),
    "plus_pivotal": (check_plus_pivotal, 1000),
    "omega_exchange": (check_omega_exchange, 1000),
    "appendix": (check_appendix_identities, 1000),
    "derivatives": (check_derivatives, 100),
    "duality": (check_duality, 0),
    "path_monotonicity": (lambda instances=0, seed=0: check_path_monotonicity(), 0),
    "mixing": (check_mixing, 0),
    "field_boost": (check_field_boost, 200),
    "covtopiv": (check_covtopiv, 0),
}


def run_check(name: str, instances: int | None = None, seed: int = 0) -> CheckReport:
    if name not in REGISTRY:
        raise KeyError(f"unknown check {name!r}; known: {sorted(REGISTRY)}")
    fn, default = REGISTRY[name]
    return fn(default if instances is None else instances, seed)


def run_checks(names: Sequence[str] | None = None, instances: int | None = None, seed: int = 0, workers: int = 1) -> list[CheckReport]:
    """Run checks, optionally across processes; report order follows ``names``."""
    names = list(REGISTRY) if names is None else list(names)
    for n in names:
        if n not in REGISTRY:
            raise KeyError(f"unknown check {n!r}; known: {sorted(REGISTRY)}")
    if workers <= 1:
        return [run_check(n, instances, seed) for n in names]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(run_check, n, instances, seed) for n in names]
        return [f.result() for f in futs]
