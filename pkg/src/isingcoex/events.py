"""Increasing events and the pivotality calculus.

An event has a finite ordered ``support``; its ``table()`` lists membership
for every +/- assignment on the support, indexed with bit j set when
``support[j]`` is +1.  Working on tables turns "set everything outside a set
to -1" into a bitwise AND, which is how ``occurs_on`` is evaluated for whole
measures at once.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .exact import SpinConfig
from .lattice import Box, LatticeKind, Region, Site, build_region, vertex_boundary


class IncreasingEvent:
    """Base class; subclasses provide ``_table`` or a predicate."""

    def __init__(self, support: Iterable[Sequence[int]], label: str = ""):
        sup = tuple(tuple(int(c) for c in s) for s in support)
        if len(set(sup)) != len(sup):
            raise ValueError("duplicate support sites")
        self.support: tuple[Site, ...] = sup
        self.label = label
        self._pos = {s: j for j, s in enumerate(sup)}

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r}, |support|={len(self.support)})"

    @property
    def k(self) -> int:
        return len(self.support)

    def position(self, site) -> int:
        return self._pos[tuple(site)]

    def bits_of(self, sites: Iterable[Sequence[int]]) -> int:
        """Support bitmask of those ``sites`` that lie in the support."""
        m = 0
        for s in sites:
            j = self._pos.get(tuple(s))
            if j is not None:
                m |= 1 << j
        return m

    @property
    def full_mask(self) -> int:
        return (1 << self.k) - 1

    def evaluate(self, values: np.ndarray) -> bool:
        """Membership for +/-1 values listed in support order."""
        bits = (np.asarray(values) > 0).astype(np.int64)
        return bool(self.table()[int((bits << np.arange(self.k, dtype=np.int64)).sum())])

    def table(self) -> np.ndarray:
        return self._cached_table

    @cached_property
    def _cached_table(self) -> np.ndarray:
        t = np.asarray(self._table(), dtype=bool)
        t.setflags(write=False)
        return t

    def _table(self) -> np.ndarray:
        raise NotImplementedError

    def check_in(self, region: Region) -> None:
        missing = [s for s in self.support if s not in region]
        if missing:
            raise ValueError(f"event support not contained in region: {missing[:3]}")

    def __call__(self, sigma: SpinConfig) -> bool:
        self.check_in(sigma.region)
        return self.evaluate(np.array([sigma[s] for s in self.support]))

    def is_monotone(self) -> bool:
        """Exhaustive single-flip test over the whole table."""
        t = self.table()
        ids = np.arange(t.size)
        for j in range(self.k):
            lo = ids[(ids >> j) & 1 == 0]
            if np.any(t[lo] & ~t[lo | (1 << j)]):
                return False
        return True


class PredicateEvent(IncreasingEvent):
    """Event given by an arbitrary Python predicate on support values."""

    def __init__(self, support, predicate: Callable[[np.ndarray], bool], label: str = ""):
        super().__init__(support, label)
        self.predicate = predicate

    def _table(self):
        k = self.k
        ids = np.arange(1 << k, dtype=np.int64)
        vals = 2 * ((ids[:, None] >> np.arange(k)) & 1) - 1
        return np.array([bool(self.predicate(v)) for v in vals], dtype=bool)


class CylinderUnion(IncreasingEvent):
    """Union over ``cylinders`` of {all spins of the cylinder are +1}.

    An empty cylinder is the whole space; no cylinders is the empty event.
    """

    def __init__(self, support, cylinders: Iterable[Iterable[Sequence[int]]], label: str = ""):
        super().__init__(support, label)
        masks = []
        for cyl in cylinders:
            m = 0
            for s in cyl:
                m |= 1 << self.position(s)
            masks.append(m)
        self.cylinder_masks = tuple(sorted(set(masks)))

    @property
    def cylinders(self) -> list[list[Site]]:
        return [[self.support[j] for j in range(self.k) if m >> j & 1] for m in self.cylinder_masks]

    def _table(self):
        ids = np.arange(1 << self.k, dtype=np.int64)
        out = np.zeros(ids.shape, dtype=bool)
        for m in self.cylinder_masks:
            out |= (ids & m) == m
        return out

    def to_json(self) -> dict:
        return {"support": [list(s) for s in self.support], "cylinders": [[list(s) for s in c] for c in self.cylinders]}


def full_event(support=()) -> CylinderUnion:
    return CylinderUnion(support, [[]], label="full")


def empty_event(support=()) -> CylinderUnion:
    return CylinderUnion(support, [], label="empty")


def plus_at(x: Sequence[int], support=None) -> CylinderUnion:
    x = tuple(x)
    sup = [x] if support is None else support
    return CylinderUnion(sup, [[x]], label=f"sigma{x}=+1")


class PathEvent(IncreasingEvent):
    """A path of +1 spins inside the support from ``sources`` to ``targets``.

    Adjacency is the lattice adjacency restricted to the support.
    """

    def __init__(self, kind: LatticeKind, support, sources, targets, label: str = ""):
        super().__init__(support, label)
        self.kind = kind
        self.sources = frozenset(tuple(s) for s in sources)
        self.targets = frozenset(tuple(s) for s in targets)
        for s in self.sources | self.targets:
            if s not in self._pos:
                raise ValueError(f"endpoint {s} outside support")
        k = self.k
        adj = np.full((k, kind.degree), -1, dtype=np.int64)
        for j, s in enumerate(self.support):
            for d, off in enumerate(kind.offsets):
                y = (s[0] + off[0], s[1] + off[1], s[2] + off[2])
                jj = self._pos.get(y)
                if jj is not None:
                    adj[j, d] = jj
        self.adj = adj
        self.source_mask = np.array([s in self.sources for s in self.support], dtype=bool)
        self.target_mask = np.array([s in self.targets for s in self.support], dtype=bool)

    def _table(self):
        return kernels.path_table(self.k, self.adj, self.source_mask, self.target_mask)

    def evaluate(self, values: np.ndarray) -> bool:
        if self.k > 20:
            plus = np.asarray(values) > 0
            return bool(path_exists(plus, self.adj, self.source_mask, self.target_mask))
        return super().evaluate(values)

    def evaluate_batch(self, plus: np.ndarray) -> np.ndarray:
        """Membership for a (B, k) boolean matrix of + indicators."""
        return kernels.path_batch(np.ascontiguousarray(plus, dtype=np.bool_), self.adj, self.source_mask, self.target_mask)


def path_exists(plus: np.ndarray, adj, sources, targets) -> bool:
    return bool(kernels.path_batch(np.ascontiguousarray(plus[None, :], dtype=np.bool_), adj, sources, targets)[0])


# ---------------------------------------------------------------------------
# configuration surgery


def modify(sigma: SpinConfig, delta: Iterable[Sequence[int]], sign: int) -> SpinConfig:
    """sigma^{Delta+} or sigma^{Delta-}: spins on ``delta`` overwritten by ``sign``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    v = sigma.values.copy()
    for s in delta:
        if tuple(s) not in sigma.region:
            raise ValueError(f"delta site {tuple(s)} not in region")
        v[sigma.region.id_of(s)] = sign
    return SpinConfig(sigma.region, v)


def occurs_on(A: IncreasingEvent, delta: Iterable[Sequence[int]], sigma: SpinConfig) -> bool:
    """Whether A holds for every tau agreeing with sigma on ``delta``.

    For increasing A the worst tau sets everything off ``delta`` to -1.
    """
    delta = {tuple(s) for s in delta}
    off = [s for s in A.support if s not in delta]
    return A(modify(sigma, off, -1))


def occurs_on_bruteforce(A: IncreasingEvent, delta: Iterable[Sequence[int]], sigma: SpinConfig) -> bool:
    """Literal quantifier over all tau; exponential in the free support."""
    delta = {tuple(s) for s in delta}
    free = [s for s in A.support if s not in delta]
    base = np.array([sigma[s] for s in A.support], dtype=np.int8)
    free_pos = [A.position(s) for s in free]
    for c in range(1 << len(free)):
        v = base.copy()
        for t, j in enumerate(free_pos):
            v[j] = 1 if (c >> t) & 1 else -1
        if not A.evaluate(v):
            return False
    return True


def is_pivotal(delta: Iterable[Sequence[int]], A: IncreasingEvent, sigma: SpinConfig) -> bool:
    delta = list(delta)
    return A(modify(sigma, delta, 1)) and not A(modify(sigma, delta, -1))


def is_plus_pivotal(x: Sequence[int], A: IncreasingEvent, sigma: SpinConfig) -> bool:
    return is_pivotal([x], A, sigma) and sigma[x] == 1


class OccursOn(IncreasingEvent):
    """{A occurs on Delta} as an event in its own right."""

    def __init__(self, A: IncreasingEvent, delta: Iterable[Sequence[int]]):
        super().__init__(A.support, f"{A.label} on Delta")
        self.base = A
        self.mask = A.bits_of(delta)

    def _table(self):
        t = self.base.table()
        return t[np.arange(t.size) & self.mask]


def occurs_on_table(table: np.ndarray, mask: int) -> np.ndarray:
    return table[np.arange(table.size) & mask]


# ---------------------------------------------------------------------------
# crossing and connection events


def _box_layer_sites(kind: LatticeKind, n: int, layers, center=(0, 0, 0)) -> list[Site]:
    box = Box(tuple(center), n)
    layers = None if layers is None else {int(z) for z in layers}
    return [s for s in box.points(kind) if layers is None or s[2] in layers]


def lr_crossing(kind: LatticeKind, box_n: int, layers=(0,), center=(0, 0, 0)) -> PathEvent:
    """+ path in B_n restricted to ``layers`` touching both faces x(1) = -n and x(1) = +n."""
    sup = _box_layer_sites(kind, box_n, layers, center)
    if not sup:
        raise ValueError("crossing box has no sites in the named layers")
    cx = center[0]
    left = [s for s in sup if s[0] == cx - box_n]
    right = [s for s in sup if s[0] == cx + box_n]
    return PathEvent(kind, sup, left, right, label=f"LR+ B_{box_n} layers{tuple(sorted(set(layers)))}")


def tb_crossing(kind: LatticeKind, box_n: int, layers=(0,), center=(0, 0, 0)) -> PathEvent:
    """+ path touching both faces x(2) = -n and x(2) = +n."""
    sup = _box_layer_sites(kind, box_n, layers, center)
    cy = center[1]
    bottom = [s for s in sup if s[1] == cy - box_n]
    top = [s for s in sup if s[1] == cy + box_n]
    return PathEvent(kind, sup, bottom, top, label=f"TB+ B_{box_n}")


def tb_minus_crossing(sigma: SpinConfig, kind: LatticeKind, box_n: int, layers=(0,), center=(0, 0, 0)) -> bool:
    """Top-to-bottom path of - spins; a decreasing event, hence not an IncreasingEvent."""
    ev = tb_crossing(kind, box_n, layers, center)
    ev.check_in(sigma.region)
    vals = np.array([-sigma[s] for s in ev.support])
    return ev.evaluate(vals)


def connection_event(kind: LatticeKind, origin: Sequence[int], box_n: int, layers=(0, 1), center=(0, 0, 0)) -> PathEvent:
    """+ path from ``origin`` to the inner vertex boundary of B_n, inside ``layers``."""
    origin = tuple(origin)
    sup = _box_layer_sites(kind, box_n, layers, center)
    if origin not in sup:
        raise ValueError("origin not in box")
    ring = set(vertex_boundary(kind, build_region(kind, Box(tuple(center), box_n))))
    targets = [s for s in sup if s in ring]
    return PathEvent(kind, sup, [origin], targets, label=f"{origin}<->dB_{box_n}")


def tb_minus_crossing_complement_check(
    kind: LatticeKind, box_n: int, samples: int = 100_000, seed: int = 0, exhaustive_limit: int = 20
) -> bool:
    """NOT(LR + crossing) <=> TB - crossing on B_n in layer 0, for every sampled sigma.

    Exhaustive when the patch has at most ``exhaustive_limit`` sites,
    otherwise ``samples`` uniform random configurations.
    """
    lr = lr_crossing(kind, box_n, (0,))
    tb = tb_crossing(kind, box_n, (0,))
    assert lr.support == tb.support
    k = lr.k
    if k <= exhaustive_limit:
        t_lr = lr.table()
        t_tb = tb.table()
        ids = np.arange(1 << k, dtype=np.int64)
        tb_minus = t_tb[~ids & ((1 << k) - 1)]
        return bool(np.all(~t_lr == tb_minus))
    rng = np.random.default_rng(seed)
    done = 0
    while done < samples:
        b = min(10_000, samples - done)
        plus = rng.random((b, k)) < 0.5
        a = lr.evaluate_batch(plus)
        c = tb.evaluate_batch(~plus)
        if np.any(~a != c):
            return False
        done += b
    return True
