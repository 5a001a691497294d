"""Finite regions of T x Z and its relatives.

All lattices live on integer points of Z^3.  Adjacency is translation
invariant and given by an offset set closed under negation; some kinds also
restrict the vertex set to a few values of the third coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

Site = tuple[int, int, int]


def _symmetric(half: Sequence[Sequence[int]]) -> tuple[Site, ...]:
    out = []
    for v in half:
        v = tuple(int(c) for c in v)
        out.append(v)
        out.append(tuple(-c for c in v))
    return tuple(out)


@dataclass(frozen=True)
class LatticeKind:
    name: str
    offsets: tuple[Site, ...]
    # allowed values of the third coordinate; None means all of Z
    layers: tuple[int, ...] | None = None

    def __post_init__(self):
        offs = set(self.offsets)
        if len(offs) != len(self.offsets):
            raise ValueError("duplicate offsets")
        if (0, 0, 0) in offs:
            raise ValueError("zero offset")
        for v in offs:
            if len(v) != 3:
                raise ValueError("offsets must be integer triples")
            if tuple(-c for c in v) not in offs:
                raise ValueError(f"offset set not symmetric: missing -{v}")

    @property
    def degree(self) -> int:
        return len(self.offsets)

    def contains(self, site: Sequence[int]) -> bool:
        return self.layers is None or site[2] in self.layers


TRI_HALF = ((1, 0, 0), (0, 1, 0), (1, 1, 0))
TRI3D_DEFAULT_HALF = (
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1),
)


def tri_times_z() -> LatticeKind:
    return LatticeKind("TriTimesZ", _symmetric(TRI_HALF + ((0, 0, 1),)))


def tri_times_k2() -> LatticeKind:
    return LatticeKind("TriTimesK2", _symmetric(TRI_HALF + ((0, 0, 1),)), layers=(0, 1))


def tri_3d(offsets: Iterable[Sequence[int]] | None = None) -> LatticeKind:
    """Three-dimensional triangular lattice.

    The default offset set is a documented choice; pass ``offsets`` (one
    representative per +/- pair, or the full symmetric set) to override.
    """
    if offsets is None:
        return LatticeKind("Tri3D", _symmetric(TRI3D_DEFAULT_HALF))
    offs = [tuple(int(c) for c in v) for v in offsets]
    full: list[Site] = []
    for v in offs:
        for w in (v, tuple(-c for c in v)):
            if w not in full:
                full.append(w)
    return LatticeKind("Tri3D", tuple(full))


def z_star_2d() -> LatticeKind:
    return LatticeKind("ZStar2D", _symmetric(((1, 0, 0), (0, 1, 0), (1, 1, 0), (1, -1, 0))), layers=(0,))


KINDS = {
    "TriTimesZ": tri_times_z,
    "TriTimesK2": tri_times_k2,
    "Tri3D": tri_3d,
    "ZStar2D": z_star_2d,
}


def lattice_kind(name: str, offsets=None) -> LatticeKind:
    try:
        factory = KINDS[name]
    except KeyError:
        raise ValueError(f"unknown lattice kind {name!r}; choose from {sorted(KINDS)}") from None
    if offsets is not None:
        if name != "Tri3D":
            raise ValueError("only Tri3D accepts custom offsets")
        return tri_3d(offsets)
    return factory()


@dataclass(frozen=True)
class Box:
    """B_n(x): the cube of half-width ``radius`` around ``center``."""

    center: Site = (0, 0, 0)
    radius: int = 0

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    def contains(self, site: Sequence[int]) -> bool:
        return all(abs(site[i] - self.center[i]) <= self.radius for i in range(3))

    def points(self, kind: LatticeKind) -> list[Site]:
        n = self.radius
        cx, cy, cz = self.center
        rng = range(-n, n + 1)
        pts = []
        for dx, dy, dz in product(rng, rng, rng):
            s = (cx + dx, cy + dy, cz + dz)
            if kind.contains(s):
                pts.append(s)
        return pts


@dataclass(frozen=True, eq=False)
class Region:
    """Finite vertex set Lambda with the induced adjacency of ``kind``.

    Sites are stored in lexicographic order; ``index`` maps a site to its
    dense id.  ``nbr`` is an (N, degree) table of neighbour ids in offset
    order with -1 for neighbours outside the region.
    """

    kind: LatticeKind
    sites: tuple[Site, ...]
    index: dict = field(repr=False)
    coords: np.ndarray = field(repr=False)
    nbr: np.ndarray = field(repr=False)

    @classmethod
    def from_sites(cls, kind: LatticeKind, sites: Iterable[Sequence[int]], allow_empty: bool = False) -> "Region":
        pts = [tuple(int(c) for c in s) for s in sites]
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate sites")
        for s in pts:
            if len(s) != 3:
                raise ValueError("sites must be integer triples")
            if not kind.contains(s):
                raise ValueError(f"site {s} is not a vertex of {kind.name}")
        pts.sort()
        if not pts and not allow_empty:
            raise ValueError("region must contain at least one site")
        index = {s: i for i, s in enumerate(pts)}
        coords = np.array(pts, dtype=np.int64).reshape(-1, 3)
        nbr = np.full((len(pts), kind.degree), -1, dtype=np.int64)
        for i, s in enumerate(pts):
            for k, off in enumerate(kind.offsets):
                j = index.get((s[0] + off[0], s[1] + off[1], s[2] + off[2]))
                if j is not None:
                    nbr[i, k] = j
        coords.setflags(write=False)
        nbr.setflags(write=False)
        return cls(kind, tuple(pts), index, coords, nbr)

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site) -> bool:
        return tuple(site) in self.index

    def __iter__(self):
        return iter(self.sites)

    def id_of(self, site: Sequence[int]) -> int:
        try:
            return self.index[tuple(site)]
        except KeyError:
            raise KeyError(f"site not in region: {tuple(site)}") from None

    def ids(self, sites: Iterable[Sequence[int]]) -> list[int]:
        return [self.id_of(s) for s in sites]

    def neighbors(self, site: Sequence[int]) -> list[Site]:
        i = self.id_of(site)
        return [self.sites[j] for j in self.nbr[i] if j >= 0]

    def lattice_neighbors(self, site: Sequence[int]) -> list[Site]:
        """All neighbours in the infinite lattice, inside the region or not."""
        s = tuple(site)
        out = []
        for off in self.kind.offsets:
            y = (s[0] + off[0], s[1] + off[1], s[2] + off[2])
            if self.kind.contains(y):
                out.append(y)
        return out

    def outer_boundary(self) -> list[Site]:
        """Lattice sites outside the region adjacent to some region site."""
        out = set()
        for s in self.sites:
            for y in self.lattice_neighbors(s):
                if y not in self.index:
                    out.add(y)
        return sorted(out)

    def edges(self) -> np.ndarray:
        """Internal edges as an (E, 2) array with i < j."""
        if len(self) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        i, k = np.nonzero(self.nbr >= 0)
        j = self.nbr[i, k]
        keep = i < j
        return np.stack([i[keep], j[keep]], axis=1).astype(np.int64)

    def subregion(self, sites: Iterable[Sequence[int]], allow_empty: bool = False) -> "Region":
        sites = list(sites)
        for s in sites:
            self.id_of(s)
        return Region.from_sites(self.kind, sites, allow_empty=allow_empty)


def build_region(kind: LatticeKind, box: Box) -> Region:
    return Region.from_sites(kind, box.points(kind))


def neighbors(kind: LatticeKind, region: Region, site) -> list[Site]:
    if region.kind != kind:
        raise ValueError("region was built for a different lattice kind")
    return region.neighbors(site)


def vertex_boundary(kind: LatticeKind, region: Region) -> list[Site]:
    """Inner vertex boundary: sites with a lattice neighbour outside the region."""
    if region.kind != kind:
        raise ValueError("region was built for a different lattice kind")
    out = []
    for s in region.sites:
        if any(y not in region.index for y in region.lattice_neighbors(s)):
            out.append(s)
    return out


def layer_sites(region: Region, k: int | tuple[int, int]) -> list[Site]:
    """Sites with third coordinate ``k``, or in the closed range ``k=(lo, hi)``."""
    if isinstance(k, tuple):
        lo, hi = k
        return [s for s in region.sites if lo <= s[2] <= hi]
    return [s for s in region.sites if s[2] == k]


def ball_boundary_size(kind: LatticeKind, m: int) -> int:
    """|dB_m| for the full lattice (independent of any finite region)."""
    box = Box((0, 0, 0), m)
    return len(vertex_boundary(kind, build_region(kind, box)))


def swap_xy(site: Sequence[int]) -> Site:
    return (site[1], site[0], site[2])
