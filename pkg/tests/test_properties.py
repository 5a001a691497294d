"""Correlation inequalities on small boxes, enumerated here with itertools
so the measure itself is not taken from the package."""

import itertools
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from isingcoex.events import CylinderUnion
from isingcoex.exact import GibbsEngine, measure
from isingcoex.lattice import Region, tri_times_z

KIND = tri_times_z()
REGION = Region.from_sites(KIND, [(x, y, z) for x in range(2) for y in range(2) for z in range(2)])
EDGES = [tuple(e) for e in REGION.edges()]
N = len(REGION)
CONFIGS = np.array(list(itertools.product((-1, 1), repeat=N)))


def gibbs(beta, h):
    e = np.zeros(len(CONFIGS))
    for i, j in EDGES:
        e += beta * CONFIGS[:, i] * CONFIGS[:, j]
    e += CONFIGS @ np.asarray(h)
    w = np.exp(e - e.max())
    return w / w.sum()


def cylinder_indicator(sets):
    """Union of all-plus cylinders on the given index sets."""
    ind = np.zeros(len(CONFIGS), dtype=bool)
    for s in sets:
        ind |= np.all(CONFIGS[:, list(s)] == 1, axis=1) if s else True
    return ind.astype(float)


subsets = st.lists(st.lists(st.integers(0, N - 1), max_size=4, unique=True), min_size=1, max_size=3)
fields = st.lists(st.floats(-1.5, 1.5), min_size=N, max_size=N)


@settings(max_examples=80)
@given(beta=st.floats(0, 1.5), h=fields, a=subsets, b=subsets)
def test_fkg(beta, h, a, b):
    p = gibbs(beta, h)
    fa, fb = cylinder_indicator(a), cylinder_indicator(b)
    assert p @ (fa * fb) - (p @ fa) * (p @ fb) >= -1e-13


@settings(max_examples=80)
@given(beta=st.floats(0, 1.5), h=st.lists(st.floats(0, 1.5), min_size=N, max_size=N), i=st.integers(0, N - 1), j=st.integers(0, N - 1))
def test_gks(beta, h, i, j):
    p = gibbs(beta, h)
    si, sj = CONFIGS[:, i], CONFIGS[:, j]
    assert p @ si >= -1e-13
    assert p @ (si * sj) >= -1e-13
    assert p @ (si * sj) - (p @ si) * (p @ sj) >= -1e-13


@settings(max_examples=40)
@given(beta=st.floats(0, 1.5), h=fields, a=subsets)
def test_engine_agrees_with_local_enumeration(beta, h, a):
    sites = REGION.sites
    ev = CylinderUnion(sorted({sites[i] for s in a for i in s}), [[sites[i] for i in s] for s in a])
    eng = GibbsEngine(measure(REGION, beta, np.asarray(h)))
    assert math.isclose(eng.expectation(ev), gibbs(beta, h) @ cylinder_indicator(a), abs_tol=1e-12)
