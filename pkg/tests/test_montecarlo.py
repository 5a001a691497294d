import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from isingcoex import kernels
from isingcoex.events import lr_crossing, plus_at
from isingcoex.exact import SpinConfig, measure
from isingcoex.lattice import Box, Region, build_region, tri_times_z
from isingcoex.montecarlo import (
    Chain,
    bfs_labels,
    box_measure,
    cluster_labels,
    cluster_stats,
    coexistence_scan,
    estimate_crossing,
    exact_comparison,
    locate_drop,
    run_chain,
)


def canonical(labels):
    """Relabel every cluster by its smallest member id; -1 stays -1."""
    out = np.full(labels.size, -1, dtype=np.int64)
    act = labels >= 0
    first = {}
    for i in np.flatnonzero(act):
        first.setdefault(int(labels[i]), i)
    for i in np.flatnonzero(act):
        out[i] = first[int(labels[i])]
    return out


def scipy_labels(region, values):
    i, d = np.nonzero(region.nbr >= 0)
    j = region.nbr[i, d]
    keep = values[i] == values[j]
    g = coo_matrix((np.ones(keep.sum()), (i[keep], j[keep])), shape=(len(region),) * 2)
    _, lab = connected_components(g, directed=False)
    mins = np.full(lab.max() + 1, len(region))
    np.minimum.at(mins, lab, np.arange(len(region)))
    return mins[lab]


@pytest.fixture(scope="module")
def b8():
    return build_region(tri_times_z(), Box((0, 0, 0), 8))


def test_union_find_against_bfs(b8):
    rng = np.random.default_rng(2)
    for t in range(60):
        v = rng.choice(np.array([-1, 1], dtype=np.int8), len(b8))
        c = SpinConfig(b8, v)
        box = Box((0, 0, 0), int(rng.integers(3, 9))) if t % 3 else None
        want = bfs_labels(c, box)
        assert np.array_equal(cluster_labels(c, box), want)
        assert np.array_equal(cluster_labels(c, box, backend=kernels.sign_labels_np), want)


@pytest.mark.slow
def test_union_find_ten_thousand_configs(b8):
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        density = rng.uniform(0.3, 0.7)
        v = np.where(rng.random(len(b8)) < density, 1, -1).astype(np.int8)
        assert np.array_equal(kernels.sign_labels_nb(v, b8.nbr, np.ones(len(b8), dtype=bool)), scipy_labels(b8, v))


def test_cluster_stats_all_plus(b8):
    st = cluster_stats(SpinConfig.constant(b8, 1), box=Box((0, 0, 0), 8))
    assert st.plus_clusters == 1 and st.largest_plus == len(b8) and st.plus_spanning
    assert st.minus_clusters == 0 and not st.minus_spanning


def test_cluster_stats_stripes():
    kind = tri_times_z()
    region = Region.from_sites(kind, [(x, y, 0) for x in range(6) for y in range(6)])
    # stripes orthogonal to x(1): each column x = const is one sign
    v = np.array([1 if s[0] % 2 == 0 else -1 for s in region.sites], dtype=np.int8)
    c = SpinConfig(region, v)
    st = cluster_stats(c)
    assert not st.plus_spanning and not st.minus_spanning
    assert st.plus_clusters == 3 and st.minus_clusters == 3
    assert np.array_equal(canonical(cluster_labels(c)), canonical(bfs_labels(c)))


def test_chain_determinism():
    spec = box_measure(tri_times_z(), 3, 0.2, 0.1, "plus")
    a = Chain(spec, seed=9, stream=2).step("heatbath", 5).step("cluster", 5)
    b = Chain(spec, seed=9, stream=2).step("heatbath", 5).step("cluster", 5)
    c = Chain(spec, seed=9, stream=3).step("heatbath", 5).step("cluster", 5)
    assert np.array_equal(a.spins, b.spins)
    assert not np.array_equal(a.spins, c.spins)
    assert a.sweeps_done == 10


def test_backends_produce_identical_chains():
    spec = box_measure(tri_times_z(), 3, 0.3, -0.1, "minus")
    a, b = Chain(spec, seed=4), Chain(spec, seed=4)
    bp, bm = (np.asarray(x, dtype=np.int64) for x in spec.boundary_counts())
    for sweep in range(6):
        key = a._next_key()
        b._next_key()
        if sweep % 2:
            kernels.ghost_update_nb(a.spins, a.nbr, a.beta, -0.1, bp, bm, np.uint64(key))
            kernels.ghost_update_np(b.spins, b.nbr, b.beta, -0.1, bp, bm, key)
        else:
            kernels.heat_bath_sweep_nb(a.spins, a.order, a.nbr, a.beta, a.ext, np.uint64(key))
            kernels.heat_bath_sweep_np(b.spins, b.order, b.nbr, b.beta, b.ext, key, b.colour_slices)
        assert np.array_equal(a.spins, b.spins)


def test_disable_jit_env_selects_numpy():
    code = (
        "import numpy as np;from isingcoex import backend_name;"
        "from isingcoex.montecarlo import Chain, box_measure;from isingcoex.lattice import tri_times_z;"
        "c=Chain(box_measure(tri_times_z(),2,0.2,0.1),seed=5).step('heatbath',3).step('cluster',3);"
        "print(backend_name(), ''.join('+' if s>0 else '-' for s in c.spins))"
    )
    env = dict(os.environ, ISINGCOEX_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "numpy"
    c = Chain(box_measure(tri_times_z(), 2, 0.2, 0.1), seed=5).step("heatbath", 3).step("cluster", 3)
    assert out[1] == "".join("+" if s > 0 else "-" for s in c.spins)


def test_ghost_needs_homogeneous_field(patch):
    spec = measure(patch, 0.2, np.linspace(-1, 1, len(patch)))
    with pytest.raises(ValueError, match="ghost update requires homogeneous h"):
        Chain(spec).ghost_cluster_update()
    with pytest.raises(ValueError):
        Chain(spec).step("metropolis")


def test_ghost_at_beta_zero_resamples_every_site(patch):
    chain = Chain(measure(patch, 0.0, 0.0), seed=1)
    ups = np.zeros(len(patch))
    for _ in range(4000):
        chain.ghost_cluster_update()
        ups += chain.spins > 0
    assert np.all(np.abs(ups / 4000 - 0.5) < 4 * 0.5 / np.sqrt(4000))


def test_ghost_strong_field_never_flips_against_it(patch):
    chain = Chain(measure(patch, 0.2, 40.0), seed=3, init="plus")
    for _ in range(50):
        chain.ghost_cluster_update()
        assert np.all(chain.spins == 1)


@pytest.mark.parametrize("sampler", ["heatbath", "cluster"])
@pytest.mark.parametrize("bc", ["free", "plus", "minus"])
def test_samplers_match_exact_cylinders(kind, sampler, bc):
    region = Region.from_sites(kind, [(a, b, c) for a in range(2) for b in range(3) for c in range(2)])
    spec = measure(region, 0.35, 0.1 if bc == "free" else 0.0, bc)
    events = [plus_at(s) for s in region.sites[::3]] + [lr_crossing(kind, 0, (0,), (0, 0, 0))]
    rows = exact_comparison(spec, events, sampler, 4000, seed=21, sweeps_between=2)
    for r in rows:
        assert abs(r["z"]) < 4, r


def test_estimate_crossing_beta_zero():
    est = estimate_crossing(box_measure(tri_times_z(), 4, 0.0, 0.0), 4, samples=3000, seed=1)
    assert est.within(0.5, 4) and est.equilibrated


def test_strong_field_saturates_crossing():
    est = estimate_crossing(box_measure(tri_times_z(), 4, 0.1, 3.0), 4, samples=300, seed=2)
    assert est.mean >= 0.99


def test_coexistence_scan_shapes():
    rows = coexistence_scan(0.1, 3.0, [3], samples=50, seed=0)
    assert rows[0]["minus_span"] <= 0.05
    assert set(rows[0]) >= {"both_span", "both_span_se", "second_over_largest_plus", "equilibrated"}


def test_run_chain_records():
    kind = tri_times_z()
    spec = box_measure(kind, 3, 0.1, 0.0)
    run = run_chain(spec, Box((0, 0, 0), 3), lr_crossing(kind, 3, (0,)), 0.0, 40, seed=1)
    assert len(run.records) == 40 and run.summary()["samples"] == 40
    again = run_chain(spec, Box((0, 0, 0), 3), lr_crossing(kind, 3, (0,)), 0.0, 40, seed=1)
    assert run.records == again.records


def test_locate_drop():
    h = [-0.3, -0.2, -0.1, 0.0]
    lo, hi, x = locate_drop(h, [0.0, 0.1, 0.3, 0.5], 0.2)
    assert (lo, hi) == (-0.2, -0.1) and lo < x < hi
    with pytest.raises(ValueError, match="widen h-grid"):
        locate_drop(h, [0.3, 0.4, 0.5, 0.6], 0.2)
    with pytest.raises(ValueError, match="widen h-grid"):
        locate_drop(h, [0.0, 0.0, 0.1, 0.1], 0.2)
