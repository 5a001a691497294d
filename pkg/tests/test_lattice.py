import pytest

from isingcoex.lattice import (
    Box,
    Region,
    ball_boundary_size,
    build_region,
    layer_sites,
    lattice_kind,
    neighbors,
    swap_xy,
    tri_3d,
    tri_times_k2,
    tri_times_z,
    vertex_boundary,
    z_star_2d,
)


def test_box_sizes(kind):
    assert len(build_region(kind, Box((0, 0, 0), 0))) == 1
    assert len(build_region(kind, Box((0, 0, 0), 1))) == 27
    assert len(build_region(tri_times_k2(), Box((0, 0, 0), 1))) == 18


def test_sites_in_lexicographic_order(b1):
    assert list(b1.sites) == sorted(b1.sites)
    assert b1.id_of((-1, -1, -1)) == 0


def test_degrees():
    assert tri_times_z().degree == 8
    assert tri_3d().degree == 14
    assert z_star_2d().degree == 8


def test_interior_site_has_eight_neighbours(kind):
    region = build_region(kind, Box((0, 0, 0), 2))
    assert len(neighbors(kind, region, (0, 0, 0))) == 8


def test_corner_of_b1(kind, b1):
    # -(1,1,0) from (1,1,1) lands on (0,0,1), which is inside B_1
    got = set(neighbors(kind, b1, (1, 1, 1)))
    assert got == {(0, 1, 1), (1, 0, 1), (1, 1, 0), (0, 0, 1)}


def test_single_site_region_has_no_neighbours(kind):
    r = Region.from_sites(kind, [(3, 4, 5)])
    assert neighbors(kind, r, (3, 4, 5)) == []
    assert vertex_boundary(kind, r) == [(3, 4, 5)]


def test_neighbours_of_missing_site(kind, b1):
    with pytest.raises(KeyError, match="site not in region"):
        neighbors(kind, b1, (5, 5, 5))


def test_vertex_boundary_of_b1(kind, b1):
    vb = vertex_boundary(kind, b1)
    assert len(vb) == 26 and (0, 0, 0) not in vb


def test_vertex_boundary_bruteforce(kind):
    region = build_region(kind, Box((1, -2, 0), 2))
    offsets = kind.offsets
    expected = [s for s in region.sites if any(tuple(a + b for a, b in zip(s, o)) not in region for o in offsets)]
    assert vertex_boundary(kind, region) == expected
    for s in set(region.sites) - set(expected):
        assert len(region.neighbors(s)) == kind.degree


def test_layer_sites(kind, b1):
    assert len(layer_sites(b1, 1)) == 9
    assert layer_sites(b1, 5) == []
    assert len(layer_sites(build_region(kind, Box((0, 0, 0), 2)), (0, 1))) == 50


def test_adjacency_symmetric():
    for k in (tri_times_z(), tri_times_k2(), tri_3d(), z_star_2d()):
        region = build_region(k, Box((0, 0, 0), 2))
        for s in region.sites:
            for y in region.neighbors(s):
                assert s in region.neighbors(y)


def test_translation_invariance(kind):
    n = 2
    r0 = build_region(kind, Box((0, 0, 0), n))
    x = (3, -1, 4)
    rx = build_region(kind, Box(x, n))
    for s in r0.sites:
        shifted = tuple(a + b for a, b in zip(s, x))
        want = sorted(tuple(a + b for a, b in zip(y, x)) for y in r0.neighbors(s))
        assert sorted(rx.neighbors(shifted)) == want


def test_swap_is_automorphism(kind):
    region = build_region(kind, Box((0, 0, 0), 2))
    edges = {(region.sites[i], region.sites[j]) for i, j in region.edges()}
    swapped = {tuple(sorted((swap_xy(a), swap_xy(b)))) for a, b in edges}
    assert swapped == {tuple(sorted(e)) for e in edges}


def test_k2_rejects_third_layer():
    with pytest.raises(ValueError):
        Region.from_sites(tri_times_k2(), [(0, 0, 2)])


def test_custom_tri3d_offsets():
    k = lattice_kind("Tri3D", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert k.degree == 6
    with pytest.raises(ValueError):
        lattice_kind("TriTimesZ", [[1, 0, 0]])
    with pytest.raises(ValueError):
        lattice_kind("Hexagonal")


def test_ball_boundary_size(kind):
    assert ball_boundary_size(kind, 0) == 1
    assert ball_boundary_size(kind, 1) == 26
    assert ball_boundary_size(kind, 2) == 125 - 27


def test_duplicate_and_empty_regions(kind):
    with pytest.raises(ValueError):
        Region.from_sites(kind, [(0, 0, 0), (0, 0, 0)])
    with pytest.raises(ValueError):
        Region.from_sites(kind, [])
    with pytest.raises(ValueError):
        Box((0, 0, 0), -1)
