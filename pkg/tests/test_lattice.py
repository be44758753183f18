import json

import numpy as np
import pytest

from fklab.lattice import (Family, build_lattice, dual_map, edges_in_rectangle,
                           face_count, is_connected, rectangle_vertices,
                           square_box, square_torus, triangular,
                           triangular_torus)


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_square_torus_counts(m):
    lat = square_torus(m)
    assert lat.n_vertices == m * m
    assert lat.n_edges == 2 * m * m
    assert is_connected(lat)


def test_square_torus_m3_example():
    lat = square_torus(3)
    assert (lat.n_vertices, lat.n_edges) == (9, 18)


def test_square_box_degenerate():
    lat = square_box(1)
    assert lat.n_vertices == 1
    assert lat.n_edges == 0
    assert list(lat.boundary) == [0]


def test_triangular_lozenge_n2_hand_enumeration():
    # 2x2 lozenge: 4 vertices; nearest-neighbour pairs inside: the four frame
    # edges plus the single (1,-1) diagonal
    lat = triangular(2)
    assert lat.n_vertices == 4
    assert lat.n_edges == 5
    pairs = {frozenset(map(int, e)) for e in lat.edges}
    a = {(0, 0): 0, (1, 0): 2, (0, 1): 1, (1, 1): 3}
    expected = {
        frozenset((a[(0, 0)], a[(1, 0)])),
        frozenset((a[(0, 1)], a[(1, 1)])),
        frozenset((a[(0, 0)], a[(0, 1)])),
        frozenset((a[(1, 0)], a[(1, 1)])),
        frozenset((a[(0, 1)], a[(1, 0)])),
    }
    assert pairs == expected


@pytest.mark.parametrize("m", [2, 3, 4])
def test_triangular_torus_counts(m):
    lat = triangular_torus(m)
    assert lat.n_vertices == m * m
    assert lat.n_edges == 3 * m * m
    assert is_connected(lat)


@pytest.mark.parametrize("family,size", [
    (Family.SQUARE_BOX, 4), (Family.SQUARE_TORUS, 4),
    (Family.TRIANGULAR, 4), (Family.TRIANGULAR_TORUS, 4),
    (Family.HEXAGONAL, 4),
])
def test_every_family_connected_and_valid(family, size):
    lat = build_lattice(family, size)
    assert is_connected(lat)
    assert (lat.edges[:, 0] != lat.edges[:, 1]).all()
    assert lat.edges.min() >= 0 and lat.edges.max() < lat.n_vertices
    # no duplicated (endpoints, step) entry
    seen = set()
    for (v1, v2), (du, dv) in zip(lat.edges, lat.edge_steps):
        key = (int(v1), int(v2), int(du), int(dv))
        assert key not in seen
        seen.add(key)


@pytest.mark.parametrize("size", [0, -2])
def test_build_lattice_rejects_bad_sizes(size):
    with pytest.raises(ValueError):
        build_lattice(Family.SQUARE_BOX, size)


def test_boundary_is_frame_and_linear():
    for n in (2, 3, 5, 9):
        lat = square_box(n)
        # vertices adjacent (in the infinite lattice) to a vertex outside
        frame = {
            i for i, (a, b) in enumerate(lat.coords)
            if a in (0, n - 1) or b in (0, n - 1)
        }
        assert set(map(int, lat.boundary)) == frame
        assert len(lat.boundary) <= 4 * n


def test_square_box_n3_boundary_count():
    assert len(square_box(3).boundary) == 8


def test_torus_has_empty_boundary():
    assert square_torus(4).boundary.size == 0


@pytest.mark.parametrize("factory,n", [(square_box, 3), (square_box, 5),
                                       (triangular, 3), (triangular, 4)])
def test_euler_formula_on_planar_boxes(factory, n):
    lat = factory(n)
    assert lat.n_vertices - lat.n_edges + face_count(lat) == 2


def test_torus_canonical_coordinate_domain():
    for m in (2, 3, 5):
        lat = square_torus(m)
        u, v = lat.coords[:, 0], lat.coords[:, 1]
        assert u.min() >= 0 and u.max() < 2 * m
        assert v.min() >= 0 and v.max() < m
        assert (((u + v) % 2) == 0).all()
        dual = dual_map(lat).dual_lattice
        du, dv = dual.coords[:, 0], dual.coords[:, 1]
        assert (((du + dv) % 2) == 1).all()


def test_dual_map_square_torus():
    lat = square_torus(3)
    dm = dual_map(lat)
    assert dm.dual_lattice.family is Family.SQUARE_TORUS
    assert dm.dual_lattice.size == 3
    assert len(dm.edge_bijection) == 18
    assert sorted(dm.edge_bijection) == list(range(18))


@pytest.mark.parametrize("make", [lambda: square_torus(3), lambda: square_torus(4),
                                  lambda: triangular(3)])
def test_dual_map_involution(make):
    lat = make()
    dm = dual_map(lat)
    dm2 = dual_map(dm.dual_lattice)
    composed = dm2.edge_bijection[dm.edge_bijection]
    assert np.array_equal(composed, np.arange(lat.n_edges))


def test_dual_of_triangular_is_hexagonal():
    lat = triangular(4)
    dm = dual_map(lat)
    dual = dm.dual_lattice
    assert dual.family is Family.HEXAGONAL
    assert dual.n_edges == lat.n_edges
    # every interior face vertex borders exactly three edges
    deg = np.zeros(dual.n_vertices, dtype=int)
    for v1, v2 in dual.edges:
        deg[v1] += 1
        deg[v2] += 1
    outer = dual.n_vertices - 1
    assert (deg[:outer] == 3).all()
    assert deg[outer] == 4 * (lat.size - 1)  # boundary edge count of the lozenge


def test_dual_map_unsupported_families():
    with pytest.raises(NotImplementedError):
        dual_map(square_box(3))
    with pytest.raises(NotImplementedError):
        dual_map(triangular_torus(3))


def test_rectangle_vertices_full_box():
    n = 4
    lat = square_box(n)
    assert len(rectangle_vertices(lat, 0, n, 0, n)) == n * n


def test_rectangle_vertices_unit_box():
    lat = square_box(4)
    ids = rectangle_vertices(lat, 0, 1, 0, 1)
    assert [tuple(lat.coords[i]) for i in ids] == [(0, 0)]


def test_rectangle_vertices_empty_range():
    lat = square_box(4)
    assert rectangle_vertices(lat, 2, 2, 0, 4).size == 0


def test_rectangle_vertices_torus_coordinate_scan_oracle():
    lat = square_torus(4)
    got = set(map(int, rectangle_vertices(lat, 0, 2, 0, 3)))
    expected = {
        i for i, (u, v) in enumerate(lat.coords) if 0 <= u < 2 and 0 <= v < 3
    }
    assert got == expected


def test_edges_in_rectangle_excludes_wraps():
    # on the m=2 torus the pair {(0,0),(1,1)} carries a direct and a wrapped
    # edge; only the direct one lies inside [0,2)^2
    lat = square_torus(2)
    ids = edges_in_rectangle(lat, 0, 2, 0, 2)
    assert len(ids) == 1


def test_descriptor_and_csv_export():
    lat = square_torus(3)
    desc = json.loads(lat.descriptor_json())
    assert desc == {"family": "square_torus", "size": 3,
                    "vertex_count": 9, "edge_count": 18}
    csv_text = lat.edge_list_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "edge_index,v1,v2"
    assert len(lines) == 19
    first = lines[1].split(",")
    assert first[0] == "0"


def test_embedding_unit_mesh():
    for lat in (square_box(4), triangular(4)):
        pos = lat.positions()
        for v1, v2 in lat.edges:
            assert np.linalg.norm(pos[v1] - pos[v2]) == pytest.approx(1.0)
    # non-wrapping torus edges have unit length too
    lat = square_torus(4)
    pos = lat.positions()
    for e in edges_in_rectangle(lat, 0, 2 * 4, 0, 4):
        v1, v2 = lat.edges[e]
        assert np.linalg.norm(pos[v1] - pos[v2]) == pytest.approx(1.0)


def test_box_origin_offsets():
    lat = square_box(3, origin=(-1, -1))
    assert tuple(lat.coords.min(axis=0)) == (-1, -1)
    assert tuple(lat.coords.max(axis=0)) == (1, 1)
    assert lat.vertex_at(0, 0) == 4
