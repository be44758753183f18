import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dfs_component_count, make_path_lattice
from fklab.configuration import (BCKind, BoundaryCondition, Configuration,
                                 ConnectionEvent, cluster_structure, connected,
                                 dual_configuration, hamming_to_connection,
                                 homology_rank, read_snapshot, write_snapshot)
from fklab.events import connection_event_to_boundary
from fklab.lattice import dual_map, square_box, square_torus


def test_bit_vector_length_is_enforced():
    lat = square_torus(3)
    with pytest.raises(ValueError):
        Configuration(lat, np.zeros(5, dtype=np.uint8))


@given(st.integers(min_value=0, max_value=(1 << 18) - 1))
@settings(max_examples=25, deadline=None)
def test_int_roundtrip(index):
    lat = square_torus(3)
    assert Configuration.from_int(lat, index).to_int() == index


def test_cluster_count_trivial_cases():
    lat = square_torus(3)
    assert cluster_structure(Configuration.empty(lat), BoundaryCondition.free()).k == 9
    assert cluster_structure(Configuration.full(lat), BoundaryCondition.periodic()).k == 1
    box = square_box(4)
    assert cluster_structure(Configuration.full(box), BoundaryCondition.wired(box)).k == 1


def test_cluster_count_wired_3x3_hand_count():
    # 9 vertices, 8 on the boundary: one wired super-cluster plus the interior
    box = square_box(3)
    cs = cluster_structure(Configuration.empty(box), BoundaryCondition.wired(box))
    assert cs.k == 2


@given(st.integers(min_value=0, max_value=(1 << 18) - 1),
       st.integers(min_value=0, max_value=17))
@settings(max_examples=60, deadline=None)
def test_opening_an_edge_changes_k_by_zero_or_minus_one(index, e):
    lat = square_torus(3)
    bc = BoundaryCondition.periodic()
    cfg = Configuration.from_int(lat, index)
    cfg.bits[e] = 0
    k_closed = cluster_structure(cfg, bc).k
    cfg.bits[e] = 1
    k_open = cluster_structure(cfg, bc).k
    assert k_closed - k_open in (0, 1)


def test_bc_ordering_of_cluster_counts(rng):
    box = square_box(4)
    bnd = [int(v) for v in box.boundary]
    mixed = BoundaryCondition.mixed([bnd[:3], bnd[5:8]])
    for _ in range(25):
        bits = (rng.random(box.n_edges) < 0.4).astype(np.uint8)
        cfg = Configuration(box, bits)
        k_wired = cluster_structure(cfg, BoundaryCondition.wired(box)).k
        k_mixed = cluster_structure(cfg, mixed).k
        k_free = cluster_structure(cfg, BoundaryCondition.free()).k
        assert k_wired <= k_mixed <= k_free


def test_bc_validation_errors():
    box = square_box(3)
    interior = [i for i in range(box.n_vertices) if i not in set(map(int, box.boundary))]
    with pytest.raises(ValueError):
        BoundaryCondition.mixed([interior]).validate(box)
    b = [int(v) for v in box.boundary]
    with pytest.raises(ValueError):
        BoundaryCondition.mixed([b[:3], b[2:5]]).validate(box)
    with pytest.raises(ValueError):
        BoundaryCondition.wired(square_torus(3))
    with pytest.raises(ValueError):
        BoundaryCondition.periodic().validate(box)


def test_connected_basics():
    lat = square_torus(3)
    bc = BoundaryCondition.free()
    cfg = Configuration.empty(lat)
    assert connected(cfg, bc, 4, 4)
    assert not connected(cfg, bc, 0, 4)
    box = square_box(3)
    b = BoundaryCondition.wired(box)
    assert connected(Configuration.empty(box), b, int(box.boundary[0]),
                     int(box.boundary[-1]))


def test_dual_configuration_involution_and_complement():
    lat = square_torus(3)
    dm = dual_map(lat)
    dm_back = dual_map(dm.dual_lattice)
    rng = np.random.default_rng(5)
    for _ in range(50):
        cfg = Configuration(lat, (rng.random(18) < 0.5).astype(np.uint8))
        dual = dual_configuration(cfg, dm)
        assert cfg.n_open + dual.n_open == 18
        back = dual_configuration(dual, dm_back)
        assert np.array_equal(back.bits, cfg.bits)
    full = Configuration.full(lat)
    assert dual_configuration(full, dm).n_open == 0


def test_dual_configuration_lattice_mismatch():
    dm = dual_map(square_torus(3))
    other = square_torus(4)
    with pytest.raises(ValueError):
        dual_configuration(Configuration.empty(other), dm)


def test_cluster_count_two_implementations_exhaustive_m3():
    # union-find vs an independent DFS counter, all 2^18 configurations
    lat = square_torus(3)
    from fklab.exact import _o_k_table

    o, k = _o_k_table(lat, BoundaryCondition.periodic(), 24)
    bits = np.zeros(18, dtype=np.uint8)
    for c in range(1 << 18):
        for e in range(18):
            bits[e] = (c >> e) & 1
        assert dfs_component_count(lat, bits) == k[c]


def test_homology_corrected_euler_identity_sampled(rng):
    # k*(w*) = k(w) + o(w) - V + 1 - rank(w) on the torus
    lat = square_torus(3)
    dm = dual_map(lat)
    dm_back = dual_map(dm.dual_lattice)
    bc = BoundaryCondition.periodic()
    for _ in range(300):
        bits = (rng.random(18) < rng.random()).astype(np.uint8)
        cfg = Configuration(lat, bits)
        dual = dual_configuration(cfg, dm)
        k = cluster_structure(cfg, bc).k
        kstar = cluster_structure(dual, bc).k
        o = cfg.n_open
        r = homology_rank(cfg)
        assert kstar == k + o - lat.n_vertices + 1 - r
        assert r + homology_rank(dual) == 2


def test_hamming_zero_when_event_holds():
    lat = square_box(3)
    cfg = Configuration.full(lat)
    ev = connection_event_to_boundary(lat, lat.vertex_at(1, 1))
    assert hamming_to_connection(cfg, ev) == 0


def test_hamming_adjacent_pair_is_one():
    lat = make_path_lattice(2)
    ev = ConnectionEvent(sources=(0,), targets=(1,),
                         edge_ids=np.array([0], dtype=np.int64))
    assert hamming_to_connection(Configuration.empty(lat), ev) == 1


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hamming_to_box_boundary_equals_bfs_distance(n):
    # empty configuration: Hamming distance = graph distance, BFS oracle
    lat = square_box(2 * n + 1, origin=(-n, -n))
    center = lat.vertex_at(0, 0)
    ev = connection_event_to_boundary(lat, center)
    got = hamming_to_connection(Configuration.empty(lat), ev)

    from collections import deque

    adj = [[] for _ in range(lat.n_vertices)]
    for v1, v2 in lat.edges:
        adj[v1].append(int(v2))
        adj[v2].append(int(v1))
    dist = {center: 0}
    dq = deque([center])
    best = None
    targets = set(map(int, lat.boundary))
    while dq:
        v = dq.popleft()
        if v in targets:
            best = dist[v]
            break
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                dq.append(w)
    assert got == best == n


@given(st.integers(min_value=0, max_value=(1 << 12) - 1),
       st.integers(min_value=0, max_value=11))
@settings(max_examples=40, deadline=None)
def test_hamming_monotone_under_opening(index, e):
    lat = square_box(3, origin=(-1, -1))
    ev = connection_event_to_boundary(lat, lat.vertex_at(0, 0))
    cfg = Configuration.from_int(lat, index)
    before = hamming_to_connection(cfg, ev)
    cfg.bits[e] = 1
    after = hamming_to_connection(cfg, ev)
    assert after <= before


def test_hamming_rejects_non_connection_events():
    lat = square_box(3)
    with pytest.raises(NotImplementedError):
        hamming_to_connection(Configuration.empty(lat), lambda cfg: True)


def test_snapshot_roundtrip_and_header():
    lat = square_torus(4)
    rng = np.random.default_rng(11)
    cfg = Configuration(lat, (rng.random(32) < 0.37).astype(np.uint8))
    buf = io.BytesIO()
    write_snapshot(cfg, buf, seed=123456789)
    raw = buf.getvalue()
    assert raw.startswith(b"FKCFG1")
    buf.seek(0)
    back, seed = read_snapshot(buf)
    assert seed == 123456789
    assert back.lattice.family == lat.family and back.lattice.size == lat.size
    assert np.array_equal(back.bits, cfg.bits)
    # supplying the lattice skips reconstruction
    buf.seek(0)
    back2, _ = read_snapshot(buf, lattice=lat)
    assert np.array_equal(back2.bits, cfg.bits)


def test_snapshot_bit_packing_is_little_endian():
    lat = make_path_lattice(9)  # 8 edges -> exactly one payload byte
    bits = np.array([1, 0, 1, 0, 0, 0, 0, 1], dtype=np.uint8)
    buf = io.BytesIO()
    write_snapshot(Configuration(lat, bits), buf)
    assert buf.getvalue()[-1] == 0b10000101


def test_snapshot_bad_magic():
    with pytest.raises(ValueError):
        read_snapshot(io.BytesIO(b"NOTFKC" + b"\x00" * 32))
