import numpy as np
import pytest

from fklab.lattice import Family, Lattice


def make_path_lattice(n_vertices: int) -> Lattice:
    """A bare path graph (test oracle for closed-form single/few-edge sums)."""
    coords = np.array([(i, 0) for i in range(n_vertices)], dtype=np.int64)
    edges = np.array([(i, i + 1) for i in range(n_vertices - 1)], dtype=np.int32)
    steps = np.array([(1, 0)] * (n_vertices - 1), dtype=np.int8)
    return Lattice(
        family=Family.SQUARE_BOX,
        size=n_vertices,
        coords=coords,
        edges=edges.reshape(n_vertices - 1, 2),
        edge_steps=steps.reshape(n_vertices - 1, 2),
        boundary=np.array([0, n_vertices - 1], dtype=np.int64),
        embedding=np.eye(2),
    )


def dfs_component_count(lattice, bits, wired_classes=()):
    """Independent component counter (recursion-free DFS), oracle for k."""
    nv = lattice.n_vertices
    adj = [[] for _ in range(nv)]
    for e in range(lattice.n_edges):
        if bits[e]:
            v1, v2 = int(lattice.edges[e, 0]), int(lattice.edges[e, 1])
            adj[v1].append(v2)
            adj[v2].append(v1)
    alias = {}
    for cl in wired_classes:
        cl = sorted(cl)
        for v in cl[1:]:
            alias[v] = cl[0]
        rep = cl[0]
        for v in cl[1:]:
            adj[rep].append(v)
            adj[v].append(rep)
    seen = [False] * nv
    k = 0
    for s in range(nv):
        if seen[s]:
            continue
        k += 1
        stack = [s]
        seen[s] = True
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return k


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
