"""Finite 2D lattices, their boundaries, and planar dual graphs.

Geometry conventions
--------------------
The square lattice is the plane square lattice rotated by 45 degrees (mesh 1).
Graphs are stored combinatorially; each family carries its own integer
coordinate frame in ``coords``, used by `rectangle_vertices` and the crossing
events:

* ``SQUARE_BOX``  -- the n x n nearest-neighbour grid in lattice-basis
  coordinates (a, b).  Physically a lozenge; boundary conditions live here.
* ``SQUARE_TORUS`` -- the m x m periodic wrap.  Coordinates are the rotated
  frame (u, v) = (a - b, a + b), canonicalized into [0, 2m) x [0, m).  In this
  frame the dual torus occupies the odd sublattice of the same domain and
  axis-aligned rectangles are exactly self-dual, which is what makes square
  crossings and their dual crossings complementary configuration by
  configuration.
* ``TRIANGULAR`` / ``TRIANGULAR_TORUS`` -- lozenge coordinates in the basis
  (e1, e2) with neighbour steps +-e1, +-e2, +-(e1 - e2).
* ``HEXAGONAL`` -- built as the planar dual of a triangular lozenge (one dual
  vertex per triangular face plus one for the outer face).  Coordinates are
  face centroids scaled by 3 to stay integral.

Edges are indexed in construction order (vertex-major, direction-minor); this
ordering is part of the snapshot format and must not change.
"""

from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_SQRT2 = float(np.sqrt(2.0))
_SQRT3 = float(np.sqrt(3.0))

_token_counter = itertools.count()

HEX_OUTER_COORD = -(3 << 20)  # sentinel coordinate of the outer-face vertex


class Family(str, Enum):
    SQUARE_BOX = "square_box"
    SQUARE_TORUS = "square_torus"
    TRIANGULAR = "triangular"
    HEXAGONAL = "hexagonal"
    TRIANGULAR_TORUS = "triangular_torus"


@dataclass(frozen=True)
class Lattice:
    """An indexed finite graph with a planar embedding.

    ``edges[i] = (v1, v2)`` and ``edge_steps[i]`` is the logical coordinate
    step from v1 to v2 *before* any periodic reduction; an edge lies inside a
    coordinate rectangle iff both endpoints do and the canonical coordinates
    differ by exactly that step (no wrap).
    """

    family: Family
    size: int
    coords: np.ndarray          # (V, 2) int64, logical frame of the family
    edges: np.ndarray           # (E, 2) int32
    edge_steps: np.ndarray      # (E, 2) int8
    boundary: np.ndarray        # vertex ids, sorted
    embedding: np.ndarray       # (2, 2) float64, logical -> plane (mesh 1)
    coord_scale: int = 1        # logical units per lattice unit (3 for hex)
    origin: tuple[int, int] = (0, 0)
    dual_parity: int = 0        # square torus: 0 primal frame, 1 odd sublattice
    token: int = field(default_factory=lambda: next(_token_counter))
    _dual_of: "Lattice | None" = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.coords, self.edges, self.edge_steps, self.boundary):
            arr.setflags(write=False)
        e = self.edges
        if e.size and not (
            (e[:, 0] != e[:, 1]).all()
            and e.min() >= 0
            and e.max() < self.n_vertices
        ):
            raise ValueError("edge list references invalid or equal endpoints")

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def is_torus(self) -> bool:
        return self.family in (Family.SQUARE_TORUS, Family.TRIANGULAR_TORUS)

    def positions(self) -> np.ndarray:
        """Physical plane positions of all vertices (mesh size 1)."""
        return (self.coords / self.coord_scale) @ self.embedding.T

    def descriptor(self) -> dict:
        return {
            "family": self.family.value,
            "size": self.size,
            "vertex_count": self.n_vertices,
            "edge_count": self.n_edges,
        }

    def descriptor_json(self) -> str:
        return json.dumps(self.descriptor())

    def edge_list_csv(self) -> str:
        """Edge list as CSV text with header (edge_index, v1, v2)."""
        buf = io.StringIO()
        buf.write("edge_index,v1,v2\n")
        for i, (v1, v2) in enumerate(self.edges):
            buf.write(f"{i},{v1},{v2}\n")
        return buf.getvalue()

    def vertex_at(self, cu: int, cv: int) -> int:
        """Vertex id with logical coordinates (cu, cv); KeyError if absent."""
        key = self._coord_index()
        return key[(int(cu), int(cv))]

    def _coord_index(self):
        idx = getattr(self, "_coord_lookup", None)
        if idx is None:
            idx = {(int(u), int(v)): i for i, (u, v) in enumerate(self.coords)}
            object.__setattr__(self, "_coord_lookup", idx)
        return idx


@dataclass(frozen=True)
class DualMap:
    """Dual lattice together with the primal-edge -> dual-edge bijection."""

    primal: Lattice
    dual_lattice: Lattice
    edge_bijection: np.ndarray  # (E,) int32

    def __post_init__(self):
        self.edge_bijection.setflags(write=False)
        b = self.edge_bijection
        if len(np.unique(b)) != self.primal.n_edges or b.shape[0] != self.primal.n_edges:
            raise ValueError("edge bijection is not a bijection")


def _check_positive(name, value, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")


def square_box(n: int, origin: tuple[int, int] = (0, 0)) -> Lattice:
    """n x n box of the square lattice, coordinates (a, b) from ``origin``."""
    _check_positive("n", n)
    oa, ob = origin
    coords = np.array(
        [(oa + a, ob + b) for a in range(n) for b in range(n)], dtype=np.int64
    ).reshape(n * n, 2)
    edges, steps = [], []
    for a in range(n):
        for b in range(n):
            i = a * n + b
            if a + 1 < n:
                edges.append((i, (a + 1) * n + b))
                steps.append((1, 0))
            if b + 1 < n:
                edges.append((i, a * n + b + 1))
                steps.append((0, 1))
    if n == 1:
        bnd = np.array([0], dtype=np.int64)
    else:
        bnd = np.array(
            sorted(
                a * n + b
                for a in range(n)
                for b in range(n)
                if a in (0, n - 1) or b in (0, n - 1)
            ),
            dtype=np.int64,
        )
    emb = np.array([[1, -1], [1, 1]], dtype=np.float64) / _SQRT2
    return Lattice(
        family=Family.SQUARE_BOX,
        size=n,
        coords=coords,
        edges=_as_edges(edges),
        edge_steps=_as_steps(steps),
        boundary=bnd,
        embedding=emb,
        origin=(oa, ob),
    )


def _torus_canonical_uv(a: int, b: int, m: int, parity: int) -> tuple[int, int]:
    """Canonical rotated-frame coordinates in [0, 2m) x [0, m)."""
    u = a - b + parity
    v = a + b
    if v >= m:
        v -= m
        u += m
    return u % (2 * m), v


def square_torus(m: int, dual_parity: int = 0) -> Lattice:
    """m x m torus of the square lattice: m^2 vertices, 2 m^2 edges.

    ``dual_parity=1`` labels the odd (dual) sublattice of the rotated frame;
    the graph is identical up to relabelled coordinates.
    """
    _check_positive("m", m, minimum=2)
    coords = np.empty((m * m, 2), dtype=np.int64)
    for a in range(m):
        for b in range(m):
            coords[a * m + b] = _torus_canonical_uv(a, b, m, dual_parity)
    edges, steps = [], []
    for a in range(m):
        for b in range(m):
            i = a * m + b
            edges.append((i, ((a + 1) % m) * m + b))
            steps.append((1, 1))     # +e1 in (u, v)
            edges.append((i, a * m + (b + 1) % m))
            steps.append((-1, 1))    # +e2 in (u, v)
    emb = np.eye(2) / _SQRT2
    return Lattice(
        family=Family.SQUARE_TORUS,
        size=m,
        coords=coords,
        edges=_as_edges(edges),
        edge_steps=_as_steps(steps),
        boundary=np.empty(0, dtype=np.int64),
        embedding=emb,
        dual_parity=dual_parity,
    )


def triangular(n: int, origin: tuple[int, int] = (0, 0)) -> Lattice:
    """n x n triangular lozenge, lattice-basis coordinates (a, b)."""
    _check_positive("n", n)
    oa, ob = origin
    coords = np.array(
        [(oa + a, ob + b) for a in range(n) for b in range(n)], dtype=np.int64
    ).reshape(n * n, 2)
    edges, steps = [], []
    for a in range(n):
        for b in range(n):
            i = a * n + b
            if a + 1 < n:
                edges.append((i, (a + 1) * n + b))
                steps.append((1, 0))
            if b + 1 < n:
                edges.append((i, a * n + b + 1))
                steps.append((0, 1))
            if a + 1 < n and b - 1 >= 0:
                edges.append((i, (a + 1) * n + b - 1))
                steps.append((1, -1))
    if n == 1:
        bnd = np.array([0], dtype=np.int64)
    else:
        bnd = np.array(
            sorted(
                a * n + b
                for a in range(n)
                for b in range(n)
                if a in (0, n - 1) or b in (0, n - 1)
            ),
            dtype=np.int64,
        )
    emb = np.array([[_SQRT3 / 2, 0.0], [0.5, 1.0]], dtype=np.float64)
    return Lattice(
        family=Family.TRIANGULAR,
        size=n,
        coords=coords,
        edges=_as_edges(edges),
        edge_steps=_as_steps(steps),
        boundary=bnd,
        embedding=emb,
        origin=(oa, ob),
    )


def triangular_torus(m: int) -> Lattice:
    """m x m triangular torus: m^2 vertices, 3 m^2 edges."""
    _check_positive("m", m, minimum=2)
    coords = np.array(
        [(a, b) for a in range(m) for b in range(m)], dtype=np.int64
    ).reshape(m * m, 2)
    edges, steps = [], []
    for a in range(m):
        for b in range(m):
            i = a * m + b
            edges.append((i, ((a + 1) % m) * m + b))
            steps.append((1, 0))
            edges.append((i, a * m + (b + 1) % m))
            steps.append((0, 1))
            edges.append((i, ((a + 1) % m) * m + (b - 1) % m))
            steps.append((1, -1))
    emb = np.array([[_SQRT3 / 2, 0.0], [0.5, 1.0]], dtype=np.float64)
    return Lattice(
        family=Family.TRIANGULAR_TORUS,
        size=m,
        coords=coords,
        edges=_as_edges(edges),
        edge_steps=_as_steps(steps),
        boundary=np.empty(0, dtype=np.int64),
        embedding=emb,
    )


def _as_edges(pairs) -> np.ndarray:
    return np.array(pairs, dtype=np.int32).reshape(len(pairs), 2)


def _as_steps(steps) -> np.ndarray:
    return np.array(steps, dtype=np.int8).reshape(len(steps), 2)


def build_lattice(family, size: int, origin: tuple[int, int] = (0, 0)) -> Lattice:
    """Construct a lattice by family tag.

    Hexagonal lattices are realized as duals of triangular lozenges of the
    same size parameter (one construction, duality for free).
    """
    family = Family(family)
    if family is Family.SQUARE_BOX:
        return square_box(size, origin)
    if family is Family.SQUARE_TORUS:
        return square_torus(size)
    if family is Family.TRIANGULAR:
        return triangular(size, origin)
    if family is Family.TRIANGULAR_TORUS:
        return triangular_torus(size)
    if family is Family.HEXAGONAL:
        return dual_map(triangular(size)).dual_lattice
    raise ValueError(f"unknown family {family!r}")


def _square_torus_bijection(m: int) -> np.ndarray:
    """Primal edge -> dual edge index map on the torus (parity 0 -> 1).

    The e1-edge at (a, b) is crossed by the dual e2-edge at dual (a, b); the
    e2-edge at (a, b) by the dual e1-edge at dual (a-1, b+1).
    """
    bij = np.empty(2 * m * m, dtype=np.int32)
    for a in range(m):
        for b in range(m):
            i = a * m + b
            bij[2 * i] = 2 * i + 1
            bij[2 * i + 1] = 2 * (((a - 1) % m) * m + (b + 1) % m)
    return bij


def _triangular_dual(lat: Lattice) -> tuple[Lattice, np.ndarray]:
    """Hexagonal dual of a triangular lozenge, outer face included."""
    n = lat.size
    oa, ob = lat.origin
    nc = n - 1  # cells per row
    n_faces = 2 * nc * nc + 1 if n > 1 else 1
    outer = n_faces - 1

    def up(a, b):
        return 2 * (a * nc + b)

    def dn(a, b):
        return 2 * (a * nc + b) + 1

    coords = np.empty((n_faces, 2), dtype=np.int64)
    coords[outer] = (HEX_OUTER_COORD, HEX_OUTER_COORD)
    for a in range(nc):
        for b in range(nc):
            coords[up(a, b)] = (3 * (oa + a) + 1, 3 * (ob + b) + 1)
            coords[dn(a, b)] = (3 * (oa + a) + 2, 3 * (ob + b) + 2)

    dual_edges, dual_steps = [], []
    for (v1, v2), (da, db) in zip(lat.edges, lat.edge_steps):
        a, b = lat.coords[v1] - (oa, ob)
        if (da, db) == (1, 0):      # e1-edge (a,b)-(a+1,b)
            f1 = up(a, b) if b < nc else outer
            f2 = dn(a, b - 1) if b >= 1 else outer
        elif (da, db) == (0, 1):    # e2-edge (a,b)-(a,b+1)
            f1 = up(a, b) if a < nc else outer
            f2 = dn(a - 1, b) if a >= 1 else outer
        else:                       # diagonal (a,b)-(a+1,b-1), cell (a, b-1)
            f1 = up(a, b - 1)
            f2 = dn(a, b - 1)
        dual_edges.append((f1, f2))
        dual_steps.append((coords[f2] - coords[f1]).clip(-127, 127))

    bnd = sorted({v for e in dual_edges for v in e if outer in e}) if dual_edges else [0]
    dual = Lattice(
        family=Family.HEXAGONAL,
        size=n,
        coords=coords,
        edges=_as_edges(dual_edges) if dual_edges else np.empty((0, 2), np.int32),
        edge_steps=_as_steps(dual_steps) if dual_steps else np.empty((0, 2), np.int8),
        boundary=np.array(bnd, dtype=np.int64),
        embedding=lat.embedding.copy(),
        coord_scale=3,
        origin=lat.origin,
        _dual_of=lat,
    )
    return dual, np.arange(lat.n_edges, dtype=np.int32)


def dual_map(lattice: Lattice) -> DualMap:
    """Dual lattice plus explicit edge bijection.

    Supported: SQUARE_TORUS (self-dual up to sublattice parity), TRIANGULAR
    (dual is HEXAGONAL), and HEXAGONAL built by this function (dual returns
    the stored triangular primal).  Applying the map twice composes to the
    identity on edge indices.
    """
    if lattice.family is Family.SQUARE_TORUS:
        m = lattice.size
        fwd = _square_torus_bijection(m)
        if lattice.dual_parity == 0:
            dual = square_torus(m, dual_parity=1)
            return DualMap(lattice, dual, fwd)
        dual = square_torus(m, dual_parity=0)
        return DualMap(lattice, dual, np.argsort(fwd).astype(np.int32))
    if lattice.family is Family.TRIANGULAR:
        dual, bij = _triangular_dual(lattice)
        return DualMap(lattice, dual, bij)
    if lattice.family is Family.HEXAGONAL and lattice._dual_of is not None:
        return DualMap(lattice, lattice._dual_of, np.arange(lattice.n_edges, dtype=np.int32))
    raise NotImplementedError(f"dual_map unsupported for family {lattice.family.value}")


def rectangle_vertices(lattice: Lattice, t: float, x: float, y: float, z: float) -> np.ndarray:
    """Vertex ids with logical coordinates in the half-open box [t,x) x [y,z).

    Empty ranges yield an empty set.  Coordinates are in the lattice's own
    frame (rotated (u, v) on the square torus, lozenge (a, b) elsewhere).
    """
    s = lattice.coord_scale
    c = lattice.coords
    mask = (c[:, 0] >= t * s) & (c[:, 0] < x * s) & (c[:, 1] >= y * s) & (c[:, 1] < z * s)
    return np.nonzero(mask)[0]


def edges_in_rectangle(lattice: Lattice, t: int, x: int, y: int, z: int) -> np.ndarray:
    """Edge ids lying inside the rectangle: both endpoints in the box and the
    canonical coordinates differing by the raw step (wrap-around excluded)."""
    s = lattice.coord_scale
    c = lattice.coords
    inside = (c[:, 0] >= t * s) & (c[:, 0] < x * s) & (c[:, 1] >= y * s) & (c[:, 1] < z * s)
    v1 = lattice.edges[:, 0]
    v2 = lattice.edges[:, 1]
    nowrap = ((c[v2] - c[v1]) == lattice.edge_steps).all(axis=1)
    return np.nonzero(inside[v1] & inside[v2] & nowrap)[0]


def is_connected(lattice: Lattice) -> bool:
    if lattice.n_vertices == 0:
        return True
    adj = [[] for _ in range(lattice.n_vertices)]
    for v1, v2 in lattice.edges:
        adj[v1].append(v2)
        adj[v2].append(v1)
    seen = np.zeros(lattice.n_vertices, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return bool(seen.all())


def face_count(lattice: Lattice) -> int:
    """Number of faces (outer face included) of a planar box lattice."""
    n = lattice.size
    if lattice.family is Family.SQUARE_BOX:
        return (n - 1) * (n - 1) + 1
    if lattice.family is Family.TRIANGULAR:
        return 2 * (n - 1) * (n - 1) + 1
    raise NotImplementedError("face_count is defined for planar boxes only")
