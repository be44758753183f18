"""Deterministic event detectors and path extractors over configurations.

Rectangles are half-open coordinate boxes in the lattice's own frame (the
rotated (u, v) frame on the square torus, lozenge (a, b) coordinates on
boxes).  Sides of a rectangle are its boundary coordinate rows/columns, and
crossings must stay inside the rectangle; wrap-around edges never count as
inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configuration import (BoundaryCondition, Configuration, ConnectionEvent,
                            connected, dual_configuration)
from .lattice import (DualMap, Family, Lattice, edges_in_rectangle,
                      rectangle_vertices)


@dataclass(frozen=True)
class RectSpec:
    """Half-open rectangle [x0, x1) x [y0, y1) in lattice coordinates."""

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self}")

    def as_tuple(self):
        return (self.x0, self.x1, self.y0, self.y1)


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus [-a^{n+1}, a^{n+1}]^2 minus [-a^n, a^n]^2 around ``center``.

    Real growth factors map to integer radii by floor; the event couples the
    annulus to the boundary of the box of radius floor(a^{n+2}).
    """

    alpha: float
    n: int
    center: tuple = (0, 0)

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if self.r_out <= self.r_in:
            raise ValueError("degenerate annulus: floor(alpha^(n+1)) <= floor(alpha^n)")

    @property
    def r_in(self) -> int:
        return int(math.floor(self.alpha ** self.n))

    @property
    def r_out(self) -> int:
        return int(math.floor(self.alpha ** (self.n + 1)))

    @property
    def r_box(self) -> int:
        return int(math.floor(self.alpha ** (self.n + 2)))


def _validate_rect(lattice: Lattice, rect: RectSpec, direction: str) -> None:
    if direction not in ("h", "v"):
        raise ValueError(f"direction must be 'h' or 'v', got {direction!r}")
    if lattice.family is Family.SQUARE_TORUS:
        m = lattice.size
        if not (0 <= rect.x0 and rect.x1 <= 2 * m and 0 <= rect.y0 and rect.y1 <= m):
            raise ValueError(
                f"rectangle {rect} outside the canonical torus domain "
                f"[0,{2 * m}) x [0,{m})"
            )
        span = rect.x1 - rect.x0 if direction == "h" else rect.y1 - rect.y0
        period = 2 * m if direction == "h" else m
        if span >= period:
            raise ValueError(
                "rectangle spans the full torus circumference in the crossing "
                "direction; sides are undefined"
            )
    elif lattice.family is Family.TRIANGULAR_TORUS:
        m = lattice.size
        span = rect.x1 - rect.x0 if direction == "h" else rect.y1 - rect.y0
        if span >= m:
            raise ValueError("rectangle spans the full torus circumference")


def crossing_problem(lattice: Lattice, rect: RectSpec, direction: str):
    """Compact connection problem (bit_idx, invert, se_i, se_j, nv, srcs, tgts)
    for the crossing of ``rect``; vertex ids are remapped to the rectangle."""
    _validate_rect(lattice, rect, direction)
    edge_ids = edges_in_rectangle(lattice, *rect.as_tuple())
    verts = rectangle_vertices(lattice, *rect.as_tuple())
    remap = {int(v): i for i, v in enumerate(verts)}
    axis = 0 if direction == "h" else 1
    lo_val = (rect.x0 if direction == "h" else rect.y0) * lattice.coord_scale
    hi_val = ((rect.x1 if direction == "h" else rect.y1) - 1) * lattice.coord_scale
    coords = lattice.coords
    srcs = np.array([remap[int(v)] for v in verts if coords[v, axis] == lo_val],
                    dtype=np.int32)
    tgts = np.array([remap[int(v)] for v in verts if coords[v, axis] == hi_val],
                    dtype=np.int32)
    se_i = np.array([remap[int(lattice.edges[e, 0])] for e in edge_ids], np.int32)
    se_j = np.array([remap[int(lattice.edges[e, 1])] for e in edge_ids], np.int32)
    return (np.asarray(edge_ids, dtype=np.int64), 0, se_i, se_j,
            len(verts), srcs, tgts)


def _solve_connection(bits, problem) -> bool:
    bit_idx, invert, se_i, se_j, nv, srcs, tgts = problem
    parent = list(range(nv))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in range(len(bit_idx)):
        if (int(bits[bit_idx[t]]) ^ invert) == 1:
            ri, rj = find(int(se_i[t])), find(int(se_j[t]))
            if ri != rj:
                parent[ri] = rj
    troots = {find(int(b)) for b in tgts}
    return any(find(int(a)) in troots for a in srcs)


@dataclass(frozen=True, eq=False)
class CrossingEvent:
    """Open crossing of a rectangle ('h': left-right, 'v': bottom-top)."""

    rect: RectSpec
    direction: str = "h"

    def connection_problem(self, lattice: Lattice):
        return crossing_problem(lattice, self.rect, self.direction)

    def cache_key(self):
        return ("crossing", self.rect.as_tuple(), self.direction)

    def holds(self, config: Configuration) -> bool:
        return has_crossing(config, self.rect, self.direction)


@dataclass(frozen=True, eq=False)
class DualCrossingEvent:
    """Dual-open crossing of the dual rectangle, as a primal-configuration event."""

    dmap: DualMap
    rect: RectSpec
    direction: str = "v"

    def connection_problem(self, lattice: Lattice):
        if lattice.token != self.dmap.primal.token:
            raise ValueError("dual crossing prepared for a different lattice")
        dual = self.dmap.dual_lattice
        bit_idx, _, se_i, se_j, nv, srcs, tgts = crossing_problem(
            dual, self.rect, self.direction
        )
        inv_bij = np.argsort(self.dmap.edge_bijection)
        return (inv_bij[bit_idx].astype(np.int64), 1, se_i, se_j, nv, srcs, tgts)

    def cache_key(self):
        return ("dual_crossing", self.dmap.dual_lattice.token,
                self.rect.as_tuple(), self.direction)

    def holds(self, config: Configuration) -> bool:
        return has_dual_crossing(config, self.dmap, self.rect, self.direction)


def has_crossing(config: Configuration, rect: RectSpec, direction: str) -> bool:
    """True iff an open path inside ``rect`` joins its two opposite sides."""
    problem = crossing_problem(config.lattice, rect, direction)
    return _solve_connection(config.bits, problem)


def has_dual_crossing(config: Configuration, dmap: DualMap, rect: RectSpec,
                      direction: str) -> bool:
    """Crossing test on the dual configuration in the same coordinate box."""
    return has_crossing(dual_configuration(config, dmap), rect, direction)


def connection_event_from_crossing(lattice: Lattice, rect: RectSpec,
                                   direction: str) -> ConnectionEvent:
    """The crossing as a source/target connection event (Hamming distances)."""
    bit_idx, _, _, _, _, _, _ = crossing_problem(lattice, rect, direction)
    verts = rectangle_vertices(lattice, *rect.as_tuple())
    axis = 0 if direction == "h" else 1
    lo_val = (rect.x0 if direction == "h" else rect.y0) * lattice.coord_scale
    hi_val = ((rect.x1 if direction == "h" else rect.y1) - 1) * lattice.coord_scale
    coords = lattice.coords
    srcs = tuple(int(v) for v in verts if coords[v, axis] == lo_val)
    tgts = tuple(int(v) for v in verts if coords[v, axis] == hi_val)
    return ConnectionEvent(sources=srcs, targets=tgts, edge_ids=bit_idx,
                           label=f"crossing:{direction}:{rect.as_tuple()}")


def connection_event_to_boundary(lattice: Lattice, vertex: int) -> ConnectionEvent:
    """The event {vertex <-> boundary of the lattice}, unrestricted region."""
    return ConnectionEvent(
        sources=(int(vertex),),
        targets=tuple(int(v) for v in lattice.boundary),
        edge_ids=np.arange(lattice.n_edges, dtype=np.int64),
        label=f"to_boundary:{vertex}",
    )


def two_point(config: Configuration, bc: BoundaryCondition, x: int, y: int) -> bool:
    """True iff x and y are connected in config + wiring."""
    return connected(config, bc, x, y)


def _chebyshev(coords: np.ndarray, center) -> np.ndarray:
    rel = coords - np.asarray(center, dtype=np.int64)
    return np.abs(rel).max(axis=1)


def annulus_circuit_event(config: Configuration, annulus: AnnulusSpec,
                          outer_box_radius: int | None = None) -> bool:
    """The event A_n^alpha: an open circuit surrounding the center inside the
    annulus, connected by an open path to the boundary of the outer box.

    A circuit is detected as an open cluster, restricted to the annulus,
    whose removal disconnects the annulus's inner boundary ring from its
    outer one (separation definition of 'surrounds').
    """
    lat = config.lattice
    if lat.is_torus:
        raise ValueError("annulus circuit events are defined on boxes")
    r_in, r_out = annulus.r_in, annulus.r_out
    r_box = outer_box_radius if outer_box_radius is not None else annulus.r_box
    cheb = _chebyshev(lat.coords, annulus.center)
    if not (cheb >= r_box).any():
        raise ValueError("annulus outer box exceeds the lattice")
    in_ann = (cheb > r_in) & (cheb <= r_out)
    inner_ring = cheb == r_in + 1
    outer_ring = cheb == r_out
    box_ring = np.nonzero(cheb == r_box)[0]

    nv = lat.n_vertices
    parent = list(range(nv))

    def find(p, x):
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    e = lat.edges
    ann_edges = []
    for i in range(lat.n_edges):
        v1, v2 = int(e[i, 0]), int(e[i, 1])
        if in_ann[v1] and in_ann[v2]:
            ann_edges.append(i)
            if config.bits[i]:
                r1, r2 = find(parent, v1), find(parent, v2)
                if r1 != r2:
                    parent[r1] = r2

    # group annulus-restricted open clusters
    clusters: dict[int, list] = {}
    for v in np.nonzero(in_ann)[0]:
        clusters.setdefault(find(parent, int(v)), []).append(int(v))

    rel = lat.coords - np.asarray(annulus.center, dtype=np.int64)
    candidates = []
    for root, members in clusters.items():
        if len(members) < 4:
            continue
        marks = [False, False, False, False]  # E, W, N, S axis rays
        for v in members:
            dx, dy = int(rel[v, 0]), int(rel[v, 1])
            if dy == 0 and dx > 0:
                marks[0] = True
            elif dy == 0 and dx < 0:
                marks[1] = True
            elif dx == 0 and dy > 0:
                marks[2] = True
            elif dx == 0 and dy < 0:
                marks[3] = True
        if all(marks):
            candidates.append((root, set(members)))
    if not candidates:
        return False

    adj: dict[int, list] = {}
    for i in ann_edges:
        v1, v2 = int(e[i, 0]), int(e[i, 1])
        adj.setdefault(v1, []).append(v2)
        adj.setdefault(v2, []).append(v1)

    def separates(cluster: set) -> bool:
        seeds = [int(v) for v in np.nonzero(inner_ring)[0] if int(v) not in cluster]
        if not seeds:
            return True  # the cluster swallows the whole inner ring
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            v = stack.pop()
            if outer_ring[v]:
                return False
            for w in adj.get(v, ()):
                if w not in seen and w not in cluster:
                    seen.add(w)
                    stack.append(w)
        return True

    surrounding = [c for _, c in candidates if separates(c)]
    if not surrounding:
        return False

    # open connection (anywhere in the lattice) from a surrounding cluster to
    # the outer box boundary
    gparent = list(range(nv))
    for i in range(lat.n_edges):
        if config.bits[i]:
            r1 = find(gparent, int(e[i, 0]))
            r2 = find(gparent, int(e[i, 1]))
            if r1 != r2:
                gparent[r1] = r2
    ring_roots = {find(gparent, int(v)) for v in box_ring}
    for cluster in surrounding:
        v0 = next(iter(cluster))
        if find(gparent, v0) in ring_roots:
            return True
    return False


@dataclass(frozen=True, eq=False)
class AnnulusCircuitEvent:
    """A_n^alpha as an event object (sampler slow path)."""

    spec: AnnulusSpec

    def holds(self, config: Configuration) -> bool:
        return annulus_circuit_event(config, self.spec)

    def cache_key(self):
        return ("annulus", self.spec.alpha, self.spec.n, self.spec.center)


def topmost_crossing(config: Configuration, rect: RectSpec):
    """The top-most horizontal crossing of ``rect``, or None.

    Returns a simple open path (vertex ids) from the left side to the right
    side such that no open crossing visits a vertex strictly above it;
    computed by a wall-following walk along the upper open-edge boundary of
    the top crossing cluster, with revisits spliced out.
    """
    lat = config.lattice
    problem = crossing_problem(lat, rect, "h")
    bit_idx, _, se_i, se_j, nv, srcs, tgts = problem
    if len(srcs) == 0 or len(tgts) == 0:
        return None
    verts = rectangle_vertices(lat, *rect.as_tuple())
    if not _solve_connection(config.bits, problem):
        return None

    # open adjacency inside the rect, neighbours sorted by embedding angle
    pos = lat.positions()
    adj: dict[int, list] = {int(v): [] for v in verts}
    parent = {int(v): int(v) for v in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, e in enumerate(bit_idx):
        if config.bits[e]:
            a = int(verts[se_i[t]])
            b = int(verts[se_j[t]])
            ang_ab = math.atan2(pos[b, 1] - pos[a, 1], pos[b, 0] - pos[a, 0])
            adj[a].append((ang_ab, b))
            adj[b].append((math.atan2(pos[a, 1] - pos[b, 1], pos[a, 0] - pos[b, 0]), a))
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    for v in adj:
        adj[v].sort()

    left = [int(verts[i]) for i in srcs]
    right_set = {int(verts[i]) for i in tgts}
    right_roots = {find(v) for v in right_set}
    crossing_left = [v for v in left if find(v) in right_roots]
    if not crossing_left:
        return None
    # highest left entry of the top crossing cluster
    start = max(crossing_left, key=lambda v: (lat.coords[v, 1], -lat.coords[v, 0]))

    # wall follow keeping the empty region above on the left: from arrival
    # direction theta, take the most clockwise open edge after the reversal
    walk = [start]
    cur = start
    theta = -math.pi / 2.0  # pretend we arrived moving downward
    max_steps = 8 * (len(bit_idx) + 1)
    for _ in range(max_steps):
        if cur in right_set:
            break
        best = None
        best_key = None
        for ang, nb in adj[cur]:
            delta = (theta + math.pi - ang) % (2.0 * math.pi)
            if delta == 0.0:
                delta = 2.0 * math.pi  # full reversal is the last resort
            key = delta
            if best_key is None or key < best_key:
                best_key = key
                best = (ang, nb)
        if best is None:
            return None
        theta = best[0]
        cur = best[1]
        walk.append(cur)
    else:
        raise RuntimeError("wall-following walk failed to terminate")

    # splice out revisits, keeping first occurrences
    seen: dict[int, int] = {}
    path: list[int] = []
    for v in walk:
        if v in seen:
            del_from = seen[v] + 1
            for w in path[del_from:]:
                seen.pop(w, None)
            path = path[:del_from]
        else:
            path.append(v)
            seen[v] = len(path) - 1
    return path


def path_is_crossing(lattice: Lattice, config: Configuration, rect: RectSpec,
                     path, direction: str = "h") -> bool:
    """Check a vertex path is an open crossing of the rectangle."""
    if not path:
        return False
    verts = set(int(v) for v in rectangle_vertices(lattice, *rect.as_tuple()))
    if any(int(v) not in verts for v in path):
        return False
    open_pairs = set()
    for e in edges_in_rectangle(lattice, *rect.as_tuple()):
        if config.bits[e]:
            a, b = int(lattice.edges[e, 0]), int(lattice.edges[e, 1])
            open_pairs.add((a, b))
            open_pairs.add((b, a))
    for a, b in zip(path[:-1], path[1:]):
        if (int(a), int(b)) not in open_pairs:
            return False
    axis = 0 if direction == "h" else 1
    lo_val = (rect.x0 if direction == "h" else rect.y0) * lattice.coord_scale
    hi_val = ((rect.x1 if direction == "h" else rect.y1) - 1) * lattice.coord_scale
    return (lattice.coords[path[0], axis] == lo_val
            and lattice.coords[path[-1], axis] == hi_val)
