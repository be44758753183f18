"""Edge configurations, boundary conditions, cluster counting and duality.

A configuration is a bit vector over a lattice's edge index space (1 = open).
Cluster counts k(config, bc) are taken on the graph together with the
boundary wiring: each wired class is represented by one virtual union-find
node pre-merged with its members.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lattice import Family, Lattice, DualMap, build_lattice

SNAPSHOT_MAGIC = b"FKCFG1"
_FAMILY_CODES = {f: i for i, f in enumerate(Family)}
_FAMILY_FROM_CODE = {i: f for f, i in _FAMILY_CODES.items()}


@dataclass
class Configuration:
    """Open/closed edge states over a lattice (uint8 bit per edge)."""

    lattice: Lattice
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.lattice.n_edges,):
            raise ValueError(
                f"bit vector length {self.bits.shape} does not match edge count "
                f"{self.lattice.n_edges}"
            )

    @classmethod
    def empty(cls, lattice: Lattice) -> "Configuration":
        return cls(lattice, np.zeros(lattice.n_edges, dtype=np.uint8))

    @classmethod
    def full(cls, lattice: Lattice) -> "Configuration":
        return cls(lattice, np.ones(lattice.n_edges, dtype=np.uint8))

    @classmethod
    def from_int(cls, lattice: Lattice, index: int) -> "Configuration":
        bits = np.zeros(lattice.n_edges, dtype=np.uint8)
        for e in range(lattice.n_edges):
            bits[e] = (index >> e) & 1
        return cls(lattice, bits)

    def to_int(self) -> int:
        out = 0
        for e in range(self.lattice.n_edges - 1, -1, -1):
            out = (out << 1) | int(self.bits[e])
        return out

    def copy(self) -> "Configuration":
        return Configuration(self.lattice, self.bits.copy())

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    @property
    def n_closed(self) -> int:
        return self.lattice.n_edges - self.n_open


class BCKind(str, Enum):
    FREE = "free"
    WIRED = "wired"
    PERIODIC = "periodic"
    MIXED = "mixed"


@dataclass(frozen=True)
class BoundaryCondition:
    """A partition of the boundary: wired classes are merged in k(w, bc).

    Periodic is a tag only; the wrap-around is encoded in the torus graph.
    """

    kind: BCKind
    wired_classes: tuple[frozenset, ...] = ()

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls(BCKind.FREE)

    @classmethod
    def wired(cls, lattice: Lattice) -> "BoundaryCondition":
        if lattice.boundary.size == 0:
            raise ValueError("wired boundary condition needs a non-empty boundary")
        return cls(BCKind.WIRED, (frozenset(int(v) for v in lattice.boundary),))

    @classmethod
    def periodic(cls) -> "BoundaryCondition":
        return cls(BCKind.PERIODIC)

    @classmethod
    def mixed(cls, classes) -> "BoundaryCondition":
        return cls(BCKind.MIXED, tuple(frozenset(int(v) for v in c) for c in classes))

    def validate(self, lattice: Lattice) -> None:
        bnd = set(int(v) for v in lattice.boundary)
        seen = set()
        for cl in self.wired_classes:
            if not cl <= bnd:
                raise ValueError("wired class references non-boundary vertex")
            if cl & seen:
                raise ValueError("wired classes must be pairwise disjoint")
            seen |= cl
        if self.kind is BCKind.PERIODIC and not lattice.is_torus:
            raise ValueError("periodic boundary condition requires a torus")
        if self.kind is BCKind.FREE and self.wired_classes:
            raise ValueError("free boundary condition carries no wired classes")

    def signature(self) -> tuple:
        return (self.kind.value, tuple(tuple(sorted(c)) for c in self.wired_classes))

    def refines(self, other: "BoundaryCondition") -> bool:
        """True if every pair wired here is also wired in `other`."""
        for cl in self.wired_classes:
            if not any(cl <= oc for oc in other.wired_classes):
                return False
        return True


@dataclass
class ClusterStructure:
    """Union-find over vertices plus one virtual node per wired class."""

    parent: np.ndarray
    n_vertices: int
    n_classes: int
    k: int

    def find(self, x: int) -> int:
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return int(root)

    def same(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)


def _union(parent, rank, a, b):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    while parent[b] != b:
        parent[b] = parent[parent[b]]
        b = parent[b]
    if a == b:
        return False
    if rank[a] < rank[b]:
        a, b = b, a
    parent[b] = a
    if rank[a] == rank[b]:
        rank[a] += 1
    return True


def cluster_structure(config: Configuration, bc: BoundaryCondition) -> ClusterStructure:
    """Union-find of config plus wiring; k is the exact component count."""
    lat = config.lattice
    bc.validate(lat)
    nv = lat.n_vertices
    nc = len(bc.wired_classes)
    parent = np.arange(nv + nc, dtype=np.int64)
    rank = np.zeros(nv + nc, dtype=np.int8)
    for ci, cl in enumerate(bc.wired_classes):
        for v in cl:
            _union(parent, rank, nv + ci, v)
    e = lat.edges
    bits = config.bits
    for i in range(lat.n_edges):
        if bits[i]:
            _union(parent, rank, int(e[i, 0]), int(e[i, 1]))
    # flatten and count roots
    k = 0
    for x in range(nv + nc):
        r = x
        while parent[r] != r:
            r = parent[r]
        if r == x:
            k += 1
        while parent[x] != r:
            parent[x], x = r, parent[x]
    return ClusterStructure(parent=parent, n_vertices=nv, n_classes=nc, k=k)


def connected(config: Configuration, bc: BoundaryCondition, x: int, y: int) -> bool:
    """True iff x and y lie in the same component of config + wiring."""
    if x == y:
        return True
    cs = cluster_structure(config, bc)
    return cs.same(int(x), int(y))


def dual_configuration(config: Configuration, dmap: DualMap) -> Configuration:
    """Dual bond open iff the corresponding primal bond is closed."""
    if config.lattice.token != dmap.primal.token:
        raise ValueError("configuration does not live on the dual map's primal lattice")
    out = np.empty(dmap.dual_lattice.n_edges, dtype=np.uint8)
    out[dmap.edge_bijection] = 1 - config.bits
    return Configuration(dmap.dual_lattice, out)


@dataclass(frozen=True)
class ConnectionEvent:
    """Increasing event {source set <-> target set} within a restricted region.

    ``edge_ids`` are the lattice edges usable by a connecting path (the whole
    edge set for unrestricted connectivity).
    """

    sources: tuple
    targets: tuple
    edge_ids: np.ndarray
    label: str = "connection"

    def __post_init__(self):
        self.edge_ids.setflags(write=False)

    def holds(self, config: Configuration) -> bool:
        return hamming_to_connection(config, self) == 0


def hamming_to_connection(config: Configuration, event) -> int:
    """Minimal number of closed edges to open so the connection event holds.

    Computed as a 0/1-weight shortest path (open edges cost 0, closed cost 1)
    from the source set to the target set, restricted to the event's region.
    Only connection events are supported.
    """
    if not isinstance(event, ConnectionEvent):
        raise NotImplementedError("Hamming distance is defined for connection events only")
    lat = config.lattice
    srcs = set(int(v) for v in event.sources)
    tgts = set(int(v) for v in event.targets)
    if srcs & tgts:
        return 0
    adj: dict[int, list] = {}
    for e in event.edge_ids:
        v1, v2 = int(lat.edges[e, 0]), int(lat.edges[e, 1])
        w = 0 if config.bits[e] else 1
        adj.setdefault(v1, []).append((v2, w))
        adj.setdefault(v2, []).append((v1, w))
    INF = float("inf")
    dist = {v: 0 for v in srcs}
    dq = deque(srcs)
    best = INF
    while dq:
        v = dq.popleft()
        d = dist[v]
        if d >= best:
            continue
        for w, cost in adj.get(v, ()):
            nd = d + cost
            if nd < dist.get(w, INF):
                dist[w] = nd
                if w in tgts:
                    best = min(best, nd)
                if cost == 0:
                    dq.appendleft(w)
                else:
                    dq.append(w)
    if best is INF:
        raise ValueError("connection event cannot occur within its region")
    return int(best)


def homology_rank(config: Configuration) -> int:
    """Number of independent torus directions wound by open clusters (0..2).

    Uses a union-find lifted to the universal cover: each node stores its
    displacement to its parent; re-connecting an already-joined pair with a
    displacement mismatch exhibits a non-contractible cycle.
    """
    lat = config.lattice
    if not lat.is_torus:
        raise ValueError("homology rank is defined on tori")
    nv = lat.n_vertices
    parent = list(range(nv))
    off = [(0, 0)] * nv

    def find(x):
        root, ox, oy = x, 0, 0
        while parent[root] != root:
            ox += off[root][0]
            oy += off[root][1]
            root = parent[root]
        return root, ox, oy

    windings = []
    for e in range(lat.n_edges):
        if not config.bits[e]:
            continue
        i, j = int(lat.edges[e, 0]), int(lat.edges[e, 1])
        du, dv = int(lat.edge_steps[e, 0]), int(lat.edge_steps[e, 1])
        ri, oxi, oyi = find(i)
        rj, oxj, oyj = find(j)
        if ri != rj:
            off[rj] = (oxi + du - oxj, oyi + dv - oyj)
            parent[rj] = ri
        else:
            w = (oxi + du - oxj, oyi + dv - oyj)
            if w != (0, 0):
                windings.append(w)
    if not windings:
        return 0
    for (a1, b1) in windings:
        for (a2, b2) in windings:
            if a1 * b2 - a2 * b1 != 0:
                return 2
    return 1


def write_snapshot(config: Configuration, fileobj, seed: int = 0) -> None:
    """Serialize in the FKCFG1 format: header + little-endian packed bits."""
    lat = config.lattice
    header = SNAPSHOT_MAGIC + struct.pack(
        "<BBIiiIQ",
        _FAMILY_CODES[lat.family],
        lat.dual_parity,
        lat.size,
        lat.origin[0],
        lat.origin[1],
        lat.n_edges,
        seed & 0xFFFFFFFFFFFFFFFF,
    )
    fileobj.write(header)
    fileobj.write(np.packbits(config.bits, bitorder="little").tobytes())


def read_snapshot(fileobj, lattice: Lattice | None = None) -> tuple[Configuration, int]:
    """Read an FKCFG1 snapshot; rebuilds the lattice unless one is supplied."""
    magic = fileobj.read(6)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    fam_code, parity, size, oa, ob, n_edges, seed = struct.unpack(
        "<BBIiiIQ", fileobj.read(struct.calcsize("<BBIiiIQ"))
    )
    family = _FAMILY_FROM_CODE[fam_code]
    if lattice is None:
        if family is Family.SQUARE_TORUS:
            from .lattice import square_torus

            lattice = square_torus(size, dual_parity=parity)
        else:
            lattice = build_lattice(family, size, origin=(oa, ob))
    if lattice.n_edges != n_edges:
        raise ValueError("snapshot edge count does not match lattice")
    raw = np.frombuffer(fileobj.read((n_edges + 7) // 8), dtype=np.uint8)
    bits = np.unpackbits(raw, count=n_edges, bitorder="little")
    return Configuration(lattice, bits.astype(np.uint8)), seed
