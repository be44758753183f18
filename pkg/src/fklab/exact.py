"""Brute-force enumeration oracle over all configurations of small graphs.

Ground-truth engine: partition functions, event probabilities, influences,
Russo derivatives, FKG and boundary-comparison checks.  All sums run in
double precision; per-chunk partial sums are combined with `math.fsum`
(associative, order-insensitive reduction over configuration-index ranges).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .configuration import BoundaryCondition, Configuration, ConnectionEvent
from .errors import DegenerateConditioningError, EnumerationCapExceeded
from .lattice import Lattice

ENUMERATION_CAP = 24
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Params:
    """Edge weight p in [0,1] and cluster weight q >= 1."""

    p: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.q >= 1.0:
            raise ValueError(f"q must be >= 1, got {self.q}")


@dataclass
class ExactResult:
    """Exact quantities for one (lattice, bc, p, q) point, JSON-exportable."""

    lattice: dict
    bc: str
    p: float
    q: float
    Z: float
    probabilities: dict = field(default_factory=dict)
    edge_marginals: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "lattice": self.lattice,
                "bc": self.bc,
                "p": self.p,
                "q": self.q,
                "Z": self.Z,
                "probabilities": self.probabilities,
                "edge_marginals": self.edge_marginals,
            }
        )


_table_cache: dict = {}
_member_cache: dict = {}


def clear_caches():
    _table_cache.clear()
    _member_cache.clear()


def _require_cap(lattice: Lattice, max_edges: int):
    if lattice.n_edges > max_edges:
        raise EnumerationCapExceeded(
            f"{lattice.n_edges} edges exceed the enumeration cap {max_edges}"
        )


def base_parent_array(lattice: Lattice, bc: BoundaryCondition) -> np.ndarray:
    """Union-find seed: vertices plus one virtual node per wired class."""
    bc.validate(lattice)
    nv = lattice.n_vertices
    nc = len(bc.wired_classes)
    parent = np.arange(nv + nc, dtype=np.int32)
    for ci, cl in enumerate(bc.wired_classes):
        for v in cl:
            parent[v] = nv + ci
    return parent


def _o_k_table(lattice: Lattice, bc: BoundaryCondition, max_edges: int):
    key = (lattice.token, bc.signature())
    hit = _table_cache.get(key)
    if hit is not None:
        return hit
    _require_cap(lattice, max_edges)
    E = lattice.n_edges
    n = 1 << E
    base = base_parent_array(lattice, bc)
    n_nodes = base.shape[0]
    e_i = np.ascontiguousarray(lattice.edges[:, 0])
    e_j = np.ascontiguousarray(lattice.edges[:, 1])
    o = np.empty(n, dtype=np.uint8)
    k = np.empty(n, dtype=np.uint8)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        _kernels.enum_o_k(lo, hi, e_i, e_j, n_nodes, base, o[lo:hi], k[lo:hi])
    _table_cache[key] = (o, k)
    return o, k


def _chunk_weights(o, k, params: Params, E: int) -> np.ndarray:
    p, q = params.p, params.q
    of = o.astype(np.float64)
    kf = k.astype(np.float64)
    if 0.0 < p < 1.0:
        return np.exp(of * math.log(p) + (E - of) * math.log1p(-p) + kf * math.log(q))
    if p == 0.0:
        return np.where(o == 0, np.exp(kf * math.log(q)), 0.0)
    return np.where(o == E, np.exp(kf * math.log(q)), 0.0)


def _event_key(event) -> tuple:
    if isinstance(event, ConnectionEvent):
        return ("conn", event.sources, event.targets, event.edge_ids.tobytes())
    key = getattr(event, "cache_key", None)
    if key is not None:
        return key()
    return ("id", id(event))


def event_membership(lattice: Lattice, event, max_edges: int = ENUMERATION_CAP) -> np.ndarray:
    """Boolean membership of every configuration, cached per (lattice, event).

    `event` may be a ConnectionEvent, any object exposing
    ``connection_problem(lattice) -> (bit_idx, invert, se_i, se_j, nv, srcs, tgts)``
    (crossing events do), or a plain callable Configuration -> bool.
    """
    _require_cap(lattice, max_edges)
    key = (lattice.token, _event_key(event))
    hit = _member_cache.get(key)
    if hit is not None:
        return hit
    E = lattice.n_edges
    n = 1 << E
    out = np.empty(n, dtype=np.uint8)
    problem = None
    if isinstance(event, ConnectionEvent):
        ids = {}
        for e in event.edge_ids:
            for v in (int(lattice.edges[e, 0]), int(lattice.edges[e, 1])):
                ids.setdefault(v, len(ids))
        for v in (*event.sources, *event.targets):
            ids.setdefault(int(v), len(ids))
        problem = (
            np.asarray(event.edge_ids, dtype=np.int64),
            0,
            np.array([ids[int(lattice.edges[e, 0])] for e in event.edge_ids], np.int32),
            np.array([ids[int(lattice.edges[e, 1])] for e in event.edge_ids], np.int32),
            len(ids),
            np.array([ids[int(v)] for v in event.sources], np.int32),
            np.array([ids[int(v)] for v in event.targets], np.int32),
        )
    elif hasattr(event, "connection_problem"):
        problem = event.connection_problem(lattice)
    if problem is not None:
        bit_idx, invert, se_i, se_j, nv, srcs, tgts = problem
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            _kernels.enum_connection(
                lo, hi, bit_idx, invert, se_i, se_j, nv, srcs, tgts, out[lo:hi]
            )
    elif callable(event):
        for c in range(n):
            out[c] = 1 if event(Configuration.from_int(lattice, c)) else 0
    else:
        raise TypeError(f"cannot evaluate event of type {type(event)!r}")
    member = out.astype(bool)
    _member_cache[key] = member
    return member


def partition_function(
    lattice: Lattice, bc: BoundaryCondition, params: Params,
    max_edges: int = ENUMERATION_CAP,
) -> float:
    """Z = sum over configurations of p^o (1-p)^c q^k(w, bc)."""
    o, k = _o_k_table(lattice, bc, max_edges)
    E = lattice.n_edges
    parts = []
    for lo in range(0, len(o), _CHUNK):
        hi = min(lo + _CHUNK, len(o))
        parts.append(float(np.sum(_chunk_weights(o[lo:hi], k[lo:hi], params, E))))
    return math.fsum(parts)


def event_probability(
    lattice: Lattice, bc: BoundaryCondition, params: Params, event,
    max_edges: int = ENUMERATION_CAP,
) -> float:
    """phi(event) by full enumeration."""
    o, k = _o_k_table(lattice, bc, max_edges)
    member = event_membership(lattice, event, max_edges)
    E = lattice.n_edges
    z_parts, s_parts = [], []
    for lo in range(0, len(o), _CHUNK):
        hi = min(lo + _CHUNK, len(o))
        w = _chunk_weights(o[lo:hi], k[lo:hi], params, E)
        z_parts.append(float(np.sum(w)))
        s_parts.append(float(np.sum(w[member[lo:hi]])))
    return math.fsum(s_parts) / math.fsum(z_parts)


def edge_marginals(
    lattice: Lattice, bc: BoundaryCondition, params: Params,
    max_edges: int = ENUMERATION_CAP,
) -> np.ndarray:
    """phi(J_e) for every edge."""
    o, k = _o_k_table(lattice, bc, max_edges)
    E = lattice.n_edges
    z_parts = []
    m_parts = [[] for _ in range(E)]
    for lo in range(0, len(o), _CHUNK):
        hi = min(lo + _CHUNK, len(o))
        w = _chunk_weights(o[lo:hi], k[lo:hi], params, E)
        z_parts.append(float(np.sum(w)))
        idx = np.arange(lo, hi, dtype=np.int64)
        for e in range(E):
            m_parts[e].append(float(np.sum(w[(idx >> e) & 1 == 1])))
    Z = math.fsum(z_parts)
    return np.array([math.fsum(m) / Z for m in m_parts])


def _edge_event_sums(lattice, bc, params, member, max_edges):
    """(Z, S_A, S_e[], S_Ae[]) with S_e = sum w J_e, S_Ae = sum w 1_A J_e."""
    o, k = _o_k_table(lattice, bc, max_edges)
    E = lattice.n_edges
    z_parts, a_parts = [], []
    e_parts = [[] for _ in range(E)]
    ae_parts = [[] for _ in range(E)]
    for lo in range(0, len(o), _CHUNK):
        hi = min(lo + _CHUNK, len(o))
        w = _chunk_weights(o[lo:hi], k[lo:hi], params, E)
        mem = member[lo:hi]
        z_parts.append(float(np.sum(w)))
        a_parts.append(float(np.sum(w[mem])))
        idx = np.arange(lo, hi, dtype=np.int64)
        for e in range(E):
            bit = (idx >> e) & 1 == 1
            e_parts[e].append(float(np.sum(w[bit])))
            ae_parts[e].append(float(np.sum(w[bit & mem])))
    Z = math.fsum(z_parts)
    SA = math.fsum(a_parts)
    Se = np.array([math.fsum(x) for x in e_parts])
    SAe = np.array([math.fsum(x) for x in ae_parts])
    return Z, SA, Se, SAe


def edge_influence(
    lattice: Lattice, bc: BoundaryCondition, params: Params, event, e: int,
    max_edges: int = ENUMERATION_CAP,
) -> float:
    """Conditional influence I_A(e) = phi(A | J_e = 1) - phi(A | J_e = 0)."""
    if not 0 <= e < lattice.n_edges:
        raise ValueError(f"edge index {e} out of range")
    member = event_membership(lattice, event, max_edges)
    Z, SA, Se, SAe = _edge_event_sums(lattice, bc, params, member, max_edges)
    if Se[e] == 0.0 or Se[e] == Z:
        raise DegenerateConditioningError(
            f"phi(J_{e}) is exactly {Se[e] / Z:g}; conditioning is degenerate"
        )
    return SAe[e] / Se[e] - (SA - SAe[e]) / (Z - Se[e])


def russo_derivative(
    lattice: Lattice, bc: BoundaryCondition, params: Params, event,
    max_edges: int = ENUMERATION_CAP,
) -> float:
    """d/dp phi(A) = (1/(p(1-p))) sum_e [phi(1_A J_e) - phi(J_e) phi(A)]."""
    if not 0.0 < params.p < 1.0:
        raise ValueError("the derivative formula requires 0 < p < 1")
    member = event_membership(lattice, event, max_edges)
    Z, SA, Se, SAe = _edge_event_sums(lattice, bc, params, member, max_edges)
    pa = SA / Z
    total = math.fsum(SAe[e] / Z - (Se[e] / Z) * pa for e in range(lattice.n_edges))
    return total / (params.p * (1.0 - params.p))


def verify_increasing(lattice: Lattice, event, max_edges: int = ENUMERATION_CAP) -> bool:
    """Exhaustive flip test: opening any edge never leaves the event."""
    member = event_membership(lattice, event, max_edges)
    n = len(member)
    for e in range(lattice.n_edges):
        bit = 1 << e
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            idx = np.arange(lo, hi, dtype=np.int64)
            up = member[idx | bit]
            if np.any(member[lo:hi] & ~up):
                return False
    return True


@dataclass
class FKGReport:
    p_a: float
    p_b: float
    p_ab: float
    margin: float
    satisfied: bool


def check_fkg(
    lattice: Lattice, bc: BoundaryCondition, params: Params, event_a, event_b,
    max_edges: int = ENUMERATION_CAP,
) -> FKGReport:
    """Assert phi(A and B) >= phi(A) phi(B) for increasing A, B."""
    for name, ev in (("A", event_a), ("B", event_b)):
        if not verify_increasing(lattice, ev, max_edges):
            raise ValueError(f"event {name} is not increasing")
    ma = event_membership(lattice, event_a, max_edges)
    mb = event_membership(lattice, event_b, max_edges)
    o, k = _o_k_table(lattice, bc, max_edges)
    E = lattice.n_edges
    z, sa, sb, sab = [], [], [], []
    for lo in range(0, len(o), _CHUNK):
        hi = min(lo + _CHUNK, len(o))
        w = _chunk_weights(o[lo:hi], k[lo:hi], params, E)
        z.append(float(np.sum(w)))
        sa.append(float(np.sum(w[ma[lo:hi]])))
        sb.append(float(np.sum(w[mb[lo:hi]])))
        sab.append(float(np.sum(w[ma[lo:hi] & mb[lo:hi]])))
    Z = math.fsum(z)
    p_a, p_b, p_ab = math.fsum(sa) / Z, math.fsum(sb) / Z, math.fsum(sab) / Z
    margin = p_ab - p_a * p_b
    return FKGReport(p_a=p_a, p_b=p_b, p_ab=p_ab, margin=margin,
                     satisfied=margin >= -1e-12)


@dataclass
class BCComparisonReport:
    p_low: float
    p_high: float
    satisfied: bool


def check_bc_comparison(
    lattice: Lattice, params: Params, event, bc_low: BoundaryCondition,
    bc_high: BoundaryCondition, max_edges: int = ENUMERATION_CAP,
) -> BCComparisonReport:
    """Assert phi^{low}(A) <= phi^{high}(A) for comparable partitions."""
    if not bc_low.refines(bc_high):
        raise ValueError("boundary conditions are not comparable (no refinement)")
    if not verify_increasing(lattice, event, max_edges):
        raise ValueError("event is not increasing")
    p_low = event_probability(lattice, bc_low, params, event, max_edges)
    p_high = event_probability(lattice, bc_high, params, event, max_edges)
    return BCComparisonReport(p_low=p_low, p_high=p_high,
                              satisfied=p_low <= p_high + 1e-12)


def exact_result(
    lattice: Lattice, bc: BoundaryCondition, params: Params,
    events: dict | None = None, with_marginals: bool = False,
    max_edges: int = ENUMERATION_CAP,
) -> ExactResult:
    """Bundle Z, named event probabilities and marginals for export."""
    res = ExactResult(
        lattice=lattice.descriptor(),
        bc=bc.kind.value,
        p=params.p,
        q=params.q,
        Z=partition_function(lattice, bc, params, max_edges),
    )
    for name, ev in (events or {}).items():
        res.probabilities[name] = event_probability(lattice, bc, params, ev, max_edges)
    if with_marginals:
        res.edge_marginals = [float(x) for x in edge_marginals(lattice, bc, params, max_edges)]
    return res
