"""Hot loops: exhaustive enumeration and Markov-chain sweeps (numba).

The chain kernels draw randomness from an in-kernel xoshiro256++ stream whose
four-word state is seeded from a `numpy.random.SeedSequence` spawn, one stream
per chain; runs are bit-reproducible for a given seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_U64 = np.uint64


@njit(cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True, nogil=True, inline="always")
def rng_next(s):
    out = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


@njit(cache=True, nogil=True, inline="always")
def rng_unit(s):
    return (rng_next(s) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True, inline="always")
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def enum_o_k(lo, hi, e_i, e_j, n_nodes, base_parent, out_o, out_k):
    """Open-edge count and cluster count for configurations [lo, hi).

    Configuration c opens edge e iff bit e of c is set.  ``base_parent``
    carries the boundary wiring (virtual class nodes pre-merged).
    """
    E = e_i.shape[0]
    parent = np.empty(n_nodes, np.int32)
    for c in range(lo, hi):
        for x in range(n_nodes):
            parent[x] = base_parent[x]
        o = 0
        for e in range(E):
            if (c >> e) & 1:
                o += 1
                ri = _find(parent, e_i[e])
                rj = _find(parent, e_j[e])
                if ri != rj:
                    parent[ri] = rj
        k = 0
        for x in range(n_nodes):
            if parent[x] == x:
                k += 1
        out_o[c - lo] = o
        out_k[c - lo] = k


@njit(cache=True, nogil=True)
def enum_connection(lo, hi, bit_idx, invert, se_i, se_j, nv, srcs, tgts, out):
    """Membership of the connection event {srcs <-> tgts} for configs [lo, hi).

    The sub-problem uses its own compact vertex ids; sub-edge t is open iff
    bit ``bit_idx[t]`` of the configuration, xored with ``invert``, is 1
    (invert=1 evaluates the event on the dual configuration).
    """
    parent = np.empty(nv, np.int32)
    T = bit_idx.shape[0]
    for c in range(lo, hi):
        for x in range(nv):
            parent[x] = x
        for t in range(T):
            if (((c >> bit_idx[t]) & 1) ^ invert) == 1:
                ri = _find(parent, se_i[t])
                rj = _find(parent, se_j[t])
                if ri != rj:
                    parent[ri] = rj
        hit = np.uint8(0)
        for a in range(srcs.shape[0]):
            ra = _find(parent, srcs[a])
            for b in range(tgts.shape[0]):
                if ra == _find(parent, tgts[b]):
                    hit = np.uint8(1)
                    break
            if hit:
                break
        out[c - lo] = hit


@njit(cache=True, nogil=True, inline="always")
def _connected_off_edge(state, skip, start, goal, adj_ptr, adj_edge, adj_other,
                        visited, queue, stamp):
    """BFS over open edges (plus always-open wiring pseudo-edges, adj_edge < 0),
    skipping edge ``skip``; True iff ``goal`` is reached from ``start``."""
    if start == goal:
        return True
    head = 0
    tail = 0
    queue[tail] = start
    tail += 1
    visited[start] = stamp
    while head < tail:
        x = queue[head]
        head += 1
        for a in range(adj_ptr[x], adj_ptr[x + 1]):
            e = adj_edge[a]
            if e == skip:
                continue
            if e >= 0 and state[e] == 0:
                continue
            y = adj_other[a]
            if visited[y] == stamp:
                continue
            if y == goal:
                return True
            visited[y] = stamp
            queue[tail] = y
            tail += 1
    return False


@njit(cache=True, nogil=True)
def sweep_core(state, e_i, e_j, n_nodes, base_parent,
               adj_ptr, adj_edge, adj_other,
               p, pq, invq, do_cm, do_hb, rng,
               parent, active, visited, queue, counters):
    """One Markov sweep: optional Chayes-Machta cluster move, then an optional
    systematic heat-bath scan over all edges.

    Cluster move: every cluster of (state + wiring) is declared active with
    probability 1/q; edges with both endpoints in active clusters are
    resampled as independent Bernoulli(p).  Heat-bath: edge e is opened with
    probability p if its endpoints are connected off e (in state + wiring),
    with probability p / (p + (1-p) q) otherwise.
    """
    E = state.shape[0]
    if do_cm:
        for x in range(n_nodes):
            parent[x] = base_parent[x]
        for e in range(E):
            if state[e]:
                ri = _find(parent, e_i[e])
                rj = _find(parent, e_j[e])
                if ri != rj:
                    parent[ri] = rj
        for x in range(n_nodes):
            if parent[x] == x:
                active[x] = np.uint8(1) if rng_unit(rng) < invq else np.uint8(0)
        for e in range(E):
            if active[_find(parent, e_i[e])] and active[_find(parent, e_j[e])]:
                state[e] = np.uint8(1) if rng_unit(rng) < p else np.uint8(0)
    if do_hb:
        for e in range(E):
            counters[0] += 1
            conn = _connected_off_edge(state, e, e_i[e], e_j[e],
                                       adj_ptr, adj_edge, adj_other,
                                       visited, queue, counters[0])
            thr = p if conn else pq
            state[e] = np.uint8(1) if rng_unit(rng) < thr else np.uint8(0)


@njit(cache=True, nogil=True)
def drive_chain(state, e_i, e_j, n_nodes, base_parent,
                adj_ptr, adj_edge, adj_other,
                p, pq, invq, use_cm, hb_every, sweep0, n_sweeps, rng,
                mode, bit_idx, invert, se_i, se_j, sub_nv, srcs, tgts,
                pair_a, pair_b,
                obs_edges, record_stride, out_ind, out_pairs, out_frac, out_states):
    """Run ``n_sweeps`` sweeps recording an observable per sweep.

    mode 0: no recording (burn-in);
    mode 1: connection indicator (sub-problem arrays; invert=1 for dual events);
    mode 2: per-pair connectivity over the full open graph -> out_pairs;
    mode 3: open fraction over ``obs_edges`` -> out_frac;
    mode 4: raw edge states every ``record_stride`` sweeps -> out_states.
    """
    E = state.shape[0]
    parent = np.empty(n_nodes, np.int32)
    active = np.empty(n_nodes, np.uint8)
    visited = np.zeros(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int32)
    counters = np.zeros(1, np.int64)
    sub_parent = np.empty(max(sub_nv, 1), np.int32)
    rec = 0
    for t in range(n_sweeps):
        gs = sweep0 + t
        do_hb = hb_every > 0 and gs % hb_every == 0
        sweep_core(state, e_i, e_j, n_nodes, base_parent,
                   adj_ptr, adj_edge, adj_other,
                   p, pq, invq, use_cm, do_hb, rng,
                   parent, active, visited, queue, counters)
        if mode == 1:
            for x in range(sub_nv):
                sub_parent[x] = x
            for s in range(bit_idx.shape[0]):
                if (state[bit_idx[s]] ^ invert) == 1:
                    ri = _find(sub_parent, se_i[s])
                    rj = _find(sub_parent, se_j[s])
                    if ri != rj:
                        sub_parent[ri] = rj
            hit = np.uint8(0)
            for a in range(srcs.shape[0]):
                ra = _find(sub_parent, srcs[a])
                for b in range(tgts.shape[0]):
                    if ra == _find(sub_parent, tgts[b]):
                        hit = np.uint8(1)
                        break
                if hit:
                    break
            out_ind[t] = hit
        elif mode == 2:
            for x in range(n_nodes):
                parent[x] = base_parent[x]
            for e in range(E):
                if state[e]:
                    ri = _find(parent, e_i[e])
                    rj = _find(parent, e_j[e])
                    if ri != rj:
                        parent[ri] = rj
            for pp in range(pair_a.shape[0]):
                out_pairs[t, pp] = np.uint8(
                    _find(parent, pair_a[pp]) == _find(parent, pair_b[pp])
                )
        elif mode == 3:
            tot = 0.0
            for s in range(obs_edges.shape[0]):
                tot += state[obs_edges[s]]
            out_frac[t] = tot / obs_edges.shape[0]
        elif mode == 4:
            if (gs + 1) % record_stride == 0 and rec < out_states.shape[0]:
                for e in range(E):
                    out_states[rec, e] = state[e]
                rec += 1
    return rec
