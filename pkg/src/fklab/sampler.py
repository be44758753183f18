"""Monte Carlo sampling of random-cluster measures beyond enumeration reach.

Two update kernels, both with the measure as stationary law:

* single-edge heat bath -- edge e is resampled from its exact conditional
  (open with probability p when the endpoints are connected off e in the
  configuration plus wiring, p / (p + (1-p) q) otherwise);
* a Chayes-Machta style cluster move for real q >= 1 -- every cluster of the
  configuration plus wiring is declared active with probability 1/q and all
  edges between active vertices are resampled as independent Bernoulli(p).

Chains are driven by numba kernels with an in-kernel xoshiro256++ stream
seeded from `numpy.random.SeedSequence(seed).spawn(...)`; identical seeds and
parameters reproduce sample streams bit for bit, independent of the thread
count used to run independent chains.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .configuration import (BoundaryCondition, Configuration, ConnectionEvent,
                            cluster_structure)
from .events import AnnulusCircuitEvent, CrossingEvent, DualCrossingEvent
from .exact import Params, base_parent_array
from .lattice import Lattice


@dataclass
class MCEstimate:
    """Mean with batched-means error bar and integrated autocorrelation time."""

    mean: float
    std_error: float
    n_samples: int
    tau_int: float
    seed: int
    n_chains: int = 1
    converged: bool = True
    notes: str = ""

    @property
    def effective_samples(self) -> float:
        return self.n_samples / (2.0 * max(self.tau_int, 0.5))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "tau_int": self.tau_int,
            "seed": self.seed,
            "n_chains": self.n_chains,
            "converged": self.converged,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class UpdateSchedule:
    """Per-sweep move mix: a cluster move and/or a heat-bath edge scan.

    ``hb_every = 0`` disables heat-bath scans entirely; ``hb_every = 1`` runs
    one full scan per sweep.  The default leans on the cluster move, which
    carries the mixing; heat-bath scans cost O(V) connectivity queries per
    edge and pay off only on small graphs.
    """

    cluster: bool = True
    hb_every: int = 0

    def validate(self):
        if not self.cluster and self.hb_every <= 0:
            raise ValueError("schedule performs no updates at all")


HEATBATH_ONLY = UpdateSchedule(cluster=False, hb_every=1)
CLUSTER_ONLY = UpdateSchedule(cluster=True, hb_every=0)
MIXED = UpdateSchedule(cluster=True, hb_every=1)


@dataclass
class ChainState:
    """One Markov chain: configuration, wiring, parameters, RNG state."""

    config: Configuration
    bc: BoundaryCondition
    params: Params
    rng: np.random.Generator
    sweep: int = 0


@dataclass(frozen=True, eq=False)
class EdgeSetObservable:
    """Open fraction over a set of edges (a single edge gives phi(J_e))."""

    edge_ids: tuple
    label: str = "open_fraction"


@dataclass(frozen=True, eq=False)
class PairConnectivity:
    """Connectivity indicators for a list of vertex pairs (wiring included)."""

    pairs: tuple
    label: str = "two_point"


def conditional_open_probability(connected_off: bool, params: Params) -> float:
    p, q = params.p, params.q
    return p if connected_off else p / (p + (1.0 - p) * q)


def _connected_off_edge_py(config: Configuration, bc: BoundaryCondition, e: int) -> bool:
    lat = config.lattice
    i, j = int(lat.edges[e, 0]), int(lat.edges[e, 1])
    bits = config.bits.copy()
    bits[e] = 0
    cs = cluster_structure(Configuration(lat, bits), bc)
    return cs.same(i, j)


def heatbath_edge_update(state: ChainState, e: int, u: float) -> ChainState:
    """Resample edge e from its exact conditional given the rest (uniform u)."""
    if not 0.0 < state.params.p < 1.0:
        raise ValueError("heat-bath update requires 0 < p < 1")
    conn = _connected_off_edge_py(state.config, state.bc, e)
    thr = conditional_open_probability(conn, state.params)
    state.config.bits[e] = 1 if u < thr else 0
    state.sweep += 0
    return state


def cluster_update(state: ChainState, rng: np.random.Generator | None = None) -> ChainState:
    """One cluster move preserving the measure; wired classes ride along as
    ordinary (boundary-frozen) clusters."""
    rng = rng if rng is not None else state.rng
    lat = state.config.lattice
    cs = cluster_structure(state.config, state.bc)
    n_nodes = cs.parent.shape[0]
    active = np.zeros(n_nodes, dtype=bool)
    invq = 1.0 / state.params.q
    for x in range(n_nodes):
        if cs.parent[x] == x:
            active[x] = rng.random() < invq
    e = lat.edges
    for idx in range(lat.n_edges):
        if active[cs.find(int(e[idx, 0]))] and active[cs.find(int(e[idx, 1]))]:
            state.config.bits[idx] = 1 if rng.random() < state.params.p else 0
    state.sweep += 1
    return state


def potts_from_fk(config: Configuration, q_int: int,
                  rng: np.random.Generator,
                  bc: BoundaryCondition | None = None) -> np.ndarray:
    """Color every cluster independently and uniformly in {1..q_int}."""
    if int(q_int) != q_int or q_int < 2:
        raise ValueError("Potts coupling requires an integer q >= 2")
    bc = bc if bc is not None else BoundaryCondition.free()
    cs = cluster_structure(config, bc)
    nv = config.lattice.n_vertices
    root_color: dict[int, int] = {}
    colors = np.empty(nv, dtype=np.int64)
    for v in range(nv):
        r = cs.find(v)
        c = root_color.get(r)
        if c is None:
            c = int(rng.integers(1, q_int + 1))
            root_color[r] = c
        colors[v] = c
    return colors


# ---------------------------------------------------------------------------
# kernel plumbing


def _chain_arrays(lattice: Lattice, bc: BoundaryCondition):
    base = base_parent_array(lattice, bc)
    n_nodes = base.shape[0]
    e_i = np.ascontiguousarray(lattice.edges[:, 0].astype(np.int32))
    e_j = np.ascontiguousarray(lattice.edges[:, 1].astype(np.int32))
    entries: list[list] = [[] for _ in range(n_nodes)]
    for e in range(lattice.n_edges):
        i, j = int(e_i[e]), int(e_j[e])
        entries[i].append((e, j))
        entries[j].append((e, i))
    nv = lattice.n_vertices
    for ci, cl in enumerate(bc.wired_classes):
        for v in cl:
            entries[v].append((-1, nv + ci))
            entries[nv + ci].append((-1, v))
    adj_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    for x in range(n_nodes):
        adj_ptr[x + 1] = adj_ptr[x] + len(entries[x])
    adj_edge = np.empty(adj_ptr[-1], dtype=np.int64)
    adj_other = np.empty(adj_ptr[-1], dtype=np.int32)
    pos = 0
    for x in range(n_nodes):
        for e, y in entries[x]:
            adj_edge[pos] = e
            adj_other[pos] = y
            pos += 1
    return e_i, e_j, n_nodes, base, adj_ptr, adj_edge, adj_other


_EMPTY_I64 = np.empty(0, dtype=np.int64)
_EMPTY_I32 = np.empty(0, dtype=np.int32)
_EMPTY_U8 = np.empty(0, dtype=np.uint8)
_EMPTY_U8_2 = np.empty((0, 0), dtype=np.uint8)
_EMPTY_F64 = np.empty(0, dtype=np.float64)


@dataclass
class _Plan:
    mode: int
    bit_idx: np.ndarray = field(default_factory=lambda: _EMPTY_I64)
    invert: int = 0
    se_i: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    se_j: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    sub_nv: int = 0
    srcs: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    tgts: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    pair_a: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    pair_b: np.ndarray = field(default_factory=lambda: _EMPTY_I32)
    obs_edges: np.ndarray = field(default_factory=lambda: _EMPTY_I64)
    record_stride: int = 0
    evaluate: object = None  # python fallback on recorded states (mode 4)


def _connection_plan(lattice: Lattice, event) -> _Plan:
    if isinstance(event, ConnectionEvent):
        ids: dict[int, int] = {}
        for e in event.edge_ids:
            for v in (int(lattice.edges[e, 0]), int(lattice.edges[e, 1])):
                ids.setdefault(v, len(ids))
        for v in (*event.sources, *event.targets):
            ids.setdefault(int(v), len(ids))
        return _Plan(
            mode=1,
            bit_idx=np.asarray(event.edge_ids, np.int64),
            invert=0,
            se_i=np.array([ids[int(lattice.edges[e, 0])] for e in event.edge_ids], np.int32),
            se_j=np.array([ids[int(lattice.edges[e, 1])] for e in event.edge_ids], np.int32),
            sub_nv=len(ids),
            srcs=np.array([ids[int(v)] for v in event.sources], np.int32),
            tgts=np.array([ids[int(v)] for v in event.targets], np.int32),
        )
    bit_idx, invert, se_i, se_j, nv, srcs, tgts = event.connection_problem(lattice)
    return _Plan(mode=1, bit_idx=np.asarray(bit_idx, np.int64), invert=int(invert),
                 se_i=se_i, se_j=se_j, sub_nv=int(nv), srcs=srcs, tgts=tgts)


def _observable_plan(lattice: Lattice, observable, thin: int) -> _Plan:
    if isinstance(observable, (CrossingEvent, DualCrossingEvent, ConnectionEvent)):
        return _connection_plan(lattice, observable)
    if isinstance(observable, PairConnectivity):
        pa = np.array([int(a) for a, _ in observable.pairs], np.int32)
        pb = np.array([int(b) for _, b in observable.pairs], np.int32)
        return _Plan(mode=2, pair_a=pa, pair_b=pb)
    if isinstance(observable, EdgeSetObservable):
        return _Plan(mode=3, obs_edges=np.asarray(observable.edge_ids, np.int64))
    if isinstance(observable, AnnulusCircuitEvent):
        return _Plan(mode=4, record_stride=max(thin, 1),
                     evaluate=lambda cfg: 1.0 if observable.holds(cfg) else 0.0)
    if callable(observable):
        return _Plan(mode=4, record_stride=max(thin, 1),
                     evaluate=lambda cfg: float(observable(cfg)))
    raise TypeError(f"cannot sample observable of type {type(observable)!r}")


def _rng_state(seed_seq: np.random.SeedSequence) -> np.ndarray:
    s = seed_seq.generate_state(4, dtype=np.uint64)
    if not s.any():
        s[0] = np.uint64(0x9E3779B97F4A7C15)
    return s


def _drive(lattice, bc_arrays, params, schedule, state, rng, sweep0, n_sweeps,
           plan: _Plan, collect: bool):
    """Run n_sweeps; return recorded series (or None) and new sweep counter."""
    e_i, e_j, n_nodes, base, adj_ptr, adj_edge, adj_other = bc_arrays
    p, q = params.p, params.q
    pq = p / (p + (1.0 - p) * q)
    mode = plan.mode if collect else 0
    out_ind = _EMPTY_U8
    out_pairs = _EMPTY_U8_2
    out_frac = _EMPTY_F64
    out_states = _EMPTY_U8_2
    if mode == 1:
        out_ind = np.zeros(n_sweeps, np.uint8)
    elif mode == 2:
        out_pairs = np.zeros((n_sweeps, plan.pair_a.shape[0]), np.uint8)
    elif mode == 3:
        out_frac = np.zeros(n_sweeps, np.float64)
    elif mode == 4:
        out_states = np.zeros((n_sweeps // plan.record_stride + 1, lattice.n_edges), np.uint8)
    rec = _kernels.drive_chain(
        state, e_i, e_j, n_nodes, base, adj_ptr, adj_edge, adj_other,
        p, pq, 1.0 / q, np.uint8(schedule.cluster), schedule.hb_every,
        sweep0, n_sweeps, rng,
        mode, plan.bit_idx, np.uint8(plan.invert), plan.se_i, plan.se_j,
        max(plan.sub_nv, 1), plan.srcs, plan.tgts,
        plan.pair_a, plan.pair_b, plan.obs_edges,
        max(plan.record_stride, 1), out_ind, out_pairs, out_frac, out_states,
    )
    if mode == 0:
        series = None
    elif mode == 1:
        series = out_ind.astype(np.float64)
    elif mode == 2:
        series = out_pairs
    elif mode == 3:
        series = out_frac
    else:
        series = np.array(
            [plan.evaluate(Configuration(lattice, row)) for row in out_states[:rec]],
            dtype=np.float64,
        )
    return series, sweep0 + n_sweeps


def batched_stats(series: np.ndarray) -> tuple[float, float, float, bool]:
    """(mean, std_error, tau_int, converged) by the batched-means method."""
    n = len(series)
    if n == 0:
        return math.nan, math.nan, math.nan, False
    mean = float(np.mean(series))
    if n < 8:
        return mean, float("nan"), 0.5, False
    s2 = float(np.var(series, ddof=1))
    if s2 == 0.0:
        return mean, 0.0, 0.5, True
    nb = int(math.sqrt(n))
    bsize = n // nb
    bm = series[: nb * bsize].reshape(nb, bsize).mean(axis=1)
    var_bm = float(np.var(bm, ddof=1))
    std_error = math.sqrt(var_bm / nb)
    tau = max(0.5, bsize * var_bm / (2.0 * s2))
    return mean, std_error, tau, nb >= 8 and np.isfinite(var_bm)


def merge_estimates(parts: list[MCEstimate]) -> MCEstimate:
    """Weighted, order-deterministic merge of independent-chain estimates."""
    n = sum(p.n_samples for p in parts)
    mean = math.fsum(p.mean * p.n_samples for p in parts) / n
    se = math.sqrt(math.fsum((p.n_samples / n) ** 2 * p.std_error**2 for p in parts))
    tau = math.fsum(p.tau_int * p.n_samples for p in parts) / n
    return MCEstimate(
        mean=mean, std_error=se, n_samples=n, tau_int=tau,
        seed=parts[0].seed, n_chains=len(parts),
        converged=all(p.converged for p in parts),
        notes="; ".join(p.notes for p in parts if p.notes),
    )


_MIN_BURN = 1000


def _run_one_chain(lattice, bc, params, observable, n_sweeps, burn_in, seed,
                   chain_ss, schedule, thin, max_seconds, start_time):
    bc_arrays = _chain_arrays(lattice, bc)
    plan = _observable_plan(lattice, observable, thin)
    rng = _rng_state(chain_ss)
    state = np.zeros(lattice.n_edges, dtype=np.uint8)
    sweep = 0
    notes = []
    if burn_in is None:
        # adaptive: short pilot estimates tau, burn to 10 tau (>= 1000 sweeps)
        _, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng,
                          sweep, _MIN_BURN, plan, collect=False)
        pilot_n = max(512, min(2048, n_sweeps // 8))
        pilot, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng,
                              sweep, pilot_n, plan, collect=plan.mode != 4)
        if pilot is not None and plan.mode != 2:
            _, _, tau_p, _ = batched_stats(np.asarray(pilot, np.float64))
        else:
            tau_p = 1.0
        target = max(_MIN_BURN, int(math.ceil(10.0 * tau_p)))
        if target > sweep:
            _, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng,
                              sweep, target - sweep, plan, collect=False)
    elif burn_in > 0:
        _, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng,
                          sweep, burn_in, plan, collect=False)

    chunks = []
    done = 0
    chunk = 8192
    while done < n_sweeps:
        step = min(chunk, n_sweeps - done)
        series, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng,
                               sweep, step, plan, collect=True)
        chunks.append(series)
        done += step
        if max_seconds is not None and time.monotonic() - start_time > max_seconds:
            notes.append(f"wall-time cap hit after {done}/{n_sweeps} sweeps")
            break
    if plan.mode == 2:
        series = np.concatenate(chunks, axis=0)
    else:
        series = np.concatenate([np.asarray(c, np.float64) for c in chunks])
    return series, notes, Configuration(lattice, state.copy())


def estimate(observable, lattice: Lattice, bc: BoundaryCondition, params: Params,
             n_sweeps: int, burn_in: int | None = None, seed: int = 0,
             chains: int = 4, threads: int = 1,
             schedule: UpdateSchedule = CLUSTER_ONLY, thin: int = 1,
             max_seconds: float | None = None) -> MCEstimate:
    """Monte Carlo estimate of an event probability or scalar observable.

    Deterministic for fixed (seed, parameters, chains): chain c uses the RNG
    stream spawned at index c and results merge in chain order, so the thread
    count never changes the output.
    """
    schedule.validate()
    if n_sweeps <= 0:
        raise ValueError("n_sweeps must be positive")
    if burn_in is not None and burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    bc.validate(lattice)
    start = time.monotonic()
    spawns = np.random.SeedSequence(seed).spawn(chains)
    per = max(1, n_sweeps // chains)

    def work(i):
        return _run_one_chain(lattice, bc, params, observable, per, burn_in,
                              seed, spawns[i], schedule, thin, max_seconds, start)

    if isinstance(observable, PairConnectivity):
        raise TypeError("use estimate_pairs for PairConnectivity observables")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, range(chains)))
    else:
        results = [work(i) for i in range(chains)]

    parts = []
    for series, notes, _ in results:
        m, se, tau, conv = batched_stats(np.asarray(series, np.float64))
        parts.append(MCEstimate(mean=m, std_error=se, n_samples=len(series),
                                tau_int=tau, seed=seed, converged=conv,
                                notes="; ".join(notes)))
    return merge_estimates(parts)


def estimate_pairs(pairs, lattice: Lattice, bc: BoundaryCondition, params: Params,
                   n_sweeps: int, burn_in: int | None = None, seed: int = 0,
                   chains: int = 4, threads: int = 1,
                   schedule: UpdateSchedule = CLUSTER_ONLY,
                   max_seconds: float | None = None) -> list[MCEstimate]:
    """Connectivity estimates for many vertex pairs from one shared run."""
    schedule.validate()
    observable = PairConnectivity(pairs=tuple((int(a), int(b)) for a, b in pairs))
    start = time.monotonic()
    spawns = np.random.SeedSequence(seed).spawn(chains)
    per = max(1, n_sweeps // chains)

    def work(i):
        return _run_one_chain(lattice, bc, params, observable, per, burn_in,
                              seed, spawns[i], schedule, 1, max_seconds, start)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, range(chains)))
    else:
        results = [work(i) for i in range(chains)]

    out = []
    for col in range(len(observable.pairs)):
        parts = []
        for series, notes, _ in results:
            m, se, tau, conv = batched_stats(series[:, col].astype(np.float64))
            parts.append(MCEstimate(mean=m, std_error=se, n_samples=series.shape[0],
                                    tau_int=tau, seed=seed, converged=conv,
                                    notes="; ".join(notes)))
        out.append(merge_estimates(parts))
    return out


def sample_configurations(lattice: Lattice, bc: BoundaryCondition, params: Params,
                          n_samples: int, thin: int = 8, burn_in: int = 2000,
                          schedule: UpdateSchedule = CLUSTER_ONLY,
                          seed: int = 0) -> np.ndarray:
    """Record thinned raw configurations as integer bit masks (E <= 63)."""
    if lattice.n_edges > 63:
        raise ValueError("configuration indices fit 63 edges at most")
    schedule.validate()
    bc_arrays = _chain_arrays(lattice, bc)
    rng = _rng_state(np.random.SeedSequence(seed).spawn(1)[0])
    state = np.zeros(lattice.n_edges, dtype=np.uint8)
    plan = _Plan(mode=4, record_stride=thin, evaluate=None)
    sweep = 0
    _, sweep = _drive(lattice, bc_arrays, params, schedule, state, rng, sweep,
                      burn_in, plan, collect=False)
    weights = (np.uint64(1) << np.arange(lattice.n_edges, dtype=np.uint64))
    out = np.empty(n_samples, dtype=np.uint64)
    got = 0
    e_i, e_j, n_nodes, base, adj_ptr, adj_edge, adj_other = bc_arrays
    p, q = params.p, params.q
    pq = p / (p + (1.0 - p) * q)
    while got < n_samples:
        want = min(n_samples - got, 65536)
        out_states = np.zeros((want, lattice.n_edges), np.uint8)
        rec = _kernels.drive_chain(
            state, e_i, e_j, n_nodes, base, adj_ptr, adj_edge, adj_other,
            p, pq, 1.0 / q, np.uint8(schedule.cluster), schedule.hb_every,
            sweep, want * thin, rng,
            4, _EMPTY_I64, np.uint8(0), _EMPTY_I32, _EMPTY_I32, 1,
            _EMPTY_I32, _EMPTY_I32, _EMPTY_I32, _EMPTY_I32, _EMPTY_I64,
            thin, _EMPTY_U8, _EMPTY_U8_2, _EMPTY_F64, out_states,
        )
        sweep += want * thin
        take = min(rec, n_samples - got)
        out[got: got + take] = (out_states[:take].astype(np.uint64) * weights).sum(axis=1)
        got += take
    return out
