"""Command-line interface.

Subcommands: enumerate, sample, crossing, scan, circuits, decay, critical,
star-triangle.  With ``--out PATH`` the delimited per-point rows are written
to PATH (CSV), a machine-readable JSON document to PATH with a .json suffix,
and a rendered figure to PATH with a .png suffix (suppress with
``--no-figures``).  Without ``--out`` the JSON goes to stdout.  The exit code
is nonzero iff an experiment's acceptance assertion fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .configuration import BoundaryCondition, ConnectionEvent, write_snapshot
from .critical import (hexagonal_critical, self_dual_point, star_triangle_check,
                       star_triangle_deviation, triangular_critical)
from .events import AnnulusCircuitEvent, AnnulusSpec, CrossingEvent, DualCrossingEvent, RectSpec
from .exact import ENUMERATION_CAP, Params, edge_marginals, exact_result
from .lattice import Family, build_lattice, dual_map, square_torus
from .sampler import (CLUSTER_ONLY, HEATBATH_ONLY, MIXED, EdgeSetObservable,
                      estimate)

_SCHEDULES = {"cluster": CLUSTER_ONLY, "heatbath": HEATBATH_ONLY, "mixed": MIXED}


def _build_lattice(args):
    if getattr(args, "torus", False):
        return square_torus(args.size)
    family = Family(getattr(args, "family", "square_box") or "square_box")
    return build_lattice(family, args.size)


def _build_bc(args, lattice):
    kind = getattr(args, "bc", None)
    if kind is None:
        kind = "periodic" if lattice.is_torus else "free"
    if kind == "free":
        return BoundaryCondition.free()
    if kind == "wired":
        return BoundaryCondition.wired(lattice)
    if kind == "periodic":
        return BoundaryCondition.periodic()
    raise SystemExit(f"unknown boundary condition {kind!r}")


def _resolve_p(args):
    if args.p in (None, "sd"):
        return self_dual_point(args.q)
    return float(args.p)


def parse_event(spec: str, lattice):
    """Event grammar: crossing:h:X0,Y0,X1,Y1 | dualcrossing:v:X0,Y0,X1,Y1 |
    annulus:alpha=A,n=N | twopoint:X1,Y1,X2,Y2 | edge:IDX | openfraction."""
    head, _, rest = spec.partition(":")
    if head == "crossing" or head == "dualcrossing":
        direction, _, coords = rest.partition(":")
        x0, y0, x1, y1 = (int(v) for v in coords.split(","))
        rect = RectSpec(x0, x1, y0, y1)
        if head == "crossing":
            return CrossingEvent(rect, direction)
        return DualCrossingEvent(dual_map(lattice), rect, direction)
    if head == "annulus":
        kv = dict(part.split("=") for part in rest.split(","))
        return AnnulusCircuitEvent(AnnulusSpec(float(kv["alpha"]), int(kv["n"])))
    if head == "twopoint":
        x1, y1, x2, y2 = (int(v) for v in rest.split(","))
        va, vb = lattice.vertex_at(x1, y1), lattice.vertex_at(x2, y2)
        return ConnectionEvent(sources=(va,), targets=(vb,),
                               edge_ids=np.arange(lattice.n_edges, dtype=np.int64),
                               label=spec)
    if head == "edge":
        e = int(rest)
        va, vb = int(lattice.edges[e, 0]), int(lattice.edges[e, 1])
        return ConnectionEvent(sources=(va,), targets=(vb,),
                               edge_ids=np.array([e], dtype=np.int64), label=spec)
    if head == "openfraction":
        return EdgeSetObservable(tuple(range(lattice.n_edges)))
    raise SystemExit(f"cannot parse event spec {spec!r}")


def _emit(args, payload: dict, rows=None, figure=None) -> None:
    out = getattr(args, "out", None)
    if out is None:
        print(json.dumps(payload, indent=2))
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if rows is not None:
        path.write_text(experiments.rows_to_csv(rows))
    path.with_suffix(".json").write_text(json.dumps(payload, indent=2))
    if figure is not None and not getattr(args, "no_figures", False):
        render, report = figure
        render(report, path.with_suffix(".png"))


def _cmd_enumerate(args) -> int:
    lat = _build_lattice(args)
    bc = _build_bc(args, lat)
    params = Params(_resolve_p(args), args.q)
    events = {}
    for spec in args.event or []:
        events[spec] = parse_event(spec, lat)
    res = exact_result(lat, bc, params, events, with_marginals=args.marginals,
                       max_edges=args.max_edges)
    rows = [{"p": params.p, "n": lat.size, "estimate": v, "stderr": 0.0,
             "tau_int": 0.0} for v in res.probabilities.values()]
    _emit(args, json.loads(res.to_json()), rows=rows or None)
    return 0


def _cmd_sample(args) -> int:
    lat = _build_lattice(args)
    bc = _build_bc(args, lat)
    params = Params(_resolve_p(args), args.q)
    observable = parse_event(args.event, lat)
    est = estimate(observable, lat, bc, params, n_sweeps=args.sweeps,
                   burn_in=args.burn_in, seed=args.seed, chains=args.chains,
                   threads=args.threads, schedule=_SCHEDULES[args.schedule],
                   thin=args.thin)
    if args.snapshot_out:
        from .sampler import _chain_arrays, _drive, _observable_plan, _rng_state

        plan = _observable_plan(lat, observable, args.thin)
        rng = _rng_state(np.random.SeedSequence(args.seed).spawn(1)[0])
        state = np.zeros(lat.n_edges, dtype=np.uint8)
        _drive(lat, _chain_arrays(lat, bc), params, _SCHEDULES[args.schedule],
               state, rng, 0, max(args.sweeps, 1), plan, collect=False)
        from .configuration import Configuration

        with open(args.snapshot_out, "wb") as fh:
            write_snapshot(Configuration(lat, state), fh, seed=args.seed)
    payload = {"lattice": lat.descriptor(), "bc": bc.kind.value, "p": params.p,
               "q": params.q, "event": args.event, "estimate": est.to_dict()}
    rows = [{"p": params.p, "n": lat.size, "estimate": est.mean,
             "stderr": est.std_error, "tau_int": est.tau_int}]
    _emit(args, payload, rows=rows)
    return 0


def _cmd_crossing(args) -> int:
    rep = experiments.rsw_experiment(args.q, args.alpha, args.n, args.m,
                                     sweeps=args.sweeps, seed=args.seed,
                                     chains=args.chains, threads=args.threads)
    from .report import render_crossing

    _emit(args, rep.to_dict(),
          rows=[{"p": rep.horizontal.p, "n": args.n,
                 "estimate": rep.horizontal.estimate.mean,
                 "stderr": rep.horizontal.estimate.std_error,
                 "tau_int": rep.horizontal.estimate.tau_int},
                {"p": rep.vertical_3n2.p, "n": args.n,
                 "estimate": rep.vertical_3n2.estimate.mean,
                 "stderr": rep.vertical_3n2.estimate.std_error,
                 "tau_int": rep.vertical_3n2.estimate.tau_int}],
          figure=(render_crossing, rep))
    return 0 if rep.satisfied else 1


def _parse_grid(spec: str):
    lo, hi, num = spec.split(":")
    return [float(x) for x in np.linspace(float(lo), float(hi), int(num))]


def _cmd_scan(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    grid = _parse_grid(args.grid)
    rep = experiments.threshold_scan(args.q, sizes, grid, sweeps=args.sweeps,
                                     seed=args.seed, epsilon=args.epsilon,
                                     p_fail=args.p_fail, aspect=args.aspect,
                                     torus_factor=args.torus_factor,
                                     chains=args.chains, threads=args.threads)
    from .report import render_scan

    _emit(args, rep.to_dict(), rows=list(rep.rows()), figure=(render_scan, rep))
    return 0 if rep.ok else 1


def _cmd_circuits(args) -> int:
    res = experiments.circuit_chain_experiment(args.q, args.p, alpha=args.alpha,
                                               n_max=args.nmax, sweeps=args.sweeps,
                                               seed=args.seed, thin=args.thin,
                                               chains=args.chains,
                                               threads=args.threads)
    from .report import render_circuits

    _emit(args, res.to_dict(), rows=list(res.rows()), figure=(render_circuits, res))
    return 0 if (res.increasing_ok and res.intersection_positive) else 1


def _cmd_decay(args) -> int:
    distances = [int(d) for d in args.distances.split(",")]
    fit = experiments.decay_experiment(args.q, args.p, distances,
                                       sweeps=args.sweeps, seed=args.seed,
                                       box_factor=args.box_factor,
                                       chains=args.chains, threads=args.threads,
                                       with_wired_gap=not args.no_wired_gap)
    from .report import render_decay

    _emit(args, fit.to_dict(), rows=list(fit.rows()), figure=(render_decay, fit))
    return 0 if (fit.ok and fit.significance <= -5.0) else 1


def _cmd_critical(args) -> int:
    if args.lattice == "square":
        p = self_dual_point(args.q)
        payload = {"lattice": "square", "q": args.q, "p_c": p,
                   "y_c": p / (1 - p), "residual": 0.0}
    elif args.lattice == "triangular":
        payload = {"lattice": "triangular", **triangular_critical(args.q).to_dict()}
    else:
        payload = {"lattice": "hexagonal", **hexagonal_critical(args.q).to_dict()}
    print(json.dumps(payload))
    return 0


def _cmd_star_triangle(args) -> int:
    if args.p is not None:
        rep = star_triangle_deviation(args.q, args.p)
        print(json.dumps(rep.to_dict(), indent=2))
        return 0
    rep = star_triangle_check(args.q)
    print(json.dumps(rep.to_dict(), indent=2))
    return 0 if rep.max_deviation <= 1e-10 else 1


def _add_common(p, mc=True):
    p.add_argument("--q", type=float, required=True, help="cluster weight q >= 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None,
                   help="CSV path; JSON and PNG are written alongside")
    p.add_argument("--no-figures", action="store_true")
    if mc:
        p.add_argument("--sweeps", type=int, default=20000)
        p.add_argument("--chains", type=int, default=4)
        p.add_argument("--threads", type=int, default=1)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fklab",
        description="random-cluster model laboratory (exact enumeration + Monte Carlo)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="exact probabilities by full enumeration")
    _add_common(p, mc=False)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--torus", action="store_true")
    p.add_argument("--family", type=str, default=None)
    p.add_argument("--bc", type=str, default=None,
                   choices=["free", "wired", "periodic"])
    p.add_argument("--p", type=str, default="sd", help="edge weight, or 'sd'")
    p.add_argument("--event", action="append", default=None)
    p.add_argument("--marginals", action="store_true")
    p.add_argument("--max-edges", type=int, default=ENUMERATION_CAP)
    p.set_defaults(fn=_cmd_enumerate)

    p = sub.add_parser("sample", help="Monte Carlo estimate of one observable")
    _add_common(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--torus", action="store_true")
    p.add_argument("--family", type=str, default=None)
    p.add_argument("--bc", type=str, default=None,
                   choices=["free", "wired", "periodic"])
    p.add_argument("--p", type=str, default="sd")
    p.add_argument("--event", type=str, required=True)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--schedule", choices=sorted(_SCHEDULES), default="cluster")
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--snapshot-out", type=str, default=None,
                   help="write the final chain configuration (FKCFG1)")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("crossing", help="self-dual RSW crossing experiment")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.5)
    p.set_defaults(fn=_cmd_crossing)

    p = sub.add_parser("scan", help="sharp-threshold scan over a p grid")
    _add_common(p)
    p.add_argument("--sizes", type=str, required=True, help="e.g. 8,16,32")
    p.add_argument("--grid", type=str, required=True, help="lo:hi:count")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--p-fail", type=float, default=None)
    p.add_argument("--aspect", type=float, default=2.0)
    p.add_argument("--torus-factor", type=int, default=4)
    p.set_defaults(fn=_cmd_scan)

    p = sub.add_parser("circuits", help="annulus circuit chain experiment")
    _add_common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--thin", type=int, default=8)
    p.set_defaults(fn=_cmd_circuits)

    p = sub.add_parser("decay", help="subcritical two-point decay fit")
    _add_common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--distances", type=str, default="2,4,6,8")
    p.add_argument("--box-factor", type=int, default=4)
    p.add_argument("--no-wired-gap", action="store_true")
    p.set_defaults(fn=_cmd_decay)

    p = sub.add_parser("critical", help="critical point on a lattice family")
    p.add_argument("--lattice", choices=["square", "triangular", "hexagonal"],
                   required=True)
    p.add_argument("--q", type=float, required=True)
    p.set_defaults(fn=_cmd_critical)

    p = sub.add_parser("star-triangle", help="star-triangle invariance check")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--p", type=float, default=None,
                   help="triangle edge weight (default: critical point)")
    p.set_defaults(fn=_cmd_star_triangle)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
