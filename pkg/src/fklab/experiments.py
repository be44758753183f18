"""Scripted experiments: self-dual crossings, RSW bounds, sharp-threshold
scans, annulus-circuit chains, and subcritical decay fits.

Every experiment result carries its full parameter set and seed; re-running
with the same seed reproduces all estimates bit-exactly (thread count does
not enter the stream, see `sampler`).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import sampler
from .configuration import BoundaryCondition, Configuration
from .critical import self_dual_point
from .events import (AnnulusCircuitEvent, AnnulusSpec, CrossingEvent, RectSpec,
                     annulus_circuit_event)
from .exact import Params
from .lattice import Lattice, square_box, square_torus
from .sampler import CLUSTER_ONLY, MCEstimate, UpdateSchedule, estimate, estimate_pairs


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


@dataclass
class CrossingReport:
    """A crossing estimate with the uniform lower bound it must clear."""

    q: float
    p: float
    n: int
    m: int
    alpha: float
    rect: tuple
    direction: str
    estimate: MCEstimate
    bound: float
    bound_satisfied: bool
    seed: int
    sweeps: int

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["estimate"] = self.estimate.to_dict()
        return d


def selfdual_crossing_experiment(q: float, n: int, m: int, sweeps: int,
                                 seed: int = 0, chains: int = 4, threads: int = 1,
                                 schedule: UpdateSchedule = CLUSTER_ONLY) -> MCEstimate:
    """Estimate the square-crossing probability C_h([0,n)^2) at the self-dual
    point on the torus of size m (> n)."""
    _require(m > n > 0, "need m > n > 0")
    p = self_dual_point(q)
    lat = square_torus(m)
    est = estimate(CrossingEvent(RectSpec(0, n, 0, n), "h"), lat,
                   BoundaryCondition.periodic(), Params(p, q),
                   n_sweeps=sweeps, seed=seed, chains=chains, threads=threads,
                   schedule=schedule)
    if not est.converged:
        est.notes = (est.notes + "; " if est.notes else "") + "budget insufficient"
    return est


def rsw_c_alpha(alpha: float, q: float) -> float:
    """Uniform crossing lower bound c(alpha) = [32 (1 + q^2)]^(-floor(2 alpha))."""
    return (32.0 * (1.0 + q * q)) ** (-math.floor(2.0 * alpha))


PROP6_BOUND = lambda q: 1.0 / (16.0 * (1.0 + q * q))  # noqa: E731


@dataclass
class RSWReport:
    q: float
    alpha: float
    n: int
    m: int
    horizontal: CrossingReport
    vertical_3n2: CrossingReport
    satisfied: bool
    seed: int

    def to_dict(self) -> dict:
        return {
            "q": self.q, "alpha": self.alpha, "n": self.n, "m": self.m,
            "horizontal": self.horizontal.to_dict(),
            "vertical_3n2": self.vertical_3n2.to_dict(),
            "satisfied": self.satisfied, "seed": self.seed,
        }


def rsw_experiment(q: float, alpha: float, n: int, m: int, sweeps: int,
                   seed: int = 0, chains: int = 4, threads: int = 1) -> RSWReport:
    """Estimate the aspect-alpha crossing at p_sd and assert it clears
    c(alpha); separately assert the 3n/2 vertical crossing clears the
    box-crossing constant 1/(16 (1+q^2)).  Bounds must hold with 3 sigma."""
    _require(alpha >= 1.0, "alpha must be >= 1")
    width = int(round(alpha * n))
    _require(abs(alpha * n - width) < 1e-9, "alpha * n must be an integer")
    _require(m > width, "need m > alpha n")
    _require(n % 2 == 0, "n must be even so 3n/2 is an integer")
    p = self_dual_point(q)
    lat = square_torus(m)
    params = Params(p, q)

    est_h = estimate(CrossingEvent(RectSpec(0, width, 0, n), "h"), lat,
                     BoundaryCondition.periodic(), params, n_sweeps=sweeps,
                     seed=seed, chains=chains, threads=threads)
    c_a = rsw_c_alpha(alpha, q)
    rep_h = CrossingReport(q=q, p=p, n=n, m=m, alpha=alpha,
                           rect=(0, width, 0, n), direction="h", estimate=est_h,
                           bound=c_a,
                           bound_satisfied=est_h.mean - 3 * est_h.std_error >= c_a,
                           seed=seed, sweeps=sweeps)

    est_v = estimate(CrossingEvent(RectSpec(0, n, 0, 3 * n // 2), "v"), lat,
                     BoundaryCondition.periodic(), params, n_sweeps=sweeps,
                     seed=seed + 1, chains=chains, threads=threads)
    b6 = PROP6_BOUND(q)
    rep_v = CrossingReport(q=q, p=p, n=n, m=m, alpha=1.5,
                           rect=(0, n, 0, 3 * n // 2), direction="v", estimate=est_v,
                           bound=b6,
                           bound_satisfied=est_v.mean - 3 * est_v.std_error >= b6,
                           seed=seed + 1, sweeps=sweeps)
    return RSWReport(q=q, alpha=alpha, n=n, m=m, horizontal=rep_h,
                     vertical_3n2=rep_v,
                     satisfied=rep_h.bound_satisfied and rep_v.bound_satisfied,
                     seed=seed)


@dataclass
class ScanResult:
    """Crossing-probability scan over a p grid at one size."""

    q: float
    n: int
    m: int
    direction: str
    rect: tuple
    p_grid: list
    estimates: list  # MCEstimate per grid point
    epsilon: float
    window: tuple | None          # (p_lo, p_hi) where estimate crosses eps, 1-eps
    monotone_ok: bool
    seed: int
    sweeps: int

    @property
    def window_width(self) -> float | None:
        return None if self.window is None else self.window[1] - self.window[0]

    def rows(self):
        for p, est in zip(self.p_grid, self.estimates):
            yield {"p": p, "n": self.n, "estimate": est.mean,
                   "stderr": est.std_error, "tau_int": est.tau_int}

    def to_dict(self) -> dict:
        return {
            "q": self.q, "n": self.n, "m": self.m, "direction": self.direction,
            "rect": self.rect, "p_grid": list(self.p_grid),
            "estimates": [e.to_dict() for e in self.estimates],
            "epsilon": self.epsilon, "window": self.window,
            "window_width": self.window_width,
            "monotone_ok": self.monotone_ok, "seed": self.seed,
            "sweeps": self.sweeps,
        }


def _interp_crossing(p_grid, means, level):
    """First p where the (noisy, increasing) estimates reach ``level``."""
    for i in range(len(p_grid)):
        if means[i] >= level:
            if i == 0:
                return p_grid[0]
            p0, p1 = p_grid[i - 1], p_grid[i]
            y0, y1 = means[i - 1], means[i]
            if y1 == y0:
                return p1
            return p0 + (level - y0) * (p1 - p0) / (y1 - y0)
    return None


def scan_size(q: float, n: int, p_grid, sweeps: int, seed: int = 0,
              aspect: float = 2.0, direction: str = "v", torus_factor: int = 4,
              epsilon: float = 0.05, chains: int = 4, threads: int = 1) -> ScanResult:
    """Scan one crossing event across a p grid on the torus of size
    ``torus_factor * n``."""
    m = torus_factor * n
    height = int(round(aspect * n))
    rect = RectSpec(0, n, 0, height)
    _require(height < m, "rectangle must not span the torus")
    lat = square_torus(m)
    event = CrossingEvent(rect, direction)
    ests = []
    for i, p in enumerate(p_grid):
        ests.append(estimate(event, lat, BoundaryCondition.periodic(),
                             Params(float(p), q), n_sweeps=sweeps,
                             seed=seed + 1000 * i, chains=chains, threads=threads))
    means = [e.mean for e in ests]
    monotone = all(
        means[i + 1] >= means[i] - 4.0 * (ests[i].std_error + ests[i + 1].std_error)
        for i in range(len(means) - 1)
    )
    p_lo = _interp_crossing(p_grid, means, epsilon)
    p_hi = _interp_crossing(p_grid, means, 1.0 - epsilon)
    window = (p_lo, p_hi) if p_lo is not None and p_hi is not None else None
    return ScanResult(q=q, n=n, m=m, direction=direction, rect=rect.as_tuple(),
                      p_grid=[float(p) for p in p_grid], estimates=ests,
                      epsilon=epsilon, window=window, monotone_ok=monotone,
                      seed=seed, sweeps=sweeps)


@dataclass
class ThresholdScanReport:
    q: float
    sizes: list
    scans: list                      # ScanResult per size
    widths: list
    widths_decreasing: bool
    p_fail: float
    failure_probs: list              # 1 - estimate at p_fail, per size
    failure_stderrs: list
    loglog_slope: float
    slope_negative: bool
    ok: bool
    failures: list
    seed: int

    def to_dict(self) -> dict:
        return {
            "q": self.q, "sizes": self.sizes,
            "scans": [s.to_dict() for s in self.scans],
            "widths": self.widths, "widths_decreasing": self.widths_decreasing,
            "p_fail": self.p_fail, "failure_probs": self.failure_probs,
            "failure_stderrs": self.failure_stderrs,
            "loglog_slope": self.loglog_slope,
            "slope_negative": self.slope_negative,
            "ok": self.ok, "failures": self.failures, "seed": self.seed,
        }

    def rows(self):
        for s in self.scans:
            yield from s.rows()


def threshold_scan(q: float, sizes, p_grid, sweeps, seed: int = 0,
                   epsilon: float = 0.05, p_fail: float | None = None,
                   aspect: float = 2.0, torus_factor: int = 4,
                   chains: int = 4, threads: int = 1) -> ThresholdScanReport:
    """Sharp-threshold behaviour across sizes: monotone estimates, shrinking
    epsilon-window, and power-law-consistent decay of the failure probability
    at a fixed p above the self-dual point.

    ``sweeps`` may be an int or a mapping size -> sweeps.
    """
    p_sd = self_dual_point(q)
    p_grid = [float(p) for p in p_grid]
    _require(min(p_grid) < p_sd < max(p_grid), "grid must straddle p_sd")
    if p_fail is None:
        p_fail = p_sd + 0.1

    def sweeps_for(n):
        return sweeps[n] if isinstance(sweeps, dict) else int(sweeps)

    failures: list[str] = []
    scans = []
    for i, n in enumerate(sorted(sizes)):
        scans.append(scan_size(q, int(n), p_grid, sweeps_for(n),
                               seed=seed + 10_000 * i,
                               aspect=aspect, torus_factor=torus_factor,
                               epsilon=epsilon, chains=chains, threads=threads))
    for s in scans:
        if not s.monotone_ok:
            failures.append(f"scan at n={s.n} is non-monotone beyond noise")
        if s.window is None:
            failures.append(f"scan at n={s.n} does not resolve the epsilon-window")
    widths = [s.window_width for s in scans]
    widths_decreasing = (None not in widths
                         and all(widths[i + 1] < widths[i] for i in range(len(widths) - 1)))
    if not widths_decreasing:
        failures.append("window widths fail to decrease with size")

    fail_probs, fail_errs = [], []
    for i, n in enumerate(sorted(sizes)):
        m = torus_factor * int(n)
        rect = RectSpec(0, int(n), 0, int(round(aspect * n)))
        est = estimate(CrossingEvent(rect, "v"), square_torus(m),
                       BoundaryCondition.periodic(), Params(p_fail, q),
                       n_sweeps=sweeps_for(n), seed=seed + 777 + i, chains=chains,
                       threads=threads)
        fail_probs.append(max(1.0 - est.mean, 0.0))
        fail_errs.append(est.std_error)
    slope = float("nan")
    slope_negative = False
    if all(fp > 0 for fp in fail_probs):
        xs = np.log([float(n) for n in sorted(sizes)])
        ys = np.log(fail_probs)
        slope = float(np.polyfit(xs, ys, 1)[0])
        slope_negative = slope < 0.0
    if not slope_negative:
        failures.append("failure probability does not decay with size at p_fail")
    return ThresholdScanReport(
        q=q, sizes=[int(n) for n in sorted(sizes)], scans=scans,
        widths=widths, widths_decreasing=widths_decreasing,
        p_fail=p_fail, failure_probs=fail_probs, failure_stderrs=fail_errs,
        loglog_slope=slope, slope_negative=slope_negative,
        ok=not failures, failures=failures, seed=seed,
    )


@dataclass
class CircuitChainResult:
    q: float
    p: float
    alpha: float
    n_values: list
    per_n: list                      # MCEstimate of A_n on its own wired box
    increasing_ok: bool
    intersection_freq: MCEstimate    # frequency of all A_n on the largest box
    intersection_positive: bool
    seed: int
    sweeps: int

    def to_dict(self) -> dict:
        return {
            "q": self.q, "p": self.p, "alpha": self.alpha,
            "n_values": self.n_values,
            "per_n": [e.to_dict() for e in self.per_n],
            "increasing_ok": self.increasing_ok,
            "intersection_freq": self.intersection_freq.to_dict(),
            "intersection_positive": self.intersection_positive,
            "seed": self.seed, "sweeps": self.sweeps,
        }

    def rows(self):
        for n, est in zip(self.n_values, self.per_n):
            yield {"p": self.p, "n": n, "estimate": est.mean,
                   "stderr": est.std_error, "tau_int": est.tau_int}


def circuit_chain_experiment(q: float, p: float, alpha: float = 2.0,
                             n_max: int = 3, sweeps: int = 4000, seed: int = 0,
                             thin: int = 8, chains: int = 2,
                             threads: int = 1) -> CircuitChainResult:
    """Annulus-circuit chain: estimate each A_n on its own wired box of radius
    floor(alpha^(n+2)); measure the joint frequency of all A_n, n <= n_max, on
    the largest box."""
    _require(p > self_dual_point(q), "circuit chains need p above the self-dual point")
    _require(n_max >= 1, "need n_max >= 1")
    params = Params(p, q)
    per_n = []
    for idx, n in enumerate(range(1, n_max + 1)):
        spec = AnnulusSpec(alpha, n)
        r = spec.r_box
        lat = square_box(2 * r + 1, origin=(-r, -r))
        est = estimate(AnnulusCircuitEvent(spec), lat, BoundaryCondition.wired(lat),
                       params, n_sweeps=sweeps, seed=seed + idx, chains=chains,
                       threads=threads, thin=thin)
        per_n.append(est)
    increasing_ok = all(
        per_n[i + 1].mean >= per_n[i].mean
        - 4.0 * (per_n[i].std_error + per_n[i + 1].std_error)
        for i in range(len(per_n) - 1)
    )

    # joint frequency on the largest box
    big_spec = AnnulusSpec(alpha, n_max)
    r = big_spec.r_box
    lat = square_box(2 * r + 1, origin=(-r, -r))
    specs = [AnnulusSpec(alpha, n) for n in range(1, n_max + 1)]

    def joint(cfg: Configuration) -> float:
        return 1.0 if all(annulus_circuit_event(cfg, s) for s in specs) else 0.0

    inter = estimate(joint, lat, BoundaryCondition.wired(lat), params,
                     n_sweeps=sweeps, seed=seed + 100, chains=chains,
                     threads=threads, thin=thin)
    return CircuitChainResult(
        q=q, p=p, alpha=alpha, n_values=list(range(1, n_max + 1)), per_n=per_n,
        increasing_ok=increasing_ok, intersection_freq=inter,
        intersection_positive=inter.mean - 3.0 * inter.std_error > 0.0,
        seed=seed, sweeps=sweeps,
    )


@dataclass
class DecayFit:
    """Weighted least-squares fit of log phi(0 <-> x) against |x|."""

    q: float
    p: float
    distances: list
    means: list
    stderrs: list
    log_probs: list
    log_prob_errors: list
    slope: float
    slope_stderr: float
    intercept: float
    gof_chi2_per_dof: float
    dropped: list
    significance: float              # slope / slope_stderr
    wired_means: list = field(default_factory=list)
    bc_gap: float = float("nan")
    ok: bool = True
    notes: str = ""
    seed: int = 0
    sweeps: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def rows(self):
        for d, mean, err, est_tau in zip(self.distances, self.means, self.stderrs,
                                         self._taus):
            yield {"p": self.p, "n": d, "estimate": mean, "stderr": err,
                   "tau_int": est_tau}

    _taus: list = field(default_factory=list)


def decay_experiment(q: float, p: float, distances, sweeps: int, seed: int = 0,
                     box_factor: int = 4, chains: int = 4, threads: int = 1,
                     with_wired_gap: bool = True) -> DecayFit:
    """Fit the exponential decay of the two-point function below the self-dual
    point.  Runs on a free-bc box with side >= box_factor * max distance; the
    wired twin bounds the finite-volume systematic error."""
    distances = sorted(int(d) for d in distances)
    _require(len(distances) >= 4, "need at least 4 distances for the fit")
    _require(p < self_dual_point(q), "decay fits require p below the self-dual point")
    dmax = max(distances)
    half = (box_factor * dmax) // 2
    lat = square_box(2 * half + 1, origin=(-half, -half))
    origin = lat.vertex_at(0, 0)
    pairs = [(origin, lat.vertex_at(d, 0)) for d in distances]
    params = Params(p, q)
    ests = estimate_pairs(pairs, lat, BoundaryCondition.free(), params,
                          n_sweeps=sweeps, seed=seed, chains=chains, threads=threads)
    means = [e.mean for e in ests]
    errs = [e.std_error for e in ests]
    taus = [e.tau_int for e in ests]

    kept, dropped = [], []
    for d, mean, err in zip(distances, means, errs):
        if mean <= 0.0 or mean <= 2.0 * err:
            dropped.append(d)
        else:
            kept.append((d, mean, err))
    notes = ""
    ok = True
    if len(kept) < 4:
        ok = False
        notes = f"only {len(kept)} usable distances after dropping {dropped}"
        slope = slope_err = intercept = gof = sig = float("nan")
        logp, logperr = [], []
    else:
        xs = np.array([d for d, _, _ in kept], dtype=float)
        ys = np.array([math.log(mean) for _, mean, _ in kept])
        es = np.array([err / mean for _, mean, err in kept])  # delta method
        w = 1.0 / es**2
        X = np.column_stack([np.ones_like(xs), xs])
        cov = np.linalg.inv(X.T @ (w[:, None] * X))
        beta = cov @ (X.T @ (w * ys))
        intercept, slope = float(beta[0]), float(beta[1])
        resid = ys - X @ beta
        dof = len(xs) - 2
        gof = float((w * resid**2).sum() / dof) if dof > 0 else float("nan")
        slope_err = float(math.sqrt(cov[1, 1]))
        sig = slope / slope_err
        logp, logperr = [float(v) for v in ys], [float(v) for v in es]

    wired_means: list[float] = []
    gap = float("nan")
    if with_wired_gap:
        wired = estimate_pairs(pairs, lat, BoundaryCondition.wired(lat), params,
                               n_sweeps=sweeps, seed=seed + 1, chains=chains,
                               threads=threads)
        wired_means = [e.mean for e in wired]
        gap = float(max(abs(a - b) for a, b in zip(means, wired_means)))

    fit = DecayFit(q=q, p=p, distances=distances, means=means, stderrs=errs,
                   log_probs=logp, log_prob_errors=logperr, slope=slope,
                   slope_stderr=slope_err, intercept=intercept,
                   gof_chi2_per_dof=gof, dropped=dropped, significance=sig,
                   wired_means=wired_means, bc_gap=gap, ok=ok, notes=notes,
                   seed=seed, sweeps=sweeps)
    fit._taus = taus
    return fit


def duality_crosscheck(q: float, p: float, rect: RectSpec, m: int, sweeps: int,
                       seed: int = 0, chains: int = 4, threads: int = 1) -> dict:
    """Compare phi_p(C_h(R)) with 1 - phi_{p*}(C_v(R - (1,0))) on the torus.

    Exact planar duality makes these equal at q = 1; for q > 1 the periodic
    torus carries a homology-sector reweighting and the identity holds only
    up to that correction (vanishing off criticality).
    """
    from .critical import dual_parameter

    lat = square_torus(m)
    bc = BoundaryCondition.periodic()
    est_h = estimate(CrossingEvent(rect, "h"), lat, bc, Params(p, q),
                     n_sweeps=sweeps, seed=seed, chains=chains, threads=threads)
    shifted = RectSpec(rect.x0 - 1, rect.x1 - 1, rect.y0, rect.y1)
    est_v = estimate(CrossingEvent(shifted, "v"), lat, bc,
                     Params(dual_parameter(p, q), q), n_sweeps=sweeps,
                     seed=seed + 1, chains=chains, threads=threads)
    lhs = est_h.mean
    rhs = 1.0 - est_v.mean
    sigma = math.hypot(est_h.std_error, est_v.std_error)
    return {"lhs": lhs, "rhs": rhs, "diff": lhs - rhs, "sigma": sigma,
            "within_3sigma": abs(lhs - rhs) <= 3.0 * sigma}


# ---------------------------------------------------------------------------
# delimited output


def rows_to_csv(rows, fileobj=None) -> str:
    """Write per-point rows (p, n, estimate, stderr, tau_int) as CSV."""
    buf = fileobj if fileobj is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "n", "estimate", "stderr", "tau_int"])
    for r in rows:
        writer.writerow([repr(float(r["p"])), int(r["n"]), repr(float(r["estimate"])),
                         repr(float(r["stderr"])), repr(float(r["tau_int"]))])
    return buf.getvalue() if fileobj is None else ""
