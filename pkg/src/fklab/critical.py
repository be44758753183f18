"""Critical parameters: duality map, self-dual point, cubic critical equations
on the triangular/hexagonal lattices, and the star-triangle invariance check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: The five partitions of three terminals, keyed by frozensets of blocks.
TERMINAL_PARTITIONS = (
    "a|b|c",
    "ab|c",
    "ac|b",
    "bc|a",
    "abc",
)


@dataclass(frozen=True)
class CriticalSolution:
    """Root of a critical equation: y_c = p_c / (1 - p_c), with residual."""

    q: float
    y_c: float
    p_c: float
    residual: float

    def to_dict(self) -> dict:
        return {"q": self.q, "y_c": self.y_c, "p_c": self.p_c, "residual": self.residual}


def dual_parameter(p: float, q: float) -> float:
    """Planar-duality image p* = (1-p) q / ((1-p) q + p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if q < 1.0:
        raise ValueError("q must be >= 1")
    return (1.0 - p) * q / ((1.0 - p) * q + p)


def self_dual_point(q: float) -> float:
    """Fixed point of the duality map: sqrt(q) / (1 + sqrt(q))."""
    if q < 1.0:
        raise ValueError("q must be >= 1")
    r = math.sqrt(q)
    return r / (1.0 + r)


def _safeguarded_newton(f, df, lo: float, hi: float, tol: float = 1e-14) -> float:
    """Newton iteration with bisection fallback on a bracketing interval."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("root not bracketed")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = f(x)
        if fx == 0.0:
            return x
        if flo * fx < 0:
            hi = x
        else:
            lo, flo = x, fx
        d = df(x)
        step = fx / d if d != 0.0 else math.inf
        cand = x - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if abs(cand - x) <= tol * max(1.0, abs(x)):
            return cand
        x = cand
    return x


def triangular_critical(q: float) -> CriticalSolution:
    """Unique positive root of y^3 + 3 y^2 - q = 0."""
    if q < 1.0:
        raise ValueError("q must be >= 1")

    def f(y):
        return y * y * y + 3.0 * y * y - q

    def df(y):
        return 3.0 * y * y + 6.0 * y

    hi = max(1.0, q)
    y = _safeguarded_newton(f, df, 1e-12, hi)
    return CriticalSolution(q=q, y_c=y, p_c=y / (1.0 + y), residual=f(y))


def hexagonal_critical(q: float) -> CriticalSolution:
    """Root of y^3 - 3 q y - q^2 = 0 on the increasing branch y > sqrt(3 q)."""
    if q < 1.0:
        raise ValueError("q must be >= 1")

    def f(y):
        return y * y * y - 3.0 * q * y - q * q

    def df(y):
        return 3.0 * y * y - 3.0 * q

    lo = math.sqrt(3.0 * q) + 1e-12
    hi = max(lo * 2.0, q + 3.0)
    while f(hi) < 0:
        hi *= 2.0
    y = _safeguarded_newton(f, df, lo, hi)
    return CriticalSolution(q=q, y_c=y, p_c=y / (1.0 + y), residual=f(y))


def _partition_index(root_a: int, root_b: int, root_c: int) -> int:
    ab = root_a == root_b
    ac = root_a == root_c
    bc = root_b == root_c
    if ab and ac:
        return 4  # abc
    if ab:
        return 1
    if ac:
        return 2
    if bc:
        return 3
    return 0


def triangle_partition_distribution(p: float, q: float) -> np.ndarray:
    """Connectivity law among the three terminals of a triangle gadget.

    Vertices {a, b, c}; edges ab, ac, bc each open with weight y = p/(1-p);
    configuration weight y^o q^k with k counting all components.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("gadget enumeration needs p in (0, 1)")
    y = p / (1.0 - p)
    out = np.zeros(5)
    for sab in (0, 1):
        for sac in (0, 1):
            for sbc in (0, 1):
                o = sab + sac + sbc
                # components of 3 vertices under the open subset
                parent = [0, 1, 2]

                def find(x):
                    while parent[x] != x:
                        x = parent[x]
                    return x

                for bit, (i, j) in zip((sab, sac, sbc), ((0, 1), (0, 2), (1, 2))):
                    if bit:
                        ri, rj = find(i), find(j)
                        if ri != rj:
                            parent[ri] = rj
                k = sum(1 for x in range(3) if find(x) == x)
                w = y**o * q**k
                out[_partition_index(find(0), find(1), find(2))] += w
    return out / out.sum()


def star_partition_distribution(p_star: float, q: float) -> np.ndarray:
    """Connectivity law among the three outer terminals of a 3-edge star.

    Vertices {a, b, c, center}; edges a-center, b-center, c-center open with
    weight y' = p*/(1-p*); k counts all components, center included.
    """
    if not 0.0 < p_star < 1.0:
        raise ValueError("gadget enumeration needs p in (0, 1)")
    y = p_star / (1.0 - p_star)
    out = np.zeros(5)
    for sa in (0, 1):
        for sb in (0, 1):
            for sc in (0, 1):
                o = sa + sb + sc
                parent = [0, 1, 2, 3]

                def find(x):
                    while parent[x] != x:
                        x = parent[x]
                    return x

                for bit, i in zip((sa, sb, sc), (0, 1, 2)):
                    if bit:
                        ri, rj = find(i), find(3)
                        if ri != rj:
                            parent[ri] = rj
                k = sum(1 for x in range(4) if find(x) == x)
                w = y**o * q**k
                out[_partition_index(find(0), find(1), find(2))] += w
    return out / out.sum()


@dataclass
class StarTriangleReport:
    q: float
    p_triangle: float
    p_star: float
    triangle_distribution: list
    star_distribution: list
    max_deviation: float

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "p_triangle": self.p_triangle,
            "p_star": self.p_star,
            "partitions": list(TERMINAL_PARTITIONS),
            "triangle_distribution": self.triangle_distribution,
            "star_distribution": self.star_distribution,
            "max_deviation": self.max_deviation,
        }


def star_triangle_deviation(q: float, p_triangle: float) -> StarTriangleReport:
    """Compare the two gadgets' terminal-partition laws at edge weight
    ``p_triangle`` on the triangle and the dual-consistent weight on the star."""
    p_star = dual_parameter(p_triangle, q)
    tri = triangle_partition_distribution(p_triangle, q)
    star = star_partition_distribution(p_star, q)
    return StarTriangleReport(
        q=q,
        p_triangle=p_triangle,
        p_star=p_star,
        triangle_distribution=[float(x) for x in tri],
        star_distribution=[float(x) for x in star],
        max_deviation=float(np.abs(tri - star).max()),
    )


def star_triangle_check(q: float) -> StarTriangleReport:
    """Star-triangle invariance at the triangular critical point.

    With the triangle at p_T solving y^3 + 3y^2 = q and the star at the dual
    weight q/y, the induced laws over the five terminal partitions coincide;
    the report carries the maximal absolute deviation.
    """
    p_t = triangular_critical(q).p_c
    return star_triangle_deviation(q, p_t)
