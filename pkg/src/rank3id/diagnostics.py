"""Combinatorial predicates on finite point sets of a multiprojective space.

The central check is whether a set of points imposes independent conditions
on multilinear forms of a given multidegree, computed as the rank of an
evaluation matrix, together with its structural description for sets of at
most three points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import exact as qx
from .concision import numerical_rank
from .tensor import Decomposition, RankOnePoint, outer, same_projective

MATCH_TOL = 1e-6
MAX_POINTS = 8


@dataclass(frozen=True, eq=False)
class PointSet:
    """Pairwise distinct points on a common shape, at most eight of them."""

    points: tuple

    def __post_init__(self):
        pts = tuple(p if isinstance(p, RankOnePoint) else RankOnePoint(tuple(p)) for p in self.points)
        if len(pts) > MAX_POINTS:
            raise ValueError(f"at most {MAX_POINTS} points, got {len(pts)}")
        if len({p.shape for p in pts}) > 1:
            raise ValueError("points live on different shapes")
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if _same_point(pts[a], pts[b]):
                    raise ValueError(f"points {a} and {b} coincide")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def shape(self) -> tuple:
        return self.points[0].shape if self.points else ()

    @property
    def exact(self) -> bool:
        return any(v.dtype == object for p in self.points for v in p.vectors)


def _same_vec(u, v) -> bool:
    return same_projective(u, v)


def _same_point(p: RankOnePoint, q: RankOnePoint) -> bool:
    return all(_same_vec(u, v) for u, v in zip(p.vectors, q.vectors))


def evaluation_matrix(E: PointSet, d) -> np.ndarray:
    """Rows: points; columns: products of coordinates over the modes with d_m = 1."""
    modes = [m for m, bit in enumerate(d) if bit]
    rows = []
    for p in E:
        if not modes:
            rows.append(np.ones(1, dtype=object if E.exact else complex))
            continue
        vecs = [p.vectors[m] for m in modes]
        if E.exact:
            vecs = [qx.as_exact(v) for v in vecs]
        rows.append(outer(vecs).reshape(-1))
    return np.array(rows)


def imposes_independent_conditions(E, d) -> bool:
    """True iff the evaluation matrix of ``E`` in multidegree ``d`` has full row rank."""
    E = E if isinstance(E, PointSet) else PointSet(tuple(E))
    if len(E) == 0:
        raise ValueError("E must be nonempty")
    if len(d) != len(E.shape) or any(bit not in (0, 1) for bit in d):
        raise ValueError(f"multidegree {d} does not match order {len(E.shape)}")
    M = evaluation_matrix(E, d)
    r = qx.rank(M) if E.exact else numerical_rank(M)
    return r == len(E)


def _span_dim(vectors) -> int:
    M = np.array(vectors)
    if M.dtype == object:
        return qx.rank(M)
    return numerical_rank(M)


def lemma3points_structural(E, i: int) -> bool:
    """Structural form of the failure to impose independent conditions in multidegree ``1 - e_i``.

    Holds iff two points agree in every mode except ``i``, or there are three
    points, a second mode ``j`` such that all points agree outside ``{i, j}``,
    and the mode-``j`` components span at most a line.
    """
    E = E if isinstance(E, PointSet) else PointSet(tuple(E))
    if len(E) > 3:
        raise ValueError("the structural test covers at most three points")
    pts = list(E)
    k = len(E.shape) if pts else 0
    if not 0 <= i < max(k, 1):
        raise ValueError(f"mode {i} out of range")

    def agree(h):
        return all(_same_vec(pts[0].vectors[h], q.vectors[h]) for q in pts[1:])

    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            if all(_same_vec(pts[a].vectors[h], pts[b].vectors[h]) for h in range(k) if h != i):
                return True
    if len(pts) == 3:
        for j in range(k):
            if j == i:
                continue
            if all(agree(h) for h in range(k) if h not in (i, j)):
                if _span_dim([q.vectors[j] for q in pts]) <= 2:
                    return True
    return False


def match_count(A: Decomposition, B: Decomposition, tol: float = MATCH_TOL) -> int:
    """Number of points shared by two decompositions under optimal projective matching."""
    pa, pb = A.points, B.points
    if not pa or not pb:
        return 0
    cost = np.array([[p.distance(q) for q in pb] for p in pa])
    big = np.where(np.isfinite(cost), cost, 1e6)
    rows, cols = linear_sum_assignment(big)
    return int(np.sum(big[rows, cols] < tol))


def line_violations(D: Decomposition, tol: float = MATCH_TOL) -> list:
    """Pairs of terms agreeing in all modes but one."""
    pts = D.points
    out = []
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            diff = sum(d >= tol for d in pts[a].mode_distances(pts[b]))
            if diff == 1:
                out.append((a, b))
    return out


@dataclass(frozen=True)
class PairReport:
    intersection: int
    union: int
    line_violation: bool
    equal: bool
    ok: bool


def pair_invariants(A: Decomposition, B: Decomposition, tol: float = MATCH_TOL) -> PairReport:
    """Check the intersection, union and no-line properties of two rank-3 decompositions."""
    if len(A) != 3 or len(B) != 3:
        raise ValueError("pair invariants need two 3-term decompositions")
    inter = match_count(A, B, tol)
    union = 6 - inter
    lines = bool(line_violations(A, tol) or line_violations(B, tol))
    equal = inter == 3
    ok = not lines and (equal or (inter <= 1 and union in (5, 6)))
    return PairReport(inter, union, lines, equal, ok)


__all__ = [
    "MATCH_TOL",
    "PairReport",
    "PointSet",
    "evaluation_matrix",
    "imposes_independent_conditions",
    "lemma3points_structural",
    "line_violations",
    "match_count",
    "pair_invariants",
]
