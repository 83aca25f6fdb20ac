"""Multilinear rank and concise cores.

A tensor only involves the span of its mode-i fibers in each mode; the
concise core is the tensor rewritten in bases of those spans, and every
decomposition of the tensor lives inside them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exact as qx
from .tensor import Decomposition, DenseTensor, RankOnePoint, as_tensor, flatten

RANK_CUTOFF = 1e-8
GUARD_LOW = 1e-10
GUARD_HIGH = 1e-6


def numerical_rank(m: np.ndarray, cutoff: float = RANK_CUTOFF) -> int:
    s = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > cutoff * s[0]))


def _mode_matrix(T: DenseTensor, i: int) -> np.ndarray:
    if T.order == 1:
        src = T.exact if T.exact is not None else T.data
        return src.reshape(-1, 1)
    return flatten(T, [i])


def multilinear_rank(T) -> tuple[int, ...]:
    """Rank of every single-mode flattening (exact when T carries exact entries)."""
    T = as_tensor(T)
    if T.is_zero():
        raise ValueError("multilinear rank of the zero tensor is undefined")
    if T.exact is not None:
        return tuple(qx.rank(_mode_matrix(T, i)) for i in range(T.order))
    return tuple(numerical_rank(_mode_matrix(T, i)) for i in range(T.order))


def ill_conditioned_modes(T) -> list[int]:
    """Modes whose flattening has a singular value in the grey zone.

    Only meaningful on the float backend; exact tensors never trip it.
    """
    T = as_tensor(T)
    if T.exact is not None:
        return []
    bad = []
    for i in range(T.order):
        s = np.linalg.svd(_mode_matrix(T, i), compute_uv=False)
        rel = s / s[0]
        if np.any((rel > GUARD_LOW) & (rel < GUARD_HIGH)):
            bad.append(i)
    return bad


@dataclass(frozen=True, eq=False)
class ConciseCore:
    core: DenseTensor
    mode_maps: tuple
    concise_shape: tuple
    exact_maps: tuple | None = None

    def expand(self) -> DenseTensor:
        """Apply every mode map to the core."""
        if self.core.exact is not None and self.exact_maps is not None:
            out = self.core.exact
            for i, U in enumerate(self.exact_maps):
                out = _mode_product_exact(out, U, i)
            return DenseTensor.from_exact(out)
        out = self.core.data
        for i, U in enumerate(self.mode_maps):
            out = np.moveaxis(np.tensordot(U, out, axes=(1, i)), 0, i)
        return DenseTensor(out)


def _mode_product_exact(X: np.ndarray, U: np.ndarray, i: int) -> np.ndarray:
    X = np.moveaxis(X, i, 0)
    rest = X.shape[1:]
    flat = X.reshape(X.shape[0], -1)
    out = np.empty((U.shape[0], flat.shape[1]), dtype=object)
    for r in range(U.shape[0]):
        for c in range(flat.shape[1]):
            acc = qx.QI(0)
            for j in range(U.shape[1]):
                if U[r, j]:
                    acc = acc + U[r, j] * flat[j, c]
            out[r, c] = acc
    return np.moveaxis(out.reshape((U.shape[0],) + rest), 0, i)


def concise_core(T) -> ConciseCore:
    """Compress ``T`` onto the spans of its fibers.

    Float tensors get orthonormal mode maps from left singular vectors. Exact
    tensors get mode maps whose columns are in reduced echelon form; the core
    is then just the sub-array of ``T`` on the pivot indices.
    """
    T = as_tensor(T)
    if T.is_zero():
        raise ValueError("the zero tensor has no concise core")
    if T.exact is not None:
        maps, pivots = [], []
        for i in range(T.order):
            r, piv = qx.rref(_mode_matrix(T, i).T)
            basis = r[: len(piv)].T  # identity on the pivot rows
            maps.append(basis)
            pivots.append(piv)
        core_ex = T.exact[np.ix_(*pivots)]
        core = DenseTensor.from_exact(core_ex)
        maps_c = tuple(qx.to_complex(U) for U in maps)
        return ConciseCore(core, maps_c, core.shape, tuple(maps))
    maps = []
    for i in range(T.order):
        M = _mode_matrix(T, i)
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        r = max(1, int(np.sum(s > RANK_CUTOFF * s[0])))
        maps.append(U[:, :r])
    core = T.data
    for i, U in enumerate(maps):
        core = np.moveaxis(np.tensordot(U.conj().T, core, axes=(1, i)), 0, i)
    core_t = DenseTensor(core)
    return ConciseCore(core_t, tuple(maps), core_t.shape)


def lift_decomposition(D: Decomposition, C: ConciseCore) -> Decomposition:
    """Map a decomposition of the core to one of the ambient tensor."""
    terms = []
    for w, p in D.terms:
        if p.shape != C.concise_shape:
            raise ValueError(f"term shape {p.shape} does not match core {C.concise_shape}")
        terms.append([U @ v for U, v in zip(C.mode_maps, p.vectors)])
    return Decomposition.from_factors(terms, D.weights)


def restrict_decomposition(D: Decomposition, C: ConciseCore) -> Decomposition:
    """Inverse of :func:`lift_decomposition` on decompositions inside the mode spans."""
    pinvs = [np.linalg.pinv(U) for U in C.mode_maps]
    terms = []
    for w, p in D.terms:
        if len(p.vectors) != len(pinvs) or any(len(v) != P.shape[1] for v, P in zip(p.vectors, pinvs)):
            raise ValueError("decomposition does not match the ambient shape")
        terms.append([P @ v for P, v in zip(pinvs, p.vectors)])
    return Decomposition.from_factors(terms, D.weights)


def span_distance(v: np.ndarray, U: np.ndarray) -> float:
    """Relative distance of a vector to the column space of U."""
    v = np.asarray(v, dtype=complex)
    Q, _ = np.linalg.qr(U)
    res = v - Q @ (Q.conj().T @ v)
    return float(np.linalg.norm(res) / np.linalg.norm(v))


def point_in_core_span(p: RankOnePoint, C: ConciseCore, tol: float = 1e-7) -> bool:
    return all(span_distance(v, U) < tol for v, U in zip(p.vectors, C.mode_maps))
