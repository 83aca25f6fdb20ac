"""Rank <= 3 certification with witness decompositions.

Rank decisions are taken on the concise core. Matrices are settled by the
SVD, concise 2x2x2 tensors by the Cayley hyperdeterminant, everything else
by simultaneous diagonalization on mode groupings followed by seeded
multi-restart least squares (batched ALS, then a damped Gauss-Newton
polish).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .concision import concise_core, lift_decomposition, numerical_rank
from .tensor import (
    Decomposition,
    DenseTensor,
    as_tensor,
    complex_normal,
    flatten,
    relative_residual,
)

RESIDUAL_TOL = 1e-8
HYPERDET_TOL = 1e-10
RESTARTS = {2: 64, 3: 256}


@dataclass(frozen=True, eq=False)
class RankReport:
    rank: int | None  # None means Unknown
    witness: Decomposition | None = None
    border_flag: bool = False
    method: str = "fit"
    residual: float | None = None
    lower_bound: int = 1

    @property
    def known(self) -> bool:
        return self.rank is not None


# ---------------------------------------------------------------------------
# 2x2x2 hyperdeterminant


def _cayley(a):
    """Cayley's quartic on a 2x2x2 array (works on floats and on QI objects)."""
    a000, a001, a010, a011 = a[0, 0, 0], a[0, 0, 1], a[0, 1, 0], a[0, 1, 1]
    a100, a101, a110, a111 = a[1, 0, 0], a[1, 0, 1], a[1, 1, 0], a[1, 1, 1]
    sq = (
        a000 * a000 * a111 * a111
        + a001 * a001 * a110 * a110
        + a010 * a010 * a101 * a101
        + a100 * a100 * a011 * a011
    )
    cross = (
        a000 * a001 * a110 * a111
        + a000 * a010 * a101 * a111
        + a000 * a100 * a011 * a111
        + a001 * a010 * a101 * a110
        + a001 * a100 * a011 * a110
        + a010 * a100 * a011 * a101
    )
    quart = a000 * a011 * a101 * a110 + a001 * a010 * a100 * a111
    return sq - 2 * cross + 4 * quart


def hyperdet222(T):
    """Cayley hyperdeterminant of a 2x2x2 tensor.

    Returns a :class:`~rank3id.exact.QI` for exact tensors, a complex
    number otherwise. Homogeneous of degree 4.
    """
    T = as_tensor(T)
    if T.shape != (2, 2, 2):
        raise ValueError(f"hyperdet222 needs shape (2, 2, 2), got {T.shape}")
    if T.exact is not None:
        return _cayley(T.exact)
    return complex(_cayley(T.data))


def hyperdet_vanishes(T) -> bool:
    T = as_tensor(T)
    d = hyperdet222(T)
    if T.exact is not None:
        return not d
    return abs(d) <= HYPERDET_TOL * T.norm() ** 4


# ---------------------------------------------------------------------------
# grouped factors


def split_grouped_factor(v, sizes, tol: float = 1e-6):
    """Undo a mode grouping: factor ``v`` as an outer product of vectors.

    Returns one vector per entry of ``sizes`` (their outer product reshapes
    to ``v``), or None when ``v`` is not rank one across every split.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    sizes = [int(s) for s in sizes]
    if int(np.prod(sizes)) != v.size:
        raise ValueError(f"vector of length {v.size} does not split as {sizes}")
    if len(sizes) == 1:
        return [v.copy()]
    out = []
    rest = v
    for n in sizes[:-1]:
        M = rest.reshape(n, -1)
        U, s, Vh = np.linalg.svd(M, full_matrices=False)
        if s[0] == 0:
            return None
        if len(s) > 1 and s[1] > tol * s[0]:
            return None
        out.append(U[:, 0] * s[0])
        rest = Vh[0]
    out.append(rest)
    return out


# ---------------------------------------------------------------------------
# simultaneous diagonalization


def jennrich(T, r: int, rng: np.random.Generator | None = None):
    """Decompose an order-3 tensor by diagonalizing a pencil of its slices.

    Works when the first two factor matrices have full column rank ``r``
    and the third has pairwise independent columns. Returns None when the
    pencil is defective, has clustered eigenvalues, or the result does not
    reconstruct ``T``.
    """
    T = as_tensor(T)
    if T.order != 3:
        raise ValueError(f"jennrich needs an order-3 tensor, got order {T.order}")
    rng = np.random.default_rng(0) if rng is None else rng
    X = T.data
    I, J, K = X.shape
    if r < 1 or r > min(I, J):
        return None
    U1, s1, _ = np.linalg.svd(X.reshape(I, -1), full_matrices=False)
    U2, s2, _ = np.linalg.svd(X.transpose(1, 0, 2).reshape(J, -1), full_matrices=False)
    if numerical_rank(np.diag(s1)) != r or numerical_rank(np.diag(s2)) != r:
        return None
    U1, U2 = U1[:, :r], U2[:, :r]
    Xc = np.einsum("ia,jb,ijk->abk", U1.conj(), U2.conj(), X)
    x = complex_normal(rng, K)
    y = complex_normal(rng, K)
    S1 = Xc @ x
    S2 = Xc @ y
    if np.linalg.cond(S2) > 1e10:
        return None
    lam, A = np.linalg.eig(S1 @ np.linalg.inv(S2))
    scale = max(np.abs(lam).max(), 1e-300)
    if r > 1:
        gaps = [abs(lam[a] - lam[b]) for a in range(r) for b in range(a + 1, r)]
        if min(gaps) < 1e-6 * scale:
            return None
    if np.linalg.cond(A) > 1e8:
        return None
    order = sorted(range(r), key=lambda t: (round(lam[t].real, 12), round(lam[t].imag, 12)))
    A = A[:, order]
    Z = np.linalg.solve(A, Xc.reshape(r, -1))
    terms = []
    for t in range(r):
        bc = split_grouped_factor(Z[t], (r, K))
        if bc is None:
            return None
        terms.append([U1 @ A[:, t], U2 @ bc[0], bc[1]])
    D = Decomposition.from_factors(terms)
    if T.norm() == 0 or relative_residual(T, D) >= RESIDUAL_TOL:
        return None
    return D


def _groupings(k: int):
    """Ordered (A, B) mode groups for grouped diagonalization; C is the rest."""
    singles = [((i,), (j,)) for i in range(k) for j in range(k) if i != j]
    pairs = []
    for size_a, size_b in ((1, 2), (2, 1), (2, 2)):
        for A in itertools.combinations(range(k), size_a):
            for B in itertools.combinations([m for m in range(k) if m not in A], size_b):
                pairs.append((A, B))
    for A, B in singles + pairs:
        if len(A) + len(B) < k:
            yield A, B


def jennrich_grouped(T, r: int, rng: np.random.Generator | None = None):
    """Run :func:`jennrich` on mode groupings of an order-k tensor (k >= 3)."""
    T = as_tensor(T)
    k = T.order
    if k < 3:
        return None
    rng = np.random.default_rng(0) if rng is None else rng
    ranks: dict = {}

    def grp_rank(g):
        if g not in ranks:
            ranks[g] = numerical_rank(flatten(T, g)) if len(g) < k else 1
        return ranks[g]

    for A, B in _groupings(k):
        if grp_rank(A) != r or grp_rank(B) != r:
            continue
        C = tuple(m for m in range(k) if m not in A and m not in B)
        perm = A + B + C
        dims = [T.shape[m] for m in perm]
        na = int(np.prod(dims[: len(A)]))
        nb = int(np.prod(dims[len(A) : len(A) + len(B)]))
        G = DenseTensor(T.data.transpose(perm).reshape(na, nb, -1))
        D = jennrich(G, r, rng)
        if D is None:
            continue
        terms = []
        for w, p in D.terms:
            fa = split_grouped_factor(p.vectors[0], dims[: len(A)])
            fb = split_grouped_factor(p.vectors[1], dims[len(A) : len(A) + len(B)])
            fc = split_grouped_factor(p.vectors[2], dims[len(A) + len(B) :])
            if fa is None or fb is None or fc is None:
                break
            fa[0] = fa[0] * w
            vecs = fa + fb + fc
            ordered = [None] * k
            for pos, m in enumerate(perm):
                ordered[m] = vecs[pos]
            terms.append(ordered)
        else:
            out = Decomposition.from_factors(terms)
            if relative_residual(T, out) < RESIDUAL_TOL:
                return out
    return None


# ---------------------------------------------------------------------------
# least squares


def _model(factors):
    """Batched CP reconstruction; factors[m] has shape (R, n_m, r)."""
    k = len(factors)
    args = []
    for m, F in enumerate(factors):
        args += [F, [k, m, k + 1]]
    return np.einsum(*args, [k] + list(range(k)))


def _als_sweeps(X, factors, iters, tol=1e-12, ridge=1e-13):
    """Batched alternating least squares; returns factors and residual history."""
    k = X.ndim
    R, r = factors[0].shape[0], factors[0].shape[2]
    nrm = np.linalg.norm(X)
    eye = np.eye(r)
    history = []
    res = np.linalg.norm((_model(factors) - X).reshape(R, -1), axis=1) / nrm
    history.append(res)
    active = np.ones(R, dtype=bool)
    for _ in range(iters):
        for m in range(k):
            others = [q for q in range(k) if q != m]
            G = np.ones((R, r, r), dtype=complex)
            for q in others:
                F = factors[q]
                G = G * np.einsum("bit,bis->bts", F, F.conj())
            args = [X, list(range(k))]
            for q in others:
                args += [factors[q].conj(), [k, q, k + 1]]
            rhs = np.einsum(*args, [k, m, k + 1])
            tr = np.real(np.trace(G, axis1=1, axis2=2))[:, None, None] / r
            Gs = G + ridge * np.maximum(tr, 1e-300) * eye
            new = np.linalg.solve(np.swapaxes(Gs, 1, 2), np.swapaxes(rhs, 1, 2))
            factors[m] = np.where(active[:, None, None], np.swapaxes(new, 1, 2), factors[m])
        # balance column norms across modes
        norms = np.stack([np.linalg.norm(F, axis=1) for F in factors])  # (k, R, r)
        norms = np.maximum(norms, 1e-300)
        geo = np.exp(np.mean(np.log(norms), axis=0))
        for m in range(k):
            factors[m] = factors[m] * (geo / norms[m])[:, None, :]
        new_res = np.linalg.norm((_model(factors) - X).reshape(R, -1), axis=1) / nrm
        improved = res - new_res
        active &= (improved > tol * np.maximum(res, 1e-300)) & (new_res > 1e-15)
        res = np.where(active | (new_res < res), new_res, res)
        history.append(new_res)
        if not active.any():
            break
    return factors, history


def _jacobian(factors):
    """Jacobian of the CP model w.r.t. all factor entries (single instance)."""
    k = len(factors)
    r = factors[0].shape[1]
    shape = tuple(F.shape[0] for F in factors)
    cols = []
    for m in range(k):
        n = shape[m]
        eye = np.eye(n)
        for t in range(r):
            args = []
            for q in range(k):
                if q == m:
                    args += [eye, [q, k]]
                else:
                    args += [factors[q][:, t], [q]]
            blk = np.einsum(*args, list(range(k)) + [k]).reshape(-1, n)
            cols.append((m, t, blk))
    # order columns as concatenated F_m.ravel() (row-major: index i*r + t)
    J = np.zeros((int(np.prod(shape)), sum(n * r for n in shape)), dtype=complex)
    offset = 0
    for m in range(k):
        n = shape[m]
        for m2, t, blk in cols:
            if m2 == m:
                J[:, offset + np.arange(n) * r + t] = blk
        offset += n * r
    return J


STALL_WINDOW = 200
POLISH_ITERS = 1500


def _lm_polish(X, factors, iters=80, target=1e-15):
    """Damped Gauss-Newton on the complex CP model; accepts only decreasing steps."""
    nrm = np.linalg.norm(X)
    sizes = [F.size for F in factors]

    def unpack(x):
        out, off = [], 0
        for F, sz in zip(factors, sizes):
            out.append(x[off : off + sz].reshape(F.shape))
            off += sz
        return out

    x = np.concatenate([F.ravel() for F in factors])
    f = (_model([F[None] for F in unpack(x)])[0] - X).reshape(-1)
    res = np.linalg.norm(f) / nrm
    mu = 1e-3
    window = [res]
    for _ in range(iters):
        if res < target:
            break
        J = _jacobian(unpack(x))
        JH = J.conj().T
        H = JH @ J
        g = JH @ f
        d = np.real(np.diag(H)).copy()
        d = np.maximum(d, 1e-12 * max(d.max(), 1e-300))
        try:
            step = np.linalg.solve(H + mu * np.diag(d), -g)
        except np.linalg.LinAlgError:
            mu *= 10
            continue
        xn = x + step
        fn = (_model([F[None] for F in unpack(xn)])[0] - X).reshape(-1)
        rn = np.linalg.norm(fn) / nrm
        if rn < res:
            x, f, res = xn, fn, rn
            mu = max(mu / 5, 1e-12)
        else:
            mu *= 4
            if mu > 1e8:
                break
        # stagnation: less than a halving of the residual over STALL_WINDOW steps
        window.append(res)
        if len(window) > STALL_WINDOW and res > 0.5 * window[-STALL_WINDOW - 1]:
            break
    return unpack(x), res


def _factors_to_decomposition(factors) -> Decomposition:
    r = factors[0].shape[1]
    return Decomposition.from_factors([[F[:, t] for F in factors] for t in range(r)])


def _decomposition_to_factors(D: Decomposition):
    k = len(D.points[0].vectors)
    r = len(D)
    factors = [np.stack([p.vectors[m] for p in D.points], axis=1).astype(complex) for m in range(k)]
    w = D.weights
    factors[0] = factors[0] * w[None, :]
    assert factors[0].shape[1] == r
    return factors


def als_refine(T, D0: Decomposition, max_iters: int = 500, tol: float = 1e-12):
    """Alternating least squares from ``D0``.

    Stops when a sweep improves the relative residual by less than ``tol``
    (relative) or after ``max_iters`` sweeps. ALS crawls through swamps
    (long plateaus of slow linear convergence); when the contraction over
    five sweeps stays above 0.9 the remaining budget goes to damped
    Gauss-Newton steps, which only accept decreases. The residual history
    is available via :func:`als_refine_history`.
    """
    D, _ = als_refine_history(T, D0, max_iters, tol)
    return D


def als_refine_history(T, D0: Decomposition, max_iters: int = 500, tol: float = 1e-12):
    T = as_tensor(T)
    if tuple(D0.points[0].shape) != T.shape:
        raise ValueError("decomposition and tensor shapes differ")
    factors = [F[None] for F in _decomposition_to_factors(D0)]
    hist: list[float] = []
    used = 0
    while used < max_iters:
        chunk = min(5, max_iters - used)
        factors, history = _als_sweeps(T.data, factors, chunk, tol)
        h = [float(x[0]) for x in history]
        hist.extend(h if not hist else h[1:])
        used += len(h) - 1
        if len(h) - 1 < chunk or h[-1] < 1e-15:
            break  # converged or no longer improving
        if h[-1] > 0.9 ** (len(h) - 1) * h[0]:
            single, res = _lm_polish(T.data, [F[0] for F in factors], iters=max_iters - used)
            if res < hist[-1]:
                factors = [F[None] for F in single]
                hist.append(float(res))
            break
    out = _factors_to_decomposition([F[0] for F in factors])
    if hist and hist[-1] > hist[0]:
        return D0, hist[:1]
    return out, hist


def _restart_init(shape, r, seed_root, index):
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_root) + [index]))
    return [complex_normal(rng, (n, r)) for n in shape]


def fit_rank(T, r: int, restarts: int, seed_root=(0,), batch: int = 16, sweeps: int = 200):
    """Seeded multi-restart fit of an exact rank-r decomposition.

    Returns ``(decomposition, residual, restart_index)`` for the first
    restart (in index order within the residual-sorted candidates of each
    batch) that reaches the acceptance tolerance, or the best attempt.
    """
    T = as_tensor(T)
    X = T.data / T.norm()
    scale = T.norm()
    best = (None, np.inf, -1)
    for start in range(0, restarts, batch):
        idx = list(range(start, min(start + batch, restarts)))
        inits = [_restart_init(X.shape, r, seed_root, i) for i in idx]
        factors = [np.stack([f[m] for f in inits]) for m in range(X.ndim)]
        factors, history = _als_sweeps(X, factors, sweeps)
        res = history[-1]
        cand = sorted(range(len(idx)), key=lambda b: (res[b], idx[b]))
        for b in cand[:3]:
            if res[b] > 0.2:
                break
            F, rr = _lm_polish(X, [f[b] for f in factors], iters=POLISH_ITERS)
            if rr < best[1]:
                F = [F[0] * scale] + F[1:]
                best = (_factors_to_decomposition(F), rr, idx[b])
            if rr < RESIDUAL_TOL:
                D = best[0]
                return D, relative_residual(T, D), best[2]
    if best[0] is None:
        return None, np.inf, -1
    return best


# ---------------------------------------------------------------------------
# rank certification


def _seed_root(T: DenseTensor, seed: int):
    return (int(T.digest()[:15], 16), int(seed))


def _embed_squeezed(D: Decomposition, keep, full_shape) -> Decomposition:
    terms = []
    for w, p in D.terms:
        vecs = []
        it = iter(p.vectors)
        for m, n in enumerate(full_shape):
            vecs.append(next(it) if m in keep else np.ones(1, dtype=complex))
        terms.append((w, vecs))
    return Decomposition(tuple(terms))


def _svd_witness(M: np.ndarray, r: int) -> Decomposition:
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    return Decomposition.from_factors([[U[:, t] * s[t], Vh[t]] for t in range(r)])


def rank_leq3(T, seed: int = 0, restarts: dict | None = None) -> RankReport:
    """Certify rank 1, 2 or 3 and return a witness decomposition of ``T``.

    The witness is expressed in ``T``'s own coordinates. Returns rank None
    (Unknown) when no rank <= 3 decomposition is certified.
    """
    T = as_tensor(T)
    if T.is_zero():
        raise ValueError("rank of the zero tensor is not defined here")
    budget = dict(RESTARTS)
    if restarts:
        budget.update(restarts)
    C = concise_core(T)
    core = C.core
    ml = C.concise_shape
    lower = max(ml)

    def done(rank, D_core, method, border=False):
        D = lift_decomposition(D_core, C)
        return RankReport(rank, D, border, method, relative_residual(T, D), lower)

    if lower == 1:
        val = core.data.reshape(-1)[0]
        D1 = Decomposition(((val, [np.ones(1)] * T.order),))
        return done(1, D1, "svd")
    if lower > 3:
        return RankReport(None, None, False, "svd", None, lower)

    keep = [m for m, d in enumerate(ml) if d > 1]
    S_data = core.data.reshape([ml[m] for m in keep])
    S_exact = None if core.exact is None else core.exact.reshape([ml[m] for m in keep])
    S = DenseTensor(S_data, S_exact)
    root = _seed_root(S, seed)
    rng = np.random.default_rng(np.random.SeedSequence(list(root) + [10**6]))

    def wrap(D_s, rank, method, border=False):
        return done(rank, _embed_squeezed(D_s, keep, ml), method, border)

    if len(keep) == 2:
        return wrap(_svd_witness(S.data, lower), lower, "svd")

    if S.shape == (2, 2, 2):
        if not hyperdet_vanishes(S):
            D = jennrich(S, 2, rng)
            if D is None:
                D, res, _ = fit_rank(S, 2, budget[2], root)
                if D is None or res >= RESIDUAL_TOL:
                    return RankReport(None, None, False, "hyperdet", None, lower)
            return wrap(D, 2, "hyperdet")
        D, res, _ = fit_rank(S, 3, budget[3], root)
        if D is None or res >= RESIDUAL_TOL:
            return RankReport(None, None, True, "hyperdet", None, 3)
        return wrap(D, 3, "hyperdet", border=True)

    if lower <= 2:
        D = jennrich_grouped(S, 2, rng)
        if D is not None:
            return wrap(D, 2, "eigen")
        D, res, _ = fit_rank(S, 2, budget[2], root)
        if D is not None and res < RESIDUAL_TOL:
            return wrap(D, 2, "fit")
    D = jennrich_grouped(S, 3, rng)
    if D is not None:
        return wrap(D, 3, "eigen")
    D, res, _ = fit_rank(S, 3, budget[3], root)
    if D is not None and res < RESIDUAL_TOL:
        return wrap(D, 3, "fit")
    return RankReport(None, None, False, "fit", None, max(lower, 3))
