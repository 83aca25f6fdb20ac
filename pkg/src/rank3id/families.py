"""Witness generators for each case, solution-set samplers, and local dimension.

Every generator is a pure function of its seed. Degenerate draws (dependent
vectors, coincident points, a smaller concise shape than intended) are
redrawn, at most ``MAX_REDRAWS`` times.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifier import (
    CaseLabel,
    DegenerateLineError,
    Verdict,
    annihilator_form,
    classify,
    detect_x11,
    rank2_matrix_solutions,
)
from .concision import concise_core, lift_decomposition, multilinear_rank, numerical_rank
from .decomposition import RESIDUAL_TOL, fit_rank, RESTARTS
from .diagnostics import match_count
from .tensor import (
    Decomposition,
    DenseTensor,
    as_tensor,
    check_shape,
    complex_normal,
    evaluate,
    outer,
    relative_residual,
)

MAX_REDRAWS = 32
GAP_MIN = 1e4

_TAGS = {
    "matrix3": 11,
    "tangent222": 12,
    "caso3": 13,
    "caso4": 14,
    "x11": 15,
    "generic": 16,
    "sample": 17,
    "chart": 18,
}


class SamplingError(RuntimeError):
    """Fewer than two distinct decompositions were found."""


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    tensor: DenseTensor
    label: CaseLabel
    planted: Decomposition
    minimal_shape: tuple
    seed: int
    case: str = ""
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        extras = {}
        for key, val in self.extras.items():
            if isinstance(val, np.ndarray):
                extras[key] = {"re": [float(x) for x in val.real.ravel()], "im": [float(x) for x in val.imag.ravel()], "shape": list(val.shape)}
            else:
                extras[key] = val
        return {
            "tensor": self.tensor.to_json(),
            "ground_truth": {
                "case": self.case,
                "label": self.label.value,
                "planted": self.planted.to_json(),
                "minimal_shape": list(self.minimal_shape),
                "seed": self.seed,
                "extras": extras,
            },
        }


def _rng(case: str, seed: int, *extra) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_TAGS[case], int(seed), *extra]))


def _independent(*vecs) -> bool:
    return numerical_rank(np.array(vecs)) == len(vecs)


def _instance(case, T, label, planted, minimal, seed, **extras) -> GeneratedInstance | None:
    T = DenseTensor(T)
    if multilinear_rank(T) != tuple(minimal):
        return None
    if relative_residual(T, planted) >= 1e-12:
        return None
    return GeneratedInstance(T, label, planted, tuple(minimal), int(seed), case, extras)


def _redraw(case, seed, draw):
    for attempt in range(MAX_REDRAWS):
        out = draw(_rng(case, seed, attempt))
        if out is not None:
            return out
    raise RuntimeError(f"{case}: no nondegenerate draw in {MAX_REDRAWS} attempts (seed {seed})")


def _terms(vectors_per_term, shape) -> tuple[np.ndarray, Decomposition]:
    D = Decomposition.from_factors(vectors_per_term)
    return evaluate(D, shape).data, D


# ---------------------------------------------------------------------------
# generators


def gen_matrix3(seed: int) -> GeneratedInstance:
    def draw(rng):
        M = complex_normal(rng, (3, 3))
        U, s, Vh = np.linalg.svd(M)
        if s[2] < 1e-3 * s[0]:
            return None
        D = Decomposition.from_factors([[U[:, t] * s[t], Vh[t]] for t in range(3)])
        return _instance("matrix3", M, CaseLabel.Matrix3x3, D, (3, 3), seed)

    return _redraw("matrix3", seed, draw)


def gen_tangent222(seed: int) -> GeneratedInstance:
    """A general point of a tangent space to the Segre of three lines.

    The tangent presentation is not a 3-term decomposition, so the planted
    witness is a fitted one.
    """

    def draw(rng):
        a, a1, b, b1, c, c1 = (complex_normal(rng, 2) for _ in range(6))
        if not (_independent(a, a1) and _independent(b, b1) and _independent(c, c1)):
            return None
        T = outer([a1, b, c]) + outer([a, b1, c]) + outer([a, b, c1])
        T = T / np.linalg.norm(T)
        D, res, _ = fit_rank(DenseTensor(T), 3, RESTARTS[3], (_TAGS["tangent222"], int(seed)))
        if D is None:
            return None
        return _instance("tangent222", T, CaseLabel.Tangent222, D, (2, 2, 2), seed)

    return _redraw("tangent222", seed, draw)


def conic_point(phi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """The c with b^T phi c = 0 for a nondegenerate phi."""
    row = b @ phi
    return np.array([row[1], -row[0]])


def gen_caso3(seed: int) -> GeneratedInstance:
    def draw(rng):
        phi = complex_normal(rng, (2, 2))
        if abs(np.linalg.det(phi)) < 1e-2:
            return None
        bs = [complex_normal(rng, 2) for _ in range(3)]
        cs = [conic_point(phi, b) for b in bs]
        As = [complex_normal(rng, 3) for _ in range(3)]
        if not _independent(*As):
            return None
        if any(not _independent(bs[s], bs[t]) for s in range(3) for t in range(s + 1, 3)):
            return None
        T, D = _terms([[As[t], bs[t], cs[t]] for t in range(3)], (3, 2, 2))
        return _instance("caso3", T, CaseLabel.ConicIrreducible, D, (3, 2, 2), seed, phi=phi)

    return _redraw("caso3", seed, draw)


def gen_caso4(seed: int) -> GeneratedInstance:
    def draw(rng):
        b0, b1, b2, c0, c3 = (complex_normal(rng, 2) for _ in range(5))
        As = [complex_normal(rng, 3) for _ in range(3)]
        ok = (
            _independent(*As)
            and _independent(b1, b2)
            and _independent(c0, c3)
            and _independent(b0, b1)
            and _independent(b0, b2)
        )
        if not ok:
            return None
        T, D = _terms([[As[0], b1, c0], [As[1], b2, c0], [As[2], b0, c3]], (3, 2, 2))
        return _instance("caso4", T, CaseLabel.ConicReducible, D, (3, 2, 2), seed, b0=b0, c0=c0)

    return _redraw("caso4", seed, draw)


def x11_active_modes(shape) -> tuple[int, int]:
    """Validate an X11 shape and return its two active modes.

    Active modes are the 3-dimensional ones, topped up with the first
    2-dimensional modes.
    """
    shape = check_shape(shape)
    k = len(shape)
    if k < 3:
        raise ValueError(f"X11 needs order >= 3, got shape {shape}")
    if any(d not in (2, 3) for d in shape):
        raise ValueError(f"X11 mode dimensions must be 2 or 3, got {shape}")
    threes = [m for m, d in enumerate(shape) if d == 3]
    if len(threes) > 2:
        raise ValueError(f"at most two modes of dimension 3 in an X11 shape, got {shape}")
    if sum(d - 1 for d in shape) < 4:
        raise ValueError(f"X11 needs sum of projective dimensions >= 4, got shape {shape}")
    active = threes + [m for m, d in enumerate(shape) if d == 2][: 2 - len(threes)]
    return tuple(sorted(active))


def embed_isometric(vectors_per_term, shape, ambient, rng):
    """Map factors into a larger ambient shape through random isometries."""
    ambient = check_shape(ambient)
    if len(ambient) != len(shape) or any(a < d for a, d in zip(ambient, shape)):
        raise ValueError(f"ambient shape {ambient} does not contain {shape}")
    maps = [np.linalg.qr(complex_normal(rng, (a, d)))[0] for a, d in zip(ambient, shape)]
    return [[U @ v for U, v in zip(maps, vecs)] for vecs in vectors_per_term]


def gen_x11(shape, seed: int, ambient=None) -> GeneratedInstance:
    """A 2x2 pencil in two active modes, fixed unit vectors elsewhere, plus one general point.

    With ``ambient`` the construction is carried into a larger space by
    random isometries; the minimal shape stays ``shape``.
    """
    shape = check_shape(shape)
    i, j = x11_active_modes(shape)

    def draw(rng):
        a = [complex_normal(rng, shape[i]) for _ in range(2)]
        b = [complex_normal(rng, shape[j]) for _ in range(2)]
        if not (_independent(*a) and _independent(*b)):
            return None
        unit = [np.eye(d, dtype=complex)[0] for d in shape]
        pair = []
        for t in range(2):
            vecs = list(unit)
            vecs[i], vecs[j] = a[t], b[t]
            pair.append(vecs)
        p = [complex_normal(rng, d) for d in shape]
        vecs = [p] + pair
        out_shape = shape
        if ambient is not None:
            vecs = embed_isometric(vecs, shape, ambient, rng)
            out_shape = check_shape(ambient)
        T, D = _terms(vecs, out_shape)
        return _instance("x11", T, CaseLabel.X11, D, shape, seed, active_modes=[i, j], p_index=0)

    return _redraw("x11", seed, draw)


def generic_label(r: int, shape) -> tuple[CaseLabel, tuple]:
    """Expected label and concise shape of a general sum of ``r`` rank-one terms."""
    shape = check_shape(shape)
    if r not in (2, 3):
        raise ValueError("generic instances have rank 2 or 3")
    minimal = tuple(min(d, r) for d in shape)
    eff = tuple(sorted((d for d in minimal if d > 1), reverse=True))
    if len(eff) < 2 or (len(eff) == 2 and min(eff) < r):
        raise ValueError(f"rank {r} exceeds the generic rank of shape {shape}")
    if r == 2:
        label = CaseLabel.NonIdentifiableRank2Matrix if len(eff) == 2 else CaseLabel.IdentifiableRank2
    elif len(eff) == 2:
        label = CaseLabel.Matrix3x3
    elif eff == (2, 2, 2):
        raise ValueError("rank 3 exceeds the generic rank of (2, 2, 2)")
    elif eff == (2, 2, 2, 2):
        label = CaseLabel.Binary4
    elif eff == (3, 2, 2):
        label = CaseLabel.ConicIrreducible
    else:
        label = CaseLabel.IdentifiableRank3
    return label, minimal


def gen_generic(r: int, shape, seed: int) -> GeneratedInstance:
    shape = check_shape(shape)
    label, minimal = generic_label(r, shape)

    def draw(rng):
        vecs = [[complex_normal(rng, d) for d in shape] for _ in range(r)]
        T, D = _terms(vecs, shape)
        return _instance("generic", T, label, D, minimal, seed, rank=r)

    return _redraw("generic", seed, draw)


# ---------------------------------------------------------------------------
# solution-set sampling


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RANK3ID_THREADS", "1")))
    except ValueError:
        return 1


def _dedup_extend(out: list, cands, n: int, T: DenseTensor) -> None:
    for D in cands:
        if D is None or len(out) >= n:
            continue
        if relative_residual(T, D) >= RESIDUAL_TOL:
            continue
        if all(not (len(D) == len(E) and match_count(D, E) == len(D)) for E in out):
            out.append(D)


def _squeezed_core(T: DenseTensor):
    C = concise_core(T)
    keep = [m for m, d in enumerate(C.concise_shape) if d > 1]
    S = C.core.data.reshape([C.concise_shape[m] for m in keep])
    return C, keep, S


def _lift(C, keep, vectors_per_term) -> Decomposition:
    """Lift squeezed-core factors to ambient coordinates."""
    terms = []
    for vecs in vectors_per_term:
        it = iter(vecs)
        terms.append([next(it) if m in keep else np.ones(1, dtype=complex) for m in range(len(C.concise_shape))])
    return lift_decomposition(Decomposition.from_factors(terms), C)


def _matrix_sampler(T, rng):
    C, keep, M = _squeezed_core(T)
    r = M.shape[0]
    while True:
        if r == 2:
            try:
                D = rank2_matrix_solutions(M, complex_normal(rng, 3))
            except DegenerateLineError:
                continue
            yield lift_decomposition(
                Decomposition(tuple((w, _unsqueeze(p.vectors, keep, C)) for w, p in D.terms)), C
            )
        else:
            G = complex_normal(rng, (r, r))
            if numerical_rank(G) < r:
                continue
            A = M @ G
            B = np.linalg.inv(G)
            yield _lift(C, keep, [[A[:, t], B[t]] for t in range(r)])


def _unsqueeze(vectors, keep, C):
    it = iter(vectors)
    return [next(it) if m in keep else np.ones(1, dtype=complex) for m in range(len(C.concise_shape))]


def _x11_sampler(T, verdict, rng):
    W = verdict.witness
    hit = detect_x11(W, verdict.concise_shape)
    if hit is None:
        return
    (s, t), (i, j) = hit
    p_idx = ({0, 1, 2} - {s, t}).pop()
    wp, p = W.terms[p_idx]
    pair = [W.terms[s], W.terms[t]]
    A = np.array([w * q.vectors[i] for w, q in pair]).T
    B = np.array([q.vectors[j] for _, q in pair]).T
    fixed = pair[0][1].vectors
    while True:
        G = complex_normal(rng, (2, 2))
        if numerical_rank(G) < 2:
            continue
        A2, B2 = A @ G, B @ np.linalg.inv(G).T
        terms = [list(p.vectors)]
        weights = [wp]
        for u in range(2):
            vecs = list(fixed)
            vecs[i], vecs[j] = A2[:, u], B2[:, u]
            terms.append(vecs)
            weights.append(1.0)
        yield Decomposition.from_factors(terms, weights)


def _conic_sampler(T, verdict, rng):
    """Alternate between the two reducible-conic families.

    With the annihilator ``beta (x) gamma``, the pair of points either shares
    the mode-c vector killed by ``gamma`` or the mode-b vector killed by
    ``beta``; the third point carries the other distinguished vector.
    """
    C, keep, S = _squeezed_core(T)
    order = verdict.mode_order
    pos = [keep.index(m) for m in order]
    X = S.transpose(pos)  # (3, 2, 2) in sorted order
    phi = annihilator_form(T, C).phi
    U, s, Vh = np.linalg.svd(phi)
    beta, gamma = U[:, 0], Vh[0]
    kill = {1: np.array([beta[1], -beta[0]]), 2: np.array([gamma[1], -gamma[0]])}
    func = {1: beta, 2: gamma}
    inv = np.argsort(pos)
    turn = 0
    while True:
        shared = 2 if turn % 2 == 0 else 1  # mode shared by the pair
        other = 3 - shared
        turn += 1
        v0 = kill[shared]
        e = complex_normal(rng, 2)
        if abs(func[shared] @ e) < 1e-3:
            continue
        e = e / (func[shared] @ e)
        Y = np.tensordot(X, func[shared], axes=([shared], [0]))  # (3, 2): a x other
        Xs = np.tensordot(X, _dual(v0, e), axes=([shared], [0]))
        alpha = complex_normal(rng, None)
        Xp = Xs - alpha * Y
        ua, sa, va = np.linalg.svd(Y)
        y_a, y_o = ua[:, 0] * sa[0], va[0]
        G = complex_normal(rng, (2, 2))
        if numerical_rank(G) < 2:
            continue
        Um, sm, Vm = np.linalg.svd(Xp, full_matrices=False)
        A = (Um * sm) @ G
        B = np.linalg.inv(G) @ Vm
        terms = []
        third = [y_a, None, None]
        third[shared] = e + alpha * v0
        third[other] = y_o
        terms.append(third)
        for u in range(2):
            vec = [A[:, u], None, None]
            vec[shared] = v0
            vec[other] = B[u]
            terms.append(vec)
        yield _lift(C, keep, [[t[k] for k in inv] for t in terms])


def _dual(v0, e):
    """Functional equal to 1 on v0 and 0 on e."""
    M = np.array([v0, e]).T
    return np.linalg.inv(M)[0]


def _conic_irreducible_sampler(T, verdict, rng):
    C, keep, S = _squeezed_core(T)
    order = verdict.mode_order
    pos = [keep.index(m) for m in order]
    X = S.transpose(pos).reshape(3, 4)
    phi = annihilator_form(T, C).phi
    inv = np.argsort(pos)
    while True:
        bs = [complex_normal(rng, 2) for _ in range(3)]
        cs = [conic_point(phi, b) for b in bs]
        Ms = np.array([np.outer(b, c).reshape(-1) for b, c in zip(bs, cs)])
        if numerical_rank(Ms) < 3:
            continue
        A, *_ = np.linalg.lstsq(Ms.T, X.T, rcond=None)  # X = A^T Ms
        terms = [[A[t], bs[t], cs[t]] for t in range(3)]
        yield _lift(C, keep, [[t[k] for k in inv] for t in terms])


def _restart_sampler(T, verdict, seed):
    C, keep, S = _squeezed_core(T)
    r = verdict.rank if verdict.rank else 3
    S_t = DenseTensor(S)
    root = (int(T.digest()[:15], 16), int(seed), _TAGS["sample"])
    idx = 0

    def one(k):
        D, res, _ = fit_rank(S_t, r, 16, root + (k,), batch=16)
        if D is None or res >= RESIDUAL_TOL:
            return None
        return _lift(C, keep, [list(p.vectors) for p in D.points]), D.weights

    workers = _threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while True:
            batch = list(pool.map(one, range(idx, idx + workers)))
            idx += workers
            for item in batch:
                if item is None:
                    yield None
                else:
                    D, w = item
                    yield Decomposition(tuple((wi * wd, p) for wi, (wd, p) in zip(w, D.terms)))


def sample_solution_set(T, n: int, seed: int = 0, verdict: Verdict | None = None, budget: int | None = None) -> list:
    """Sample ``n`` distinct decompositions of ``T`` realising its rank.

    Structured samplers are used when the case admits one; otherwise seeded
    restarts of the fitting routine. Raises :class:`SamplingError` when fewer
    than two distinct decompositions turn up within the budget.
    """
    T = as_tensor(T)
    verdict = classify(T, seed, second_witness=False) if verdict is None else verdict
    if verdict.rank is None or verdict.witness is None:
        raise SamplingError("no certified rank, nothing to sample")
    rng = _rng("sample", seed, int(T.digest()[:15], 16) % (2**32))
    label = verdict.label
    if label in (CaseLabel.Matrix3x3, CaseLabel.NonIdentifiableRank2Matrix):
        gen = _matrix_sampler(T, rng)
    elif label is CaseLabel.X11:
        gen = _x11_sampler(T, verdict, rng)
    elif label is CaseLabel.ConicReducible:
        gen = _conic_sampler(T, verdict, rng)
    elif label is CaseLabel.ConicIrreducible:
        gen = _conic_irreducible_sampler(T, verdict, rng)
    else:
        gen = _restart_sampler(T, verdict, seed)
    budget = budget if budget is not None else (4 * n + 8 if label not in IDENT else 6)
    out: list = []
    for _, D in zip(range(budget), gen):
        _dedup_extend(out, [D], n, T)
        if len(out) >= n:
            break
    if len(out) < 2:
        raise SamplingError(f"found {len(out)} distinct decomposition(s) for a {label.value} tensor")
    return out


IDENT = {CaseLabel.IdentifiableRank1, CaseLabel.IdentifiableRank2, CaseLabel.IdentifiableRank3}


# ---------------------------------------------------------------------------
# local dimension


@dataclass(frozen=True, eq=False)
class DimensionEstimate:
    dim: int
    jacobian_spectrum: np.ndarray
    gap_ratio: float
    reliable: bool
    n_params: int

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "gap_ratio": float(self.gap_ratio),
            "reliable": self.reliable,
            "n_params": self.n_params,
        }


def _chart_directions(v: np.ndarray, rng) -> np.ndarray:
    """Columns spanning the tangent directions of an affine chart centred at ``v``."""
    n = len(v)
    if rng is None:
        j = int(np.argmax(np.abs(v)))
        return np.eye(n, dtype=complex)[:, [m for m in range(n) if m != j]]
    ell = complex_normal(rng, n)
    while abs(ell @ v) < 1e-3 * np.linalg.norm(ell) * np.linalg.norm(v):
        ell = complex_normal(rng, n)
    _, _, Vh = np.linalg.svd(ell.reshape(1, n))
    return Vh[1:].conj().T


def local_jacobian(D: Decomposition, shape, chart_seed: int | None = None) -> np.ndarray:
    """Jacobian of (chart coordinates, weights) -> sum of weighted rank-one tensors."""
    rng = None if chart_seed is None else _rng("chart", chart_seed)
    cols = []
    for w, p in D.terms:
        vecs = p.vectors
        cols.append(outer(vecs).reshape(-1))
        for m, v in enumerate(vecs):
            for d in _chart_directions(v, rng).T:
                moved = list(vecs)
                moved[m] = d
                cols.append(w * outer(moved).reshape(-1))
    J = np.array(cols).T
    if J.shape[0] != int(np.prod(shape)):
        raise ValueError("decomposition does not match the tensor shape")
    return J


def estimate_local_dim(T, D: Decomposition, chart_seed: int | None = None) -> DimensionEstimate:
    """Dimension of the solution set at ``D``, as Jacobian nullity.

    The rank of the Jacobian is cut at the largest gap of its singular
    values; a gap below ``GAP_MIN`` marks the estimate unreliable.
    """
    T = as_tensor(T)
    res = relative_residual(T, D)
    if res >= RESIDUAL_TOL:
        raise ValueError(f"decomposition residual {res:.2e} exceeds {RESIDUAL_TOL}")
    J = local_jacobian(D, T.shape, chart_seed)
    N, P = J.shape
    s = np.linalg.svd(J, compute_uv=False)
    floor = np.finfo(float).eps * s[0] * max(N, P)
    ext = np.concatenate([s[:P], np.zeros(max(0, P - len(s)) + 1)])
    gaps = ext[:P] / np.maximum(ext[1 : P + 1], floor)
    best_r = int(np.argmax(gaps)) + 1
    best_gap = gaps[best_r - 1]
    return DimensionEstimate(P - best_r, s, float(best_gap), bool(best_gap >= GAP_MIN), P)


__all__ = [
    "DimensionEstimate",
    "GeneratedInstance",
    "SamplingError",
    "conic_point",
    "embed_isometric",
    "estimate_local_dim",
    "gen_caso3",
    "gen_caso4",
    "gen_generic",
    "gen_matrix3",
    "gen_tangent222",
    "gen_x11",
    "generic_label",
    "local_jacobian",
    "sample_solution_set",
    "x11_active_modes",
]
