"""Identifiability verdicts for tensors of rank 2 and 3."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from . import exact as qx
from .concision import (
    RANK_CUTOFF,
    ConciseCore,
    concise_core,
    ill_conditioned_modes,
    lift_decomposition,
    numerical_rank,
)
from .decomposition import RankReport, rank_leq3
from .tensor import Decomposition, as_tensor, complex_normal

X11_TOL = 1e-6


class CaseLabel(str, enum.Enum):
    IdentifiableRank1 = "IdentifiableRank1"
    IdentifiableRank2 = "IdentifiableRank2"
    NonIdentifiableRank2Matrix = "NonIdentifiableRank2Matrix"
    IdentifiableRank3 = "IdentifiableRank3"
    Matrix3x3 = "Matrix3x3"
    Tangent222 = "Tangent222"
    Binary4 = "Binary4"
    ConicIrreducible = "ConicIrreducible"
    ConicReducible = "ConicReducible"
    X11 = "X11"
    Refused = "Refused"

    @property
    def identifiable(self) -> bool:
        return self in IDENTIFIABLE

    @property
    def refused(self) -> bool:
        return self is CaseLabel.Refused


IDENTIFIABLE = {
    CaseLabel.IdentifiableRank1,
    CaseLabel.IdentifiableRank2,
    CaseLabel.IdentifiableRank3,
}


@dataclass(frozen=True)
class DimClaim:
    value: int
    kind: str  # "exact" or "lower_bound"

    def accepts(self, measured: int) -> bool:
        return measured == self.value if self.kind == "exact" else measured >= self.value


@dataclass(frozen=True, eq=False)
class Verdict:
    label: CaseLabel
    rank: int | None
    concise_shape: tuple
    dim_claim: DimClaim | None = None
    witness: Decomposition | None = None
    second_witness: Decomposition | None = None
    flags: tuple = ()
    mode_order: tuple = ()
    active_modes: tuple | None = None
    rank_report: RankReport | None = None

    @property
    def identifiable(self) -> bool:
        return self.label.identifiable

    def to_json(self) -> dict:
        return {
            "label": self.label.value,
            "rank": self.rank,
            "concise_shape": list(self.concise_shape),
            "dim": None
            if self.dim_claim is None
            else {"value": self.dim_claim.value, "kind": self.dim_claim.kind},
            "witness": None if self.witness is None else self.witness.to_json(),
            "second_witness": None if self.second_witness is None else self.second_witness.to_json(),
            "flags": list(self.flags),
        }


@dataclass(frozen=True, eq=False)
class AnnihilatorForm:
    """Bilinear form on the two binary modes killing every mode-0 slice.

    ``phi`` is in concise-core coordinates; ``phi_ambient`` in the
    coordinates of the analysed tensor. ``modes`` are the (b, c) mode
    indices it acts on, ``slice_mode`` the 3-dimensional mode.
    """

    phi: np.ndarray
    rank: int
    phi_ambient: np.ndarray
    slice_mode: int
    modes: tuple


def _sorted_modes(shape) -> tuple:
    """Mode indices with dim > 1, sorted by descending dim (stable)."""
    eff = [m for m, d in enumerate(shape) if d > 1]
    return tuple(sorted(eff, key=lambda m: -shape[m]))


def annihilator_form(T, core: ConciseCore | None = None) -> AnnihilatorForm:
    """The form, unique up to scale, vanishing on the slice span of a concise (3,2,2) tensor."""
    T = as_tensor(T)
    C = concise_core(T) if core is None else core
    order = _sorted_modes(C.concise_shape)
    if tuple(C.concise_shape[m] for m in order) != (3, 2, 2):
        raise ValueError(f"annihilator_form needs concise shape (3, 2, 2), got {C.concise_shape}")
    a, b, c = order
    full = list(order) + [m for m in range(T.order) if m not in order]
    src = C.core.exact if C.core.exact is not None else C.core.data
    slices = src.transpose(full).reshape(3, 4)
    if C.core.exact is not None:
        if qx.rank(slices) != 3:
            raise ValueError("slice span is not 3-dimensional; tensor is not concise")
        ns = qx.nullspace(slices)
        phi_ex = ns[:, 0].reshape(2, 2)
        rank = qx.rank(phi_ex)
        phi = qx.to_complex(phi_ex)
    else:
        _, s, Vh = np.linalg.svd(slices)
        if s[2] <= RANK_CUTOFF * s[0]:
            raise ValueError("slice span is not 3-dimensional; tensor is not concise")
        # sum phi_jk S_jk = 0  <=>  phi.ravel() is orthogonal to conj of the rows
        phi = Vh[3].conj().reshape(2, 2)
        rank = numerical_rank(phi)
    Lb = np.linalg.pinv(C.mode_maps[b])
    Lc = np.linalg.pinv(C.mode_maps[c])
    phi_amb = Lb.T @ phi @ Lc
    return AnnihilatorForm(phi, rank, phi_amb, a, (b, c))


def detect_x11(D: Decomposition, shape=None, tol: float = X11_TOL):
    """Find the unique pair of terms differing in exactly two modes.

    Returns ``((s, t), (i, j))`` with term indices and the two modes where
    they differ, or None when no such pair exists or it is not unique.
    """
    if D is None or len(D) != 3:
        return None
    pts = D.points
    k = len(pts[0].vectors)
    if shape is not None:
        eff = [m for m, d in enumerate(shape) if d > 1]
        if len(eff) < 3:
            return None
    found = []
    for s in range(3):
        for t in range(s + 1, 3):
            dist = pts[s].mode_distances(pts[t])
            diff = [m for m in range(k) if dist[m] >= tol]
            if len(diff) == 2:
                found.append(((s, t), tuple(diff)))
    return found[0] if len(found) == 1 else None


# ---------------------------------------------------------------------------
# rank-2 matrices


class DegenerateLineError(ValueError):
    """The chosen line through q is tangent to the rank-one quadric."""


def polar_plane_basis(q) -> np.ndarray:
    """Three 2x2 matrices spanning {M : tr(adj(q) M) = 0}."""
    q = np.asarray(q, dtype=complex)
    adj = np.array([[q[1, 1], -q[0, 1]], [-q[1, 0], q[0, 0]]])
    _, _, Vh = np.linalg.svd(adj.T.reshape(1, 4))
    return np.array([Vh[i].conj().reshape(2, 2) for i in range(1, 4)])


def rank2_matrix_solutions(q, o) -> Decomposition:
    """The two rank-one matrices on the line through ``q`` and ``o``.

    ``o`` is any 2x2 matrix not proportional to ``q`` (it is first moved
    into the polar plane of ``q`` along the line), or a 3-vector of
    coordinates in :func:`polar_plane_basis`. Raises
    :class:`DegenerateLineError` on a tangent line.
    """
    q = np.asarray(q, dtype=complex)
    if q.shape != (2, 2):
        raise ValueError("q must be a 2x2 matrix")
    dq = np.linalg.det(q)
    if abs(dq) <= 1e-12 * np.linalg.norm(q) ** 2:
        raise ValueError("q must be invertible")
    o = np.asarray(o, dtype=complex)
    if o.shape == (3,):
        o = np.tensordot(o, polar_plane_basis(q), axes=1)
    if o.shape != (2, 2):
        raise ValueError("o must be a 2x2 matrix or a 3-vector")
    adj = np.array([[q[1, 1], -q[0, 1]], [-q[1, 0], q[0, 0]]])
    # polar pairing B(X, Y) = tr(adj(X) Y) / 2, B(q, q) = det q
    o = o - (np.trace(adj @ o) / 2 / dq) * q
    no = np.linalg.norm(o)
    if no <= 1e-12 * np.linalg.norm(q):
        raise DegenerateLineError("o is proportional to q")
    o = o / no
    do = np.linalg.det(o)
    if abs(do) <= 1e-10 * abs(dq) / np.linalg.norm(q) ** 2:
        raise DegenerateLineError("line through q and o is tangent to the rank-one locus")
    t = np.sqrt(-dq / do)
    terms = []
    for p in (q + t * o, q - t * o):
        U, s, Vh = np.linalg.svd(p)
        terms.append([U[:, 0] * s[0] / 2, Vh[0]])
    return Decomposition.from_factors(terms)


# ---------------------------------------------------------------------------
# verdicts


def _core_to_ambient(D_sq: Decomposition, keep, C: ConciseCore) -> Decomposition:
    """Embed a decomposition of the squeezed core back into T's coordinates."""
    terms = []
    for w, p in D_sq.terms:
        it = iter(p.vectors)
        vecs = [next(it) if m in keep else np.ones(1, dtype=complex) for m in range(len(C.concise_shape))]
        terms.append((w, vecs))
    return lift_decomposition(Decomposition(tuple(terms)), C)


def rank2_identifiability(T, report: RankReport | None = None, seed: int = 0, core: ConciseCore | None = None) -> Verdict:
    T = as_tensor(T)
    report = rank_leq3(T, seed) if report is None else report
    if report.rank != 2:
        raise ValueError(f"rank2_identifiability needs a rank-2 tensor, got rank {report.rank}")
    C = concise_core(T) if core is None else core
    order = _sorted_modes(C.concise_shape)
    if len(order) != 2:
        return Verdict(
            CaseLabel.IdentifiableRank2, 2, C.concise_shape, None, report.witness, mode_order=order, rank_report=report
        )
    keep = sorted(order)
    q = C.core.data.reshape(2, 2)
    rng = np.random.default_rng(np.random.SeedSequence([int(T.digest()[:15], 16), seed, 2]))
    second = None
    for _ in range(16):
        try:
            D = rank2_matrix_solutions(q, complex_normal(rng, 3))
        except DegenerateLineError:
            continue
        cand = _core_to_ambient(D, keep, C)
        if not _same_sets(cand, report.witness):
            second = cand
            break
    flags = () if second is not None else ("second-witness-missing",)
    return Verdict(
        CaseLabel.NonIdentifiableRank2Matrix,
        2,
        C.concise_shape,
        DimClaim(2, "exact"),
        report.witness,
        second,
        flags,
        order,
        rank_report=report,
    )


def _same_sets(A: Decomposition, B: Decomposition, tol: float = 1e-6) -> bool:
    from .diagnostics import match_count

    return len(A) == len(B) and match_count(A, B, tol) == len(A)


def classify(T, seed: int = 0, second_witness: bool = True) -> Verdict:
    """Label a tensor with its identifiability case.

    Pipeline: conditioning guard, concise core, rank certification, then
    the case analysis on the concise shape and the witness structure.
    """
    T = as_tensor(T)
    if T.is_zero():
        raise ValueError("cannot classify the zero tensor")
    if ill_conditioned_modes(T):
        ml = concise_core(T).concise_shape
        return Verdict(CaseLabel.Refused, None, ml, flags=("ill-conditioned",))
    C = concise_core(T)
    ml = C.concise_shape
    report = rank_leq3(T, seed)
    order = _sorted_modes(ml)
    if report.rank is None:
        return Verdict(CaseLabel.Refused, None, ml, flags=("rank-unknown",), mode_order=order, rank_report=report)
    if report.rank == 1:
        return Verdict(CaseLabel.IdentifiableRank1, 1, ml, None, report.witness, mode_order=order, rank_report=report)
    if report.rank == 2:
        v = rank2_identifiability(T, report, seed, C)
        if not second_witness and v.second_witness is not None:
            v = dataclasses.replace(v, second_witness=None)
        return v

    eff = tuple(ml[m] for m in order)
    k = len(eff)
    n = [d - 1 for d in eff]
    flags: list[str] = []
    active = None
    W = report.witness
    if k == 2:
        label, dim = CaseLabel.Matrix3x3, DimClaim(6, "exact")
    elif eff == (2, 2, 2):
        label, dim = CaseLabel.Tangent222, DimClaim(2, "lower_bound")
    elif eff == (3, 2, 2):
        # the two binary-mode pencil structures coincide here; see README
        phi = annihilator_form(T, C)
        if phi.rank == 2:
            label, dim = CaseLabel.ConicIrreducible, DimClaim(3, "exact")
        else:
            label, dim = CaseLabel.ConicReducible, DimClaim(4, "lower_bound")
            if detect_x11(W, ml) is None:
                flags.append("boundary-unverified")
    else:
        hit = detect_x11(W, ml) if sum(n) >= 4 else None
        if hit is not None:
            active = hit[1]
            na, nb = (ml[m] - 1 for m in active)
            label = CaseLabel.X11
            dim = DimClaim(2, "exact" if na + nb + k >= 6 else "lower_bound")
        elif eff == (2, 2, 2, 2):
            label, dim = CaseLabel.Binary4, DimClaim(1, "lower_bound")
        else:
            label, dim = CaseLabel.IdentifiableRank3, None
    verdict = Verdict(label, 3, ml, dim, W, None, tuple(flags), order, active, report)
    if label.identifiable or not second_witness:
        return verdict
    from .families import SamplingError, sample_solution_set

    try:
        samples = sample_solution_set(T, 3, seed, verdict=verdict)
    except SamplingError:
        samples = []
    second = next((D for D in samples if not _same_sets(D, W)), None)
    if second is None:
        flags.append("second-witness-missing")
    return Verdict(label, 3, ml, dim, W, second, tuple(flags), order, active, report)


def exit_code(verdict: Verdict) -> int:
    if verdict.label.refused:
        return 20
    return 0 if verdict.identifiable else 10


__all__ = [
    "AnnihilatorForm",
    "CaseLabel",
    "DegenerateLineError",
    "DimClaim",
    "Verdict",
    "annihilator_form",
    "classify",
    "detect_x11",
    "exit_code",
    "polar_plane_basis",
    "rank2_identifiability",
    "rank2_matrix_solutions",
]
