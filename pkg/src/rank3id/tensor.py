"""Dense small tensors, rank-one points and decompositions.

Entries are laid out row-major with mode 0 varying slowest, which is also
the order used by the JSON file format. Mode indices are 0-based throughout
the Python API.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import exact as qx

MAX_DIM = 8
MAX_ORDER = 8
PROJ_TOL = 1e-7

Shape = tuple  # tuple[int, ...]


def check_shape(shape: Iterable[int]) -> tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if len(shape) < 1:
        raise ValueError("a shape needs at least one mode")
    if any(d < 1 for d in shape):
        raise ValueError(f"all dimensions must be positive, got {shape}")
    if len(shape) > MAX_ORDER or any(d > MAX_DIM for d in shape):
        raise ValueError(f"shape {shape} exceeds order {MAX_ORDER} / dim {MAX_DIM}")
    return shape


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """An order-k complex tensor with an optional exact copy of its entries.

    ``data`` always holds complex doubles. When ``exact`` is set it is an
    object array of :class:`~rank3id.exact.QI` of the same shape, and rank
    decisions downstream are taken on it instead of on ``data``.
    """

    data: np.ndarray
    exact: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        check_shape(data.shape)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.exact is not None:
            ex = qx.as_exact(self.exact)
            if ex.shape != data.shape:
                raise ValueError("exact entries do not match the shape")
            ex.setflags(write=False)
            object.__setattr__(self, "exact", ex)

    @classmethod
    def from_exact(cls, entries) -> "DenseTensor":
        ex = qx.as_exact(np.asarray(entries, dtype=object))
        return cls(qx.to_complex(ex), ex)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def backend(self) -> str:
        return "exact" if self.exact is not None else "float"

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def is_zero(self) -> bool:
        if self.exact is not None:
            return qx.is_zero(self.exact)
        return not np.any(self.data)

    def scaled(self, lam) -> "DenseTensor":
        if self.exact is not None and not isinstance(lam, float):
            c = qx.QI.coerce(lam)
            return DenseTensor(self.data * complex(c), self.exact * c)
        return DenseTensor(self.data * lam)

    def transpose(self, perm: Sequence[int]) -> "DenseTensor":
        perm = tuple(perm)
        ex = None if self.exact is None else self.exact.transpose(perm)
        return DenseTensor(self.data.transpose(perm), ex)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.shape).encode())
        if self.exact is not None:
            for x in self.exact.reshape(-1):
                h.update(f"{x.re},{x.im};".encode())
        else:
            h.update(np.ascontiguousarray(self.data).tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        out = {"shape": list(self.shape)}
        if self.exact is not None:
            flat = self.exact.reshape(-1)
            out["exact"] = True
            out["re"] = [str(x.re) for x in flat]
            out["im"] = [str(x.im) for x in flat]
        else:
            flat = self.data.reshape(-1)
            out["re"] = [float(x) for x in flat.real]
            out["im"] = [float(x) for x in flat.imag]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DenseTensor":
        if not isinstance(obj, dict) or "shape" not in obj or "re" not in obj:
            raise ValueError("tensor JSON needs 'shape' and 're'")
        shape = check_shape(obj["shape"])
        size = int(np.prod(shape))
        re = obj["re"]
        im = obj.get("im") or [0] * size
        if len(re) != size or len(im) != size:
            raise ValueError(f"expected {size} entries for shape {shape}")
        if obj.get("exact"):
            entries = [qx.QI(Fraction(str(a)), Fraction(str(b))) for a, b in zip(re, im)]
            return cls.from_exact(np.array(entries, dtype=object).reshape(shape))
        vals = np.array(re, dtype=float) + 1j * np.array(im, dtype=float)
        return cls(vals.reshape(shape))


def load_tensor(path) -> DenseTensor:
    with open(path) as fh:
        obj = json.load(fh)
    if "tensor" in obj and "shape" not in obj:
        obj = obj["tensor"]
    return DenseTensor.from_json(obj)


def as_tensor(T) -> DenseTensor:
    return T if isinstance(T, DenseTensor) else DenseTensor(np.asarray(T))


# ---------------------------------------------------------------------------
# projective vectors


def normalize(v) -> np.ndarray:
    """Scale ``v`` so that its (first) max-modulus coordinate equals 1."""
    v = np.asarray(v)
    if v.dtype == object:
        mods = [x.abs2() for x in v]
        m = max(mods)
        if m == 0:
            raise ValueError("cannot normalize the zero vector")
        j = mods.index(m)
        piv = v[j]
        return np.array([x / piv for x in v], dtype=object)
    v = v.astype(complex)
    mod = np.abs(v)
    m = mod.max()
    if m == 0:
        raise ValueError("cannot normalize the zero vector")
    # first coordinate within rounding of the max, so ties are stable
    j = int(np.argmax(mod >= m * (1 - 1e-9)))
    return v / v[j]


def projective_distance(u, v) -> float:
    """Max coordinate gap after aligning both vectors on u's pivot."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        return np.inf

    def one_way(x, y):
        j = int(np.argmax(np.abs(x)))
        if abs(y[j]) < 1e-14 * np.abs(y).max():
            return np.inf
        return float(np.abs(x / x[j] - y / y[j]).max())

    return max(one_way(u, v), one_way(v, u))


def same_projective(u, v, tol: float = PROJ_TOL) -> bool:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.dtype == object or v.dtype == object:
        u = qx.as_exact(u)
        v = qx.as_exact(v)
        n = len(u)
        return all(u[a] * v[b] == u[b] * v[a] for a in range(n) for b in range(a + 1, n))
    return projective_distance(u, v) < tol


@dataclass(frozen=True, eq=False)
class RankOnePoint:
    """A point of the multiprojective space, one normalized vector per mode."""

    vectors: tuple

    def __post_init__(self):
        vecs = tuple(normalize(v) for v in self.vectors)
        for v in vecs:
            v.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.vectors)

    def tensor(self) -> np.ndarray:
        return outer(self.vectors)

    def mode_distances(self, other: "RankOnePoint") -> list[float]:
        return [projective_distance(a, b) for a, b in zip(self.vectors, other.vectors)]

    def distance(self, other: "RankOnePoint") -> float:
        if self.shape != other.shape:
            return np.inf
        return max(self.mode_distances(other))

    def same_as(self, other: "RankOnePoint", tol: float = PROJ_TOL) -> bool:
        return self.distance(other) < tol


def outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(vectors[0])
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v))
    return out


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Weighted rank-one terms ``sum_t w_t * v_t1 (x) ... (x) v_tk``."""

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = []
        for w, p in self.terms:
            if not isinstance(p, RankOnePoint):
                p = RankOnePoint(tuple(p))
            terms.append((complex(w), p))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def from_factors(cls, vectors_per_term, weights=None) -> "Decomposition":
        """Build from raw (unnormalized) vectors, folding scales into weights."""
        terms = []
        for t, vecs in enumerate(vectors_per_term):
            w = 1.0 if weights is None else weights[t]
            scale = 1.0 + 0j
            for v in vecs:
                v = np.asarray(v, dtype=complex)
                scale *= v[int(np.argmax(np.abs(v) >= np.abs(v).max() * (1 - 1e-9)))]
            terms.append((w * scale, RankOnePoint(tuple(vecs))))
        return cls(tuple(terms))

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms], dtype=complex)

    @property
    def points(self) -> list[RankOnePoint]:
        return [p for _, p in self.terms]

    def to_json(self) -> list:
        out = []
        for w, p in self.terms:
            out.append(
                {
                    "weight": {"re": float(w.real), "im": float(w.imag)},
                    "vectors": [
                        {"re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}
                        for v in p.vectors
                    ],
                }
            )
        return out

    @classmethod
    def from_json(cls, items) -> "Decomposition":
        terms = []
        for it in items:
            w = complex(it["weight"]["re"], it["weight"]["im"])
            vecs = [np.array(v["re"]) + 1j * np.array(v.get("im", [0] * len(v["re"]))) for v in it["vectors"]]
            terms.append((w, RankOnePoint(tuple(vecs))))
        return cls(tuple(terms))

    def permute_modes(self, perm: Sequence[int]) -> "Decomposition":
        return Decomposition(tuple((w, RankOnePoint(tuple(p.vectors[i] for i in perm))) for w, p in self.terms))

    def check(self, tol: float = PROJ_TOL) -> None:
        """Raise ValueError if the decomposition invariants fail."""
        if any(abs(w) == 0 for w in self.weights):
            raise ValueError("zero weight in decomposition")
        pts = self.points
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if pts[a].same_as(pts[b], tol):
                    raise ValueError(f"terms {a} and {b} are projectively equal")
        if pts:
            m = np.array([p.tensor().reshape(-1) for p in pts])
            s = np.linalg.svd(m, compute_uv=False)
            if s[-1] < 1e-10 * s[0]:
                raise ValueError("rank-one terms are linearly dependent")


def evaluate(D: Decomposition, shape) -> DenseTensor:
    """Sum of the weighted rank-one tensors of ``D`` in the given shape."""
    shape = check_shape(shape)
    out = np.zeros(shape, dtype=complex)
    for w, p in D.terms:
        if p.shape != shape:
            raise ValueError(f"term of shape {p.shape} does not fit {shape}")
        out += w * p.tensor()
    return DenseTensor(out)


def relative_residual(T, D: Decomposition) -> float:
    T = as_tensor(T)
    nrm = T.norm()
    if nrm == 0:
        raise ValueError("relative residual of the zero tensor is undefined")
    return float(np.linalg.norm(T.data - evaluate(D, T.shape).data) / nrm)


def flatten(T, modes: Iterable[int]) -> np.ndarray:
    """Matricize ``T`` with the given modes as rows (in increasing order).

    Works on exact tensors too, returning an object matrix.
    """
    T = as_tensor(T)
    modes = sorted(set(int(m) for m in modes))
    k = T.order
    if not modes or len(modes) == k:
        raise ValueError("modes must be a nonempty proper subset")
    if modes[0] < 0 or modes[-1] >= k:
        raise ValueError(f"mode index out of range for order {k}")
    rest = [m for m in range(k) if m not in modes]
    src = T.exact if T.exact is not None else T.data
    rows = int(np.prod([T.shape[m] for m in modes]))
    return src.transpose(modes + rest).reshape(rows, -1)


def multidegree_hat(i: int, k: int) -> tuple[int, ...]:
    """All ones except a zero at mode ``i``."""
    return tuple(0 if m == i else 1 for m in range(k))


def multidegree_unit(i: int, k: int) -> tuple[int, ...]:
    return tuple(1 if m == i else 0 for m in range(k))


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)
