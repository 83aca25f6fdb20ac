"""Exact arithmetic over the Gaussian rationals Q(i).

Entries are stored in numpy object arrays so that reshapes, transposes and
slicing work the same way as on the floating-point backend.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np


class QI:
    """A Gaussian rational ``re + im*i`` with ``re, im`` in Q."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else Fraction(re)
        self.im = im if isinstance(im, Fraction) else Fraction(im)

    @classmethod
    def coerce(cls, x) -> "QI":
        if isinstance(x, QI):
            return x
        if isinstance(x, (int, Rational)):
            return cls(Fraction(x))
        if isinstance(x, float):
            return cls(Fraction(x))
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        if isinstance(x, np.generic):
            return cls.coerce(x.item())
        raise TypeError(f"cannot convert {type(x).__name__} to QI")

    @classmethod
    def parse(cls, re: str, im: str = "0") -> "QI":
        return cls(Fraction(str(re)), Fraction(str(im)))

    def __add__(self, other):
        o = QI.coerce(other)
        return QI(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return QI(-self.re, -self.im)

    def __sub__(self, other):
        o = QI.coerce(other)
        return QI(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return QI.coerce(other) - self

    def __mul__(self, other):
        o = QI.coerce(other)
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = QI.coerce(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero in Q(i)")
        return QI((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        return QI.coerce(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = QI(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        try:
            o = QI.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conjugate(self) -> "QI":
        return QI(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"


def as_exact(a) -> np.ndarray:
    """Object array of :class:`QI` with the shape of ``a``."""
    a = np.asarray(a, dtype=object) if not isinstance(a, np.ndarray) else a
    out = np.empty(a.shape, dtype=object)
    flat_in = a.reshape(-1)
    flat_out = out.reshape(-1)
    for idx, x in enumerate(flat_in):
        flat_out[idx] = QI.coerce(x)
    return out


def to_complex(a: np.ndarray) -> np.ndarray:
    return np.array([complex(x) for x in a.reshape(-1)], dtype=complex).reshape(a.shape)


def rref(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns of an exact matrix."""
    a = as_exact(m).copy()
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i, c]), None)
        if p is None:
            continue
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = QI(1) / a[r, c]
        a[r] = [x * inv for x in a[r]]
        for i in range(rows):
            if i != r and a[i, c]:
                f = a[i, c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m: np.ndarray) -> int:
    """Exact rank by fraction-preserving elimination."""
    a = as_exact(m)
    if a.size == 0:
        return 0
    # eliminate along the shorter side
    if a.shape[0] > a.shape[1]:
        a = a.T
    return len(rref(a)[1])


def nullspace(m: np.ndarray) -> np.ndarray:
    """Exact basis of the right null space, one column per basis vector."""
    a, pivots = rref(m)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = np.empty((cols, len(free)), dtype=object)
    for j, f in enumerate(free):
        v = [QI(0)] * cols
        v[f] = QI(1)
        for r, p in enumerate(pivots):
            v[p] = -a[r, f]
        basis[:, j] = v
    return basis


def is_zero(a: np.ndarray) -> bool:
    return not any(bool(x) for x in a.reshape(-1))
