from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rank3id import exact as qx
from rank3id.exact import QI

small = st.integers(-4, 4)


def test_arithmetic_matches_python_complex():
    a, b = QI(Fraction(1, 2), 3), QI(-2, Fraction(1, 3))
    for got, want in [(a + b, complex(a) + complex(b)), (a * b, complex(a) * complex(b)), (a / b, complex(a) / complex(b))]:
        assert abs(complex(got) - want) < 1e-12
    assert QI.parse("3/4", "-1/2") == QI(Fraction(3, 4), Fraction(-1, 2))
    assert QI(1, 1) ** 3 == QI(-2, 2)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        QI(1) / QI(0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(small, min_size=8, max_size=8), min_size=3, max_size=3))
def test_rank_agrees_with_float_rank_on_small_integers(rows):
    m = np.array(rows, dtype=float)[:, :4] + 1j * np.array(rows, dtype=float)[:, 4:]
    assert qx.rank(m) == np.linalg.matrix_rank(m)


def test_nullspace_is_annihilated():
    m = qx.as_exact(np.array([[1, 2, 3, 4], [2, 4, 6, 8], [0, 1, 1j, 0]]))
    ns = qx.nullspace(m)
    assert ns.shape == (4, 2)
    prod = [[sum((m[i, k] * ns[k, j] for k in range(4)), QI(0)) for j in range(2)] for i in range(3)]
    assert all(not x for row in prod for x in row)


def test_rref_pivots():
    r, piv = qx.rref(np.array([[0, 1, 2], [0, 2, 4], [1, 0, 1]]))
    assert piv == [0, 1]
    assert qx.is_zero(r[2])
