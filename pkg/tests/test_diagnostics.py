import numpy as np
import pytest

from rank3id.diagnostics import (
    PointSet,
    imposes_independent_conditions,
    lemma3points_structural,
    line_violations,
    match_count,
    pair_invariants,
)
from rank3id.families import gen_caso3, sample_solution_set
from rank3id.tensor import Decomposition, multidegree_hat

from pointsets import gaussian_int_vector, point_sets


def rand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_single_point_always_independent():
    rng = np.random.default_rng(0)
    E = PointSet(([rand(rng, 2), rand(rng, 3), rand(rng, 2)],))
    for d in [(0, 0, 0), (1, 0, 1), (1, 1, 1)]:
        assert imposes_independent_conditions(E, d)


def test_pair_equal_outside_mode():
    rng = np.random.default_rng(1)
    u = [gaussian_int_vector(rng, 2) for _ in range(4)]
    v = list(u)
    v[2] = gaussian_int_vector(rng, 2)
    E = PointSet((u, v))
    assert not imposes_independent_conditions(E, multidegree_hat(2, 4))
    assert lemma3points_structural(E, 2)


def test_three_points_fixed_outside_two_modes():
    rng = np.random.default_rng(2)
    base = [gaussian_int_vector(rng, 2) for _ in range(4)]
    pts = []
    for _ in range(3):
        p = list(base)
        p[0], p[1] = gaussian_int_vector(rng, 2), gaussian_int_vector(rng, 2)
        pts.append(p)
    E = PointSet(tuple(pts))
    assert not imposes_independent_conditions(E, multidegree_hat(0, 4))
    assert lemma3points_structural(E, 0)


def test_generic_sets_are_not_structural():
    rng = np.random.default_rng(3)
    E = PointSet(tuple([rand(rng, 2) for _ in range(4)] for _ in range(3)))
    for i in range(4):
        assert not lemma3points_structural(E, i)
        assert imposes_independent_conditions(E, multidegree_hat(i, 4))
    E2 = PointSet(tuple([rand(rng, 2) for _ in range(3)] for _ in range(2)))
    assert not lemma3points_structural(E2, 0)


def test_structural_needs_collinear_mode_j():
    """Three points differing only in modes i and j, with mode-j vectors spanning C^3."""
    e = np.eye(3, dtype=complex)
    a = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1])]
    pts = [[a[t], e[t], np.array([1.0, 2.0])] for t in range(3)]
    E = PointSet(tuple(pts))
    assert imposes_independent_conditions(E, multidegree_hat(0, 3))
    assert not lemma3points_structural(E, 0)


def test_structural_rejects_large_sets():
    rng = np.random.default_rng(4)
    E = PointSet(tuple([rand(rng, 2) for _ in range(3)] for _ in range(4)))
    with pytest.raises(ValueError):
        lemma3points_structural(E, 0)


def test_point_set_rejects_duplicates():
    v = [np.array([1.0, 2.0]), np.array([0.0, 1.0])]
    with pytest.raises(ValueError):
        PointSet((v, [2 * v[0], 3j * v[1]]))


@pytest.mark.parametrize("shape", [(2, 2, 2), (2, 2, 2, 2), (3, 2, 2), (3, 3, 2)])
def test_structural_equals_rank_deficiency(shape):
    for E in point_sets(shape, 150, seed=17):
        for i in range(len(shape)):
            assert lemma3points_structural(E, i) == (not imposes_independent_conditions(E, multidegree_hat(i, len(shape))))


def test_pair_invariants_equal_and_sampled():
    inst = gen_caso3(0)
    A, B = sample_solution_set(inst.tensor, 2, 0)[:2]
    rep = pair_invariants(A, A)
    assert rep.equal and rep.ok and rep.intersection == 3
    rep = pair_invariants(A, B)
    assert rep.ok and rep.union in (5, 6)


def test_pair_invariants_negative_control():
    rng = np.random.default_rng(5)
    pts = [[rand(rng, 2) for _ in range(3)] for _ in range(4)]
    A = Decomposition.from_factors(pts[:3])
    B = Decomposition.from_factors(pts[:2] + pts[3:])
    rep = pair_invariants(A, B)
    assert rep.intersection == 2 and not rep.ok
    with pytest.raises(ValueError):
        pair_invariants(Decomposition.from_factors(pts[:2]), A)


def test_line_violation_detected():
    rng = np.random.default_rng(6)
    p = [rand(rng, 2) for _ in range(3)]
    q = [p[0], p[1], rand(rng, 2)]
    D = Decomposition.from_factors([p, q, [rand(rng, 2) for _ in range(3)]])
    assert line_violations(D) == [(0, 1)]
    assert match_count(D, D) == 3
