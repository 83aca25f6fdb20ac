import numpy as np
import pytest

from rank3id.concision import multilinear_rank
from rank3id.decomposition import (
    als_refine,
    als_refine_history,
    fit_rank,
    hyperdet222,
    jennrich,
    jennrich_grouped,
    rank_leq3,
    split_grouped_factor,
)
from rank3id.tensor import Decomposition, DenseTensor, evaluate, outer, relative_residual

from conftest import e


def rand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def planted(rng, shape, r):
    vecs = [[rand(rng, d) for d in shape] for _ in range(r)]
    D = Decomposition.from_factors(vecs)
    return evaluate(D, shape), D


def same_set(A, B, tol=1e-6):
    from rank3id.diagnostics import match_count

    return len(A) == len(B) and match_count(A, B, tol) == len(A)


# -- hyperdeterminant ---------------------------------------------------------


def pencil_discriminant(X):
    """Discriminant of the binary quadratic det(x X0 + y X1)."""
    A, B = X[0], X[1]
    a = np.linalg.det(A)
    c = np.linalg.det(B)
    b = np.linalg.det(A + B) - a - c
    return b * b - 4 * a * c


@pytest.mark.parametrize("seed", range(10))
def test_hyperdet_matches_pencil_discriminant(seed):
    X = rand(np.random.default_rng(seed), 2, 2, 2)
    assert abs(hyperdet222(DenseTensor(X)) - pencil_discriminant(X)) < 1e-10 * np.linalg.norm(X) ** 4


def test_hyperdet_examples(W, diag222):
    assert hyperdet222(diag222) == pytest.approx(1)
    assert hyperdet222(W) == 0
    rng = np.random.default_rng(0)
    assert abs(hyperdet222(DenseTensor(outer([rand(rng, 2) for _ in range(3)])))) < 1e-12
    with pytest.raises(ValueError):
        hyperdet222(DenseTensor(np.zeros((3, 2, 2))))


def test_hyperdet_degree_four():
    X = DenseTensor(rand(np.random.default_rng(9), 2, 2, 2))
    lam = 0.7 - 1.3j
    assert np.isclose(hyperdet222(X.scaled(lam)), lam**4 * hyperdet222(X))


# -- grouped factors ----------------------------------------------------------


def test_split_grouped_factor():
    rng = np.random.default_rng(1)
    a, b, c, d = rand(rng, 2), rand(rng, 3), rand(rng, 2), rand(rng, 3)
    parts = split_grouped_factor(np.kron(a, b), [2, 3])
    assert parts is not None
    assert np.allclose(np.kron(parts[0], parts[1]), np.kron(a, b))
    assert split_grouped_factor(np.kron(a, b) + np.kron(c, d), [2, 3]) is None
    one = split_grouped_factor(a, [2])
    assert len(one) == 1 and np.allclose(one[0], a)
    with pytest.raises(ValueError):
        split_grouped_factor(a, [3])


# -- Jennrich -----------------------------------------------------------------


def test_jennrich_diagonal():
    T = DenseTensor(outer([e(0)] * 3) + 2 * outer([e(1)] * 3))
    D = jennrich(T, 2)
    want = Decomposition(((1.0, [e(0)] * 3), (2.0, [e(1)] * 3)))
    assert same_set(D, want)


@pytest.mark.parametrize("seed", range(5))
def test_jennrich_recovers_planted_332(seed):
    rng = np.random.default_rng(seed)
    T, D0 = planted(rng, (3, 3, 2), 3)
    D = jennrich(T, 3, rng)
    assert D is not None and relative_residual(T, D) < 1e-8
    assert same_set(D, D0)


def test_jennrich_fails_on_w(W):
    assert jennrich(W, 2) is None
    with pytest.raises(ValueError):
        jennrich(DenseTensor(np.eye(2)), 2)


def test_jennrich_grouped_order5():
    rng = np.random.default_rng(7)
    T, D0 = planted(rng, (2, 2, 2, 2, 2), 3)
    D = jennrich_grouped(T, 3, rng)
    assert D is not None and same_set(D, D0)


# -- ALS ----------------------------------------------------------------------


def test_als_keeps_exact_decomposition():
    rng = np.random.default_rng(3)
    T, D0 = planted(rng, (3, 3, 2), 3)
    D = als_refine(T, D0, max_iters=5)
    assert same_set(D, D0)


@pytest.mark.parametrize("seed", range(3))
def test_als_refines_perturbed_start(seed):
    rng = np.random.default_rng(seed)
    T, D0 = planted(rng, (3, 3, 2), 3)
    noisy = Decomposition.from_factors([[v + 1e-2 * rand(rng, len(v)) for v in p.vectors] for p in D0.points], D0.weights)
    D, hist = als_refine_history(T, noisy, max_iters=200)
    assert relative_residual(T, D) < 1e-8
    assert all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(hist, hist[1:]))


def test_rank4_tensor_has_no_good_rank3_fit():
    rng = np.random.default_rng(11)
    T, _ = planted(rng, (3, 3, 3), 4)
    D, res, _ = fit_rank(T, 3, restarts=48, seed_root=(1,))
    assert res > 1e-3


# -- rank certification -------------------------------------------------------


def test_rank_of_matrix_and_w(W):
    rep = rank_leq3(DenseTensor(np.eye(3) + 0j))
    assert rep.rank == 3 and rep.method == "svd"
    rep = rank_leq3(W)
    assert rep.rank == 3 and rep.border_flag and relative_residual(W, rep.witness) < 1e-8


def test_rank_of_x11_order5():
    from rank3id.families import gen_x11

    inst = gen_x11((2, 2, 2, 2, 2), 0)
    rep = rank_leq3(inst.tensor)
    assert rep.rank == 3 and relative_residual(inst.tensor, rep.witness) < 1e-8


def test_rank_scale_and_permutation():
    rng = np.random.default_rng(4)
    T, _ = planted(rng, (3, 2, 2), 3)
    base = rank_leq3(T)
    assert rank_leq3(T.scaled(3e-4j)).rank == base.rank == 3
    perm = (2, 0, 1)
    P = T.transpose(perm)
    rep = rank_leq3(P)
    assert rep.rank == 3 and relative_residual(P, rep.witness) < 1e-8


RANK_SHAPES = {
    1: [(2, 2), (3, 2, 2), (2, 2, 2, 2)],
    2: [(2, 2), (2, 2, 2), (3, 3), (3, 2, 2), (2, 2, 2, 2), (2, 2, 2, 2, 2)],
    3: [(3, 3), (3, 2, 2), (3, 3, 2), (2, 2, 2, 2), (3, 3, 3), (2, 2, 2, 2, 2), (3, 2, 2, 2)],
}


def _planted_rank_sweep(n_per_rank):
    bad = []
    for r, shapes in RANK_SHAPES.items():
        for t in range(n_per_rank):
            rng = np.random.default_rng([r, t])
            shape = shapes[t % len(shapes)]
            T, _ = planted(rng, shape, r)
            rep = rank_leq3(T, seed=t)
            if rep.rank != r or relative_residual(T, rep.witness) >= 1e-8:
                bad.append((r, shape, t, rep.rank))
            assert rep.rank is None or rep.rank >= max(multilinear_rank(T))
    return bad


def test_planted_rank_recovered():
    assert _planted_rank_sweep(30) == []


@pytest.mark.slow
def test_planted_rank_recovered_full():
    assert _planted_rank_sweep(1000) == []
