"""
Concise cores and rank certification
====================================

A tensor only uses the span of its fibers in each mode. We compress it to
that span, then decide whether its rank is 1, 2 or 3.
"""

# %%
# A rank-2 tensor hiding in a big ambient space
# ---------------------------------------------

import numpy as np

from rank3id.concision import concise_core, multilinear_rank
from rank3id.decomposition import hyperdet222, rank_leq3
from rank3id.tensor import Decomposition, DenseTensor, evaluate, outer, relative_residual

rng = np.random.default_rng(0)


def cn(*shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


D = Decomposition.from_factors([[cn(4), cn(3), cn(2)] for _ in range(2)])
T = evaluate(D, (4, 3, 2))
print("multilinear rank:", multilinear_rank(T))

C = concise_core(T)
print("concise shape:", C.concise_shape)
print("reconstruction error:", np.linalg.norm(C.expand().data - T.data))

# %%
# Certifying the rank
# -------------------
# On a concise (2,2,2) core the hyperdeterminant decides between rank 2
# and the tangential rank-3 orbit.

rep = rank_leq3(T)
print(rep.rank, rep.method, f"residual {rep.residual:.1e}")

e0, e1 = np.eye(2)
W = DenseTensor(outer([e0, e0, e1]) + outer([e0, e1, e0]) + outer([e1, e0, e0]))
print("hyperdet(W) =", hyperdet222(W))
rep = rank_leq3(W)
print("W:", rep.rank, "border rank 2:", rep.border_flag, f"residual {relative_residual(W, rep.witness):.1e}")

# %%
# Beyond rank 3
# -------------
# A general sum of four terms in (3,3,3) has no certified decomposition of
# length at most three, and the answer is an honest Unknown.

T4 = evaluate(Decomposition.from_factors([[cn(3), cn(3), cn(3)] for _ in range(4)]), (3, 3, 3))
print(rank_leq3(T4).rank)
