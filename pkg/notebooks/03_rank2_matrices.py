"""
Rank-2 matrices: a plane of decompositions
==========================================

An invertible 2x2 matrix q is a sum of two rank-one matrices in a
two-parameter family of ways: every line through q meets the quadric of
rank-one matrices twice, unless it is tangent.
"""

# %%
import numpy as np

from rank3id.classifier import DegenerateLineError, polar_plane_basis, rank2_matrix_solutions
from rank3id.families import estimate_local_dim
from rank3id.tensor import DenseTensor, evaluate

q = np.array([[2.0, 1.0], [0.5, 1.0]])
rng = np.random.default_rng(1)
for _ in range(3):
    o = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    D = rank2_matrix_solutions(q, o)
    err = np.linalg.norm(evaluate(D, (2, 2)).data - q)
    print([np.round(p.vectors[0], 3) for p in D.points], f"error {err:.1e}")

# %%
# Lines are parametrised by the plane polar to q; tangent lines are excluded.

print(polar_plane_basis(q).shape)
try:
    rank2_matrix_solutions(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]))
except DegenerateLineError as err:
    print("tangent:", err)

# %%
# The Jacobian nullity at any decomposition is 2.

print(estimate_local_dim(DenseTensor(q), D).dim)
