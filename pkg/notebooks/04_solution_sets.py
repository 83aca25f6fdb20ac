"""
Sampling solution sets and measuring their dimension
====================================================

For non-identifiable tensors we sample several decompositions and estimate
the local dimension of the solution set from the Jacobian of the map
(points, weights) -> tensor.
"""

# %%
import numpy as np

from rank3id.diagnostics import pair_invariants
from rank3id.families import estimate_local_dim, gen_caso3, gen_generic, gen_matrix3, gen_x11, sample_solution_set

for name, inst in [
    ("matrix3", gen_matrix3(3)),
    ("caso3", gen_caso3(3)),
    ("x11 (3,3,2)", gen_x11((3, 3, 2), 3)),
    ("binary4", gen_generic(3, (2, 2, 2, 2), 3)),
]:
    S = sample_solution_set(inst.tensor, 4, 0)
    dims = [estimate_local_dim(inst.tensor, D).dim for D in S]
    est = estimate_local_dim(inst.tensor, S[0])
    print(f"{name:12s} samples {len(S)}  local dims {dims}  gap {est.gap_ratio:.1e}")

# %%
# Two different decompositions of a rank-3 tensor share at most one point,
# and no decomposition contains two points on a line of the Segre variety.

inst = gen_caso3(3)
A, B = sample_solution_set(inst.tensor, 2, 0)
print(pair_invariants(A, B))

# %%
# The largest gap in the Jacobian spectrum fixes the rank.

est = estimate_local_dim(inst.tensor, A)
print(np.round(np.log10(est.jacobian_spectrum[-6:]), 1))
