"""
The reducible conic in (3,2,2)
==============================

In concise shape (3,2,2) the slice span is annihilated by a bilinear form
phi. When phi has rank one, decompositions come in two families: a pair of
points sharing the mode-c vector killed by phi, or a pair sharing the
mode-b vector. The "pencil plus one general point" tensors fall in the
same orbit, so the general point is not fixed.
"""

# %%
import numpy as np

from rank3id.classifier import annihilator_form, classify
from rank3id.families import estimate_local_dim, gen_caso4, gen_x11, sample_solution_set

inst = gen_caso4(0)
phi = annihilator_form(inst.tensor)
print("phi rank:", phi.rank)
print(classify(inst.tensor).label.value)

# %%
# Samples alternate between the two families.

for D in sample_solution_set(inst.tensor, 4, 0):
    shared_c = [np.round(p.vectors[2], 3) for p in D.points]
    print(shared_c)

# %%
# Local dimension at each sample.

print([estimate_local_dim(inst.tensor, D).dim for D in sample_solution_set(inst.tensor, 4, 0)])

# %%
# A pencil-plus-point tensor in (3,2,2) has the same rank-one annihilator,
# and some of its decompositions avoid the planted point.

x = gen_x11((3, 2, 2), 4)
p = x.planted.points[0]
print("phi rank:", annihilator_form(x.tensor).rank)
S = sample_solution_set(x.tensor, 8, 0)
print("samples containing p:", sum(any(q.same_as(p, 1e-6) for q in D.points) for D in S), "of", len(S))
