"""
Independent conditions for small point sets
===========================================

A point set E imposes independent conditions on multilinear forms of
multidegree d when its evaluation matrix has full row rank. For at most
three points and d = (1,...,1) with a zero at mode i, failure has a
combinatorial description. We check both sides in exact arithmetic.
"""

# %%
import numpy as np

from rank3id.diagnostics import PointSet, evaluation_matrix, imposes_independent_conditions, lemma3points_structural
from rank3id.exact import as_exact
from rank3id.tensor import multidegree_hat

a, b, c = (as_exact(np.array(v)) for v in ([1, 0], [0, 1], [1, 1]))
u = [a, b, a, c]
v = [a, b, b, c]  # equal to u outside mode 2
E = PointSet((u, v))
d = multidegree_hat(2, 4)
print(evaluation_matrix(E, d).shape)
print(imposes_independent_conditions(E, d), lemma3points_structural(E, 2))

# %%
# Three points equal outside modes {i, j} only fail when their mode-j
# vectors are collinear. With three independent mode-j vectors in C^3
# they impose independent conditions.

e = [as_exact(r) for r in np.eye(3, dtype=int)]
pts = [[x, y, as_exact(np.array([1, 2]))] for x, y in zip([a, b, c], e)]
F = PointSet(tuple(pts))
print(imposes_independent_conditions(F, multidegree_hat(0, 3)), lemma3points_structural(F, 0))
