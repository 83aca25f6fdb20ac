"""
A tour of the identifiability cases
===================================

Generate one tensor per case and let the classifier label it.
"""

# %%
import numpy as np

from rank3id.classifier import classify
from rank3id.families import (
    gen_caso3,
    gen_caso4,
    gen_generic,
    gen_matrix3,
    gen_tangent222,
    gen_x11,
)
from rank3id.tensor import DenseTensor

instances = {
    "3x3 matrix": gen_matrix3(0),
    "tangent (2,2,2)": gen_tangent222(0),
    "irreducible conic": gen_caso3(0),
    "reducible conic": gen_caso4(0),
    "pencil plus point, (2,2,2,2,2)": gen_x11((2, 2, 2, 2, 2), 0),
    "general rank 3 in (2,2,2,2)": gen_generic(3, (2, 2, 2, 2), 0),
    "general rank 3 in (3,3,2)": gen_generic(3, (3, 3, 2), 0),
    "general rank 2 in (2,2,2)": gen_generic(2, (2, 2, 2), 0),
}

for name, inst in instances.items():
    v = classify(inst.tensor)
    claim = "" if v.dim_claim is None else f"dim {'=' if v.dim_claim.kind == 'exact' else '>='} {v.dim_claim.value}"
    print(f"{name:34s} -> {v.label.value:28s} {claim}")

# %%
# Labels do not depend on mode order or scale.

T = instances["irreducible conic"].tensor
print(classify(T.transpose((1, 2, 0))).label.value, classify(T.scaled(1e-3j)).label.value)

# %%
# Tensors too close to a rank drop are refused rather than guessed.

print(classify(DenseTensor(np.diag([1.0, 1e-8, 1.0]))).flags)
