"""How the hybrid losses treat small and large residuals.

Every loss in the package is quadratic up to a knot ``c`` and switches to a
robust tail beyond it. This script prints, for a few residual sizes, the
loss value, the IRLS weight and the shrinkage output for each loss kind.

Run:  python docs/examples/loss_shapes.py
"""

import numpy as np

from rmc import LossSpec, loss_value, shrink, weight

c = 1.0
residuals = np.array([0.5, 1.0, 2.0, 5.0, 20.0])
losses = [
    LossSpec("huber"),
    LossSpec("how"),
    LossSpec("hoc"),
    LossSpec("hop", p=0.6),
]

print(f"knot c = {c}; residuals {residuals.tolist()}\n")
for spec in losses:
    print(spec.label())
    print("  loss   ", np.array2string(loss_value(spec, c, residuals), precision=4))
    print("  weight ", np.array2string(weight(spec, c, residuals), precision=4))
    print("  shrink ", np.array2string(shrink(spec, c, residuals), precision=4))
    print()

# Reading the table:
# * Below the knot every loss is x^2/2, the weight is 1 and nothing is
#   shrunk, so ordinary entries are fitted by plain least squares.
# * Huber keeps a constant slope past the knot, so a residual of 20 still
#   pulls on the fit with force c.
# * The Welsch tail (how) is bounded: far-out residuals get weight ~0 and the
#   shrinkage hands almost the whole residual to the outlier matrix S.
# * Cauchy (hoc) and the lp tail (hop) sit in between; their weights decay
#   like 1/x^2 and x^(p-2).
