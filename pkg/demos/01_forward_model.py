"""Step operator, closed-form bands and the 18 polarimetric ratios."""

import numpy as np

from blochtomo import ModelParams, bloch_bands, normalized_set, q_grid, step_operators

p = ModelParams(1.3, 1.4)
q = q_grid(90)
u = step_operators(p, q)
E, n = bloch_bands(p, q)
print("max |det U - 1|:", np.max(np.abs(np.linalg.det(u) - 1)))
print("max |n_y - n_z|:", np.nanmax(np.abs(n[:, 1] - n[:, 2])))
print("largest |Im E|:", np.max(np.abs(E.imag)))
r = normalized_set(u[10])
print("ratios at q = %.3f:" % q[10], np.round(r, 4))
