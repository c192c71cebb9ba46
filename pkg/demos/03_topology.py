"""Winding numbers at a few settings and a coarse phase diagram."""

import numpy as np

from blochtomo import ModelParams, phase_diagram, winding_at

for d, e in [(np.pi / 4, 0.9), (1.3, 0.6), (1.3, 1.4), (np.pi, 0.25)]:
    print(f"delta={d:.3f} eta={e}: nu = {winding_at(ModelParams(d, e)).real:+.4f}")

pd = phase_diagram(resolution=(16, 8), n_q=90)
print("phase diagram, rows delta, columns eta (rounded nu):")
print(np.round(np.nan_to_num(pd.nu, nan=-9)).astype(int))
