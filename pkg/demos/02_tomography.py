"""Reconstruct the step operator pixel by pixel from noiseless and noisy ratios."""

import numpy as np

from blochtomo import (
    ModelParams,
    NoiseConfig,
    SolverConfig,
    operator_fidelities,
    reconstruct_bz,
    step_operators,
    synthesize_dataset,
)

p = ModelParams(np.pi / 4, 0.9)
clean = synthesize_dataset(p, 90)
rec = reconstruct_bz(clean)
print("noiseless min fidelity:", operator_fidelities(step_operators(p, clean.q), rec.operators()).min())

noisy = synthesize_dataset(p, 90, NoiseConfig(0.01, None, 7))
rec = reconstruct_bz(noisy, SolverConfig.noisy(seed=7))
print("sigma = 0.01 mean fidelity:", operator_fidelities(step_operators(p, noisy.q), rec.operators()).mean())
print("converged pixels:", int(rec.converged.sum()), "of", len(rec.q))
