"""Exceptional points at delta = 1.3 and the PT transition at the critical momentum."""

from blochtomo import (
    ModelParams,
    canonical_from_operator,
    classify_phase,
    effective_hamiltonian,
    find_exceptional_points,
    hopping_from_params,
    rotate_hamiltonian,
    step_operator,
)

recs = find_exceptional_points(1.3)
for r in recs:
    print(f"EP at q_c = {r.q_c:.6f}, eta_c = {r.eta_c:.6f}, vanishing {r.branch}, residual {r.residual:.1e}")

q_c = recs[0].q_c
for eta in (0.3, 0.6, recs[0].eta_c, 1.4):
    h = effective_hamiltonian(canonical_from_operator(step_operator(hopping_from_params(ModelParams(1.3, eta)), q_c)))
    c = classify_phase(rotate_hamiltonian(h))
    print(f"eta = {eta:.4f}: {c.phase:16s} {c.spectrum:13s} order parameter {c.order_parameter:.4f}")
