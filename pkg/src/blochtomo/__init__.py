"""Tomography and topology of a non-Hermitian quantum walk in momentum space."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationReading,
    calibrate,
    calibrate_delta_dichroic,
    calibrate_delta_plain,
    calibrate_eta,
    forward_reading,
)
from .errors import *  # noqa: F401,F403
from .polarimetry import (
    RATIO_KEYS,
    ImageGeometry,
    NoiseConfig,
    PolarimetrySet,
    ingest_images,
    intensity,
    normalized_set,
    read_images,
    render_images,
    synthesize_dataset,
    write_images,
)
from .pt import (
    classify_phase,
    order_parameter,
    pt_decompose,
    pt_equivalent,
    rotate_hamiltonian,
    rotation_r,
    vk_apply,
)
from .spectral import (
    ModelParams,
    bloch_bands,
    bloch_closed_form,
    bloch_from_canonical,
    canonical_from_operator,
    effective_hamiltonian,
    eigensystem,
    hermitian_split,
    hopping_from_params,
    operator_fidelities,
    operator_fidelity,
    q_grid,
    state_fidelity,
    step_operator,
    step_operators,
    stokes,
)
from .tomography import BZReconstruction, SolverConfig, branch_align, cost, reconstruct_bz, reconstruct_pixel
from .topology import (
    critical_momentum,
    find_exceptional_points,
    phase_diagram,
    sublattice_residual,
    winding_at,
    winding_number,
)
