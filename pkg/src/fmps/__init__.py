"""Functional matrix product states for infinite coupled-oscillator chains.

Imaginary-time evolution (iTEBD) of translationally invariant MPS whose
physical indices label Hermite-Gaussian basis functions, plus the
observables needed to study entanglement scaling and criticality.
"""

from .analysis import (
    BoundarySearch,
    ScalingDataset,
    ScalingFit,
    central_charge,
    central_charge_convergence,
    classify_physical,
    find_boundary,
    fit_boundary,
    fit_log_law,
    fit_power_law,
    fit_scaling,
)
from .basis import (
    BasisOperators,
    Gate,
    LocalHamiltonian,
    build_derivative_matrix,
    build_gate,
    build_local_hamiltonian,
    build_position_matrix,
    single_site_hamiltonian,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    BracketError,
    DegenerateStateError,
    InsufficientDataError,
    NonPhysicalRegionError,
    StateNotCanonicalError,
)
from .evolve import (
    EvolutionConfig,
    GroundStateResult,
    apply_three_site_gate,
    apply_two_site_gate,
    canonicalize,
    run_ground_state,
    sweep_order,
)
from .fidelity import MixedTransferMatrix, local_fidelity, local_fidelity_detail
from .imps import (
    EntanglementData,
    InfiniteMPS,
    canonical_error,
    cyclic_shift,
    entanglement_entropy,
    entropies,
    init_product_state,
)
from .observables import (
    TransferMatrix,
    correlation_function,
    correlation_length,
    correlation_length_from_eigs,
    energy_density,
    exact_energy_density,
    exact_energy_density_finite,
    residual_density,
    residual_density_detail,
    transfer_matrix,
)

__version__ = "0.1.0"
