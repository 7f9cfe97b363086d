"""Exact spectral and mixing analysis of Gibbs sampler scan orders."""

from .model import (
    BipartiteModel,
    HamiltonianRangeError,
    ModelError,
    build_dbm,
    build_hardcore_complete_bipartite,
    build_rbm,
    conditional_distribution,
    hamiltonian,
    model_from_dict,
    model_from_json,
    random_bipartite_model,
    unnormalized_weight,
    validate_bipartite,
)
from .chain import (
    Kernel,
    StateSpace,
    adjoint,
    enumerate_state_space,
    ergodicity_check,
    random_update_kernel,
    reversibilization,
    scan_kernels,
    single_site_kernel,
    stationary_projector,
)
from .spectral import (
    SpectralReport,
    deviation_norm,
    general_operator_norm,
    relaxation_time,
    verify_theorem1,
)
from .mixing import (
    MixingReport,
    exact_mixing_time,
    tv_distance,
    verify_fill_inequality,
    verify_mixing_bounds,
)
from .lumped import (
    hardcore_lump_map,
    lumpability_check,
    lumped_as_kernel,
    lumped_ru_kernel,
    lumped_state_space,
)
from .coupling import (
    CouplingReport,
    grand_coupling_time,
    monotonicity_precondition,
)

__all__ = [name for name in dir() if not name.startswith("_")]
