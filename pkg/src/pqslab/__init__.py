"""Number-normalized phase entanglement and squeezing in two-mode boson systems."""
from .errors import (
    ConfigError,
    FixedNumberRequiredError,
    NonConvergenceError,
    PqslabError,
    StateFactoryError,
    UndefinedCriterionError,
    UndeterminedPhaseError,
)
from .sectors import (
    HamiltonianParams,
    SectorBasis,
    SectorOperator,
    build_hamiltonian,
    build_jphi,
    build_spin_operators,
    generalized_inverse_scalar,
    mz_input_rotation,
    su2_rotation,
)
from .states import (
    PqsSpec,
    SectorState,
    gaussian_pqs_state,
    ground_state,
    optimal_pqs_state,
    phase_eigenstate,
    su2_coherent,
    su2_coherent_x,
)
from .ensemble import (
    Ensemble,
    NormalizedMoments,
    NumberDistribution,
    attach,
    coherent_product_ensemble,
    delta_distribution,
    moments,
    mz_prepare,
    normalized_expectation,
    poisson_distribution,
)

__version__ = "0.1.0"
