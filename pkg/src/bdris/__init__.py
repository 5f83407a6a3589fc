"""Scattering-matrix design for reciprocal block-diagonal reflective
surfaces: system model, manifold machinery, closed-form gradients,
conjugate-gradient ascent, and a reproducible experiment harness."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Beamformer,
    ChannelSet,
    GroupView,
    ScatteringMatrix,
    SystemDims,
    equivalent_channel,
    group_sinr,
    group_view,
    groupwise_objective,
    identity_scattering,
    mmse_beamformer,
    penalized_objective,
    sinr,
    sum_rate,
    symmetry_penalty,
    uniform_power_beamformer,
)
from .channel import (  # noqa: E402
    ChannelRecipe,
    PathlossParams,
    generate,
    load_channel_set,
    load_matrices,
    load_scattering,
    pathloss,
    save_channel_set,
    save_matrices,
    save_scattering,
)
from .manifold import (  # noqa: E402
    DegenerateProjectionWarning,
    ProjectionError,
    RetractionError,
    TangentDirection,
    project_symmetric,
    project_unitary,
    project_unitary_symmetric,
    random_unitary_symmetric,
    retract,
    riemannian_inner,
    tangent_project,
)
from .gradient import (  # noqa: E402
    GradientMode,
    euclidean_gradient,
    euclidean_gradient_diag_power,
    fd_gradient,
    lemma1_gradient,
    lemma2_gradient,
    penalty_gradient,
)
from .optimizer import (  # noqa: E402
    IterationRecord,
    OptimizationTrace,
    SolverConfig,
    armijo_search,
    optimize,
    polak_ribiere_beta,
)
from .experiments import (  # noqa: E402
    Architecture,
    ExperimentPlan,
    GradCheckRow,
    InvalidPlanError,
    REFERENCE_ARCHITECTURES,
    ResultRow,
    baseline_identity,
    baseline_random,
    run_cdf,
    run_convergence,
    run_element_sweep,
    run_grad_check,
    run_power_sweep,
    write_results_csv,
)
