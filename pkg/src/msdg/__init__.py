"""Discontinuous-Galerkin solvers for multi-symplectic Hamiltonian PDEs."""

from .errors import (
    MsdgError,
    InvalidConfigError,
    SingularOperatorError,
    InconsistentRhsError,
    BlowUpError,
)
from .mesh_basis import (
    QuadratureRule,
    Mesh1D,
    DgFunction,
    gauss_legendre,
    build_mesh,
    mesh_from_edges,
    default_quadrature,
    project,
    project_values,
    project_product,
    l2_error,
    l2_norm,
    integral,
    mean,
)
from .models import MODEL_IDS, make_model
from .schemes import SCHEME_CLASSES, build_reduced_scheme
from .harness import (
    EXPERIMENT_PRESETS,
    ExperimentConfig,
    compute_order,
    experiment_preset,
    load_config,
    run_convergence,
    run_simulation,
    run_verification,
    save_config,
)

__version__ = "0.1.0"
