"""Contact and Riemannian geometry of equilibrium statistical models."""
__version__ = "0.1.0"

from .autodiff import Jet, seed, hessian, gradient, jacobian
from .ensemble import (Ensemble, GibbsState, log_partition, gibbs_state, equations_of_state,
                       massieu_hessian, covariance_metric, microscopic_entropy, shannon_entropy,
                       sample_microstates, mc_covariance)
from .errors import (ContactothermError, InvalidArgumentError, DomainError, SingularityError,
                     UnsupportedOperationError, InfeasibleTargetError, NonConvergenceError,
                     ModelFormatError)
from .exterior import KForm, CoefficientField, wedge, wedge_power, exterior_derivative, nonintegrability_volume
from .maxent import MaxEntProblem, MaxEntResult, solve, solve_targets
from .models import two_level, ising_ring, quadratic, build_model, load_model_file
from .phase_space import (PhasePoint, LegendrePartition, eta1, eta2, t_tensor, metric_G, embed, pullback,
                          verify_invariance_chain, first_law_residuals, contact_signature,
                          legendre_transform, legendre_submanifold, ruppeiner_check)
from .reparam import ScalarMap, Reparametrization, random_reparametrization
from .curvature import curvature_scalar

__all__ = [
    "Jet",
    "seed",
    "hessian",
    "gradient",
    "jacobian",
    "Ensemble",
    "GibbsState",
    "log_partition",
    "gibbs_state",
    "equations_of_state",
    "massieu_hessian",
    "covariance_metric",
    "microscopic_entropy",
    "shannon_entropy",
    "sample_microstates",
    "mc_covariance",
    "ContactothermError",
    "InvalidArgumentError",
    "DomainError",
    "SingularityError",
    "UnsupportedOperationError",
    "InfeasibleTargetError",
    "NonConvergenceError",
    "ModelFormatError",
    "KForm",
    "CoefficientField",
    "wedge",
    "wedge_power",
    "exterior_derivative",
    "nonintegrability_volume",
    "MaxEntProblem",
    "MaxEntResult",
    "solve",
    "solve_targets",
    "two_level",
    "ising_ring",
    "quadratic",
    "build_model",
    "load_model_file",
    "PhasePoint",
    "LegendrePartition",
    "eta1",
    "eta2",
    "t_tensor",
    "metric_G",
    "embed",
    "pullback",
    "verify_invariance_chain",
    "first_law_residuals",
    "contact_signature",
    "legendre_transform",
    "legendre_submanifold",
    "ruppeiner_check",
    "ScalarMap",
    "Reparametrization",
    "random_reparametrization",
    "curvature_scalar",
]
