"""Contraction metrics by mesh-free collocation with rigorous piecewise
affine verification."""

from .collocation import (CollocationSet, HalfplaneRegion, PolygonRegion,
                          fill_distance, hexagonal_grid, rectangular_grid,
                          vanderpol_orbit_region)
from .cpa import CpaMetric, compute_gradients, interpolate_metric
from .errors import (ConfigurationError, ConmetError, DegenerateSimplexError,
                     IllConditionedError, InputError, NumericalError,
                     OutOfDomainError, ResourceError)
from .kernel import WendlandKernel, build_wendland, wendland_poly
from .mesh import Triangulation, locate, standard_triangulation
from .recovery import (RecoverySolution, build_gram, gamma_to_beta,
                       solve_gamma, solve_recovery)
from .systems import (PolynomialSystem, SystemModel, builtin_systems,
                      derivative_bounds, eval_f, eval_jacobian, get_system,
                      linear_system, speed_control, speed_control_perturbed,
                      vanderpol)
from .verify import (VerificationConfig, VerificationReport, error_constants,
                     verify_all)

__version__ = "1.0.0"
