"""Lifespan analysis of quasi-linear strictly hyperbolic systems u_t + A(u) u_x = B(u)."""

from .catalog import BUILTIN_SYSTEMS, builtin_system, power_law_system
from .decomposition import (decomposition_coefficients, evaluate_sources, identity_residuals,
                            matching_expansion_check, project)
from .dsl import (SystemDefinition, build_system, evaluate_expression, parse_expression,
                  parse_system_definition)
from .errors import (CharacteristicError, ClassificationError, DefinitionError, DomainError,
                     DSLSyntaxError, NonFiniteError, QLHyperError, SolverError,
                     StiffnessError, StrictHyperbolicityError)
from .geometry import (analyze_wld, check_matching, check_normalized, compute_wld_index,
                       integrate_rarefaction_trajectory, normalize_2x2)
from .lifespan import (builtin_family, check_smallness, compute_M0, expression_family,
                       load_initial_data, predict_lifespan, psi_from_family)
from .riccati import (RiccatiCoefficients, blows_up_before, check_blowup_lemma,
                      extract_characteristic_riccati, hormander_quantities, integrate_riccati,
                      lemma_property_suite)
from .solver import (GridConfig, detect_blowup, epsilon_sweep, monitor_functionals,
                     solve_cauchy, trace_characteristics)
from .spectral import (assemble_matrix, check_strict_hyperbolicity, eigendecompose,
                       eigenframe_along_path, spectral_data)

__version__ = "0.1.0"
