"""Desk-scale toolkit for semiclassical magnetic nonlinear Schrodinger
standing waves: scalar ground states, the rescaled ansatz family, the
finite-dimensional reduction with its quantitative ladders, gauge-fixed
Newton refinement, and concentration sweeps over the auxiliary landscape.
"""

__version__ = "0.1.0"

from .ansatz import AnsatzParams, TangentFrame, build_ansatz, project_complement, tangent_frame
from .discretization import (EnergyReport, MagneticModel, energy,
                             energy_gradient, hessian_apply, inner_e,
                             magnetic_gradient, norm_e)
from .errors import MagnlsError
from .fields import (FieldSpec, check_hypotheses, eval_field,
                     gaussian_bump, linear_gauge, make_field_spec,
                     parse_field_expression, ring_bump, spec_from_json)
from .flow import gradient_flow_solve
from .grids import ComplexField, Grid, build_grid, load_field, save_field
from .groundstate import (Moments, RadialProfile, profile_moments,
                          profile_value, scaled_moments, scaling_factors,
                          solve_ground_state)
from .landscape import (CriticalManifold, CriticalPoint, LambdaSample,
                        classify_manifold, find_critical_points, lambda_eval)
from .reduction import (ExpansionReport, ReductionResult, coercivity_estimate,
                        expansion_report, reduced_functional, residual_norm,
                        solve_correction)
from .solver import (SolveBranch, SweepReport, concentration_sweep,
                     orbit_distance, peak_and_phase, refine_newton)
