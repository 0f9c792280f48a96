"""Fixed-energy scattering symbols of asymptotically homogeneous fields."""
from .core import (ZERO, AsymptoticScalarField, HomogeneousTerm, LineSpec, PowerFit,
                   AsymscatError, OriginEvaluationError, UnsupportedDimensionError,
                   InconsistentDegreeError, DivergentIntegralError,
                   eval_field, fit_homogeneous_sharp, project_to_plane, sphere_grid)
from .fields import MagneticPotential, TwoFormField, a_inf, a_reg, build_A, u_potential

__version__ = "0.1.0"
