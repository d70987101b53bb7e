"""Level-set reaction-diffusion model of magnesium biodegradation."""

from .errors import (ConfigError, InvalidArgumentError, InvariantViolation, MagdegError,
                     NumericalFailureError, OutOfDomainError, RootNotFoundError,
                     SolverFailureError)
from .grid import (Cuboid, Cylinder, Difference, Intersection, LevelSetField, ScalarField,
                   Sphere, StructuredGrid, Union, make_grid, sdf_build, trilinear_sample,
                   volume_positive)
from .linalg import SolveReport, SparseMatrix, solve
from .transport import (ChemState, MaterialParams, effective_diffusivity, film_capacity,
                        reaction_rates, step_transport)

__version__ = "0.1.0"
