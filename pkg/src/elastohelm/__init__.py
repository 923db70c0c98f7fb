"""Shifted-Laplacian multigrid for the elastic Helmholtz equation on staggered grids."""
from .grid import Grid, StaggeredField
from .medium import (AttenuationConfig, MediumModel, make_constant_model,
                     make_layered_model, make_linear_model)
from .discretization import (assemble_acoustic, assemble_elastic, assemble_mixed,
                             point_source, shifted)
from .multigrid import CycleConfig, build_hierarchy, cycle
from .krylov import SolveConfig, fgmres, solve_acoustic, solve_elastic, solve_standard

__version__ = "0.1.0"
