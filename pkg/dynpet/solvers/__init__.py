from .basesolver import BaseSolver, Reconstruction, DynpetSolverError
from .gridsolver import (GridSolver, GridProblem, SolverState, reconstruct_grid, duality_gap, prox_neglog,
                         project_parabola, estimate_opnorm)
from .particlesolver import (ParticleSolver, ParticleSet, reconstruct_particles, insert_trajectory, refine,
                             shortest_path)
from .solverlist import (solver_full_list, solver_dict, available_solvers, get_default_params,
                         get_params_description, get_solver_description, run_solver)
