from .functionals import (ObjectiveValue, benamou_brenier, check_continuity, continuity_residual,
                          staggered_divergence, evaluate_J, coercivity_bound, infimum_bound, uniform_measure)
from .particleobjective import ParticleObjective, evaluate_particle_J
