from .rescaling import (ScaleTriple, rescaled_parameters, rescale_model_parameters, rescale_geometry, rescale_model,
                        rescale_measurement, rescale_solution, rescale_ground_truth, log_density_factor)
from .betaheuristic import BetaTable, read_beta_table, beta_heuristic
from .invariance import (functional_invariance, cell_indices, bin_count_means, measurement_invariance,
                         z_threshold)
