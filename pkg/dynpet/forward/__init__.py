from .kernel import PositronKernel
from .xray import xray_transform, trace_ray, ray_matrix, canonical_direction
from .forwardmodel import (ForwardModel, BinnedIntensity, BoundConstants, EventOperator,
                           quadrature_directions, discretize, empirical_lipschitz_ratio, wasserstein_1,
                           save_sparse_cache, load_sparse_cache)
