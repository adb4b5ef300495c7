from .utils import get_particle_colors, draw_domain

# reconstructions
from .slicemass import plot_slice_mass, SliceMassWidget
from .trajectories import plot_trajectory_overlay, TrajectoryOverlayWidget
from .objectivedecay import plot_objective_decay, ObjectiveDecayWidget, history_totals

# debiasing
from .scattercurve import plot_scatter_count_curve, ScatterCountCurveWidget
from .toybias import plot_toy_bias, ToyBiasWidget

# scaling
from .scalingcheck import plot_scaling_check, ScalingCheckWidget
