from .groundtruth import GroundTruth, ground_truth_to_grid, toy_scene
from .sampling import sample_poisson_listmode, expected_event_count, scatter_fraction
from .listmodeio import (Listmode, ListmodeFormatError, read_listmode, write_listmode,
                         read_hidden_labels, write_hidden_labels, continuous_dtype, discrete_dtype,
                         label_dtype, canonical_order, find_invalid_events)
