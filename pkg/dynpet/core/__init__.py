from .base import BaseDynpetObject

from .geometry import ScannerGeometry, LineOfResponse, build_ring_geometry, equal_area_zones
from .grid import (GridSpec, GridMeasure, random_conservative_measure,
                   mask_arrays_to_measure, measure_to_mask_arrays)
from .trajectories import BaseTrajectories

# tools
from .core_tools import (check_json, hash_dict, write_grid_measure, read_grid_measure,
                         write_header_and_slab, read_header_and_slab)
from .job_tools import ensure_n_jobs, divide_into_chunks, run_chunks
from .rng import control_generator, event_generator, sample_unit_vectors, sample_in_ball, check_seed
