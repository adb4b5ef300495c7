from .toymodels import (toy_threshold_continuous, toy_threshold_discrete, ToyModel, solve_toy, brute_force_toy,
                        toy_switch_q, toy_bias_table)
from .heuristics import heuristic_q
from .scattersets import (ScatterSplit, split_events, event_density_parts, scatter_sets, count_scatter_curve,
                          read_sweep_csv, sweep_columns)
from .combinatorial import (SubsetTable, scatter_subset_table, combinatorial_minimum, max_formulation_value,
                            max_formulation_minimum, check_equivalence)
