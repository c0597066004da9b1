"""Architecture-independent optimizers for beyond-diagonal RIS aided MU-MISO downlinks."""

__version__ = "0.1.0"

from .channel import (RNG_ALGORITHM, Scenario, ScenarioConfig, build_scenario,
                      gen_rician, normalized_copy, pathloss)
from .powermin import (PowerMinParams, PowerMinState, project_qos,
                       project_qos_row, solve_powermin)
from .report import NonFiniteIterateError, RunReport
from .ris import (ArchitectureMask, IndexSets, b_to_theta, index_sets,
                  is_spanning_tree, make_architecture, random_susceptance,
                  sinr_and_rate, solve_b_subproblem, theta_to_b)
from .sumrate import SumRateParams, SumRateState, solve_sumrate

__all__ = [
    "ArchitectureMask", "IndexSets", "NonFiniteIterateError", "PowerMinParams",
    "PowerMinState", "RNG_ALGORITHM", "RunReport", "Scenario", "ScenarioConfig",
    "SumRateParams", "SumRateState", "__version__", "b_to_theta",
    "build_scenario", "gen_rician", "index_sets", "is_spanning_tree",
    "make_architecture", "normalized_copy", "pathloss", "project_qos",
    "project_qos_row", "random_susceptance", "sinr_and_rate",
    "solve_b_subproblem", "solve_powermin", "solve_sumrate", "theta_to_b",
]
