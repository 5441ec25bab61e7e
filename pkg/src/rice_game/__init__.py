"""Regional climate-economy model played as an n-player dynamic game."""

__version__ = "0.1.0"

from .errors import (ConfigError, ContractError, NumericalError, RiceError, SchemaError,
                     SolverError)
from .params import (DEVELOPED, DEVELOPING, REGION_NAMES, ExogenousPaths, GeneratorConfig,
                     GeophysParams, HorizonConfig, InitialState, ModelParams, RegionParams,
                     default_params, generate_exogenous, load_config, load_exogenous,
                     write_exogenous, year_of)
from .dynamics import State, Trajectory, constant_controls, simulate, step, welfare
from .grad import ObjectiveSpec, fd_gradient, objective_and_gradient
from .solve import SolveOptions, SolveReport, solve_box_max
from .problem import control_bounds, optimize_controls
from .scc import scc, scc_path, scc_table
from .coop import (ClusterSplit, MpcConfig, mpc_rice, pareto_frontier, pareto_point,
                   solve_swm)
from .noncoop import BrConfig, RhfConfig, best_response, rba_dg, rhfa_dg
