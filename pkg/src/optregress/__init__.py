"""optregress: simulation and sequential least-squares estimation for
regression models driven by semimartingales with two-sided jumps.

The observed process is ``X = (f o a) * theta + M`` where ``f o a`` is a
two-leg pathwise integral (predictable leg against continuous growth and
backward jumps, optional leg against forward jumps) and ``M`` is noise.
The package simulates such models, estimates ``theta`` structurally and
sequentially with a guaranteed variance bound, runs the associated
two-hypothesis decision rule, and verifies the guarantees by seeded
Monte Carlo.
"""

from .config import (ConfigError, ExperimentSpec, ScenarioConfig,
                     load_config_file, resolve_seed)
from .decision import (ACCEPT_H0, ACCEPT_H1, DriftHypothesisTest, TestConfig,
                       decide, phi_statistic, required_level)
from .estimators import (DegenerateDesignError, EstimationError, IDENTITY_MAP,
                         MonotoneMap, NonlinearSequentialLSEstimator,
                         NonlinearSequentialResult, SQRT_MAP,
                         SequentialLSEstimator, SequentialResult,
                         StructuralLSEstimator, g_condition_check,
                         nonlinear_sequential, sequential_ls, stopping_rule,
                         structural_ls)
from .harness import McReport, run_experiment, write_report, xi_for
from .integrals import (BilinearIntegrand, ConstantLeg, FunctionLeg,
                        IntegralError, Integrator, F_process, PathLeg,
                        d_process, integrate_against_path,
                        kronecker_diagnostic, optional_integral,
                        optional_integral_path, slln_condition_value,
                        y_process, y_process_inverse)
from .paths import (IncreasingPath, LadlagPath, PathError, add,
                    constant_path, dump_path_csv, jump_path, line_path,
                    load_path_csv, merge_times, refine, sampled_path, scale)
from .simulators import (SimulatedModel, build_scenario, component_rng,
                         design_for, simulate_poisson_left,
                         simulate_poisson_right, simulate_wiener)

__version__ = "0.1.0"
