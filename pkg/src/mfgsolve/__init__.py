"""Finite-horizon mean-field game equilibrium solvers.

Two solvers over a shared discretization of the mean-field simplex:

- :func:`mfgsolve.exact.backward_solve` — ground truth via backward
  recursion with a per-stage best-response fixed point (needs the exact
  transition kernel);
- :func:`mfgsolve.rl.rl_backward_solve` — model-free via batched Expected
  Sarsa and exact-gradient softmax policy ascent (needs sample access only).

Plus evaluation tools (induced flows, finite-population simulation,
exploitability certificates) and a CSV-artifact CLI.
"""

from .core import (PolicyAtlas, SimplexGrid, StageTables, build_grid,
                   interpolate_value, interpolation_weights, mean_field,
                   prescription, propagate_mean_field, softmax_prescription)
from .envs import (EnvModel, KernelUnavailableError, MalwareParams,
                   UnknownEnvironmentError, make_env, malware_env,
                   sample_transition)
from .evaluation import (ExploitabilityReport, TrajectoryReport,
                         atlas_distance, exploitability, rollout_population,
                         rollout_tagged_agent, statistical_trajectory)
from .exact import (FixedPointConfig, backward_solve, best_response,
                    solve_stage_fixed_point, stage_q)
from .kernels import BACKEND as KERNEL_BACKEND
from .rl import (RlConfig, expected_sarsa_batch, pg_gradient, pg_objective,
                 policy_gradient, rl_backward_solve, solve_stage_rl)

__version__ = "0.1.0"

__all__ = [
    "PolicyAtlas", "SimplexGrid", "StageTables", "build_grid",
    "interpolate_value", "interpolation_weights", "mean_field",
    "prescription", "propagate_mean_field", "softmax_prescription",
    "EnvModel", "KernelUnavailableError", "MalwareParams",
    "UnknownEnvironmentError", "make_env", "malware_env", "sample_transition",
    "ExploitabilityReport", "TrajectoryReport", "atlas_distance",
    "exploitability", "rollout_population", "rollout_tagged_agent",
    "statistical_trajectory",
    "FixedPointConfig", "backward_solve", "best_response",
    "solve_stage_fixed_point", "stage_q",
    "RlConfig", "expected_sarsa_batch", "pg_gradient", "pg_objective",
    "policy_gradient", "rl_backward_solve", "solve_stage_rl",
    "KERNEL_BACKEND",
    "__version__",
]
