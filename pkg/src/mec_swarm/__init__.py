"""Task-offloading optimisation for simulated edge-computing environments.

Baseline PSO, adaptive PSO, and a soft actor-critic agent that steers PSO's
acceleration coefficients (APSO-SAC).
"""

from .cost import Assignment, PaperLiteral, Penalty, Weights, brute_force_optimum, total_cost
from .env import EnvConfig, Environment, generate_environment, load_environment, save_environment

__all__ = [
    "Assignment",
    "EnvConfig",
    "Environment",
    "PaperLiteral",
    "Penalty",
    "Weights",
    "brute_force_optimum",
    "generate_environment",
    "load_environment",
    "save_environment",
    "total_cost",
]
