"""Game (Israeli) option pricing on discretised diffusions via Dynkin-game recursion."""

__version__ = "0.1.0"

from .model import (
    DiffusionModel,
    InnovationLaw,
    PayoffPair,
    ValidationReport,
    martingale_drift,
    validate_model,
    validate_innovations,
    validate_payoffs,
)
from .scheme import (
    BlockPartition,
    CoupledPair,
    DiscretePath,
    block_partition,
    coarse_path,
    coupled_pair,
    simulate_path,
    step,
)
from .dynkin import (
    GameValueReport,
    ScenarioTree,
    backward_value,
    brute_force_value,
    build_tree,
    coarse_value,
    extract_strategies,
    mc_payoff,
)

__all__ = [
    "DiffusionModel",
    "InnovationLaw",
    "PayoffPair",
    "ValidationReport",
    "martingale_drift",
    "validate_model",
    "validate_innovations",
    "validate_payoffs",
    "BlockPartition",
    "CoupledPair",
    "DiscretePath",
    "block_partition",
    "coarse_path",
    "coupled_pair",
    "simulate_path",
    "step",
    "GameValueReport",
    "ScenarioTree",
    "backward_value",
    "brute_force_value",
    "build_tree",
    "coarse_value",
    "extract_strategies",
    "mc_payoff",
]
