"""Localized LQR synthesis and simulation for large sparse linear systems."""

from .baseline import RiccatiSolution, centralized_h2_objective, solve_dare
from .controller import (
    ControllerState,
    Impulse,
    SimTrace,
    WhiteNoise,
    perturb_maps,
    perturb_maps_fir,
    sensitivity_experiment,
    simulate,
)
from .errors import Infeasible, NoConvergence, SimulationDiverged, SingularKKT
from .feasibility import (
    ClosedLoopMaps,
    LocalizabilityReport,
    check_localizable,
    load_maps,
    save_maps,
    solve_global,
)
from .kernels import BACKEND
from .llqr import CostWeights, evaluate_awgn_cost, lqr_objective, synthesize_llqr
from .plant import Plant, make_chain, make_chain_benchmark, random_plant, reduce
from .sparsity import (
    ConstraintSpace,
    SparsityPattern,
    build_localized_fir_constraints,
    pattern_power_union,
    support,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClosedLoopMaps",
    "ConstraintSpace",
    "ControllerState",
    "CostWeights",
    "Impulse",
    "Infeasible",
    "LocalizabilityReport",
    "NoConvergence",
    "Plant",
    "RiccatiSolution",
    "SimTrace",
    "SimulationDiverged",
    "SingularKKT",
    "SparsityPattern",
    "WhiteNoise",
    "build_localized_fir_constraints",
    "centralized_h2_objective",
    "check_localizable",
    "evaluate_awgn_cost",
    "load_maps",
    "lqr_objective",
    "make_chain",
    "make_chain_benchmark",
    "pattern_power_union",
    "perturb_maps",
    "perturb_maps_fir",
    "random_plant",
    "reduce",
    "save_maps",
    "sensitivity_experiment",
    "simulate",
    "solve_dare",
    "solve_global",
    "support",
    "synthesize_llqr",
]
