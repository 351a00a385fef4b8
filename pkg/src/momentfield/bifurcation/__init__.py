from .atlas import BifurcationAtlas
from .codim2 import Codim2Curve, continue_codim2, continue_fold, continue_hopf, fold_normal_coefficient
from .continuation import ContinuationResult, continuation
from .cycles import CycleBranch, cycle_at, sweep_cycles
from .equilibria import BifurcationPoint, Branch, SweepResult, label_points, sweep_equilibria
from .hysteresis import HysteresisResult, hysteresis_sweep

__all__ = [
    "BifurcationAtlas",
    "BifurcationPoint",
    "Branch",
    "Codim2Curve",
    "ContinuationResult",
    "CycleBranch",
    "HysteresisResult",
    "SweepResult",
    "continuation",
    "continue_codim2",
    "continue_fold",
    "continue_hopf",
    "cycle_at",
    "fold_normal_coefficient",
    "hysteresis_sweep",
    "label_points",
    "sweep_cycles",
    "sweep_equilibria",
]
