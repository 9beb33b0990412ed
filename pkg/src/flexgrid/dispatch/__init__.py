from .adn import (AdnSolution, build_adn_model, relaxation_residuals,
                  solve_adn_dispatch, two_node_flow)
from .blocks import InfeasibleConfigError
from .cies import (CiesSolution, DispatchInfeasible, build_cies_model,
                   cvar_value, solve_cies_dispatch)

__all__ = [
    "AdnSolution", "CiesSolution", "DispatchInfeasible",
    "InfeasibleConfigError", "build_adn_model", "build_cies_model",
    "cvar_value", "relaxation_residuals", "solve_adn_dispatch",
    "solve_cies_dispatch", "two_node_flow",
]
