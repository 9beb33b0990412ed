from .model import EQ, GE, INF, LE, ConicModel, ModelError
from .mip import solve_mixed
from .solve import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                    SolveResult, solve_continuous)
from .lpdump import write_lp

__all__ = [
    "ConicModel", "ModelError", "SolveResult",
    "solve_continuous", "solve_mixed", "write_lp",
    "LE", "GE", "EQ", "INF",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT",
]
