from .envelope import device_flex_bounds, flex_extremes, margins
from .predispatch import (PredispatchInfeasible, build_predispatch_model,
                          solve_predispatch, verify_predispatch)

__all__ = [
    "device_flex_bounds", "flex_extremes", "margins",
    "build_predispatch_model", "solve_predispatch", "verify_predispatch",
    "PredispatchInfeasible",
]
