from .case69 import bundled_case_69, scarcity_tightened
from .io import (CaseFormatError, load_case, load_scenarios, save_case,
                 save_scenarios)
from .types import (AdnNetwork, AtcParams, Branch, CaseConfig, CiesConfig,
                    CouplingDeviceParams, FLEX_RESOURCES, FasPriceCurve,
                    FlexEnvelope, MicroturbineParams, PredispatchResult,
                    PricingParams, RegFarm, SamplingSpec, ScenarioSet,
                    StorageParams, TimeGrid, TseParams, ValidationReport,
                    Violation, forecast_scenario_set)
from .validate import (check_radial, scenario_source_keys, validate_case,
                       validate_scenarios)

__all__ = [
    "AdnNetwork", "AtcParams", "Branch", "CaseConfig", "CiesConfig",
    "CouplingDeviceParams", "FLEX_RESOURCES", "FasPriceCurve", "FlexEnvelope",
    "MicroturbineParams", "PredispatchResult", "PricingParams", "RegFarm",
    "SamplingSpec", "ScenarioSet", "StorageParams", "TimeGrid", "TseParams",
    "ValidationReport", "Violation",
    "bundled_case_69", "scarcity_tightened", "forecast_scenario_set",
    "validate_case", "validate_scenarios", "check_radial",
    "scenario_source_keys",
    "save_case", "load_case", "save_scenarios", "load_scenarios",
    "CaseFormatError",
]
