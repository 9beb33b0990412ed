"""Domain types for the dispatch engine.

Everything here is an immutable container; invariants are checked by
``flexgrid.core.validate``, not by constructors, so that a bad case file
produces a validation report instead of an exception.  Powers are kW,
energies kWh, prices $/kWh (gas $/m3), network impedances ohm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Series = tuple[float, ...]


@dataclass(frozen=True)
class TimeGrid:
    periods: int = 24
    step_hours: float = 1.0


@dataclass(frozen=True)
class MicroturbineParams:
    p_max: float
    p_min: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    elec_eff: float
    heat_loss: float
    gas_price: float
    gas_calorific: float
    om_cost: float = 0.02

    @property
    def heat_per_kwh_elec(self) -> float:
        """Recoverable MT heat per kWh of electricity produced."""
        return (1.0 - self.elec_eff - self.heat_loss) / self.elec_eff


COUPLING_KINDS = ("hrb", "eb", "ec", "ac")


@dataclass(frozen=True)
class CouplingDeviceParams:
    kind: str
    p_in_max: float
    p_in_min: float
    ramp_up: float
    ramp_down: float
    efficiency: float
    om_cost: float = 0.01


STORAGE_KINDS = ("bes", "hes", "ces")


@dataclass(frozen=True)
class StorageParams:
    kind: str
    p_ch_max: float
    p_dc_max: float
    s_min: float
    s_max: float
    s_init: float
    loss_coeff: float
    eff_ch: float
    eff_dc: float
    om_cost: float = 0.01


@dataclass(frozen=True)
class TseParams:
    shift_ratio: float
    dr_comp: float


@dataclass(frozen=True)
class CiesConfig:
    name: str
    node: int
    mt: MicroturbineParams
    coupling: tuple[CouplingDeviceParams, ...]
    storage: tuple[StorageParams, ...]
    tse: TseParams
    elec_load: Series
    heat_load: Series
    cool_load: Series
    wt_forecast: Series
    pv_forecast: Series
    wt_capacity: float
    pv_capacity: float
    curtail_penalty: float
    shed_penalty: float
    reg_om_cost: float
    cvar_beta: float
    cvar_up_limit: float
    cvar_down_limit: float
    tie_buy_max: float
    tie_sell_max: float

    def coupling_of(self, kind: str) -> tuple[CouplingDeviceParams, ...]:
        return tuple(d for d in self.coupling if d.kind == kind)

    def storage_of(self, kind: str) -> tuple[StorageParams, ...]:
        return tuple(d for d in self.storage if d.kind == kind)


@dataclass(frozen=True)
class Branch:
    from_node: int
    to_node: int
    r_ohm: float
    x_ohm: float
    i_max_a: float


@dataclass(frozen=True)
class RegFarm:
    node: int
    capacity_kw: float
    profile: Series  # forecast availability, kW


@dataclass(frozen=True)
class AdnNetwork:
    node_count: int
    root: int
    v_base_kv: float
    s_base_mva: float
    u_min_pu: float
    u_max_pu: float
    branches: tuple[Branch, ...]
    load_p_kw: dict[int, float]      # base active load per node
    load_q_kvar: dict[int, float]
    load_shape: Series               # multiplier per period
    mt_node: int
    mt: MicroturbineParams
    bes_node: int
    bes: StorageParams
    wt_farms: tuple[RegFarm, ...]
    pv_farms: tuple[RegFarm, ...]
    cies_nodes: dict[int, str]       # node -> CIES name
    tou_price: Series
    main_grid_price: Series
    main_import_max: float
    curtail_penalty: float
    shed_penalty: float
    loss_penalty: float
    reg_om_cost: float
    cvar_beta: float
    cvar_up_limit: float
    cvar_down_limit: float


@dataclass(frozen=True)
class SamplingSpec:
    n_samples: int = 1000
    sigma_rel: float = 0.10
    n_scenarios: int = 5
    seed: int = 0


@dataclass(frozen=True)
class PricingParams:
    fas_price_cap: float | None = None   # None: 1.5 x peak TOU
    unit_basis_kwh: float = 1.0
    eb_eff_for_credit: float | None = None  # None: use the CIES EB efficiency


@dataclass(frozen=True)
class AtcParams:
    omega0: float = 0.02
    chi0: float = 1e-4
    lam: float = 2.5
    eps1: float = 0.01
    eps2: float = 0.01
    k_max: int = 100


@dataclass(frozen=True)
class CaseConfig:
    time_grid: TimeGrid
    adn: AdnNetwork
    cies: tuple[CiesConfig, ...]
    sampling: SamplingSpec
    atc: AtcParams
    pricing: PricingParams

    def cies_by_name(self, name: str) -> CiesConfig:
        for c in self.cies:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class ScenarioSet:
    """Weighted renewable-output scenarios.

    Each scenario maps a source key (e.g. ``adn.wt.38`` or
    ``cies.residential.pv``) to a kW series of length T.
    """
    scenarios: tuple[dict[str, Series], ...]
    probabilities: Series
    counts: tuple[int, ...] = ()     # cluster sizes when produced by reduction

    @property
    def size(self) -> int:
        return len(self.scenarios)

    def series(self, key: str, s: int) -> Series:
        return self.scenarios[s][key]


def forecast_scenario_set(sources: dict[str, Series]) -> ScenarioSet:
    """Single deterministic scenario holding the forecasts themselves."""
    return ScenarioSet(scenarios=(dict(sources),), probabilities=(1.0,), counts=(1,))


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "OK"
        return "\n".join(str(v) for v in self.violations)


@dataclass(frozen=True)
class PredispatchResult:
    """Stage-1 isolated-network schedule of one CIES."""
    cies_name: str
    objective: float
    costs: dict[str, float]          # fuel, om, dr, penalty, total
    mt_power: Series
    mt_on: tuple[int, ...]
    coupling_in: dict[str, Series]   # keyed "kind[i]"
    storage_ch: dict[str, Series]
    storage_dc: dict[str, Series]
    storage_soc: dict[str, Series]
    tse_shift: Series
    wt_used: Series
    pv_used: Series
    curtail: Series
    shed: Series
    solver: dict = field(default_factory=dict)

    def net_flexible_supply(self, t: int) -> float:
        """Signed electric supply of the flexibility resources at t."""
        bes_ch = sum(s[t] for k, s in self.storage_ch.items() if k.startswith("bes"))
        bes_dc = sum(s[t] for k, s in self.storage_dc.items() if k.startswith("bes"))
        eb = sum(s[t] for k, s in self.coupling_in.items() if k.startswith("eb"))
        ec = sum(s[t] for k, s in self.coupling_in.items() if k.startswith("ec"))
        return self.mt_power[t] + (bes_dc - bes_ch) - eb - ec - self.tse_shift[t]


FLEX_RESOURCES = ("mt", "bes", "eb", "ec", "tse")


@dataclass(frozen=True)
class FlexEnvelope:
    """Per-period flexible-supply interval and margins of one CIES."""
    cies_name: str
    max_supply: Series
    min_supply: Series
    at_max: dict[str, Series]        # signed resource outputs at the max extreme
    at_min: dict[str, Series]
    margin_up: dict[str, Series]     # per resource, >= 0
    margin_down: dict[str, Series]
    aggregate_up: Series
    aggregate_down: Series
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True)
class FasPriceCurve:
    cies_name: str
    prices: Series                   # gamma_flex per period
    adjustment_cost: float           # gamma_mt_e
    price_cap: float
    margins: Series                  # aggregate upward margins used
    degenerate: bool = False
