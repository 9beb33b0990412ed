"""Case validation: every invariant violation is reported, nothing raises."""

from __future__ import annotations

from .types import (COUPLING_KINDS, STORAGE_KINDS, CaseConfig, CiesConfig,
                    ScenarioSet, ValidationReport, Violation)


class _Collector:
    def __init__(self):
        self.items: list[Violation] = []

    def check(self, ok: bool, path: str, message: str):
        if not ok:
            self.items.append(Violation(path, message))

    def report(self) -> ValidationReport:
        return ValidationReport(tuple(self.items))


def _series_ok(v, path, T, out, nonneg=True):
    out.check(len(v) == T, path, f"length {len(v)} != T={T}")
    if nonneg:
        out.check(all(x >= 0 for x in v), path, "negative entries")


def _check_mt(mt, path, out):
    out.check(0 <= mt.p_min <= mt.p_max, path, "need 0 <= p_min <= p_max")
    out.check(mt.ramp_up >= 0 and mt.ramp_down >= 0, path, "negative ramp rate")
    out.check(mt.elec_eff > 0, path, "elec_eff must be positive")
    out.check(mt.elec_eff + mt.heat_loss <= 1.0, path,
              "elec_eff + heat_loss exceeds 1")
    out.check(mt.min_up >= 1 and mt.min_down >= 1, path,
              "min up/down times must be >= 1 period")
    out.check(mt.gas_calorific > 0, path, "gas_calorific must be positive")


def _check_storage(st, path, out):
    out.check(st.kind in STORAGE_KINDS, path, f"unknown storage kind {st.kind!r}")
    out.check(st.s_min <= st.s_init <= st.s_max, path,
              "need s_min <= s_init <= s_max")
    out.check(0 < st.eff_ch <= 1 and 0 < st.eff_dc <= 1, path,
              "efficiencies must be in (0, 1]")
    out.check(0 <= st.loss_coeff < 1, path, "loss_coeff must be in [0, 1)")
    out.check(st.p_ch_max >= 0 and st.p_dc_max >= 0, path, "negative power rating")


def _check_cies(c: CiesConfig, T: int, out):
    p = f"cies[{c.name}]"
    _check_mt(c.mt, f"{p}.mt", out)
    for i, d in enumerate(c.coupling):
        dp = f"{p}.coupling[{i}:{d.kind}]"
        out.check(d.kind in COUPLING_KINDS, dp, f"unknown kind {d.kind!r}")
        out.check(0 <= d.p_in_min <= d.p_in_max, dp, "need 0 <= p_in_min <= p_in_max")
        out.check(d.efficiency > 0, dp, "efficiency must be positive")
    for i, s in enumerate(c.storage):
        _check_storage(s, f"{p}.storage[{i}:{s.kind}]", out)
    out.check(0 <= c.tse.shift_ratio <= 1, f"{p}.tse", "shift_ratio outside [0, 1]")
    for nm, series in (("elec_load", c.elec_load), ("heat_load", c.heat_load),
                       ("cool_load", c.cool_load), ("wt_forecast", c.wt_forecast),
                       ("pv_forecast", c.pv_forecast)):
        _series_ok(series, f"{p}.{nm}", T, out)
    out.check(0 < c.cvar_beta < 1, f"{p}.cvar_beta", "beta outside (0, 1)")
    out.check(c.cvar_up_limit >= 0 and c.cvar_down_limit >= 0,
              f"{p}.cvar", "negative CVaR limit")
    out.check(c.tie_buy_max >= 0 and c.tie_sell_max >= 0,
              f"{p}.tie", "negative tie-line cap")


def check_radial(node_count: int, branches, root: int):
    """True when the branch set is a spanning tree rooted anywhere."""
    if len(branches) != node_count - 1:
        return False
    adj: dict[int, list[int]] = {}
    for b in branches:
        adj.setdefault(b.from_node, []).append(b.to_node)
        adj.setdefault(b.to_node, []).append(b.from_node)
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == node_count


def _check_adn(adn, T: int, out):
    p = "adn"
    nodes = set(range(1, adn.node_count + 1))
    out.check(adn.root in nodes, f"{p}.root", "root outside node range")
    for i, b in enumerate(adn.branches):
        bp = f"{p}.branches[{i}]"
        out.check(b.from_node in nodes and b.to_node in nodes, bp,
                  "endpoint outside node range")
        out.check(b.r_ohm >= 0 and b.x_ohm >= 0, bp, "negative impedance")
        out.check(b.i_max_a > 0, bp, "ampacity must be positive")
    out.check(check_radial(adn.node_count, adn.branches, adn.root),
              f"{p}.branches", "network is not a connected radial tree")
    out.check(adn.u_min_pu < adn.u_max_pu, f"{p}.voltage", "U_min must be < U_max")
    _check_mt(adn.mt, f"{p}.mt", out)
    _check_storage(adn.bes, f"{p}.bes", out)
    out.check(adn.mt_node in nodes and adn.bes_node in nodes,
              f"{p}.dg_placement", "device node outside range")
    for farm_list, nm in ((adn.wt_farms, "wt_farms"), (adn.pv_farms, "pv_farms")):
        for i, f in enumerate(farm_list):
            fp = f"{p}.{nm}[{i}]"
            out.check(f.node in nodes, fp, "farm node outside range")
            out.check(f.capacity_kw > 0, fp, "capacity must be positive")
            _series_ok(f.profile, fp + ".profile", T, out)
            out.check(all(x <= f.capacity_kw + 1e-9 for x in f.profile),
                      fp + ".profile", "forecast above capacity")
    for n in adn.cies_nodes:
        out.check(n in nodes, f"{p}.cies_nodes[{n}]", "node outside range")
    _series_ok(adn.load_shape, f"{p}.load_shape", T, out)
    _series_ok(adn.tou_price, f"{p}.tou_price", T, out)
    _series_ok(adn.main_grid_price, f"{p}.main_grid_price", T, out)
    out.check(adn.main_import_max >= 0, f"{p}.main_import_max", "negative cap")
    out.check(0 < adn.cvar_beta < 1, f"{p}.cvar_beta", "beta outside (0, 1)")


def validate_case(config: CaseConfig) -> ValidationReport:
    """Check every declared invariant; violations are data, not faults."""
    out = _Collector()
    T = config.time_grid.periods
    out.check(T >= 1, "time_grid.periods", "need T >= 1")
    out.check(config.time_grid.step_hours > 0, "time_grid.step_hours",
              "need step > 0")
    _check_adn(config.adn, T, out)
    names = [c.name for c in config.cies]
    out.check(len(set(names)) == len(names), "cies", "duplicate CIES names")
    for c in config.cies:
        _check_cies(c, T, out)
        out.check(config.adn.cies_nodes.get(c.node) == c.name,
                  f"cies[{c.name}].node",
                  "node not registered in adn.cies_nodes")
    s = config.sampling
    out.check(s.n_samples >= s.n_scenarios, "scenario_gen",
              "n_samples must be >= n_scenarios")
    out.check(s.sigma_rel >= 0, "scenario_gen.sigma_rel", "negative sigma")
    a = config.atc
    out.check(2 < a.lam < 3, "atc.lambda", "lambda must lie in (2, 3)")
    out.check(a.omega0 > 0 and a.chi0 > 0, "atc", "multipliers must start positive")
    out.check(a.eps1 > 0 and a.eps2 > 0, "atc", "tolerances must be positive")
    pc = config.pricing
    out.check(pc.fas_price_cap is None or pc.fas_price_cap > 0,
              "pricing.fas_price_cap", "cap must be positive")
    return out.report()


def validate_scenarios(ss: ScenarioSet, config: CaseConfig) -> ValidationReport:
    out = _Collector()
    T = config.time_grid.periods
    out.check(ss.size >= 1, "scenarios", "need at least one scenario")
    total = sum(ss.probabilities)
    out.check(abs(total - 1.0) <= 1e-9, "scenarios.probabilities",
              f"sum {total} != 1")
    out.check(all(p >= 0 for p in ss.probabilities),
              "scenarios.probabilities", "negative probability")
    keys = scenario_source_keys(config)
    for s, sc in enumerate(ss.scenarios):
        for k in keys:
            out.check(k in sc, f"scenarios[{s}]", f"missing source {k}")
            if k in sc:
                _series_ok(sc[k], f"scenarios[{s}].{k}", T, out)
    return out.report()


def scenario_source_keys(config: CaseConfig) -> list[str]:
    keys = [f"adn.wt.{f.node}" for f in config.adn.wt_farms]
    keys += [f"adn.pv.{f.node}" for f in config.adn.pv_farms]
    for c in config.cies:
        keys += [f"cies.{c.name}.wt", f"cies.{c.name}.pv"]
    return keys
