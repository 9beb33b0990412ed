"""Stage 2: per-period flexible-supply envelope and margins of a CIES.

Each period is treated on its own, conditioned on the Stage-1 point: device
boxes follow from ramp rates and the previous-period schedule, storage boxes
from the stored energy, and the shiftable load from its band and what the
remaining horizon can still recover.  Two small linear programs per period
(maximize / minimize the net flexible electric supply subject to the heat
and cooling balances) give the envelope; margins are the distance from the
Stage-1 point to each extreme, per resource and aggregated.

Sign convention: generation and discharge count positive, consumption
(electric-boiler and chiller input, shift-in, charging) negative, so the
net supply is what the CIES could push toward its tie line.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core.types import (CiesConfig, CouplingDeviceParams, FLEX_RESOURCES,
                          FlexEnvelope, MicroturbineParams, PredispatchResult,
                          StorageParams, TimeGrid, TseParams)
from ..kernel import EQ, ConicModel, solve_continuous

ZERO_FLOOR = 1e-9


def device_flex_bounds(device, prior: dict, grid: TimeGrid) -> tuple[float, float]:
    """One-period flexible-supply interval of a single resource.

    Producers and coupling devices: ``prior`` carries ``p_prev`` (and
    ``committed`` for the unit-committed producer).  Storage: ``soc_prev``;
    the result is (max charge draw, max discharge supply), both magnitudes.
    Shiftable load: ``t``, ``loads`` and ``shift_history``; the result is the
    signed band of the shift itself.
    """
    dt = grid.step_hours
    if isinstance(device, MicroturbineParams):
        if not prior.get("committed", True):
            return 0.0, 0.0
        p_prev = prior["p_prev"]
        if p_prev is None:  # first period: ramping is unconditioned
            return device.p_min, device.p_max
        p_prev = float(p_prev)
        if p_prev and not (0.0 <= p_prev <= device.p_max + 1e-9):
            raise ValueError(f"prior output {p_prev} outside device range")
        lo = max(p_prev - device.ramp_down * dt, device.p_min)
        hi = min(device.p_max, p_prev + device.ramp_up * dt)
        return lo, hi
    if isinstance(device, CouplingDeviceParams):
        p_prev = prior["p_prev"]
        if p_prev is None:
            return device.p_in_min, device.p_in_max
        p_prev = float(p_prev)
        if not (device.p_in_min - 1e-9 <= p_prev <= device.p_in_max + 1e-9):
            raise ValueError(f"prior input {p_prev} outside device range")
        lo = max(p_prev - device.ramp_down * dt, device.p_in_min)
        hi = min(device.p_in_max, p_prev + device.ramp_up * dt)
        return lo, hi
    if isinstance(device, StorageParams):
        soc = float(prior["soc_prev"])
        if not (device.s_min - 1e-6 <= soc <= device.s_max + 1e-6):
            raise ValueError(f"prior state of charge {soc} outside capacity")
        kept = (1.0 - device.loss_coeff) * soc
        charge = min(device.p_ch_max,
                     max(0.0, (device.s_max - kept) / (device.eff_ch * dt)))
        discharge = min(device.p_dc_max,
                        max(0.0, (kept - device.s_min) * device.eff_dc / dt))
        return charge, discharge
    if isinstance(device, TseParams):
        t = int(prior["t"])
        loads = prior["loads"]
        hist = float(sum(prior["shift_history"][:t]))
        T = len(loads)
        band = device.shift_ratio * loads[t]
        future = device.shift_ratio * sum(loads[tau] for tau in range(t + 1, T))
        lo = max(-band, min(-future - hist, 0.0))
        hi = min(band, max(future - hist, 0.0))
        return lo, hi
    raise TypeError(f"no flexibility rule for {type(device).__name__}")


@dataclass
class _PeriodBoxes:
    mt: tuple[float, float]
    bes: tuple[float, float]            # signed: (-charge, +discharge)
    coupling: dict[str, tuple[float, float]]
    hes: dict[str, tuple[float, float]]  # (charge draw, discharge supply)
    ces: dict[str, tuple[float, float]]
    tse: tuple[float, float]


def _period_boxes(cies: CiesConfig, pre: PredispatchResult, t: int,
                  grid: TimeGrid) -> _PeriodBoxes:
    mt_prev = pre.mt_power[t - 1] if t else None
    mt_box = device_flex_bounds(
        cies.mt, {"p_prev": mt_prev, "committed": bool(pre.mt_on[t])}, grid)

    def storage_box(kind):
        out = {}
        for i, st in enumerate(cies.storage_of(kind)):
            key = f"{kind}{i}"
            soc_prev = pre.storage_soc[key][t - 1] if t else st.s_init
            out[key] = device_flex_bounds(st, {"soc_prev": soc_prev}, grid)
        return out

    bes_boxes = storage_box("bes")
    bes_lo = -sum(b[0] for b in bes_boxes.values())
    bes_hi = sum(b[1] for b in bes_boxes.values())

    coupling = {}
    for kind in ("hrb", "eb", "ec", "ac"):
        for i, dev in enumerate(cies.coupling_of(kind)):
            key = f"{kind}{i}"
            prev = pre.coupling_in[key][t - 1] if t else None
            coupling[key] = device_flex_bounds(dev, {"p_prev": prev}, grid)

    tse_box = device_flex_bounds(
        cies.tse, {"t": t, "loads": cies.elec_load,
                   "shift_history": pre.tse_shift}, grid)
    return _PeriodBoxes(mt_box, (bes_lo, bes_hi), coupling,
                        storage_box("hes"), storage_box("ces"), tse_box)


def _extreme_lp(cies: CiesConfig, boxes: _PeriodBoxes, t: int,
                sense: float) -> tuple[float, dict[str, float]] | None:
    """One extreme of net supply = mt + bes - eb - ec - tse; None if infeasible."""
    m = ConicModel(f"flex.{cies.name}[{t}]")
    mt = m.add_var("mt", *boxes.mt, obj=-sense)
    bes = m.add_var("bes", *boxes.bes, obj=-sense)
    tse = m.add_var("tse", *boxes.tse, obj=sense)
    cpl = {k: m.add_var(k, lo, hi) for k, (lo, hi) in boxes.coupling.items()}
    for key, vid in cpl.items():
        if key.startswith(("eb", "ec")):
            m.add_obj(vid, sense)
    hes = {k: (m.add_var(k + ".ch", 0.0, b[0]), m.add_var(k + ".dc", 0.0, b[1]))
           for k, b in boxes.hes.items()}
    ces = {k: (m.add_var(k + ".ch", 0.0, b[0]), m.add_var(k + ".dc", 0.0, b[1]))
           for k, b in boxes.ces.items()}

    ratio = cies.mt.heat_per_kwh_elec
    heat = []
    cool = []
    for key, vid in cpl.items():
        kind = key[:-1]
        eff = next(d.efficiency for i, d in enumerate(cies.coupling_of(kind))
                   if f"{kind}{i}" == key)
        if kind == "hrb":
            m.add_linear([(vid, 1.0), (mt, -ratio)], EQ, 0.0, f"{key}.tie")
            heat.append((vid, eff))
        elif kind == "eb":
            heat.append((vid, eff))
        elif kind == "ac":
            heat.append((vid, -1.0))
            cool.append((vid, eff))
        elif kind == "ec":
            cool.append((vid, eff))
    for ch, dc in hes.values():
        heat += [(dc, 1.0), (ch, -1.0)]
    for ch, dc in ces.values():
        cool += [(dc, 1.0), (ch, -1.0)]
    m.add_linear(heat, EQ, cies.heat_load[t], "heat")
    m.add_linear(cool, EQ, cies.cool_load[t], "cool")

    r = solve_continuous(m)
    if not r.optimal:
        return None
    x = r.x
    eb_in = sum(x[v] for k, v in cpl.items() if k.startswith("eb"))
    ec_in = sum(x[v] for k, v in cpl.items() if k.startswith("ec"))
    outputs = {"mt": float(x[mt]), "bes": float(x[bes]), "eb": -float(eb_in),
               "ec": -float(ec_in), "tse": -float(x[tse])}
    return sum(outputs.values()), outputs


def flex_extremes(cies: CiesConfig, pre: PredispatchResult, t: int,
                  grid: TimeGrid):
    """(max supply, outputs at max), (min supply, outputs at min) for period t.

    Falls back to a zero-width envelope at the Stage-1 point (with a
    diagnostic) if an extreme program is infeasible.
    """
    boxes = _period_boxes(cies, pre, t, grid)
    hi = _extreme_lp(cies, boxes, t, sense=+1.0)
    lo = _extreme_lp(cies, boxes, t, sense=-1.0)
    diag = None
    if hi is None or lo is None:
        point = _stage1_point(cies, pre, t)
        value = sum(point.values())
        diag = (f"{cies.name} t={t}: envelope program infeasible; "
                "reporting zero width at the Stage-1 point")
        return (value, dict(point)), (value, dict(point)), diag
    return hi, lo, diag


def _stage1_point(cies: CiesConfig, pre: PredispatchResult, t: int
                  ) -> dict[str, float]:
    bes = sum(pre.storage_dc[k][t] - pre.storage_ch[k][t]
              for k in pre.storage_dc if k.startswith("bes"))
    eb = sum(pre.coupling_in[k][t] for k in pre.coupling_in if k.startswith("eb"))
    ec = sum(pre.coupling_in[k][t] for k in pre.coupling_in if k.startswith("ec"))
    return {"mt": pre.mt_power[t], "bes": bes, "eb": -eb, "ec": -ec,
            "tse": -pre.tse_shift[t]}


def margins(cies: CiesConfig, pre: PredispatchResult,
            grid: TimeGrid) -> FlexEnvelope:
    """Envelope plus per-resource and aggregate margins for all periods."""
    T = grid.periods
    max_supply, min_supply = [], []
    at_max = {r: [] for r in FLEX_RESOURCES}
    at_min = {r: [] for r in FLEX_RESOURCES}
    up = {r: [] for r in FLEX_RESOURCES}
    down = {r: [] for r in FLEX_RESOURCES}
    diagnostics = []
    for t in range(T):
        (hi, hi_out), (lo, lo_out), diag = flex_extremes(cies, pre, t, grid)
        if diag:
            diagnostics.append(diag)
        point = _stage1_point(cies, pre, t)
        max_supply.append(hi)
        min_supply.append(lo)
        for r in FLEX_RESOURCES:
            at_max[r].append(hi_out[r])
            at_min[r].append(lo_out[r])
            raw_up = hi_out[r] - point[r]
            raw_down = point[r] - lo_out[r]
            if min(raw_up, raw_down) < -1e-6:
                diagnostics.append(
                    f"{cies.name} t={t} {r}: negative raw margin "
                    f"{min(raw_up, raw_down):.4f} kW clamped to 0")
            up[r].append(max(raw_up, 0.0))
            down[r].append(max(raw_down, 0.0))

    agg_up = tuple(sum(up[r][t] for r in FLEX_RESOURCES) for t in range(T))
    agg_down = tuple(sum(down[r][t] for r in FLEX_RESOURCES) for t in range(T))
    return FlexEnvelope(
        cies_name=cies.name,
        max_supply=tuple(max_supply), min_supply=tuple(min_supply),
        at_max={r: tuple(v) for r, v in at_max.items()},
        at_min={r: tuple(v) for r, v in at_min.items()},
        margin_up={r: tuple(v) for r, v in up.items()},
        margin_down={r: tuple(v) for r, v in down.items()},
        aggregate_up=agg_up, aggregate_down=agg_down,
        diagnostics=tuple(diagnostics))
