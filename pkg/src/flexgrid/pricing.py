"""Flexibility-service pricing.

The price a CIES posts for upward flexibility is anchored between its own
marginal generation cost (net of the heat credit earned by cogeneration)
and a configurable cap, falling linearly as the upward flexibility margin
grows: scarce flexibility is expensive, abundant flexibility cheap.
"""

from __future__ import annotations

import warnings

from .core.types import (CiesConfig, FasPriceCurve, FlexEnvelope,
                         MicroturbineParams, PricingParams)


class PricingError(ValueError):
    pass


def unit_generation_cost(mt: MicroturbineParams,
                         unit_basis_kwh: float = 1.0) -> float:
    """Fuel plus O&M cost of one unit of MT electricity, $/kWh."""
    if mt.elec_eff <= 0 or mt.gas_calorific <= 0:
        raise PricingError("MT efficiency and calorific value must be positive")
    fuel = mt.gas_price * (unit_basis_kwh / mt.elec_eff / mt.gas_calorific)
    return fuel / unit_basis_kwh + mt.om_cost


def heating_cost_share(mt: MicroturbineParams, eb_eff_for_credit: float,
                       hrb_eff: float, unit_basis_kwh: float = 1.0) -> float:
    """Share of the unit cost attributable to heat supply, $/kWh.

    Thought experiment: all MT output serves heat, the recoverable exhaust
    heat through the recovery boiler and the electricity through an electric
    boiler; the heat side then carries its proportional share of the cost.
    """
    gamma_mt = unit_generation_cost(mt, unit_basis_kwh)
    unit_heat = unit_basis_kwh * mt.heat_per_kwh_elec
    num = unit_heat * hrb_eff
    den = num + unit_basis_kwh * eb_eff_for_credit
    if den <= 0:
        raise PricingError("all conversion efficiencies are zero")
    return gamma_mt * (num / den)


def adjustment_cost(mt: MicroturbineParams, pricing: PricingParams,
                    hrb_eff: float, eb_eff: float) -> float:
    """Electric-side unit cost after removing the heat credit; must be > 0."""
    eb_credit = pricing.eb_eff_for_credit
    if eb_credit is None:
        eb_credit = eb_eff
    gamma_mt = unit_generation_cost(mt, pricing.unit_basis_kwh)
    gamma_h = heating_cost_share(mt, eb_credit, hrb_eff, pricing.unit_basis_kwh)
    gamma_e = gamma_mt - gamma_h
    if gamma_e <= 0:
        raise PricingError(
            f"nonpositive adjustment cost {gamma_e}: pathological efficiencies")
    return gamma_e


def resolve_price_cap(pricing: PricingParams, tou_price) -> float:
    """Configured cap, or 1.5x the peak time-of-use price."""
    if pricing.fas_price_cap is not None:
        return pricing.fas_price_cap
    return 1.5 * max(tou_price)


def fas_price_curve(envelope: FlexEnvelope, mt: MicroturbineParams,
                    pricing: PricingParams, tou_price,
                    hrb_eff: float, eb_eff: float) -> FasPriceCurve:
    """Per-period price, linear in the upward margin.

    The price equals the cap where the margin is zero and the adjustment
    cost at the cycle-maximum margin.  With an all-zero margin profile the
    curve degenerates to the cap everywhere (with a warning).
    """
    cap = resolve_price_cap(pricing, tou_price)
    gamma_e = adjustment_cost(mt, pricing, hrb_eff, eb_eff)
    if cap <= gamma_e:
        raise PricingError(
            f"price cap {cap} does not exceed adjustment cost {gamma_e}")
    margins = envelope.aggregate_up
    m_max = max(margins)
    if m_max <= 0.0:
        warnings.warn(
            f"{envelope.cies_name}: all upward margins are zero; "
            "posting the price cap in every period")
        return FasPriceCurve(envelope.cies_name, tuple(cap for _ in margins),
                             gamma_e, cap, tuple(margins), degenerate=True)
    slope = (cap - gamma_e) / m_max
    prices = tuple(cap - slope * m for m in margins)
    return FasPriceCurve(envelope.cies_name, prices, gamma_e, cap,
                         tuple(margins))


def cies_prices(cies: CiesConfig, envelope: FlexEnvelope,
                pricing: PricingParams, tou_price) -> FasPriceCurve:
    """Price curve for one CIES using its own device efficiencies."""
    hrb = cies.coupling_of("hrb")
    eb = cies.coupling_of("eb")
    hrb_eff = hrb[0].efficiency if hrb else 0.0
    eb_eff = eb[0].efficiency if eb else 0.0
    return fas_price_curve(envelope, cies.mt, pricing, tou_price,
                           hrb_eff, eb_eff)
