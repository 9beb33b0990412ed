"""Pricing law tests: adjustment cost, heat credit, linear price curve."""

import math

import pytest
from hypothesis import given, strategies as st

from flexgrid.core import FlexEnvelope, MicroturbineParams, PricingParams
from flexgrid.pricing import (PricingError, adjustment_cost, fas_price_curve,
                              heating_cost_share, unit_generation_cost)


def _mt(gas_price=0.45, eff=0.35, loss=0.15, calorific=9.7, om=0.02):
    return MicroturbineParams(1000, 200, 500, 500, 4, 4, eff, loss,
                              gas_price, calorific, om)


def _envelope(margins):
    T = len(margins)
    zeros = tuple(0.0 for _ in range(T))
    per = {r: zeros for r in ("mt", "bes", "eb", "ec", "tse")}
    return FlexEnvelope("test", zeros, zeros, per, per, per, per,
                        tuple(margins), zeros)


def test_unit_generation_cost_hand_value():
    # 0.45 / (0.35 * 9.7) + 0.02
    assert unit_generation_cost(_mt()) == pytest.approx(0.15255, abs=2e-5)


def test_unit_generation_cost_zero_fuel():
    assert unit_generation_cost(_mt(gas_price=0.0, om=0.0)) == 0.0


def test_doubling_efficiency_halves_fuel_term():
    base = unit_generation_cost(_mt(om=0.0))
    doubled = unit_generation_cost(_mt(eff=0.70, loss=0.15, om=0.0))
    assert doubled == pytest.approx(base / 2, rel=1e-12)


def test_heating_cost_share_hand_value():
    # unit heat 0.5/0.35 = 1.42857; share 1.2857/(1.2857+0.95) = 0.57507
    mt = _mt()
    share = heating_cost_share(mt, eb_eff_for_credit=0.95, hrb_eff=0.9)
    assert share / unit_generation_cost(mt) == pytest.approx(0.57507, abs=1e-4)


def test_no_recoverable_heat_no_credit():
    mt = _mt()
    assert heating_cost_share(mt, 0.95, hrb_eff=0.0) == 0.0
    gamma_e = adjustment_cost(mt, PricingParams(), hrb_eff=0.0, eb_eff=0.95)
    assert gamma_e == pytest.approx(unit_generation_cost(mt), rel=1e-12)


def test_heat_share_is_proper_fraction():
    mt = _mt()
    assert heating_cost_share(mt, 0.95, 0.9) < unit_generation_cost(mt)


def test_adjustment_cost_hand_value():
    mt = _mt()
    gamma_e = adjustment_cost(mt, PricingParams(), hrb_eff=0.9, eb_eff=0.95)
    assert gamma_e == pytest.approx(0.42493 * unit_generation_cost(mt), abs=1e-4)


def test_adjustment_cost_decreasing_in_hrb_eff():
    mt = _mt()
    values = [adjustment_cost(mt, PricingParams(), hrb_eff=h, eb_eff=0.95)
              for h in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_zero_efficiency_everything_raises():
    with pytest.raises(PricingError):
        heating_cost_share(_mt(loss=0.65), 0.0, 0.0)


TOU = tuple([0.08] * 7 + [0.12] * 4 + [0.16] * 4 + [0.12] * 3 + [0.16] * 3
            + [0.12] * 3)


def test_price_endpoints():
    margins = [0.0, 150.0, 300.0] + [10.0] * 21
    curve = fas_price_curve(_envelope(margins), _mt(), PricingParams(), TOU,
                            0.9, 0.95)
    cap = 1.5 * 0.16
    assert curve.price_cap == pytest.approx(cap, abs=1e-12)
    assert curve.prices[0] == pytest.approx(cap, abs=1e-12)        # zero margin
    assert curve.prices[2] == pytest.approx(curve.adjustment_cost, abs=1e-12)
    mid = 0.5 * (cap + curve.adjustment_cost)
    assert curve.prices[1] == pytest.approx(mid, abs=1e-12)        # half max


def test_price_affine_in_margin():
    margins = [25.0 * k for k in range(24)]
    curve = fas_price_curve(_envelope(margins), _mt(), PricingParams(), TOU,
                            0.9, 0.95)
    # collinearity over every period triple with collinear margins
    for i in range(22):
        lhs = curve.prices[i + 1] - curve.prices[i]
        rhs = curve.prices[i + 2] - curve.prices[i + 1]
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_price_bounds_and_antitone():
    margins = [5.0, 80.0, 40.0, 200.0] * 6
    curve = fas_price_curve(_envelope(margins), _mt(), PricingParams(), TOU,
                            0.9, 0.95)
    for p in curve.prices:
        assert curve.adjustment_cost - 1e-12 <= p <= curve.price_cap + 1e-12
    for i in range(24):
        for j in range(24):
            if margins[i] < margins[j]:
                assert curve.prices[i] >= curve.prices[j] - 1e-12


def test_all_zero_margins_degenerate():
    with pytest.warns(UserWarning):
        curve = fas_price_curve(_envelope([0.0] * 24), _mt(), PricingParams(),
                                TOU, 0.9, 0.95)
    assert curve.degenerate
    assert all(p == curve.price_cap for p in curve.prices)


@given(st.lists(st.floats(0.0, 500.0), min_size=2, max_size=24),
       st.floats(1.1, 4.0))
def test_scaling_margins_keeps_argmax_price(margins, scale):
    if max(margins) <= 0:
        return
    mt = _mt()
    c1 = fas_price_curve(_envelope(margins), mt, PricingParams(), TOU, 0.9, 0.95)
    c2 = fas_price_curve(_envelope([scale * m for m in margins]), mt,
                         PricingParams(), TOU, 0.9, 0.95)
    i = max(range(len(margins)), key=lambda k: margins[k])
    assert c1.prices[i] == pytest.approx(c2.prices[i], abs=1e-9)
    assert c1.prices[i] == pytest.approx(c1.adjustment_cost, abs=1e-9)
