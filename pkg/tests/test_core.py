"""Core types, validation, bundled case and round-trip tests."""

import dataclasses

import pytest

from flexgrid.core import (Branch, bundled_case_69, check_radial,
                           load_case, save_case, validate_case)
from flexgrid.core import io as case_io
from flexgrid.core.types import StorageParams


def test_bundled_case_self_validates():
    report = validate_case(bundled_case_69())
    assert report.ok, str(report)


def test_bundled_case_table_values():
    case = bundled_case_69()
    assert case.adn.mt.p_max == 2500.0
    assert case.adn.mt.p_min == 200.0
    assert case.adn.mt.min_up == 4
    assert case.adn.bes.s_min == 300.0
    assert case.adn.bes.s_max == 1500.0
    assert case.adn.bes.s_init == 750.0
    assert case.adn.bes.eff_ch == 0.96
    assert case.adn.cvar_beta == 0.95
    assert case.adn.cvar_up_limit == 500.0

    ind = case.cies_by_name("industrial")
    assert ind.mt.p_max == 1400.0
    assert ind.mt.ramp_up == 700.0
    assert ind.cvar_up_limit == 500.0
    assert ind.mt.gas_price == 0.55
    res = case.cies_by_name("residential")
    assert res.mt.p_max == 1000.0
    assert res.mt.p_min == 200.0
    assert res.mt.ramp_up == 500.0
    assert res.mt.gas_price == 0.45
    com = case.cies_by_name("commercial")
    assert com.mt.p_max == 650.0

    assert {f.node for f in case.adn.wt_farms} == {38, 41}
    assert {f.node for f in case.adn.pv_farms} == {60, 61}
    assert case.adn.mt_node == 17 and case.adn.bes_node == 40
    assert case.adn.cies_nodes == {22: "residential", 31: "commercial",
                                   44: "industrial"}


def test_profiles_follow_stated_shapes():
    case = bundled_case_69()
    pv = case.adn.pv_farms[0].profile
    assert all(pv[t] == 0.0 for t in list(range(0, 6)) + list(range(19, 24)))
    assert max(range(24), key=lambda t: pv[t]) == 13
    wt = case.adn.wt_farms[0].profile
    assert wt[2] > wt[13]  # night peak, midday lull
    tou = case.adn.tou_price
    assert len(set(tou)) == 3
    assert tou[3] < tou[8] < tou[12]
    assert tou[19] == tou[12]


def test_storage_degenerate_bounds_allowed():
    case = bundled_case_69()
    degenerate = StorageParams("bes", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    cies = dataclasses.replace(case.cies[0], storage=(degenerate,))
    case = dataclasses.replace(case, cies=(cies,) + case.cies[1:])
    report = validate_case(case)
    assert not any("storage" in v.path for v in report.violations)


def test_missing_branch_breaks_radiality():
    case = bundled_case_69()
    adn = dataclasses.replace(case.adn, branches=case.adn.branches[:-1])
    case = dataclasses.replace(case, adn=adn)
    report = validate_case(case)
    assert any("radial" in v.message for v in report.violations)


def test_radiality_removing_any_branch_disconnects():
    case = bundled_case_69()
    branches = case.adn.branches
    assert check_radial(69, branches, 1)
    for k in range(0, len(branches), 7):
        rest = branches[:k] + branches[k + 1:]
        assert not check_radial(69, rest, 1)


def test_extra_branch_is_not_radial():
    case = bundled_case_69()
    extra = case.adn.branches + (Branch(5, 27, 0.1, 0.1, 400.0),)
    assert not check_radial(69, extra, 1)


def test_case_roundtrip(tmp_path):
    case = bundled_case_69()
    p = tmp_path / "case.json"
    save_case(case, p)
    again = load_case(p)
    assert again == case
    # a second round trip is byte-identical
    p2 = tmp_path / "case2.json"
    save_case(again, p2)
    assert p.read_text() == p2.read_text()


def test_malformed_case_rejected(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"time_grid": {"periods": 24, "step_hours": 1.0}}')
    with pytest.raises(case_io.CaseFormatError):
        load_case(p)


def test_feeder_totals():
    # documented totals of the standard 69-node feeder
    case = bundled_case_69()
    assert sum(case.adn.load_p_kw.values()) == pytest.approx(3801.89, abs=0.01)
    assert sum(case.adn.load_q_kvar.values()) == pytest.approx(2694.10, abs=0.01)
    assert len(case.adn.branches) == 68
