"""Command-line interface tests on a small case."""

import dataclasses
import json
from pathlib import Path

import pytest

from flexgrid.cli import main
from flexgrid.core import load_scenarios, save_case

from conftest import small_case


@pytest.fixture(scope="module")
def case_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("case") / "small.json"
    save_case(small_case(seed=9), path)
    return str(path)


def test_gen_scenarios(case_file, tmp_path):
    out = tmp_path / "s"
    assert main(["gen-scenarios", "--case", case_file, "--seed", "3",
                 "--out", str(out)]) == 0
    ss = load_scenarios(out / "scenarios.json")
    assert ss.size == 3
    assert sum(ss.probabilities) == pytest.approx(1.0, abs=1e-12)
    # same seed reproduces the file byte for byte
    out2 = tmp_path / "s2"
    main(["gen-scenarios", "--case", case_file, "--seed", "3",
          "--out", str(out2)])
    assert (out / "scenarios.json").read_bytes() == \
        (out2 / "scenarios.json").read_bytes()


def test_evaluate_flex_outputs(case_file, tmp_path):
    out = tmp_path / "flex"
    assert main(["evaluate-flex", "--case", case_file,
                 "--out", str(out)]) == 0
    assert (out / "envelope_c1.csv").exists()
    assert (out / "fas_price_c1.csv").exists()
    assert (out / "manifest.json").exists()
    first = (out / "envelope_c1.csv").read_bytes()
    out2 = tmp_path / "flex2"
    main(["evaluate-flex", "--case", case_file, "--out", str(out2)])
    assert (out2 / "envelope_c1.csv").read_bytes() == first


@pytest.mark.parametrize("mode", ["mode1", "mode2", "mode4", "centralized"])
def test_dispatch_modes(case_file, tmp_path, mode):
    out = tmp_path / mode
    code = main(["dispatch", "--case", case_file, "--mode", mode,
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary[0]["mode"] == mode
    assert summary[0]["cost_total"] == pytest.approx(
        summary[0]["cost_adn"] + summary[0]["cost_mcies"], rel=1e-6)
    assert (out / "solution.json").exists()
    assert (out / "manifest.json").exists()
    if mode != "centralized":
        assert (out / "trace.json").exists()


def test_report_bundle(case_file, tmp_path):
    out = tmp_path / "run"
    main(["dispatch", "--case", case_file, "--mode", "mode4", "--seed", "1",
          "--out", str(out)])
    assert main(["report", "--run", str(out)]) == 0
    gap = (out / "atc_gap.csv").read_text().splitlines()
    assert gap[0].startswith("k,max_gap_kw")
    assert len(gap) >= 2
    last_gap = float(gap[-1].split(",")[1])
    assert last_gap <= 0.01
    assert (out / "dispatch_c1.csv").exists()
    assert (out / "dispatch_adn.csv").exists()
    assert (out / "cvar_adn.csv").exists()
    assert (out / "tie_trace_t02.csv").exists()
    # the 20:00 probe is skipped for horizons shorter than 21 periods
    assert not (out / "tie_trace_t20.csv").exists()
    assert (out / "summary.txt").exists()


def test_report_on_partial_run(tmp_path, capsys):
    run = tmp_path / "partial"
    run.mkdir()
    (run / "summary.json").write_text("[]")
    assert main(["report", "--run", str(run)]) == 0
    err = capsys.readouterr().err
    assert "missing artifacts" in err


def test_invalid_case_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["dispatch", "--case", str(bad), "--out",
                 str(tmp_path / "o")]) == 1
    missing = tmp_path / "missing.json"
    assert main(["dispatch", "--case", str(missing), "--out",
                 str(tmp_path / "o2")]) == 1


def test_infeasible_case_exit_code(tmp_path):
    from flexgrid.core import CouplingDeviceParams
    case = small_case(seed=3)
    ac = CouplingDeviceParams("ac", 200.0, 50.0, 200.0, 200.0, 0.8, 0.01)
    cies = dataclasses.replace(case.cies[0],
                               coupling=case.cies[0].coupling + (ac,))
    case = dataclasses.replace(case, cies=(cies,))
    path = tmp_path / "infeasible.json"
    save_case(case, path)
    assert main(["dispatch", "--case", str(path), "--out",
                 str(tmp_path / "o")]) == 2


def test_nonconvergence_exit_code(case_file, tmp_path):
    from flexgrid.core import load_case
    case = load_case(case_file)
    case = dataclasses.replace(
        case, atc=dataclasses.replace(case.atc, k_max=1, eps1=1e-9))
    path = tmp_path / "tight.json"
    save_case(case, path)
    assert main(["dispatch", "--case", str(path), "--out",
                 str(tmp_path / "o")]) == 3


def test_init_case(tmp_path):
    out = tmp_path / "case69.json"
    assert main(["init-case", "--out", str(out)]) == 0
    from flexgrid.core import load_case, validate_case
    assert validate_case(load_case(out)).ok


def test_bundled_case_three_envelopes(tmp_path):
    from flexgrid.core import bundled_case_69
    path = tmp_path / "case69.json"
    save_case(bundled_case_69(), path)
    out = tmp_path / "flex69"
    assert main(["evaluate-flex", "--case", str(path),
                 "--out", str(out)]) == 0
    files = sorted(p.name for p in out.glob("envelope_*.csv"))
    assert files == ["envelope_commercial.csv", "envelope_industrial.csv",
                     "envelope_residential.csv"]
    # the industrial community's upward margin bottoms out late afternoon
    doc = json.loads((out / "envelopes.json").read_text())
    ind = next(e for e in doc if e["cies"] == "industrial")
    t_min = min(range(24), key=lambda t: ind["aggregate_up"][t])
    assert 15 <= t_min <= 21


def test_dispatch_solution_reproducible(case_file, tmp_path):
    outs = []
    for tag in ("r1", "r2"):
        out = tmp_path / tag
        assert main(["dispatch", "--case", case_file, "--mode", "mode4",
                     "--seed", "5", "--out", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "solution.json").read_bytes() == \
        (outs[1] / "solution.json").read_bytes()
    assert (outs[0] / "trace.json").read_bytes() == \
        (outs[1] / "trace.json").read_bytes()
