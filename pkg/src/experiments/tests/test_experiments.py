import json
import math

import numpy as np
import pytest

import run_experiment
import src.common.constants as const
from src.common.data import make_dataset
from src.common.exceptions import InputError, InvariantViolation
from src.experiments.runner import run, group_of
from src.experiments.scenario import ScenarioSpec, load_inputs
from src.experiments.studies import sweep_flex, shortage_experiment, supply_mix_report, shortage_setup

SMALL = dict(synth=dict(n_households=4, days=1, cases=["variable"]), market=dict(window="6h", spacing="3h"), seed=3)


def _spec(**kwargs):
    return ScenarioSpec.from_dict(dict(SMALL, **kwargs))


def test_scenario_from_dict():
    spec = _spec(sigma="3h", approach="volume_max", bp_max=2.0)
    assert spec.sigma == 3.0
    assert spec.market.window_periods == 72
    assert spec.market.bp_max == 2.0 and spec.market.sp_max == 2.0
    assert spec.replace(pricing_mode="paper-literal").market.pricing_mode == "paper-literal"
    with pytest.raises(InputError):
        _spec(approach="first_come")
    with pytest.raises(InputError):
        _spec(colour="blue")
    with pytest.raises(InputError):
        ScenarioSpec.from_dict(dict(seed=1))


def test_generators_are_independent_and_seeded():
    data_a, market_a = _spec().generators()
    data_b, market_b = _spec().generators()
    assert data_a.random() == data_b.random()
    assert market_a.random() == market_b.random()
    assert _spec().generators()[0].random() != _spec().generators()[1].random()


def test_csv_and_synthetic_inputs_agree(tmp_path):
    spec = _spec()
    paths = make_dataset(tmp_path, spec=spec.synth, seed=0)
    from_files = ScenarioSpec(consumption=paths["consumption"], supply=paths["supply"], tariff=paths["tariff"],
                              market=spec.market)
    inputs = load_inputs(from_files)
    synthetic = load_inputs(spec.replace(seed=0), np.random.default_rng(0))
    assert inputs.grid == synthetic.grid
    np.testing.assert_allclose(inputs.supply.total, synthetic.supply.total, rtol=1e-9)
    assert len(inputs.tariff) == len(inputs.grid)


def test_run_writes_results_and_is_reproducible(tmp_path):
    spec = _spec(sigma=3)
    summary, result = run(spec, out_dir=tmp_path / "a")
    run(spec, out_dir=tmp_path / "b")

    for name in ("summary.json", "outcomes.csv", "prices.csv", "ledger.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    saved = json.loads((tmp_path / "a" / "summary.json").read_text())
    for key in ("gamma_actual", "total_cost_gbp", "served_kwh", "requested_kwh", "invariants"):
        assert key in saved
    assert all(summary["invariants"].values())
    assert summary["served_kwh"] <= summary["requested_kwh"] + 1e-9
    assert len(result.outcomes) == summary["n_requests"]


@pytest.mark.parametrize("approach", ["volume_max", "revenue_max"])
def test_benchmark_runs_keep_invariants(approach):
    summary, _ = run(_spec(approach=approach, sigma=2))
    assert all(summary["invariants"].values())


def test_group_of():
    assert group_of("h001-g1") == "g1"
    assert group_of("h001") is None
    assert group_of("north-g3") is None


def test_shortage_setup_duplicates_every_request():
    spec = _spec(synth=dict(n_households=8, cases=["low_flat"]))
    inputs = load_inputs(spec)
    essential, requests, households = shortage_setup(inputs, spec)
    g1 = [r for r in requests if r.household_id.endswith("-g1")]
    g2 = [r for r in requests if r.household_id.endswith("-g2")]
    assert len(g1) == len(g2) == len(requests) // 2
    assert all(households[r.household_id].gamma == 0.0 for r in g2)
    assert all(households[r.household_id].gamma == 1.0 for r in g1)
    assert g1[0].budget > g2[0].budget
    assert essential.shape == (len(inputs.grid),)


def test_shortage_favours_each_approach_group(tmp_path):
    # 40 households on a low_flat day, averaged over 20 seeds
    spec = _spec(synth=dict(n_households=40, cases=["low_flat"]), sigma=3)
    table, summary = shortage_experiment(spec, seeds=range(20), out_dir=tmp_path)
    shares = summary["per_group"]
    fair, revenue, volume = shares["fair_play"], shares["revenue_max"], shares["volume_max"]

    assert revenue["g1"] >= 3 * revenue["g2"]
    assert fair["g2"] >= 3 * fair["g1"]
    assert abs(volume["g1"] - volume["g2"]) <= 0.15
    assert fair["overall"] <= revenue["overall"] + 1e-9
    assert fair["overall"] <= volume["overall"] + 1e-9
    assert 0.05 < fair["overall"] < 0.65
    assert all(summary["invariants"].values())
    assert len(table) == 60
    assert (tmp_path / "shortage.csv").exists() and (tmp_path / "summary.json").exists()


def test_sweep_flex(tmp_path):
    # 60 households over 10 variable days; smaller cohorts rarely overlap enough to price above zero
    spec = _spec(synth=dict(n_households=60, days=10, cases=["variable"]), market=dict(), seed=0)
    table = sweep_flex(spec, sigmas=(0, 3, 6, 12), out_dir=tmp_path)
    m0, m3, m6, m12 = table["median"]

    assert list(table["sigma_h"]) == [0.0, 3.0, 6.0, 12.0]
    assert m6 > 0
    assert m3 < m0
    assert m6 < m3
    assert abs(m12 - m6) <= 0.5 * m6
    assert table["invariants_ok"].all()
    assert (tmp_path / "sweep_flex.csv").exists()


def test_supply_mix_report(tmp_path):
    table = supply_mix_report(_spec(), mixes=(0.0, 0.5, 1.0), out_dir=tmp_path)
    assert table.loc[0, "excess_kwh"] == 0.0
    assert math.isnan(table.loc[2, "cutoff_flat"])
    assert table.loc[1, "cutoff_flat"] == pytest.approx(2 * table.loc[0, "cutoff_flat"])
    assert set(table.columns) >= {"cutoff_flat", "cutoff_static_tou", "cutoff_dynamic_tou"}
    assert (tmp_path / "supply_mix.csv").exists()


def _config(tmp_path, **kwargs):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(dict(SMALL, **kwargs)))
    return str(path)


def test_cli_run(tmp_path):
    code = run_experiment.main(["run", "--config", _config(tmp_path), "--out-dir", str(tmp_path / "out"), "--quiet"])
    assert code == 0
    assert (tmp_path / "out" / "summary.json").exists()


def test_cli_characterize(tmp_path):
    code = run_experiment.main(["characterize", "--config", _config(tmp_path), "--out-dir", str(tmp_path / "c")])
    assert code == 0
    for name in ("essential.csv", "blocks.csv", "requests.csv"):
        assert (tmp_path / "c" / name).exists()


def test_cli_input_errors(tmp_path):
    assert run_experiment.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert run_experiment.main(["run", "--config", _config(tmp_path, colour="blue"), "--quiet"]) == 2


def test_cli_invariant_violation(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantViolation("over budget")

    monkeypatch.setattr(run_experiment, "run", broken)
    assert run_experiment.main(["run", "--config", _config(tmp_path), "--quiet"]) == 1
