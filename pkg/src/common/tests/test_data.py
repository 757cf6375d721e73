import numpy as np
import pytest

from src.common.data import SynthSpec, synth_generate, make_dataset, inspect_dataset, synth_tariff
from src.common.exceptions import InputError
from src.common.loaders import scale_supply
from src.common.series import aggregate


def test_high_flat_supply_covers_demand():
    spec = SynthSpec(n_households=1, days=1, cases=("high_flat",))
    series, national = synth_generate(spec, np.random.default_rng(0))
    supply = scale_supply(national, spec.upsilon)
    assert np.all(supply.total >= aggregate(series))
    assert supply.case_label == "high_flat"


def test_low_flat_supply_is_a_shortage():
    spec = SynthSpec(n_households=101, days=1, cases=("low_flat",))
    series, national = synth_generate(spec, np.random.default_rng(0))
    supply = scale_supply(national, spec.upsilon)
    demand = aggregate(series)
    assert np.mean(demand > supply.total) > 0.5
    assert supply.energy < demand.sum() * spec.grid.step_hours


def test_variable_supply_has_fuels():
    spec = SynthSpec(n_households=5, days=2, cases=("variable",))
    series, national = synth_generate(spec, np.random.default_rng(3))
    assert len(series) == 5
    assert len(series[0]) == 2 * 288
    assert {"wind", "solar"} <= set(national.source_mix)
    np.testing.assert_allclose(sum(national.source_mix.values()), national.total)


def test_synth_tariff_is_half_hourly():
    spec = SynthSpec(n_households=3)
    series, national = synth_generate(spec, np.random.default_rng(0))
    prices = synth_tariff(series, national, spec.upsilon)
    assert len(prices) == 48
    assert prices.min() >= 0


def test_synth_spec_validation():
    with pytest.raises(InputError):
        SynthSpec(n_households=0)
    with pytest.raises(InputError):
        SynthSpec(cases=("sunny",))


def test_make_dataset_is_deterministic(tmp_path):
    spec = SynthSpec(n_households=4, days=1, cases=("variable",))
    first = make_dataset(tmp_path / "a", spec=spec, seed=7)
    second = make_dataset(tmp_path / "b", spec=spec, seed=7)
    for key in first:
        with open(first[key], "rb") as f1, open(second[key], "rb") as f2:
            assert f1.read() == f2.read()

    with pytest.raises(InputError):
        make_dataset(tmp_path / "a", spec=spec, seed=7)

    header = inspect_dataset(tmp_path / "a")
    assert header["households"] == 4
    assert header["periods"] == 288
