import numpy as np
import pandas as pd
import pytest

from src.common.exceptions import ParseError, IntegrityError, CoverageError, InputError
from src.common.grid import TimeGrid
from src.common.loaders import (load_consumption_csv, load_supply_csv, load_tariff_csv, scale_supply,
                                write_consumption_csv, write_supply_csv, write_tariff_csv)
from src.common.series import ConsumptionSeries, SupplyProfile
from src.conftest import T0


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_consumption_roundtrip(tmp_path):
    grid = TimeGrid.from_periods(T0, 12)
    series = [ConsumptionSeries("b", grid, np.linspace(0, 1.1, 12)), ConsumptionSeries("a", grid, np.full(12, 0.2))]
    path = tmp_path / "consumption.csv"
    write_consumption_csv(series, path)

    loaded = load_consumption_csv(path)
    assert [s.household_id for s in loaded] == ["a", "b"]
    assert loaded[0].grid == grid
    np.testing.assert_allclose(loaded[1].power, series[0].power)


def test_consumption_empty_file_with_header(tmp_path):
    path = _write(tmp_path / "c.csv", "timestamp,household_id,power_kw\n")
    assert load_consumption_csv(path) == []


def test_consumption_negative_power_reports_row(tmp_path):
    path = _write(tmp_path / "c.csv", "timestamp,household_id,power_kw\n"
                                      "2021-01-04T00:00:00Z,h1,0.5\n"
                                      "2021-01-04T00:05:00Z,h1,-0.1\n")
    with pytest.raises(ParseError) as err:
        load_consumption_csv(path)
    assert err.value.row == 3


def test_consumption_duplicate_sample(tmp_path):
    path = _write(tmp_path / "c.csv", "timestamp,household_id,power_kw\n"
                                      "2021-01-04T00:00:00Z,h1,0.5\n"
                                      "2021-01-04T00:00:00Z,h1,0.7\n")
    with pytest.raises(IntegrityError):
        load_consumption_csv(path)


def test_consumption_gaps(tmp_path):
    grid = TimeGrid.from_periods(T0, 2 * 288)
    df = pd.DataFrame(dict(timestamp=grid.periods, household_id="h1", power_kw=1.0))
    # 15 minute hole on day one is held, a 2 hour hole on day two zeroes that day
    df = df.drop(index=list(range(10, 13)) + list(range(300, 324)))
    path = tmp_path / "c.csv"
    df.to_csv(path, index=False, date_format="%Y-%m-%dT%H:%M:%SZ")

    (series,) = load_consumption_csv(path)
    assert np.all(series.power[:288] == 1.0)
    assert np.all(series.power[288:] == 0.0)


def test_supply_held_to_five_minutes(tmp_path):
    index = pd.date_range(T0, periods=48, freq="30min")
    df = pd.DataFrame(dict(timestamp=index, fuel_type="nuclear", generation_mw=10_000.0))
    path = tmp_path / "s.csv"
    df.to_csv(path, index=False, date_format="%Y-%m-%dT%H:%M:%SZ")

    supply = load_supply_csv(path)
    assert len(supply) == 288
    np.testing.assert_allclose(supply.total, 10_000_000.0)
    assert supply.energy == pytest.approx(10_000_000.0 * 24)


def test_supply_missing_half_hours(tmp_path):
    index = pd.date_range(T0, periods=48, freq="30min")
    df = pd.DataFrame(dict(timestamp=index, fuel_type="wind", generation_mw=np.arange(48.0)))
    path = tmp_path / "s.csv"

    df.drop(index=[5]).to_csv(path, index=False, date_format="%Y-%m-%dT%H:%M:%SZ")
    supply = load_supply_csv(path)
    assert supply.total[5 * 6] == pytest.approx(4_000.0)

    df.drop(index=range(5, 10)).to_csv(path, index=False, date_format="%Y-%m-%dT%H:%M:%SZ")
    with pytest.raises(CoverageError):
        load_supply_csv(path)


def test_supply_roundtrip_keeps_fuels(tmp_path):
    grid = TimeGrid.from_periods(T0, 288)
    profile = SupplyProfile(grid, np.full(288, 3000.0), dict(wind=np.full(288, 1000.0), solar=np.full(288, 2000.0)))
    path = tmp_path / "s.csv"
    write_supply_csv(profile, path)
    loaded = load_supply_csv(path)
    assert sorted(loaded.source_mix) == ["solar", "wind"]
    np.testing.assert_allclose(loaded.total, profile.total)


def test_scale_supply():
    grid = TimeGrid.from_periods(T0, 4, "1h")
    profile = SupplyProfile(grid, np.array([2.0, 4.0, 6.0, 8.0]))
    np.testing.assert_allclose(scale_supply(profile, 1).total, profile.total)
    np.testing.assert_allclose(scale_supply(profile, 2).total, [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(InputError):
        scale_supply(profile, 0)


def test_tariff_flat_and_held(tmp_path):
    index = pd.date_range(T0, periods=48, freq="30min")
    path = tmp_path / "t.csv"
    write_tariff_csv(pd.Series(0.2084, index=index), path)
    prices = load_tariff_csv(path)
    assert len(prices) == 288
    np.testing.assert_allclose(prices.to_numpy(), 0.2084)

    write_tariff_csv(pd.Series(np.arange(48) / 100, index=index), path)
    prices = load_tariff_csv(path)
    np.testing.assert_allclose(prices.to_numpy()[:12], [0.0] * 6 + [0.01] * 6)


def test_tariff_errors(tmp_path):
    path = _write(tmp_path / "t.csv", "timestamp,price_gbp_per_kwh\n")
    with pytest.raises(CoverageError):
        load_tariff_csv(path)

    index = pd.date_range(T0, periods=4, freq="30min").delete(2)
    write_tariff_csv(pd.Series(0.1, index=index), tmp_path / "gap.csv")
    with pytest.raises(CoverageError):
        load_tariff_csv(tmp_path / "gap.csv")

    write_tariff_csv(pd.Series(0.1, index=pd.date_range(T0, periods=2, freq="30min")), tmp_path / "short.csv")
    with pytest.raises(CoverageError):
        load_tariff_csv(tmp_path / "short.csv", grid=TimeGrid.from_periods(T0, 24, "1h"))
