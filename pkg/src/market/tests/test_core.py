import numpy as np
import pandas as pd
import pytest

from src.common.exceptions import AlignmentError, InputError
from src.common.grid import TimeGrid
from src.market.core import (MarketConfig, Request, Offer, HouseholdRecord, CommitmentLedger, LedgerEntry,
                             is_relevant, relevant_requests, advance_instance, min_duration, flexibility)
from src.conftest import T0, at, make_request


@pytest.mark.parametrize("energy, p_max, expected", [
    (6.0, 3.0, pd.Timedelta("2h")),
    (1.0, 1.0, pd.Timedelta("1h")),
    (1.0, 4.0, pd.Timedelta("15min")),
])
def test_min_duration(energy, p_max, expected):
    r = make_request("r", 0, 10, energy, p_max)
    assert min_duration(r) == expected


def test_min_duration_rounds_up_to_whole_periods():
    r = make_request("r", 0, 10, 1.0, 5.0)  # 12 min
    assert r.n_periods() == 3
    assert r.min_duration() == pd.Timedelta("15min")
    assert r.power() == pytest.approx(4.0)
    assert r.power() * r.n_periods() / 12 == pytest.approx(r.energy)


def test_flexibility():
    assert flexibility(make_request("r", 0, 10, 6.0, 3.0)) == pd.Timedelta("8h")
    assert flexibility(make_request("r", 0, 2, 6.0, 3.0)) == pd.Timedelta(0)


def test_request_validation():
    with pytest.raises(InputError):
        make_request("r", 0, 1, 6.0, 3.0)  # needs 2h
    with pytest.raises(InputError):
        make_request("r", 2, 1, 1.0, 1.0)
    with pytest.raises(InputError):
        make_request("r", 0, 4, 1.0, 1.0, budget=-1)
    with pytest.raises(InputError):
        Request("r", "h", at(0), at(4), 1.0, 2.0, 1.0, 1.0)


@pytest.mark.parametrize("earliest, latest, expected", [
    (-2, 30, True),
    (5, 10, True),
    (-5, -1, False),
    (20, 30, True),
    (30, 40, False),
])
def test_is_relevant(earliest, latest, expected):
    r = make_request("r", earliest, latest, 1.0, 1.0)
    assert is_relevant(r, at(0), at(24)) is expected


def test_relevance_grows_with_the_window():
    r = make_request("r", -10, 25, 1.0, 1.0)
    assert is_relevant(r, at(0), at(24))
    assert is_relevant(r, at(-5), at(30))


def test_relevant_requests_sorted_by_id():
    grid = TimeGrid(at(0), at(24))
    rs = [make_request(i, 1, 5, 1.0, 1.0) for i in ("c", "a", "b")] + [make_request("z", -5, -1, 1.0, 1.0)]
    assert [r.id for r in relevant_requests(rs, grid)] == ["a", "b", "c"]


@pytest.mark.parametrize("clock, start", [(0, 0), (4, 3), (3, 3), (26, 24)])
def test_advance_instance(clock, start):
    grid = advance_instance(MarketConfig(), at(clock))
    assert grid.start == at(start)
    assert grid.end == at(start + 24)


@pytest.mark.parametrize("window, spacing", [("24h", "3h"), ("6h", "1h"), ("12h", "12h")])
def test_consecutive_instances_overlap(window, spacing):
    config = MarketConfig(window=window, spacing=spacing)
    first = advance_instance(config, at(7))
    second = advance_instance(config, first.start + config.spacing)
    assert second.start - first.start == config.spacing
    assert first.end - second.start == config.window - config.spacing


def test_advance_instance_rejects_misaligned_clock():
    with pytest.raises(AlignmentError):
        advance_instance(MarketConfig(), T0 + pd.Timedelta("2min"))


def test_market_config():
    config = MarketConfig(window=24, spacing=3, resolution=5)
    assert config.window_periods == 288
    assert config.spacing_periods == 36
    assert config.sp_max == config.bp_max
    assert config.with_options(bp_max=2.0).sp_max == 2.0
    assert MarketConfig.from_dict(config.to_dict()) == config
    with pytest.raises(InputError):
        MarketConfig(window=2, spacing=3)
    with pytest.raises(AlignmentError):
        MarketConfig(window="24h", spacing="3h", resolution="7min")
    with pytest.raises(InputError):
        MarketConfig(pricing_mode="hourly")


def test_household_record():
    record = HouseholdRecord("h")
    assert record.gamma == 1.0
    record = record.record(2.0, 2.0).record(0.0, 2.0)
    assert record.gamma == pytest.approx(0.5)
    assert record.weight == pytest.approx(4.0)
    seeded = HouseholdRecord.with_history("h", 0.25, 8.0)
    assert seeded.gamma == pytest.approx(0.25)
    with pytest.raises(InputError):
        HouseholdRecord.with_history("h", 1.5, 1.0)


def test_offer_power_profile():
    grid = TimeGrid.from_periods(T0, 6, "1h")
    even = Offer("o", "a", at(1), at(5), energy=4.0, p_min=0.5, p_max=2.0, revenue_floor=0.8)
    np.testing.assert_allclose(even.power_profile(grid), [0, 1, 1, 1, 1, 0])
    assert even.unit_floor == pytest.approx(0.2)

    lumpy = Offer("o", "a", at(0), at(6), energy=3.0, p_min=2.0, p_max=2.0)
    np.testing.assert_allclose(lumpy.power_profile(grid), [2, 1, 0, 0, 0, 0])


def test_ledger_bookkeeping():
    grid = TimeGrid.from_periods(T0, 4, "1h")
    ledger = CommitmentLedger(grid)
    ledger.append(LedgerEntry("a", 1, 2, 1.5, 0.6))
    ledger.append(LedgerEntry("b", 2, 2, 0.5, 0.2))
    np.testing.assert_allclose(ledger.scheduled_power, [0, 1.5, 2.0, 0.5])
    np.testing.assert_allclose(ledger.payments(), [0, 0.3, 0.4, 0.1])
    assert ledger.is_consistent()
    assert ledger.total_cost == pytest.approx(0.8)
    assert "a" in ledger and len(ledger) == 2
    with pytest.raises(AlignmentError):
        ledger.append(LedgerEntry("c", 3, 2, 1.0, 0.0))


def test_ledger_frame():
    grid = TimeGrid.from_periods(T0, 4, "1h")
    ledger = CommitmentLedger(grid)
    assert ledger.to_frame().empty
    ledger.append(LedgerEntry("a", 1, 2, 1.5, 0.6))
    frame = ledger.to_frame()
    assert list(frame.columns) == ["request_id", "start", "n_periods", "power_kw", "cost_gbp"]
    assert frame.loc[0, "start"] == at(1)
    assert frame.loc[0, "cost_gbp"] == pytest.approx(0.6)


def test_request_interval():
    r = make_request("r", 2, 10, 4.0, 2.0)
    assert r.interval == pd.Timedelta(hours=8)
    assert r.flexibility(pd.Timedelta("1h")) == pd.Timedelta(hours=6)
