import numpy as np
import pandas as pd
import pytest

from src.common.grid import TimeGrid
from src.market.amm import MarketState
from src.market.core import MarketConfig, Request

T0 = pd.Timestamp("2021-01-04", tz="UTC")


def at(h):
    """Timestamp `h` hours after T0."""
    return T0 + pd.Timedelta(hours=h)


def make_request(rid, earliest_h, latest_h, energy, p_max, budget=100.0, household=None, p_min=None):
    return Request(rid, household or f"h-{rid}", at(earliest_h), at(latest_h), energy,
                   p_max if p_min is None else p_min, p_max, budget)


def hourly_config(hours=6, spacing=None, **kwargs):
    return MarketConfig(window=hours, spacing=hours if spacing is None else spacing, resolution=60, **kwargs)


def hourly_grid(n):
    return TimeGrid.from_periods(T0, n, "1h")


def make_state(capacity, requests=(), config=None, essential=None):
    """Standalone hourly instance whose flexible capacity is `capacity` [kW per period]."""
    capacity = np.asarray(capacity, dtype=float)
    config = config or hourly_config(len(capacity))
    grid = TimeGrid.from_periods(T0, len(capacity), config.resolution)
    essential = np.zeros(len(capacity)) if essential is None else np.asarray(essential, dtype=float)
    return MarketState.from_arrays(config, grid, capacity + essential, essential, requests)


def pin_prices(state, bp):
    """Fixes the published buy prices of a state, whatever its scarcity."""
    state.refresh()
    state._bp[:] = bp
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
