"""
File ingestion for consumption, supply and tariff CSVs. All timestamps are ISO-8601 UTC, and every series comes
out on the market resolution by zero-order hold.
"""
import logging

import numpy as np
import pandas as pd
from scipy import ndimage

import src.common.constants as const
from src.common.exceptions import ParseError, IntegrityError, CoverageError, AlignmentError, InputError
from src.common.grid import TimeGrid, n_steps
from src.common.series import ConsumptionSeries, SupplyProfile

logger = logging.getLogger(__name__)

CONSUMPTION_COLUMNS = ["timestamp", "household_id", "power_kw"]
SUPPLY_COLUMNS = ["timestamp", "fuel_type", "generation_mw"]
TARIFF_COLUMNS = ["timestamp", "price_gbp_per_kwh"]
SUPPLY_RESOLUTION = pd.Timedelta("30min")
DATE_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def _read(path, columns, key_dtypes):
    try:
        df = pd.read_csv(path, dtype=key_dtypes, keep_default_na=False, na_values=[""])
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path} has no header", row=1)
    if list(df.columns) != columns:
        raise ParseError(f"{path}: expected columns {columns}, got {list(df.columns)}", row=1)
    return df


def _parse_timestamps(df, resolution):
    ts = pd.to_datetime(df["timestamp"], utc=True, errors="coerce")
    bad = ts.isna()
    if bad.any():
        raise ParseError(f"cannot parse timestamp '{df['timestamp'][bad].iloc[0]}'", row=int(bad.idxmax()) + 2)
    misaligned = (ts - const.ORIGIN) % resolution != pd.Timedelta(0)
    if misaligned.any():
        row = int(misaligned.idxmax()) + 2
        raise AlignmentError(f"row {row}: timestamp {ts[row - 2]} is not aligned to {resolution}")
    return ts


def _parse_values(df, column):
    values = pd.to_numeric(df[column], errors="coerce")
    bad = values.isna() | (values < 0) | ~np.isfinite(values.fillna(0))
    if bad.any():
        row = int(bad.idxmax()) + 2
        raise ParseError(f"{column} must be a non-negative number, got '{df[column][row - 2]}'", row=row)
    return values.astype(float)


def _check_unique(df, keys, what):
    dup = df.duplicated(subset=keys, keep=False)
    if dup.any():
        first = df[dup].iloc[0]
        raise IntegrityError(f"Duplicate {what} for {', '.join(str(first[k]) for k in keys)}")


def _hold_short_gaps(values, limit):
    """Fills NaN runs of at most `limit` periods with the previous value; returns the mask of runs left open."""
    missing = np.isnan(values)
    labels, n_gaps = ndimage.label(missing)
    unfilled = np.zeros_like(missing)
    for sl in ndimage.find_objects(labels):
        lo, hi = sl[0].start, sl[0].stop
        if lo > 0 and hi - lo <= limit:
            values[lo:hi] = values[lo - 1]
        else:
            unfilled[lo:hi] = True
    return values, unfilled


def load_consumption_csv(path, resolution=const.M_RES, max_fill_gap=const.MAX_FILL_GAP):
    """One ConsumptionSeries per household, all on the grid spanned by the file.

    Gaps up to `max_fill_gap` are held from the previous sample. A day holding a longer gap is zeroed for that
    household, with a warning, so every series stays on the common grid.
    """
    resolution = pd.Timedelta(resolution)
    df = _read(path, CONSUMPTION_COLUMNS, {"household_id": str})
    if df.empty:
        return []

    df["timestamp"] = _parse_timestamps(df, resolution)
    df["power_kw"] = _parse_values(df, "power_kw")
    _check_unique(df, ["timestamp", "household_id"], "consumption sample")

    grid = TimeGrid(df["timestamp"].min(), df["timestamp"].max() + resolution, resolution)
    wide = df.pivot(index="timestamp", columns="household_id", values="power_kw").reindex(grid.periods)
    limit = n_steps(max_fill_gap, resolution)
    days = grid.periods.floor("D")

    series = []
    for household in sorted(wide.columns):
        values, unfilled = _hold_short_gaps(wide[household].to_numpy(dtype=float, copy=True), limit)
        if unfilled.any():
            bad_days = days[unfilled].unique()
            logger.warning("Household %s: zeroing %d day(s) with gaps over %s, first %s",
                           household, len(bad_days), max_fill_gap, bad_days[0].date())
            values[days.isin(bad_days)] = 0.0
        series.append(ConsumptionSeries(household, grid, values))
    return series


def load_supply_csv(path, resolution=const.M_RES, max_fill_gap=const.SUPPLY_MAX_FILL_GAP,
                    source_resolution=SUPPLY_RESOLUTION, case_label=None):
    """National generation by fuel type [MW] held onto the market resolution [kW]."""
    resolution = pd.Timedelta(resolution)
    df = _read(path, SUPPLY_COLUMNS, {"fuel_type": str})
    if df.empty:
        raise CoverageError(f"{path} holds no supply rows")

    df["timestamp"] = _parse_timestamps(df, source_resolution)
    df["generation_mw"] = _parse_values(df, "generation_mw")
    _check_unique(df, ["timestamp", "fuel_type"], "generation sample")

    source_grid = TimeGrid(df["timestamp"].min(), df["timestamp"].max() + source_resolution, source_resolution)
    wide = df.pivot(index="timestamp", columns="fuel_type", values="generation_mw").reindex(source_grid.periods)
    limit = n_steps(max_fill_gap, source_resolution)
    repeat = n_steps(source_resolution, resolution)
    grid = TimeGrid(source_grid.start, source_grid.end, resolution)

    mix = {}
    for fuel in sorted(wide.columns):
        values, unfilled = _hold_short_gaps(wide[fuel].to_numpy(dtype=float, copy=True), limit)
        if unfilled.any():
            first = source_grid.periods[unfilled][0]
            raise CoverageError(f"Supply of '{fuel}' is missing for more than {max_fill_gap} from {first}")
        mix[fuel] = np.repeat(values * 1000.0, repeat)

    total = np.sum(list(mix.values()), axis=0)
    return SupplyProfile(grid, total, mix, case_label)


def scale_supply(profile, upsilon):
    """S^T = national supply / upsilon, shape preserved."""
    if not upsilon > 0:
        raise InputError(f"upsilon must be positive, got {upsilon}")
    mix = None
    if profile.source_mix is not None:
        mix = {k: v / upsilon for k, v in profile.source_mix.items()}
    return SupplyProfile(profile.grid, profile.total / upsilon, mix, profile.case_label)


def load_tariff_csv(path, resolution=const.M_RES, grid=None):
    """Unit price per period [GBP/kWh], each row held until the next.

    The source interval is the smallest spacing between rows; any larger spacing is a coverage gap. When `grid`
    is given the tariff must cover all of it.
    """
    resolution = pd.Timedelta(resolution)
    df = _read(path, TARIFF_COLUMNS, None)
    if df.empty:
        raise CoverageError(f"{path} holds no tariff rows")

    df["timestamp"] = _parse_timestamps(df, resolution)
    df["price_gbp_per_kwh"] = _parse_values(df, "price_gbp_per_kwh")
    _check_unique(df, ["timestamp"], "tariff price")
    df = df.sort_values("timestamp")

    steps = df["timestamp"].diff().dropna()
    step = steps.min() if len(steps) else resolution
    if len(steps) and (steps != step).any():
        gap_at = df["timestamp"].iloc[int(np.argmax((steps != step).to_numpy())) + 1]
        raise CoverageError(f"Tariff has a gap before {gap_at}")

    source = pd.Series(df["price_gbp_per_kwh"].to_numpy(), index=pd.DatetimeIndex(df["timestamp"]))
    index = pd.date_range(source.index[0], source.index[-1] + step, freq=resolution, inclusive="left")
    prices = source.reindex(index, method="ffill").rename("price_gbp_per_kwh")

    if grid is not None:
        covered = prices.reindex(grid.periods)
        if covered.isna().any():
            raise CoverageError(f"Tariff does not cover {grid.start} to {grid.end}")
        return covered
    return prices


def write_consumption_csv(series_list, path):
    frames = [pd.DataFrame(dict(timestamp=s.grid.periods, household_id=s.household_id, power_kw=s.power))
              for s in series_list]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=CONSUMPTION_COLUMNS)
    df.to_csv(path, index=False, date_format=DATE_FORMAT)


def write_supply_csv(profile, path, source_resolution=SUPPLY_RESOLUTION):
    """Writes a profile back at the source resolution, averaging power inside each source interval [MW]."""
    factor = n_steps(source_resolution, profile.grid.resolution)
    n_blocks = n_steps(profile.grid.end - profile.grid.start, source_resolution)
    source_index = pd.date_range(profile.grid.start, periods=n_blocks, freq=source_resolution)
    mix = profile.source_mix or dict(total=profile.total)

    frames = []
    for fuel, power in mix.items():
        mw = power.reshape(n_blocks, factor).mean(axis=1) / 1000.0
        frames.append(pd.DataFrame(dict(timestamp=source_index, fuel_type=fuel, generation_mw=mw)))
    pd.concat(frames, ignore_index=True).sort_values(["timestamp", "fuel_type"]).to_csv(
        path, index=False, date_format=DATE_FORMAT)


def write_tariff_csv(prices, path):
    df = pd.DataFrame(dict(timestamp=prices.index, price_gbp_per_kwh=prices.to_numpy()))
    df.to_csv(path, index=False, date_format=DATE_FORMAT)
