"""
Splits household consumption into essential and flexible parts.

Baseload stays essential, short spikes stay essential, and sustained excursions above a power threshold become
flexible blocks that can be turned into market requests.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numba import njit
from scipy import ndimage

import src.common.constants as const
from src.common.exceptions import InputError
from src.common.grid import to_timedelta, n_steps, hours
from src.market.core import Request

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CharacterizerParams:
    p_base: float = const.P_BASE
    p_threshold: float = const.P_THRESHOLD
    t_threshold: pd.Timedelta = const.T_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "t_threshold", to_timedelta(self.t_threshold, "min"))
        if not (self.p_base > 0 and self.p_threshold > 0 and self.t_threshold > pd.Timedelta(0)):
            raise InputError("Characteriser parameters must all be strictly positive")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class FlexibleBlock:
    household_id: str
    start: pd.Timestamp
    duration: pd.Timedelta
    mean_power: float  # [kW]
    energy: float  # [kWh]

    @property
    def end(self):
        return self.start + self.duration


@njit
def merge_runs(starts, stops, max_gap):
    """Joins consecutive [start, stop) runs separated by fewer than `max_gap` periods."""
    n = len(starts)
    out_starts = np.empty(n, dtype=np.int64)
    out_stops = np.empty(n, dtype=np.int64)
    k = -1
    for i in range(n):
        if k >= 0 and starts[i] - out_stops[k] < max_gap:
            out_stops[k] = stops[i]
        else:
            k += 1
            out_starts[k] = starts[i]
            out_stops[k] = stops[i]
    return out_starts[:k + 1], out_stops[:k + 1]


def quantise(power, p_base):
    """Power as a whole number of p_base steps."""
    return np.round(np.asarray(power) / p_base).astype(np.int64)


def _first_level(p_threshold, p_base):
    """Smallest quantisation level strictly above `p_threshold`, in units of p_base."""
    return int(np.floor(p_threshold / p_base + 1e-9)) + 1


def _groups(levels, lo, hi, level, min_periods):
    """Merged runs inside [lo, hi) where the quantised power reaches `level`."""
    labels, n_runs = ndimage.label(levels[lo:hi] >= level)
    if n_runs == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    slices = ndimage.find_objects(labels)
    starts = np.array([lo + s[0].start for s in slices], dtype=np.int64)
    stops = np.array([lo + s[0].stop for s in slices], dtype=np.int64)
    return merge_runs(starts, stops, min_periods)


def _find_blocks(levels, flex, lo, hi, level, params, min_periods, found):
    # A group whose mean falls short is searched again at the next level, so its stronger core can still qualify
    for s, e in zip(*_groups(levels, lo, hi, level, min_periods)):
        if e - s < min_periods:
            continue
        mean_power = float(flex[s:e].mean())
        if mean_power >= params.p_threshold:
            found.append((int(s), int(e), mean_power))
        else:
            _find_blocks(levels, flex, s, e, level + 1, params, min_periods, found)


def baseload(series, p_base):
    """Per-period baseline: the household-day's low percentile, capped at `p_base`."""
    per_day = n_steps(pd.Timedelta("1D"), series.grid.resolution)
    power = series.power
    baseline = np.empty_like(power)
    for lo in range(0, len(power), per_day):
        day = power[lo:lo + per_day]
        baseline[lo:lo + per_day] = min(max(float(np.percentile(day, const.BASELOAD_PERCENTILE)), 0.0), p_base)
    return baseline


def characterize(series, params=CharacterizerParams()):
    """Essential series and flexible blocks of one household.

    Excursions are groups of periods whose quantised power lies above p_threshold, with dips shorter than
    t_threshold merged in. Block energy is measured from the household-day's baseload. A group too short is
    dropped; a group with too low a mean is searched again one quantisation level higher.

    Parameters
    ----------
    series : ConsumptionSeries
    params : CharacterizerParams

    Returns
    -------
    essential : ConsumptionSeries
        series minus the flexible power of every block, so the split is lossless
    blocks : list of FlexibleBlock
    """
    grid = series.grid
    if grid.resolution > params.t_threshold:
        raise InputError(f"Grid resolution {grid.resolution} is coarser than t_threshold {params.t_threshold}")
    min_periods = n_steps(params.t_threshold, grid.resolution)

    power = series.power
    flexible = np.zeros_like(power)
    blocks = []
    if len(power):
        flex = np.maximum(power - baseload(series, params.p_base), 0.0)
        levels = quantise(power, params.p_base)
        found = []
        _find_blocks(levels, flex, 0, len(power), _first_level(params.p_threshold, params.p_base), params,
                     min_periods, found)
        for lo, hi, mean_power in sorted(found):
            flexible[lo:hi] = flex[lo:hi]
            duration = (hi - lo) * grid.resolution
            blocks.append(FlexibleBlock(series.household_id, grid.timestamp(lo), duration,
                                        mean_power, mean_power * hours(duration)))

    essential = series.replace(power - flexible)
    logger.debug("Household %s: %d flexible blocks, %.3f kWh flexible of %.3f kWh",
                 series.household_id, len(blocks), flexible.sum() * grid.step_hours, series.energy)
    return essential, blocks


def characterize_all(series_list, params=CharacterizerParams()):
    essentials, blocks = [], []
    for s in series_list:
        e, b = characterize(s, params)
        essentials.append(e)
        blocks.extend(b)
    return essentials, blocks


def blocks_to_requests(blocks, sigma, bp_h_max=const.BP_H_MAX, horizon_end=None, id_suffix=""):
    """One request per block, with `sigma` of slack after the block's own end.

    Parameters
    ----------
    blocks : list of FlexibleBlock
    sigma : pd.Timedelta, float
        Flexibility, numbers are read as hours
    bp_h_max : float
        Willingness to pay, the budget is bp_h_max x energy [GBP/kWh]
    horizon_end : pd.Timestamp, optional
        Latest times are clipped here, never before the block's own end
    id_suffix : str, optional
        Appended to household and request ids
    """
    sigma = to_timedelta(sigma, "h")
    if sigma < pd.Timedelta(0):
        raise InputError(f"sigma must be non-negative, got {sigma}")

    requests = []
    for b in blocks:
        latest = b.end + sigma
        if horizon_end is not None:
            latest = max(min(latest, horizon_end), b.end)
        household = f"{b.household_id}{id_suffix}"
        requests.append(Request(
            id=f"{household}@{b.start:%Y%m%dT%H%M}",
            household_id=household,
            earliest=b.start,
            latest=latest,
            energy=b.energy,
            p_min=b.mean_power,
            p_max=b.mean_power,
            budget=bp_h_max * b.energy
        ))
    return sorted(requests, key=lambda r: r.id)
