from dataclasses import dataclass

import numpy as np
import pandas as pd

import src.common.constants as const
from src.common.exceptions import AlignmentError, InputError


def to_utc(ts):
    """Returns a tz-aware UTC timestamp, naive input is taken to be UTC already."""
    ts = pd.Timestamp(ts)
    if ts.tzinfo is None:
        return ts.tz_localize("UTC")
    return ts.tz_convert("UTC")


def to_timedelta(value, unit="h"):
    """Accepts pandas offset strings ("24h", "5min"), timedeltas or plain numbers in `unit`."""
    if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
        return pd.Timedelta(float(value), unit=unit)
    return pd.Timedelta(value)


def hours(delta):
    return pd.Timedelta(delta) / pd.Timedelta("1h")


def n_steps(delta, resolution):
    """Number of whole resolution steps in delta, raising when delta is not a multiple."""
    delta, resolution = pd.Timedelta(delta), pd.Timedelta(resolution)
    if delta % resolution != pd.Timedelta(0):
        raise AlignmentError(f"{delta} is not a multiple of {resolution}")
    return int(delta // resolution)


def is_aligned(ts, resolution=const.M_RES, origin=const.ORIGIN):
    return (to_utc(ts) - origin) % pd.Timedelta(resolution) == pd.Timedelta(0)


def check_aligned(ts, resolution=const.M_RES, origin=const.ORIGIN):
    ts = to_utc(ts)
    if not is_aligned(ts, resolution, origin):
        raise AlignmentError(f"Timestamp {ts} is not aligned to {pd.Timedelta(resolution)}")
    return ts


@dataclass(frozen=True)
class TimeGrid:
    """Half-open interval [start, end) cut into equal periods of `resolution`.

    Period i covers [start + i*resolution, start + (i+1)*resolution).
    """
    start: pd.Timestamp
    end: pd.Timestamp
    resolution: pd.Timedelta = const.M_RES

    def __post_init__(self):
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "end", to_utc(self.end))
        object.__setattr__(self, "resolution", pd.Timedelta(self.resolution))

        if self.resolution <= pd.Timedelta(0):
            raise InputError("Grid resolution must be positive")
        if self.end <= self.start:
            raise InputError(f"Grid end {self.end} must lie after start {self.start}")
        n_steps(self.end - self.start, self.resolution)

    @classmethod
    def from_periods(cls, start, n_periods, resolution=const.M_RES):
        resolution = pd.Timedelta(resolution)
        return cls(to_utc(start), to_utc(start) + n_periods * resolution, resolution)

    def __len__(self):
        return self.n_periods

    @property
    def n_periods(self):
        return int((self.end - self.start) // self.resolution)

    @property
    def step_hours(self):
        return hours(self.resolution)

    @property
    def periods(self):
        return pd.date_range(self.start, periods=self.n_periods, freq=self.resolution)

    def index_of(self, ts, clip=False):
        """Period index of an aligned timestamp; `end` maps to n_periods."""
        ts = to_utc(ts)
        offset = ts - self.start
        if offset % self.resolution != pd.Timedelta(0):
            raise AlignmentError(f"Timestamp {ts} is not on the grid starting {self.start}")
        idx = int(offset // self.resolution)
        if clip:
            return min(max(idx, 0), self.n_periods)
        return idx

    def timestamp(self, index):
        return self.start + int(index) * self.resolution

    def contains(self, ts):
        return self.start <= to_utc(ts) < self.end

    def offset_in(self, other):
        """Index of this grid's first period inside `other`."""
        if self.resolution != other.resolution:
            raise AlignmentError("Grids with different resolutions cannot be nested")
        return other.index_of(self.start)

    def slice(self, start, end):
        """Sub-grid [start, end), clipped to this grid."""
        start = max(to_utc(start), self.start)
        end = min(to_utc(end), self.end)
        return TimeGrid(start, end, self.resolution)
