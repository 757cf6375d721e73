import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, List

import numpy as np
import pandas as pd

import src.common.constants as const
from src.common.exceptions import InputError, AlignmentError
from src.common.grid import TimeGrid, to_utc, to_timedelta, hours, n_steps, check_aligned

logger = logging.getLogger(__name__)

# Slack when rounding Q/P^max up to whole periods
_ROUNDING_EPS = 1e-9


@dataclass(frozen=True)
class MarketConfig:
    window: pd.Timedelta = const.M_WIN
    spacing: pd.Timedelta = const.M_DUR
    resolution: pd.Timedelta = const.M_RES
    bp_max: float = const.BP_MAX
    sp_max: Optional[float] = const.SP_MAX
    curve: str = const.PRICING_CURVE
    gamma_target: float = const.GAMMA_TARGET
    pricing_mode: str = const.PRICING_MODE
    c_ctrl: float = const.C_CTRL

    def __post_init__(self):
        object.__setattr__(self, "window", to_timedelta(self.window, "h"))
        object.__setattr__(self, "spacing", to_timedelta(self.spacing, "h"))
        object.__setattr__(self, "resolution", to_timedelta(self.resolution, "min"))
        if self.sp_max is None:
            object.__setattr__(self, "sp_max", float(self.bp_max))

        if not self.window >= self.spacing > pd.Timedelta(0):
            raise InputError(f"Need window >= spacing > 0, got window={self.window}, spacing={self.spacing}")
        if self.resolution <= pd.Timedelta(0):
            raise InputError("resolution must be positive")
        n_steps(self.window, self.resolution)
        n_steps(self.spacing, self.resolution)
        if not self.bp_max > 0:
            raise InputError(f"bp_max must be positive, got {self.bp_max}")
        if self.sp_max < 0:
            raise InputError(f"sp_max must be non-negative, got {self.sp_max}")
        if self.curve not in const.PRICING_CURVES:
            raise InputError(f"Unknown pricing curve '{self.curve}', choose from {const.PRICING_CURVES}")
        if self.pricing_mode not in const.PRICING_MODES:
            raise InputError(f"Unknown pricing mode '{self.pricing_mode}', choose from {const.PRICING_MODES}")
        if not 0 < self.gamma_target <= 1:
            raise InputError(f"gamma_target must lie in (0, 1], got {self.gamma_target}")
        if self.c_ctrl < 0:
            raise InputError("c_ctrl must be non-negative")

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self):
        d = asdict(self)
        for k in ("window", "spacing", "resolution"):
            d[k] = str(d[k])
        return d

    def with_options(self, **kwargs):
        d = asdict(self)
        d.update({k: v for k, v in kwargs.items() if v is not None})
        if "bp_max" in kwargs and "sp_max" not in kwargs and self.sp_max == self.bp_max:
            d["sp_max"] = None
        return MarketConfig(**d)

    @property
    def step_hours(self):
        return hours(self.resolution)

    @property
    def window_periods(self):
        return n_steps(self.window, self.resolution)

    @property
    def spacing_periods(self):
        return n_steps(self.spacing, self.resolution)


def _periods_for(energy, p_max, resolution):
    return max(1, int(math.ceil(energy / p_max / hours(resolution) - _ROUNDING_EPS)))


@dataclass(frozen=True)
class Request:
    """Demand of one flexible appliance for `energy` kWh delivered inside [earliest, latest].

    Parameters
    ----------
    id : str
    household_id : str
    earliest, latest : pd.Timestamp
        Valid interval (E^r, L^r)
    energy : float
        Q^r [kWh]
    p_min, p_max : float
        Power bounds [kW]
    budget : float
        C^r [GBP]
    """
    id: str
    household_id: str
    earliest: pd.Timestamp
    latest: pd.Timestamp
    energy: float
    p_min: float
    p_max: float
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "earliest", to_utc(self.earliest))
        object.__setattr__(self, "latest", to_utc(self.latest))
        if self.latest <= self.earliest:
            raise InputError(f"Request {self.id}: latest must be after earliest")
        if not self.energy > 0:
            raise InputError(f"Request {self.id}: energy must be positive")
        if not 0 < self.p_min <= self.p_max:
            raise InputError(f"Request {self.id}: need 0 < p_min <= p_max")
        if self.budget < 0:
            raise InputError(f"Request {self.id}: budget must be non-negative")
        if self.energy / self.p_max > hours(self.latest - self.earliest) + _ROUNDING_EPS:
            raise InputError(f"Request {self.id} cannot be satisfied inside its own interval")

    def n_periods(self, resolution=const.M_RES):
        return _periods_for(self.energy, self.p_max, resolution)

    def min_duration(self, resolution=const.M_RES):
        return self.n_periods(resolution) * pd.Timedelta(resolution)

    def power(self, resolution=const.M_RES):
        """Delivered block power P^r, never above P^max."""
        return self.energy / (self.n_periods(resolution) * hours(resolution))

    def flexibility(self, resolution=const.M_RES):
        return self.interval - self.min_duration(resolution)

    def average_power(self, resolution=const.M_RES):
        return hours(self.min_duration(resolution)) / hours(self.interval) * self.p_max

    @property
    def interval(self):
        return self.latest - self.earliest


def min_duration(request, resolution=const.M_RES):
    return request.min_duration(resolution)


def flexibility(request, resolution=const.M_RES):
    return request.flexibility(resolution)


@dataclass(frozen=True)
class Offer:
    id: str
    agent_id: str
    earliest: pd.Timestamp
    latest: pd.Timestamp
    energy: float
    p_min: float
    p_max: float
    revenue_floor: float = 0.0
    controllable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "earliest", to_utc(self.earliest))
        object.__setattr__(self, "latest", to_utc(self.latest))
        if self.latest <= self.earliest:
            raise InputError(f"Offer {self.id}: latest must be after earliest")
        if not self.energy > 0:
            raise InputError(f"Offer {self.id}: energy must be positive")
        if not 0 < self.p_min <= self.p_max:
            raise InputError(f"Offer {self.id}: need 0 < p_min <= p_max")
        if self.revenue_floor < 0:
            raise InputError(f"Offer {self.id}: revenue_floor must be non-negative")

    @property
    def unit_floor(self):
        return self.revenue_floor / self.energy

    def power_profile(self, grid):
        """Offered power per period of `grid` [kW].

        Energy is spread evenly over the interval, capped at p_max. When the even rate falls below p_min the
        offer runs at p_min from its start until the energy is used up.
        """
        profile = np.zeros(len(grid))
        lo = grid.index_of(max(self.earliest, grid.start).floor(grid.resolution), clip=True)
        hi = grid.index_of(min(self.latest, grid.end).ceil(grid.resolution), clip=True)
        if hi <= lo:
            return profile

        step = grid.step_hours
        rate = min(self.p_max, self.energy / hours(self.latest - self.earliest))
        if rate >= self.p_min:
            profile[lo:hi] = rate
            return profile

        remaining = self.energy
        for t in range(lo, hi):
            if remaining <= 0:
                break
            e = min(self.p_min * step, remaining)
            profile[t] = e / step
            remaining -= e
        return profile


@dataclass(frozen=True)
class HouseholdRecord:
    id: str
    served_energy: float = 0.0
    requested_energy: float = 0.0

    def __post_init__(self):
        if not 0 <= self.served_energy <= self.requested_energy + 1e-12:
            raise InputError(f"Household {self.id}: need 0 <= served_energy <= requested_energy")

    @classmethod
    def with_history(cls, household_id, gamma, weight):
        if not 0 <= gamma <= 1:
            raise InputError(f"Household {household_id}: gamma must lie in [0, 1]")
        if weight < 0:
            raise InputError(f"Household {household_id}: history weight must be non-negative")
        return cls(household_id, served_energy=gamma * weight, requested_energy=weight)

    @property
    def gamma(self):
        if self.requested_energy > 0:
            return self.served_energy / self.requested_energy
        return const.INITIAL_GAMMA

    @property
    def weight(self):
        return self.requested_energy

    def record(self, delivered, requested):
        return HouseholdRecord(self.id, self.served_energy + delivered, self.requested_energy + requested)


@dataclass
class LedgerEntry:
    request_id: str
    start_period: int
    n_periods: int
    power: float
    cost: float
    payments: np.ndarray = field(repr=False, default=None)  # GBP per occupied period, sums to cost

    def __post_init__(self):
        if self.payments is None:
            self.payments = np.full(self.n_periods, self.cost / self.n_periods)

    @property
    def stop_period(self):
        return self.start_period + self.n_periods


class CommitmentLedger:
    """Every commitment made on a horizon grid, plus the scheduled power S^b_t it implies."""

    def __init__(self, grid):
        self.grid = grid
        self.entries: List[LedgerEntry] = []
        self.scheduled_power = np.zeros(len(grid))

    def append(self, entry):
        if entry.start_period < 0 or entry.stop_period > len(self.grid):
            raise AlignmentError(f"Commitment for {entry.request_id} falls outside the ledger grid")
        self.entries.append(entry)
        self.scheduled_power[entry.start_period:entry.stop_period] += entry.power

    def recompute(self):
        scheduled = np.zeros(len(self.grid))
        for e in self.entries:
            scheduled[e.start_period:e.stop_period] += e.power
        return scheduled

    def is_consistent(self, atol=1e-9):
        return bool(np.allclose(self.recompute(), self.scheduled_power, rtol=0, atol=atol))

    def payments(self):
        """Buyer payments per period [GBP]."""
        paid = np.zeros(len(self.grid))
        for e in self.entries:
            paid[e.start_period:e.stop_period] += e.payments
        return paid

    @property
    def total_cost(self):
        return math.fsum(e.cost for e in self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, request_id):
        return any(e.request_id == request_id for e in self.entries)

    def to_frame(self):
        return pd.DataFrame(
            dict(request_id=[e.request_id for e in self.entries],
                 start=[self.grid.timestamp(e.start_period) for e in self.entries],
                 n_periods=[e.n_periods for e in self.entries],
                 power_kw=[e.power for e in self.entries],
                 cost_gbp=[e.cost for e in self.entries])
        )


def is_relevant(request, m_start, m_end, resolution=const.M_RES):
    e, l = request.earliest, request.latest
    d = request.min_duration(resolution)
    return ((e <= m_start and l - d >= m_end)
            or (e + d >= m_start and l <= m_end)
            or (e <= m_end and l >= m_end)
            # Startable inside the window. Keeps the set monotone when the window grows.
            or (e <= m_end and l - d >= m_start))


def relevant_requests(waiting_area, grid):
    """Requests of the waiting area that the instance on `grid` should consider, ordered by id."""
    return sorted((r for r in waiting_area if is_relevant(r, grid.start, grid.end, grid.resolution)),
                  key=lambda r: r.id)


def advance_instance(config, clock):
    """Grid of the instance live at `clock`; at an exact multiple of the spacing the new instance is live."""
    clock = check_aligned(clock, config.resolution)
    start = const.ORIGIN + ((clock - const.ORIGIN) // config.spacing) * config.spacing
    return TimeGrid(start, start + config.window, config.resolution)
