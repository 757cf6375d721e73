from dataclasses import dataclass, field
from typing import Optional, Dict

import numpy as np
import pandas as pd

import src.common.constants as const
from src.common.exceptions import InputError
from src.common.grid import TimeGrid


@dataclass(frozen=True)
class ConsumptionSeries:
    household_id: str
    grid: TimeGrid
    power: np.ndarray = field(repr=False)  # [kW] per period

    def __post_init__(self):
        power = np.asarray(self.power, dtype=float)
        if power.shape != (len(self.grid),):
            raise InputError(f"Household {self.household_id}: {len(power)} samples for {len(self.grid)} periods")
        if (power < 0).any() or not np.isfinite(power).all():
            raise InputError(f"Household {self.household_id}: power must be finite and non-negative")
        object.__setattr__(self, "power", power)

    def __len__(self):
        return len(self.grid)

    @property
    def energy(self):
        """Total energy [kWh]."""
        return float(self.power.sum() * self.grid.step_hours)

    def to_series(self):
        return pd.Series(self.power, index=self.grid.periods, name=self.household_id)

    def replace(self, power, household_id=None):
        return ConsumptionSeries(household_id or self.household_id, self.grid, power)


def aggregate(series_list, grid=None):
    """Sum of several households' power on a common grid [kW]."""
    if not series_list:
        if grid is None:
            raise InputError("Cannot aggregate an empty list without a grid")
        return np.zeros(len(grid))
    grid = grid or series_list[0].grid
    total = np.zeros(len(grid))
    for s in series_list:
        if s.grid != grid:
            raise InputError(f"Household {s.household_id} is on a different grid")
        total += s.power
    return total


@dataclass(frozen=True)
class SupplyProfile:
    grid: TimeGrid
    total: np.ndarray = field(repr=False)  # [kW] per period
    source_mix: Optional[Dict[str, np.ndarray]] = field(default=None, repr=False)
    case_label: Optional[str] = None

    def __post_init__(self):
        total = np.asarray(self.total, dtype=float)
        if total.shape != (len(self.grid),):
            raise InputError(f"Supply has {len(total)} samples for {len(self.grid)} periods")
        if (total < 0).any() or not np.isfinite(total).all():
            raise InputError("Supply must be finite and non-negative")
        if self.case_label is not None and self.case_label not in const.SYNTH_CASES:
            raise InputError(f"Unknown supply case '{self.case_label}', choose from {const.SYNTH_CASES}")
        object.__setattr__(self, "total", total)

    def __len__(self):
        return len(self.grid)

    @property
    def energy(self):
        return float(self.total.sum() * self.grid.step_hours)

    def restrict(self, grid):
        """Profile on a sub-grid."""
        lo = grid.offset_in(self.grid)
        sl = slice(lo, lo + len(grid))
        mix = None if self.source_mix is None else {k: v[sl] for k, v in self.source_mix.items()}
        return SupplyProfile(grid, self.total[sl], mix, self.case_label)
