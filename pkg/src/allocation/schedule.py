import math
from dataclasses import dataclass
from typing import Optional, List

import pandas as pd

from src.common.exceptions import InputError

OBJECTIVES = ("volume", "revenue")


@dataclass(frozen=True)
class Slot:
    start_period: int  # Index into the instance grid
    n_periods: int
    power: float  # [kW]
    cost: float  # [GBP]


@dataclass(frozen=True)
class AllocationOutcome:
    request_id: str
    served: bool
    delivered: float  # Q-bar [kWh]
    slot: Optional[Slot] = None
    start: Optional[pd.Timestamp] = None

    @property
    def cost(self):
        return self.slot.cost if self.slot is not None else 0.0

    @classmethod
    def unserved(cls, request):
        return cls(request.id, False, 0.0)

    @classmethod
    def served_at(cls, request, slot, grid):
        return cls(request.id, True, request.energy, slot, grid.timestamp(slot.start_period))


@dataclass
class ScheduleResult:
    outcomes: List[AllocationOutcome]
    objective: float
    exact: bool

    def __iter__(self):
        return iter(self.outcomes)

    def __len__(self):
        return len(self.outcomes)


def request_value(request, objective):
    if objective == "volume":
        return request.energy
    if objective == "revenue":
        return request.budget
    raise InputError(f"Unknown objective '{objective}', choose from {OBJECTIVES}")


def schedule_objective(served_requests, objective):
    """Objective of a set of served requests, exactly rounded whatever their order."""
    return math.fsum(request_value(r, objective) for r in served_requests)
