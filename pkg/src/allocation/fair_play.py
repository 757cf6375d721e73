"""
Fair Play allocation. Requests are drawn one at a time with probability weighted towards households with the
lowest historic success, and each drawn request takes the cheapest slot it can afford.
"""
import logging
from dataclasses import dataclass

import numpy as np

import src.common.constants as const
from src.allocation.schedule import Slot, AllocationOutcome
from src.allocation.utils import candidate_starts
from src.common.exceptions import InputError
from src.market.amm import commit_request
from src.market.core import HouseholdRecord

logger = logging.getLogger(__name__)

# Costs closer than this count as a tie
COST_TIE_TOL = 1e-12


@dataclass(frozen=True)
class FairnessPolicy:
    factor: str = "historic_success"
    gamma_floor: float = const.GAMMA_FLOOR
    scale: float = const.SCORE_SCALE

    def __post_init__(self):
        if self.factor != "historic_success":
            raise InputError(f"Unsupported fairness factor '{self.factor}'")
        if not self.gamma_floor > 0:
            raise InputError("gamma_floor must be positive")
        if not self.scale > 0:
            raise InputError("scale must be positive")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def fairness_scores(requests, households, policy=FairnessPolicy()):
    """Success score per request id, 1/Gamma of its household normalised over the households present.

    Parameters
    ----------
    requests : iterable of Request
    households : dict
        Household id to HouseholdRecord; a household without a record counts as having no history
    policy : FairnessPolicy

    Returns
    -------
    dict
        Request id to score
    """
    requests = list(requests)
    inverse = {}
    for r in requests:
        if r.household_id not in inverse:
            record = households.get(r.household_id) or HouseholdRecord(r.household_id)
            inverse[r.household_id] = 1.0 / max(record.gamma, policy.gamma_floor)

    norm = sum(inverse.values())
    return {r.id: policy.scale * inverse[r.household_id] / norm for r in requests}


def draw_next_request(backlog, scores, rng):
    """One weighted draw from the backlog, taken in id order so a seed fixes the result."""
    if not backlog:
        raise InputError("Cannot draw from an empty backlog")
    backlog = sorted(backlog, key=lambda r: r.id)
    cumulative = np.cumsum([scores[r.id] for r in backlog])
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
    return backlog[min(idx, len(backlog) - 1)]


def find_cheapest_slot(request, state):
    """Cheapest affordable start with room in every occupied period; the earliest wins a tie."""
    starts, costs = candidate_starts(request, state)
    if len(starts) == 0:
        return None
    best = int(np.flatnonzero(costs <= costs.min() + COST_TIE_TOL)[0])
    res = state.config.resolution
    return Slot(int(starts[best]), request.n_periods(res), request.power(res), float(costs[best]))


def fair_play_run(state, requests, policy, rng, households=None):
    """Clears an instance continuously: draw, look for a slot, commit or reject, until the backlog is empty.

    Returns
    -------
    state : MarketState
        The same state, updated in place
    outcomes : list of AllocationOutcome
        In the order the requests were processed
    """
    households = {} if households is None else households
    backlog = {r.id: r for r in requests}
    outcomes = []

    while backlog:
        scores = fairness_scores(backlog.values(), households, policy)
        request = draw_next_request(list(backlog.values()), scores, rng)
        del backlog[request.id]

        slot = find_cheapest_slot(request, state)
        if slot is None:
            state.withdraw(request)
            outcomes.append(AllocationOutcome.unserved(request))
            continue

        commit_request(state, request, slot.start_period)
        cost = state.ledger.entries[-1].cost
        slot = Slot(slot.start_period, slot.n_periods, slot.power, cost)
        outcomes.append(AllocationOutcome.served_at(request, slot, state.grid))

    logger.debug("Fair Play served %d of %d requests", sum(o.served for o in outcomes), len(outcomes))
    return state, outcomes
