"""
Discrete-event market simulation. A new instance opens every `spacing`, sees the requests relevant to its window
and clears them with the chosen allocator; commitments persist in one ledger over the whole horizon.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
from tqdm.auto import tqdm as tq

import src.common.constants as const
from src.allocation.fair_play import FairnessPolicy, fair_play_run
from src.allocation.optimisers import volume_max_solve, revenue_max_solve, apply_schedule
from src.allocation.schedule import AllocationOutcome
from src.common.exceptions import InputError
from src.common.grid import is_aligned
from src.market.amm import MarketState
from src.market.core import CommitmentLedger, HouseholdRecord, relevant_requests, advance_instance
from src.market.settlement import settle

logger = logging.getLogger(__name__)

UNCONTROLLABLE = "uncontrollable"


@dataclass
class SimulationResult:
    config: object
    grid: object
    requests: List = field(repr=False)
    outcomes: List[AllocationOutcome] = field(repr=False)
    households: Dict[str, HouseholdRecord] = field(repr=False)
    ledger: CommitmentLedger = field(repr=False)
    prices: pd.DataFrame = field(repr=False)
    settlement: object = field(repr=False)
    accepted_offers: List = field(default_factory=list)
    exact: bool = True
    approach: str = "fair_play"

    @property
    def served_kwh(self):
        return math.fsum(o.delivered for o in self.outcomes)

    @property
    def requested_kwh(self):
        return math.fsum(r.energy for r in self.requests)

    @property
    def total_cost(self):
        return math.fsum(o.cost for o in self.outcomes)

    @property
    def request_map(self):
        return {r.id: r for r in self.requests}

    def unit_costs(self):
        """Cost per kWh of every served request [GBP/kWh]."""
        by_id = self.request_map
        return np.array([o.cost / by_id[o.request_id].energy for o in self.outcomes if o.served])

    def capacity_ok(self):
        capacity = np.maximum(self.prices["supply_kw"].to_numpy() - self.prices["essential_kw"].to_numpy(), 0.0)
        return bool(np.all(self.ledger.scheduled_power <= capacity + 1e-6))

    def invariants(self):
        return dict(
            capacity=self.capacity_ok(),
            budget_balance=bool(self.settlement.budget_balanced),
            individual_rationality=bool(self.settlement.buyer_rational and self.settlement.seller_rational),
            ledger_consistency=self.ledger.is_consistent(),
        )

    def outcomes_frame(self):
        by_id = self.request_map
        rows = []
        for o in self.outcomes:
            r = by_id[o.request_id]
            rows.append(dict(
                request_id=o.request_id, household_id=r.household_id, earliest=r.earliest, latest=r.latest,
                energy_kwh=r.energy, budget_gbp=r.budget, served=o.served, delivered_kwh=o.delivered,
                start=o.start, n_periods=o.slot.n_periods if o.slot else 0,
                power_kw=o.slot.power if o.slot else 0.0, cost_gbp=o.cost
            ))
        return pd.DataFrame(rows, columns=["request_id", "household_id", "earliest", "latest", "energy_kwh",
                                           "budget_gbp", "served", "delivered_kwh", "start", "n_periods",
                                           "power_kw", "cost_gbp"])


class MarketEngine:
    """Runs every market instance over a horizon.

    Parameters
    ----------
    config : MarketConfig
    grid : TimeGrid
        Simulation horizon, on the market resolution
    supply : np.ndarray
        Uncontrollable supply S^T over the horizon, already scaled [kW]
    essential : np.ndarray
        Essential demand C^B over the horizon [kW]
    requests : list of Request
    approach : str
        fair_play, volume_max or revenue_max
    households : dict, optional
        Prior HouseholdRecord per household id
    offers : list of Offer, optional
        Controllable offers; accepted when the sell price reaches their unit floor
    policy : FairnessPolicy, optional
    rng : np.random.Generator, optional
    heuristic : bool
        Lets the benchmark solvers run beyond their exactness threshold
    """

    def __init__(self, config, grid, supply, essential, requests, approach="fair_play", households=None,
                 offers=(), policy=None, rng=None, heuristic=False):
        if approach not in const.APPROACHES:
            raise InputError(f"Unknown approach '{approach}', choose from {const.APPROACHES}")
        if grid.resolution != config.resolution:
            raise InputError("Horizon grid and market config disagree on resolution")
        self.config = config
        self.grid = grid
        self.supply = np.array(supply, dtype=float)
        self.essential = np.array(essential, dtype=float)
        if self.supply.shape != (len(grid),) or self.essential.shape != (len(grid),):
            raise InputError("Supply and essential demand must cover the horizon grid")

        for r in requests:
            if not (is_aligned(r.earliest, config.resolution) and is_aligned(r.latest, config.resolution)):
                raise InputError(f"Request {r.id} is not aligned to {config.resolution}")
        ids = [r.id for r in requests]
        if len(set(ids)) != len(ids):
            raise InputError("Request ids must be unique")

        self.requests = sorted(requests, key=lambda r: r.id)
        self.approach = approach
        self.initial_households = dict(households or {})
        for r in self.requests:
            self.initial_households.setdefault(r.household_id, HouseholdRecord(r.household_id))
        self.households = dict(self.initial_households)
        self._by_id = {r.id: r for r in self.requests}
        self.offers = list(offers)
        self.policy = policy or FairnessPolicy()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.heuristic = heuristic

    def _instances(self):
        clock = advance_instance(self.config, self.grid.start).start
        while clock < self.grid.end:
            window = advance_instance(self.config, clock)
            yield window.slice(self.grid.start, self.grid.end)
            clock += self.config.spacing

    def _accept_offers(self, state, total, suppliers, accepted):
        for o in self.offers:
            if o.id in suppliers or o.latest <= state.grid.start or o.earliest >= state.grid.end:
                continue
            profile = o.power_profile(state.grid)
            covered = profile > 0
            if not covered.any() or o.unit_floor > state.sp[covered].max():
                continue
            full = o.power_profile(self.grid)
            total += full
            suppliers[o.id] = full
            accepted.append(o)
            logger.info("Accepted offer %s (%.2f kWh, floor %.4f GBP/kWh)", o.id, o.energy, o.unit_floor)

    def _allocate(self, state, relevant):
        if self.approach == "fair_play":
            _, outcomes = fair_play_run(state, relevant, self.policy, self.rng, self.households)
            return outcomes, True
        solve = volume_max_solve if self.approach == "volume_max" else revenue_max_solve
        result = solve(relevant, state, heuristic=self.heuristic, rng=self.rng)
        apply_schedule(state, relevant, result)
        return result.outcomes, result.exact

    def run(self, progress=False):
        res = self.config.resolution
        self.households = dict(self.initial_households)
        ledger = CommitmentLedger(self.grid)
        total = self.supply.copy()
        suppliers = {UNCONTROLLABLE: self.supply.copy()}
        accepted = []
        n = len(self.grid)
        opening = {k: np.full(n, np.nan) for k in ("alpha", "bp", "sp", "c_fa")}

        waiting = {r.id: r for r in self.requests}
        final = {}
        exact = True
        instances = list(self._instances())

        for window in tq(instances, desc=f"Market instances ({self.approach})", disable=not progress):
            closed = []
            for r in list(waiting.values()):
                if r.latest - r.min_duration(res) < window.start:
                    closed.append(AllocationOutcome.unserved(r))
                    del waiting[r.id]

            relevant = relevant_requests(waiting.values(), window)
            if self.offers:
                quote = MarketState(self.config, window, total, self.essential, ledger, relevant)
                self._accept_offers(quote, total, suppliers, accepted)
            state = MarketState(self.config, window, total, self.essential, ledger, relevant)

            lo = window.offset_in(self.grid)
            hi = min(lo + self.config.spacing_periods, n)
            for k, v in (("alpha", state.alpha), ("bp", state.bp), ("sp", state.sp), ("c_fa", state.c_fa)):
                opening[k][lo:hi] = v[:hi - lo]

            outcomes, instance_exact = self._allocate(state, relevant)
            exact &= instance_exact

            for o in outcomes:
                r = waiting[o.request_id]
                if not o.served and r.latest > window.end and window.end < self.grid.end:
                    continue
                closed.append(o)
                del waiting[r.id]

            self._close(closed, final)
            logger.debug("Instance %s: %d relevant, %d closed, %d waiting",
                         window.start, len(relevant), len(closed), len(waiting))

        self._close([AllocationOutcome.unserved(r) for r in waiting.values()], final)

        prices = pd.DataFrame(dict(opening, supply_kw=total, essential_kw=self.essential,
                                   scheduled_kw=ledger.scheduled_power.copy()),
                              index=self.grid.periods)
        prices.index.name = "timestamp"
        settlement = settle(ledger, suppliers, self.requests, accepted)

        outcomes = [final[r.id] for r in self.requests]
        return SimulationResult(self.config, self.grid, self.requests, outcomes, dict(self.households), ledger,
                                prices, settlement, accepted, exact, self.approach)

    def _close(self, outcomes, final):
        """Records final outcomes and updates household histories at instance close."""
        for o in outcomes:
            r = self._by_id[o.request_id]
            final[o.request_id] = o
            self.households[r.household_id] = self.households[r.household_id].record(o.delivered, r.energy)
