"""
Reliability bookkeeping: energy-weighted success per request, per household and for the whole system, and the
check of whether a target reliability is achievable with modelled supply and demand.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple, List

import numpy as np
import pandas as pd

import src.common.constants as const
from src.common.exceptions import InputError, UndefinedMetricError, CoverageError
from src.common.series import aggregate
from src.consumption.characterizer import CharacterizerParams, characterize_all, blocks_to_requests
from src.market.core import HouseholdRecord
from src.market.engine import MarketEngine

logger = logging.getLogger(__name__)

SUGGESTIONS = (
    "raise the price offered to controllable suppliers (sp_max) to attract additional supply",
    "encourage consumers to submit more flexible requests (larger sigma)",
)


@dataclass
class ReliabilityReport:
    per_request: Dict[str, float] = field(repr=False)
    per_household: Dict[str, Tuple[float, float]] = field(repr=False)  # id -> (gamma, weight)
    system: float
    target: float
    suggestions: List[str] = field(default_factory=list)
    lever_results: Dict[str, float] = field(default_factory=dict)

    @property
    def gap(self):
        return self.system - self.target

    @property
    def feasible(self):
        return self.gap >= 0

    def to_dict(self):
        return dict(
            gamma_actual=self.system,
            gamma_target=self.target,
            gap=self.gap,
            feasible=self.feasible,
            per_household={k: dict(gamma=g, weight_kwh=w) for k, (g, w) in sorted(self.per_household.items())},
            suggestions=list(self.suggestions),
            lever_results=dict(self.lever_results),
        )


def request_success(outcome, request):
    if outcome.request_id != request.id:
        raise InputError(f"Outcome for {outcome.request_id} does not belong to request {request.id}")
    return outcome.delivered / request.energy


def household_reliability(outcomes, requests):
    """Energy-weighted success over a household's history, 1 when there is no history."""
    by_id = {r.id: r for r in requests}
    if len(by_id) != len(outcomes):
        raise InputError("Outcome and request histories are not aligned")
    if not outcomes:
        return const.INITIAL_GAMMA
    weights = [by_id[o.request_id].energy for o in outcomes]
    successes = [request_success(o, by_id[o.request_id]) for o in outcomes]
    return math.fsum(w * g for w, g in zip(weights, successes)) / math.fsum(weights)


def system_reliability(households):
    """Gamma-actual, the mean of household reliabilities weighted by the energy each requested."""
    records = [h for h in households if h.requested_energy > 0]
    if not records:
        raise UndefinedMetricError("System reliability is undefined without any requested energy")
    return math.fsum(h.requested_energy * h.gamma for h in records) / math.fsum(h.requested_energy for h in records)


def records_from_outcomes(outcomes, requests):
    """Household records built from these outcomes alone, without prior history."""
    by_id = {r.id: r for r in requests}
    records = {}
    for o in outcomes:
        r = by_id[o.request_id]
        records[r.household_id] = records.get(r.household_id, HouseholdRecord(r.household_id)).record(
            o.delivered, r.energy)
    return records


def build_report(outcomes, requests, households=None, target=const.GAMMA_TARGET):
    """Report for a set of outcomes; `households` defaults to the records these outcomes imply."""
    by_id = {r.id: r for r in requests}
    households = records_from_outcomes(outcomes, requests) if households is None else households
    per_request = {o.request_id: request_success(o, by_id[o.request_id]) for o in outcomes}
    per_household = {h.id: (h.gamma, h.weight) for h in households.values()}
    return ReliabilityReport(per_request, per_household, system_reliability(households.values()), target)


def _sample(model, rng):
    return model(rng) if callable(model) else model


def _sigmas(sigma_distribution, rng, n):
    if callable(sigma_distribution):
        return np.asarray(sigma_distribution(rng, n), dtype=float)
    values = np.atleast_1d(np.asarray(sigma_distribution, dtype=float))
    if values.size == 1:
        return np.full(n, values[0])
    return rng.choice(values, size=n)


def _simulate(config, supply, demand, sigma_distribution, rng, approach, params, offers, heuristic, bp_h_max):
    grid = demand[0].grid
    if supply.grid.start > grid.start or supply.grid.end < grid.end or supply.grid.resolution != grid.resolution:
        raise CoverageError(f"Supply model covers {supply.grid.start} to {supply.grid.end}, "
                            f"demand needs {grid.start} to {grid.end}")
    supply_kw = supply.restrict(grid).total

    essentials, blocks = characterize_all(demand, params)
    sigmas = _sigmas(sigma_distribution, rng, len(blocks))
    requests = []
    for b, s in zip(blocks, sigmas):
        requests.extend(blocks_to_requests([b], pd.Timedelta(hours=float(s)).round(config.resolution),
                                           bp_h_max, horizon_end=grid.end))

    engine = MarketEngine(config, grid, supply_kw, aggregate(essentials, grid), requests, approach=approach,
                          offers=offers, rng=rng, heuristic=heuristic)
    result = engine.run()
    if not result.requests:
        return const.INITIAL_GAMMA, result
    return system_reliability(records_from_outcomes(result.outcomes, result.requests).values()), result


def assess_target(config, supply_model, demand_model, sigma_distribution, rng, approach="fair_play",
                  params=CharacterizerParams(), offers=(), resimulate=False, heuristic=True,
                  bp_h_max=const.BP_H_MAX, sp_max_factor=2.0, sigma_step=3.0):
    """Simulates modelled supply and demand and compares the achieved reliability with config.gamma_target.

    Parameters
    ----------
    config : MarketConfig
    supply_model : SupplyProfile or callable
        Scaled supply, or a function of the generator returning one
    demand_model : list of ConsumptionSeries or callable
    sigma_distribution : float, sequence or callable
        Flexibility per request [h]: a constant, values sampled uniformly, or f(rng, n)
    rng : np.random.Generator
    resimulate : bool
        When the target is missed, re-run with sp_max x `sp_max_factor` and with sigma + `sigma_step` hours

    Returns
    -------
    ReliabilityReport
    """
    supply = _sample(supply_model, rng)
    demand = _sample(demand_model, rng)
    if not demand:
        raise InputError("Demand model produced no households")

    gamma, result = _simulate(config, supply, demand, sigma_distribution, rng, approach, params, offers,
                              heuristic, bp_h_max)
    if result.requests:
        report = build_report(result.outcomes, result.requests, target=config.gamma_target)
    else:
        report = ReliabilityReport({}, {}, gamma, config.gamma_target)
    logger.info("Gamma actual %.4f against target %.4f", report.system, report.target)

    if report.gap < 0:
        report.suggestions = list(SUGGESTIONS)
        if resimulate:
            raised = config.with_options(sp_max=config.sp_max * sp_max_factor)
            report.lever_results["sp_max"] = _simulate(raised, supply, demand, sigma_distribution, rng, approach,
                                                       params, offers, heuristic, bp_h_max)[0]
            if callable(sigma_distribution):
                def widened(g, n):
                    return np.asarray(sigma_distribution(g, n)) + sigma_step
            else:
                widened = np.atleast_1d(np.asarray(sigma_distribution, dtype=float)) + sigma_step
            report.lever_results["sigma"] = _simulate(config, supply, demand, widened, rng, approach, params,
                                                      offers, heuristic, bp_h_max)[0]
    return report
