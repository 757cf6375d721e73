import json
import logging
import math
import os

import numpy as np
import pandas as pd

import src.common.constants as const
from src.common.exceptions import UndefinedPriceError
from src.common.loaders import write_consumption_csv, DATE_FORMAT
from src.common.series import aggregate
from src.consumption.characterizer import characterize_all, blocks_to_requests
from src.experiments.scenario import load_inputs
from src.market.engine import MarketEngine
from src.market.essential import controllable_cost, essential_unit_cost
from src.market.reliability import build_report

logger = logging.getLogger(__name__)

RUN_FILES = dict(outcomes="outcomes.csv", prices="prices.csv", ledger="ledger.csv", summary="summary.json")


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (pd.Timestamp, pd.Timedelta)):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def group_of(household_id):
    """Experiment group encoded as a `-<group>` suffix of the household id, else None."""
    _, _, suffix = household_id.rpartition("-")
    return suffix if suffix in const.SHORTAGE_GROUPS else None


def per_group(result):
    by_id = result.request_map
    groups = {}
    for o in result.outcomes:
        g = group_of(by_id[o.request_id].household_id)
        if g is None:
            continue
        served, requested = groups.get(g, (0.0, 0.0))
        groups[g] = (served + o.delivered, requested + by_id[o.request_id].energy)
    return {g: dict(served_kwh=s, requested_kwh=q, share=s / q if q > 0 else None)
            for g, (s, q) in sorted(groups.items())}


def characterize_inputs(inputs, spec, sigma=None, bp_h_max=None, id_suffix=""):
    """Essential series, flexible blocks and requests of every household."""
    essentials, blocks = characterize_all(inputs.series, spec.characterizer)
    sigma = spec.sigma if sigma is None else sigma
    bp_h_max = spec.bp_h_max if bp_h_max is None else bp_h_max
    requests = blocks_to_requests(blocks, pd.Timedelta(hours=sigma).round(spec.market.resolution), bp_h_max,
                                  horizon_end=inputs.grid.end, id_suffix=id_suffix)
    return essentials, blocks, requests


def simulate(spec, inputs, requests, essential, households=None, approach=None, rng=None, heuristic=None,
             progress=False):
    engine = MarketEngine(
        spec.market, inputs.grid, inputs.supply.total, essential, requests,
        approach=approach or spec.approach,
        households=households,
        offers=spec.offers,
        policy=spec.policy,
        rng=rng if rng is not None else spec.generators()[1],
        heuristic=spec.heuristic if heuristic is None else heuristic
    )
    return engine.run(progress=progress)


def summarize(result, essential, inputs, spec):
    """Headline numbers of a run, as written to summary.json."""
    target = spec.market.gamma_target
    gamma = None
    if result.requests:
        gamma = build_report(result.outcomes, result.requests, target=target).system

    u_total = controllable_cost(result.prices["supply_kw"].to_numpy(), essential, inputs.grid, spec.market.c_ctrl)
    try:
        bp_ess = essential_unit_cost(u_total, essential, inputs.grid)
    except UndefinedPriceError:
        bp_ess = None

    unit = result.unit_costs()
    summary = dict(
        approach=result.approach,
        seed=int(spec.seed),
        gamma_actual=gamma,
        gamma_target=target,
        gap=None if gamma is None else gamma - target,
        total_cost_gbp=result.total_cost,
        served_kwh=result.served_kwh,
        requested_kwh=result.requested_kwh,
        n_requests=len(result.requests),
        n_served=int(sum(o.served for o in result.outcomes)),
        exact=bool(result.exact),
        unit_cost_median_gbp_per_kwh=_finite(float(np.median(unit))) if len(unit) else None,
        essential_kwh=float(np.sum(essential) * inputs.grid.step_hours),
        controllable_cost_gbp=u_total,
        essential_unit_cost_gbp_per_kwh=bp_ess,
        accepted_offers=[o.id for o in result.accepted_offers],
        invariants=result.invariants(),
    )
    groups = per_group(result)
    if groups:
        summary["per_group"] = groups
    return summary


def write_run(result, summary, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, v) for k, v in RUN_FILES.items()}
    result.outcomes_frame().to_csv(paths["outcomes"], index=False, date_format=DATE_FORMAT)
    result.prices.to_csv(paths["prices"], date_format=DATE_FORMAT)
    result.ledger.to_frame().to_csv(paths["ledger"], index=False, date_format=DATE_FORMAT)
    write_json(paths["summary"], summary)
    return paths


def run(spec, out_dir=None, progress=False):
    """Full pipeline for one scenario: ingest, characterise, clear every instance, report.

    Returns
    -------
    summary : dict
    result : SimulationResult
    """
    data_rng, market_rng = spec.generators()
    inputs = load_inputs(spec, data_rng)
    essentials, _, requests = characterize_inputs(inputs, spec)
    essential = aggregate(essentials, inputs.grid)

    result = simulate(spec, inputs, requests, essential, rng=market_rng, progress=progress)
    summary = summarize(result, essential, inputs, spec)
    logger.info("%s: served %.2f of %.2f kWh, cost GBP %.2f", spec.approach, summary["served_kwh"],
                summary["requested_kwh"], summary["total_cost_gbp"])
    if out_dir is not None:
        write_run(result, summary, out_dir)
    return summary, result


def write_characterization(inputs, spec, out_dir):
    """essential.csv, blocks.csv and requests.csv for every household of the scenario."""
    essentials, blocks, requests = characterize_inputs(inputs, spec)
    os.makedirs(out_dir, exist_ok=True)
    write_consumption_csv(essentials, os.path.join(out_dir, "essential.csv"))

    pd.DataFrame(dict(
        household_id=[b.household_id for b in blocks],
        start=[b.start for b in blocks],
        duration_min=[b.duration / pd.Timedelta("1min") for b in blocks],
        mean_power_kw=[b.mean_power for b in blocks],
        energy_kwh=[b.energy for b in blocks],
    )).to_csv(os.path.join(out_dir, "blocks.csv"), index=False, date_format=DATE_FORMAT)

    pd.DataFrame(dict(
        id=[r.id for r in requests],
        household_id=[r.household_id for r in requests],
        earliest=[r.earliest for r in requests],
        latest=[r.latest for r in requests],
        energy_kwh=[r.energy for r in requests],
        p_min_kw=[r.p_min for r in requests],
        p_max_kw=[r.p_max for r in requests],
        budget_gbp=[r.budget for r in requests],
    )).to_csv(os.path.join(out_dir, "requests.csv"), index=False, date_format=DATE_FORMAT)

    essential_kwh = sum(e.energy for e in essentials)
    flexible_kwh = sum(b.energy for b in blocks)
    return dict(households=len(essentials), blocks=len(blocks), essential_kwh=essential_kwh,
                flexible_kwh=flexible_kwh)
