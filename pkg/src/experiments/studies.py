"""
Multi-run studies: the flexibility sweep, the two-group shortage experiment and the essential supply-mix report.
"""
import logging
import os

import numpy as np
import pandas as pd
from tqdm.auto import tqdm as tq

import src.common.constants as const
from src.common.exceptions import UndefinedPriceError
from src.common.series import aggregate, ConsumptionSeries
from src.experiments.runner import characterize_inputs, simulate, per_group, write_json
from src.experiments.scenario import load_inputs
from src.market.core import HouseholdRecord
from src.market.essential import (supply_mix_excess, affordability_cutoff, tariff_cost, flat_tariff,
                                  static_tou_tariff, essential_energy)

logger = logging.getLogger(__name__)


def _percentiles(values):
    if len(values) == 0:
        return dict(p25=np.nan, median=np.nan, p75=np.nan)
    p25, median, p75 = np.percentile(values, [25, 50, 75])
    return dict(p25=float(p25), median=float(median), p75=float(p75))


def sweep_flex(spec, sigmas=const.SIGMAS, out_dir=None, progress=False):
    """Unit cost of flexible energy at several flexibility levels, all other inputs fixed.

    Returns
    -------
    pd.DataFrame
        One row per sigma with the 25th, 50th and 75th percentile of per-request unit cost [GBP/kWh]
    """
    data_rng, _ = spec.generators()
    inputs = load_inputs(spec, data_rng)

    rows = []
    for sigma in tq(sigmas, desc="Flexibility sweep", disable=not progress):
        essentials, _, requests = characterize_inputs(inputs, spec, sigma=float(sigma))
        essential = aggregate(essentials, inputs.grid)
        result = simulate(spec, inputs, requests, essential, rng=spec.generators()[1])
        row = dict(sigma_h=float(sigma), **_percentiles(result.unit_costs()),
                   n_requests=len(result.requests), n_served=int(sum(o.served for o in result.outcomes)),
                   served_kwh=result.served_kwh, requested_kwh=result.requested_kwh,
                   invariants_ok=all(result.invariants().values()))
        logger.info("sigma=%sh: median unit cost %.4f GBP/kWh", sigma, row["median"])
        rows.append(row)

    table = pd.DataFrame(rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, "sweep_flex.csv"), index=False)
    return table


def shortage_setup(inputs, spec, groups=const.SHORTAGE_GROUPS):
    """Duplicates every request into one copy per group, each with its own willingness to pay and history.

    Returns
    -------
    essential : np.ndarray
    requests : list of Request
    households : dict
        Seeded HouseholdRecord per grouped household; the history weight equals the energy it requests
    """
    requests, households = [], {}
    essential = None
    for name, g in groups.items():
        essentials, _, group_requests = characterize_inputs(inputs, spec, bp_h_max=g["bp_h_max"],
                                                            id_suffix=f"-{name}")
        essential = aggregate(essentials, inputs.grid) if essential is None else essential
        weights = {}
        for r in group_requests:
            weights[r.household_id] = weights.get(r.household_id, 0.0) + r.energy
        households.update({h: HouseholdRecord.with_history(h, g["gamma"], w) for h, w in weights.items()})
        requests.extend(group_requests)
    return essential, requests, households


def shortage_experiment(spec, approaches=const.APPROACHES, seeds=None, out_dir=None, progress=False):
    """Share of requested energy each group receives under every approach.

    Always lets the benchmark solvers fall back to the heuristic: duplicating the requests takes the instance
    past the exact solver's threshold.

    Returns
    -------
    table : pd.DataFrame
        One row per (approach, seed)
    summary : dict
        Seed-averaged shares per approach, with the invariant checks of every run
    """
    seeds = [spec.seed] if seeds is None else list(seeds)
    rows, invariants = [], {}
    runs = [(a, s) for a in approaches for s in seeds]
    for approach, seed in tq(runs, desc="Shortage experiment", disable=not progress):
        seeded = spec.replace(seed=int(seed), approach=approach, heuristic=True)
        data_rng, market_rng = seeded.generators()
        inputs = load_inputs(seeded, data_rng)
        essential, requests, households = shortage_setup(inputs, seeded)
        result = simulate(seeded, inputs, requests, essential, households=households, rng=market_rng)

        groups = per_group(result)
        row = dict(approach=approach, seed=int(seed),
                   overall=result.served_kwh / result.requested_kwh if result.requested_kwh else np.nan,
                   exact=result.exact)
        for name in const.SHORTAGE_GROUPS:
            share = groups.get(name, {}).get("share")
            row[name] = np.nan if share is None else share
        rows.append(row)
        checks = result.invariants()
        invariants[approach] = {k: invariants.get(approach, {}).get(k, True) and v for k, v in checks.items()}

    table = pd.DataFrame(rows)
    means = table.groupby("approach")[["overall", *const.SHORTAGE_GROUPS]].mean()
    summary = dict(
        seeds=[int(s) for s in seeds],
        per_group={a: {k: float(v) for k, v in means.loc[a].items()} for a in means.index},
        invariants={k: all(inv[k] for inv in invariants.values()) for k in next(iter(invariants.values()))},
        invariants_by_approach=invariants,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, "shortage.csv"), index=False)
        write_json(os.path.join(out_dir, "summary.json"), summary)
    return table, summary


def supply_mix_report(spec, mixes=const.SUPPLY_MIXES, out_dir=None):
    """Excess uncontrollable energy and the controllable supplier cut-off price for every supply mix.

    The cut-off is the unit price at which paying controllable suppliers for the rest of essential energy costs
    the same as each comparator tariff: flat, static time-of-use and, when available, the dynamic tariff.
    """
    data_rng, _ = spec.generators()
    inputs = load_inputs(spec, data_rng)
    essentials, _, _ = characterize_inputs(inputs, spec)
    demand = aggregate(essentials, inputs.grid)
    series = ConsumptionSeries("essential", inputs.grid, demand)
    energy = essential_energy(demand, inputs.grid.resolution)

    comparators = dict(flat=flat_tariff(inputs.grid), static_tou=static_tou_tariff(inputs.grid))
    if inputs.tariff is not None:
        comparators["dynamic_tou"] = inputs.tariff
    costs = {name: tariff_cost(series, t) for name, t in comparators.items()}

    rows = []
    for mix in mixes:
        excess = supply_mix_excess(inputs.supply.total, demand, mix, inputs.grid.resolution)
        row = dict(mix=float(mix), controllable_share=1.0 - float(mix), excess_kwh=excess,
                   excess_ratio=excess / energy if energy > 0 else np.nan)
        for name, cost in costs.items():
            try:
                row[f"cutoff_{name}"] = affordability_cutoff(cost, energy, 1.0 - float(mix))
            except UndefinedPriceError:
                row[f"cutoff_{name}"] = np.nan
        rows.append(row)

    table = pd.DataFrame(rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, "supply_mix.csv"), index=False)
        write_json(os.path.join(out_dir, "comparators.json"),
                   dict(essential_kwh=energy, **{f"{k}_cost_gbp": v for k, v in costs.items()}))
    logger.info("Essential energy %.2f kWh; comparator costs %s", energy,
                ", ".join(f"{k}=GBP {v:.2f}" for k, v in costs.items()))
    return table
