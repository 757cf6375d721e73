"""
Synthetic scenario data. Households draw a constant baseload plus appliance runs arriving as a Poisson process
with evening and morning peaks; each day of supply follows one of three archetypes sized against the cohort's
own demand.
"""
import logging
import os
from dataclasses import dataclass, field, asdict
from typing import Tuple

import numpy as np
import pandas as pd
from tqdm.auto import tqdm as tq

import src.common.constants as const
from src.common.exceptions import InputError
from src.common.grid import TimeGrid, to_utc, n_steps
from src.common.loaders import (write_consumption_csv, write_supply_csv, write_tariff_csv, load_consumption_csv,
                                load_supply_csv, load_tariff_csv, SUPPLY_RESOLUTION)
from src.common.series import ConsumptionSeries, SupplyProfile, aggregate

logger = logging.getLogger(__name__)

DATASET_FILES = dict(consumption="consumption.csv", supply="supply.csv", tariff="tariff.csv")


@dataclass(frozen=True)
class SynthSpec:
    n_households: int = const.N_HOUSEHOLDS
    start: str = const.SYNTH_KWARGS["start"]
    days: int = 1
    cases: Tuple[str, ...] = ("variable",)
    baseload_range: Tuple[float, float] = const.BASELOAD_RANGE
    appliance_power_range: Tuple[float, float] = const.APPLIANCE_POWER_RANGE
    appliance_duration_range: Tuple[int, int] = const.APPLIANCE_DURATION_RANGE
    appliance_rate: float = const.APPLIANCE_RATE
    upsilon: float = const.UPSILON
    resolution: pd.Timedelta = field(default=const.M_RES)

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases) if not isinstance(self.cases, str) else (self.cases,))
        object.__setattr__(self, "resolution", pd.Timedelta(self.resolution))
        if self.n_households < 1 or self.days < 1:
            raise InputError("A synthetic scenario needs at least one household and one day")
        unknown = set(self.cases) - set(const.SYNTH_CASES)
        if not self.cases or unknown:
            raise InputError(f"Unknown supply cases {sorted(unknown)}, choose from {const.SYNTH_CASES}")
        if self.upsilon <= 0 or self.appliance_rate < 0:
            raise InputError("upsilon must be positive and appliance_rate non-negative")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def to_dict(self):
        d = asdict(self)
        d["resolution"] = str(self.resolution)
        return d

    @property
    def grid(self):
        start = to_utc(self.start).floor("D")
        return TimeGrid(start, start + pd.Timedelta(days=self.days), self.resolution)

    def case_of_day(self, day):
        return self.cases[day % len(self.cases)]


def _arrival_weights(hour):
    return 0.3 + 1.5 * np.exp(-(hour - 19.0) ** 2 / 4.0) + 0.8 * np.exp(-(hour - 8.0) ** 2 / 2.0)


def _household(spec, grid, rng):
    n = len(grid)
    per_day = n_steps(pd.Timedelta(days=1), grid.resolution)
    step_min = grid.resolution / pd.Timedelta("1min")

    power = np.full(n, rng.uniform(*spec.baseload_range))
    hour = (np.arange(per_day) * step_min / 60.0)
    weights = _arrival_weights(hour)
    weights /= weights.sum()

    for day in range(spec.days):
        for _ in range(rng.poisson(spec.appliance_rate)):
            start = day * per_day + int(rng.choice(per_day, p=weights))
            level = np.round(rng.uniform(*spec.appliance_power_range) * 4) / 4
            minutes = rng.uniform(*spec.appliance_duration_range)
            length = max(1, int(round(minutes / step_min)))
            power[start:min(start + length, n)] += level
    return power


def _supply_day(case, base, flexible, peak, n, rng):
    """Half-hourly archetype [kW], with its components keyed by fuel type.

    `base` is the cohort's baseload and `flexible` its mean appliance load for the day. Only `high_flat` covers
    every appliance; `variable` leaves appliances short of supply away from its wind and solar peaks and
    `low_flat` everywhere.
    """
    hour = np.arange(n) * 24.0 / n
    zero = np.zeros(n)

    if case == "high_flat":
        return dict(nuclear=np.full(n, 3.0 * peak), wind=zero, solar=zero)
    if case == "low_flat":
        return dict(nuclear=np.full(n, base + 0.4 * flexible), wind=zero, solar=zero)

    period = rng.uniform(8.0, 16.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    solar = 0.5 * flexible * np.clip(np.sin(np.pi * (hour - 6.0) / 12.0), 0.0, None)
    wind = 0.2 * flexible * (1.0 + np.sin(2 * np.pi * hour / period + phase))
    return dict(nuclear=np.full(n, base + 0.1 * flexible), wind=wind, solar=solar)


def synth_generate(spec, rng):
    """Synthetic households and national-scale supply for `spec`.

    Returns
    -------
    series : list of ConsumptionSeries
    supply : SupplyProfile
        Already multiplied by spec.upsilon, so scale_supply recovers the cohort scale
    """
    grid = spec.grid
    series = [ConsumptionSeries(f"h{i:03d}", grid, _household(spec, grid, rng))
              for i in range(spec.n_households)]
    demand = aggregate(series, grid)
    baseload = float(sum(s.power.min() for s in series))

    factor = n_steps(SUPPLY_RESOLUTION, grid.resolution)
    half_hourly = demand.reshape(-1, factor).mean(axis=1)
    per_day = len(half_hourly) // spec.days
    peaks = demand.reshape(spec.days, -1).max(axis=1)

    fuels = dict(nuclear=[], wind=[], solar=[])
    for day in range(spec.days):
        chunk = half_hourly[day * per_day:(day + 1) * per_day]
        flexible = max(float(chunk.mean()) - baseload, 0.0)
        for fuel, values in _supply_day(spec.case_of_day(day), baseload, flexible, peaks[day], per_day, rng).items():
            fuels[fuel].append(values)

    mix = {fuel: np.repeat(np.concatenate(parts), factor) * spec.upsilon for fuel, parts in fuels.items()}
    total = np.sum(list(mix.values()), axis=0)
    label = spec.cases[0] if len(set(spec.cases)) == 1 else None
    return series, SupplyProfile(grid, total, mix, label)


def synth_tariff(series, supply, upsilon, low=0.05, spread=0.30):
    """Half-hourly dynamic price driven by cohort demand over scaled supply [GBP/kWh]."""
    grid = supply.grid
    factor = n_steps(SUPPLY_RESOLUTION, grid.resolution)
    demand = aggregate(series, grid).reshape(-1, factor).mean(axis=1)
    supplied = (supply.total / upsilon).reshape(-1, factor).mean(axis=1)
    ratio = np.where(supplied > 0, demand / np.where(supplied > 0, supplied, 1.0), 2.0)
    prices = np.round(low + spread * np.minimum(ratio, 2.0) / 2.0, 4)
    index = pd.date_range(grid.start, periods=len(prices), freq=SUPPLY_RESOLUTION)
    return pd.Series(prices, index=index, name="price_gbp_per_kwh")


def make_dataset(output_dir, spec=None, seed=0, overwrite=False):
    """Writes consumption.csv, supply.csv and tariff.csv for a synthetic scenario into `output_dir`."""
    spec = spec or SynthSpec()
    paths = {k: os.path.join(output_dir, v) for k, v in DATASET_FILES.items()}
    if not overwrite and any(os.path.exists(p) for p in paths.values()):
        raise InputError(f"Dataset in `{output_dir}` already exists!")
    os.makedirs(output_dir, exist_ok=True)

    logger.info("Creating synthetic dataset @ %d households x %d days, cases %s",
                spec.n_households, spec.days, ", ".join(spec.cases))
    rng = np.random.default_rng(seed)
    series, supply = synth_generate(spec, rng)

    steps = [
        ("consumption", lambda p: write_consumption_csv(series, p)),
        ("supply", lambda p: write_supply_csv(supply, p)),
        ("tariff", lambda p: write_tariff_csv(synth_tariff(series, supply, spec.upsilon), p)),
    ]
    for name, write in tq(steps, desc="Writing dataset"):
        write(paths[name])
    return paths


def inspect_dataset(output_dir):
    """Loads a dataset directory and logs a short summary of it."""
    paths = {k: os.path.join(output_dir, v) for k, v in DATASET_FILES.items()}
    series = load_consumption_csv(paths["consumption"])
    supply = load_supply_csv(paths["supply"])
    header = dict(
        households=len(series),
        periods=len(series[0].grid) if series else 0,
        consumption_kwh=float(sum(s.energy for s in series)),
        supply_mwh_national=supply.energy / 1000.0,
        fuels=sorted(supply.source_mix or []),
    )
    if os.path.exists(paths["tariff"]):
        prices = load_tariff_csv(paths["tariff"])
        header["tariff_mean_gbp_per_kwh"] = float(prices.mean())

    for k, v in header.items():
        logger.info("%s: %s", k, v)
    return header
