"""
Essential energy is served outside the flexible market. Its cost is the payment to controllable suppliers that
fill the shortfall of uncontrollable supply, spread over every essential kWh.
"""
import math

import numpy as np
import pandas as pd
from scipy.optimize import brentq

import src.common.constants as const
from src.common.exceptions import UndefinedPriceError, CoverageError, InputError
from src.common.grid import hours


def essential_energy(essential_demand, resolution=const.M_RES):
    return float(np.sum(essential_demand) * hours(resolution))


def essential_unit_cost(u_total, essential_demand, grid):
    """BP^Ess = U / essential energy [GBP/kWh]."""
    energy = essential_energy(essential_demand, grid.resolution)
    if energy <= 0:
        raise UndefinedPriceError("Essential unit cost is undefined without essential consumption")
    return u_total / energy


def controllable_cost(total_supply, essential_demand, grid, c_ctrl=const.C_CTRL):
    """U, the payment for controllable energy covering every essential shortfall [GBP]."""
    shortfall = np.maximum(np.asarray(essential_demand) - np.asarray(total_supply), 0.0)
    return float(shortfall.sum() * grid.step_hours * c_ctrl)


def _served(k, profile, demand):
    return float(np.minimum(k * profile, demand).sum())


def supply_mix_excess(uncontrollable_profile, essential_demand, mix, resolution=const.M_RES):
    """Excess uncontrollable energy [kWh] when the profile is scaled to cover `mix` of essential energy.

    Periods where the scaled profile falls short are topped up by controllable supply, which produces no excess.
    Returns inf when the profile can never reach the requested share (e.g. it is zero while demand is not).
    """
    if not 0 <= mix <= 1:
        raise InputError(f"Supply mix must lie in [0, 1], got {mix}")
    profile = np.asarray(uncontrollable_profile, dtype=float)
    demand = np.asarray(essential_demand, dtype=float)
    if profile.shape != demand.shape:
        raise InputError("Supply profile and essential demand must share a grid")

    step = hours(resolution)
    target = mix * demand.sum()
    if target <= 0:
        return 0.0

    needed = demand > 0
    reachable = float(demand[profile > 0].sum())
    if reachable < target * (1 - 1e-12):
        return math.inf

    positive = profile > 0
    k_full = float(np.max(demand[needed & positive] / profile[needed & positive]))
    if mix >= 1:
        k = k_full
    else:
        k = brentq(lambda x: _served(x, profile, demand) - target, 0.0, k_full, xtol=1e-12, rtol=1e-12)
    return float(np.maximum(k * profile - demand, 0.0).sum() * step)


def affordability_cutoff(comparator_cost, essential_energy_kwh, controllable_share):
    """Break-even unit price for controllable suppliers, uncontrollable energy being free [GBP/kWh]."""
    if not 0 < controllable_share <= 1:
        raise UndefinedPriceError(f"Controllable share must lie in (0, 1], got {controllable_share}")
    if essential_energy_kwh <= 0:
        raise UndefinedPriceError("Cut-off price is undefined without essential consumption")
    return comparator_cost / (controllable_share * essential_energy_kwh)


def _tariff_values(tariff, grid):
    if isinstance(tariff, pd.Series):
        values = tariff.reindex(grid.periods).to_numpy(dtype=float)
    else:
        values = np.asarray(tariff, dtype=float)
        if values.shape != (len(grid),):
            raise CoverageError(f"Tariff has {len(values)} prices for {len(grid)} periods")
    if np.isnan(values).any():
        missing = grid.periods[np.isnan(values)]
        raise CoverageError(f"Tariff has no price for {len(missing)} periods, first {missing[0]}")
    return values


def tariff_cost(essential, tariff):
    """Cost [GBP] of an essential ConsumptionSeries under a per-period tariff (pd.Series or array)."""
    prices = _tariff_values(tariff, essential.grid)
    return float(np.sum(essential.power * essential.grid.step_hours * prices))


def flat_tariff(grid, rate=const.FLAT_TARIFF):
    return pd.Series(rate, index=grid.periods, name="price_gbp_per_kwh")


def static_tou_tariff(grid, low=const.STATIC_TOU_LOW, high=const.STATIC_TOU_HIGH, peaks=const.STATIC_TOU_PEAKS):
    """Two-band time-of-use tariff, high during the `peaks` hour ranges (UTC clock hours, end exclusive)."""
    hour = grid.periods.hour
    peak = np.zeros(len(grid), dtype=bool)
    for h0, h1 in peaks:
        peak |= (hour >= h0) & (hour < h1)
    return pd.Series(np.where(peak, high, low), index=grid.periods, name="price_gbp_per_kwh")
