import numpy as np
from numba import njit

from src.market.amm import POWER_TOL


@njit
def slot_table(available, bp, lo, hi, n, power, step_hours, start_price):
    """Cost and capacity feasibility of every start in [lo, hi] for a block of n periods at `power`.

    Returns
    -------
    costs : np.ndarray
    feasible : np.ndarray
        True where available power covers the block in every occupied period
    """
    size = max(hi - lo + 1, 0)
    costs = np.empty(size)
    feasible = np.zeros(size, dtype=np.bool_)
    energy = power * step_hours
    for k in range(size):
        s = lo + k
        ok = True
        total = 0.0
        for t in range(s, s + n):
            if available[t] + POWER_TOL < power:
                ok = False
            total += bp[t] * energy
        if start_price:
            total = bp[s] * energy * n
        costs[k] = total
        feasible[k] = ok
    return costs, feasible


@njit
def fits(available, start, n, power):
    for t in range(start, start + n):
        if available[t] + POWER_TOL < power:
            return False
    return True


@njit
def occupy(available, start, n, power, sign):
    for t in range(start, start + n):
        available[t] -= sign * power


def candidate_starts(request, state, bp=None, budget_tol=1e-12):
    """Starts of `request` that fit the current available supply and its budget at prices `bp`.

    Returns
    -------
    starts : np.ndarray
    costs : np.ndarray
        Cost of each start [GBP], same order
    """
    bp = state.bp if bp is None else bp
    res = state.config.resolution
    lo, hi = state.start_bounds(request)
    if hi < lo:
        return np.empty(0, dtype=np.int64), np.empty(0)
    costs, feasible = slot_table(np.ascontiguousarray(state.available), np.ascontiguousarray(bp), lo, hi,
                                 request.n_periods(res), request.power(res), state.step_hours,
                                 state.config.pricing_mode == "paper-literal")
    ok = feasible & (costs <= request.budget + budget_tol)
    return np.arange(lo, hi + 1)[ok], costs[ok]
