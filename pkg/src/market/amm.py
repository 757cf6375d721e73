"""
Automatic Market Maker. Prices follow instantaneous scarcity: alpha compares the supply still available to
flexible appliances with the flexible demand predicted from open requests, and the buy and sell prices are
decreasing functions of alpha.
"""
import copy
import logging
from dataclasses import dataclass

import numpy as np

import src.common.constants as const
from src.common.exceptions import CapacityError, InvariantViolation, InputError
from src.market.core import CommitmentLedger, LedgerEntry

logger = logging.getLogger(__name__)

# Absolute slack for kW comparisons
POWER_TOL = 1e-9


@dataclass(frozen=True)
class DemandForecast:
    c_fa: np.ndarray


def average_power(request, resolution=const.M_RES):
    return request.average_power(resolution)


def _interval_indices(request, grid):
    lo = grid.index_of(request.earliest, clip=True)
    hi = grid.index_of(request.latest, clip=True)
    return lo, hi


def predict_flexible_consumption(open_requests, grid):
    """C^fa_t, the sum of average powers of the requests whose valid interval covers period t."""
    c_fa = np.zeros(len(grid))
    for r in open_requests:
        lo, hi = _interval_indices(r, grid)
        c_fa[lo:hi] += r.average_power(grid.resolution)
    return DemandForecast(c_fa)


def alpha(available, c_fa):
    """Scarcity ratio, 1 when available supply covers predicted demand (and when there is no demand)."""
    available = np.maximum(np.asarray(available, dtype=float), 0.0)
    c_fa = np.asarray(c_fa, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(c_fa > 0, available / np.where(c_fa > 0, c_fa, 1.0), 1.0)
    out = np.clip(np.where(available >= c_fa, 1.0, ratio), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _curve(a, top, curve):
    a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
    if curve == "linear":
        out = top * (1 - a)
    elif curve == "quadratic":
        out = top * (1 - a) ** 2
    else:
        raise InputError(f"Unknown pricing curve '{curve}'")
    return float(out) if out.ndim == 0 else out


def buy_price(a, config):
    return _curve(a, config.bp_max, config.curve)


def sell_price(a, config):
    return _curve(a, config.sp_max, config.curve)


class MarketState:
    """One live market instance.

    Supply, essential demand and scheduled power are views into horizon-wide arrays, so commitments made in one
    instance are seen by every later instance that overlaps it. Prices are refreshed lazily, only for periods
    whose inputs changed since the last read.

    Parameters
    ----------
    config : MarketConfig
    grid : TimeGrid
        Instance window
    total : np.ndarray
        Horizon-wide S^T [kW]
    essential : np.ndarray
        Horizon-wide C^B [kW]
    ledger : CommitmentLedger
        Horizon-wide ledger, its grid must contain `grid`
    requests : iterable of Request
        Open requests that make up the flexible demand forecast
    """

    def __init__(self, config, grid, total, essential, ledger, requests=()):
        if grid.resolution != config.resolution:
            raise InputError("Instance grid and market config disagree on resolution")
        self.config = config
        self.grid = grid
        self.ledger = ledger
        self.offset = grid.offset_in(ledger.grid)
        sl = slice(self.offset, self.offset + len(grid))
        if sl.stop > len(ledger.grid):
            raise InputError("Instance window runs past the ledger horizon")

        self._horizon_total = total
        self._horizon_essential = essential
        self._total = total[sl]
        self._essential = essential[sl]
        self._scheduled = ledger.scheduled_power[sl]

        self.open = {r.id: r for r in requests}
        self._c_fa = predict_flexible_consumption(self.open.values(), grid).c_fa
        self._alpha = np.ones(len(grid))
        self._bp = np.zeros(len(grid))
        self._sp = np.zeros(len(grid))
        self._dirty = np.ones(len(grid), dtype=bool)

    @classmethod
    def from_arrays(cls, config, grid, total, essential, requests=()):
        """Standalone state whose horizon is its own window."""
        ledger = CommitmentLedger(grid)
        return cls(config, grid, np.array(total, dtype=float), np.array(essential, dtype=float), ledger, requests)

    def __len__(self):
        return len(self.grid)

    @property
    def step_hours(self):
        return self.config.step_hours

    @property
    def total(self):
        return self._total

    @property
    def essential(self):
        return self._essential

    @property
    def scheduled(self):
        return self._scheduled

    @property
    def flexible_supply(self):
        return self._total - self._essential

    @property
    def capacity(self):
        """Power flexible appliances may draw in total, S^fa floored at zero."""
        return np.maximum(self.flexible_supply, 0.0)

    @property
    def available(self):
        return np.maximum(self.capacity - self._scheduled, 0.0)

    @property
    def c_fa(self):
        return self._c_fa

    def refresh(self):
        if self._dirty.any():
            idx = np.flatnonzero(self._dirty)
            a = alpha(self.available[idx], self._c_fa[idx])
            self._alpha[idx] = a
            self._bp[idx] = buy_price(a, self.config)
            self._sp[idx] = sell_price(a, self.config)
            self._dirty[:] = False

    @property
    def alpha(self):
        self.refresh()
        return self._alpha

    @property
    def bp(self):
        self.refresh()
        return self._bp

    @property
    def sp(self):
        self.refresh()
        return self._sp

    def start_bounds(self, request):
        """Inclusive range of start periods that keep the block inside both the window and [E^r, L^r]."""
        n = request.n_periods(self.config.resolution)
        lo = self.grid.index_of(request.earliest, clip=True)
        hi = self.grid.index_of(request.latest, clip=True) - n
        return lo, hi

    def slot_payments(self, request, start, bp=None):
        """Payment per occupied period for a block starting at `start`.

        per-period mode charges BP_t in every occupied period; paper-literal mode charges the start period's BP
        for the whole block.
        """
        bp = self.bp if bp is None else bp
        n = request.n_periods(self.config.resolution)
        energy_per_period = request.power(self.config.resolution) * self.step_hours
        if self.config.pricing_mode == "paper-literal":
            return np.full(n, bp[start] * energy_per_period)
        return bp[start:start + n] * energy_per_period

    def slot_cost(self, request, start, bp=None):
        return float(np.sum(self.slot_payments(request, start, bp)))

    def fits(self, request, start):
        n = request.n_periods(self.config.resolution)
        lo, hi = self.start_bounds(request)
        if not lo <= start <= hi:
            return False
        p = request.power(self.config.resolution)
        return bool(np.all(self.available[start:start + n] + POWER_TOL >= p))

    def withdraw(self, request):
        """Drops an open request from the forecast without serving it."""
        if request.id not in self.open:
            return
        del self.open[request.id]
        lo, hi = _interval_indices(request, self.grid)
        self._c_fa[lo:hi] -= request.average_power(self.config.resolution)
        np.maximum(self._c_fa[lo:hi], 0.0, out=self._c_fa[lo:hi])
        self._dirty[lo:hi] = True

    def add_supply(self, profile):
        """Adds power [kW per instance period] to S^T, as when a controllable offer is accepted."""
        profile = np.asarray(profile, dtype=float)
        if profile.shape != self._total.shape:
            raise InputError("Supply profile does not match the instance grid")
        self._total += profile
        self._dirty |= profile != 0

    def recomputed_forecast(self):
        """C^fa rebuilt from the open requests, for checking the incremental updates."""
        return predict_flexible_consumption(self.open.values(), self.grid).c_fa

    def snapshot(self):
        """Independent copy, for read-only reporting or what-if evaluation."""
        twin = MarketState(self.config, self.grid, self._horizon_total.copy(), self._horizon_essential.copy(),
                           copy.deepcopy(self.ledger), self.open.values())
        twin._c_fa[:] = self._c_fa
        return twin


def commit_request(state, request, start_period, payments=None):
    """Schedules `request` as one block from `start_period` and updates the state in place.

    Returns the same state. `payments` overrides the per-period charge, which benchmark solvers use to settle at
    the prices they optimised against.
    """
    res = state.config.resolution
    n = request.n_periods(res)
    p = request.power(res)

    if not state.fits(request, start_period):
        raise CapacityError(f"Request {request.id} does not fit at period {start_period} of {state.grid.start}")

    payments = state.slot_payments(request, start_period) if payments is None else np.asarray(payments, float)
    cost = float(np.sum(payments))
    if cost > request.budget + 1e-9:
        raise InvariantViolation(f"Request {request.id} would pay {cost:.4f} above its budget {request.budget:.4f}")

    state.ledger.append(LedgerEntry(request.id, state.offset + start_period, n, p, cost, payments))
    state._dirty[start_period:start_period + n] = True
    state.withdraw(request)
    logger.debug("Committed %s at %s (%d periods, %.3f kW, GBP %.4f)",
                 request.id, state.grid.timestamp(start_period), n, p, cost)
    return state
