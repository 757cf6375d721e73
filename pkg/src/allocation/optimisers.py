"""
Benchmark allocators that optimise a whole instance at once, at the prices published when it opens: one
maximises the energy delivered, the other the budgets of the requests it serves.

Both are exact (depth-first branch-and-bound over start assignments) up to a size threshold, beyond which a
greedy schedule improved by local search is returned and labelled as non-exact.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

import src.common.constants as const
from src.allocation.schedule import Slot, AllocationOutcome, ScheduleResult, request_value, schedule_objective
from src.allocation.utils import candidate_starts, fits, occupy
from src.common.exceptions import SizeError
from src.market.amm import commit_request

logger = logging.getLogger(__name__)

# Branches that cannot beat the incumbent by more than this are pruned
PRUNE_TOL = 1e-9


@dataclass
class _Item:
    request: object
    value: float
    n: int
    power: float
    energy: float
    starts: np.ndarray
    costs: np.ndarray


def _items(requests, state, objective, bp, rng=None):
    res = state.config.resolution
    requests = sorted(requests, key=lambda r: r.id)
    if rng is not None:
        requests = [requests[i] for i in rng.permutation(len(requests))]

    items = []
    for r in requests:
        starts, costs = candidate_starts(r, state, bp)
        order = np.lexsort((starts, costs))
        items.append(_Item(r, request_value(r, objective), r.n_periods(res), r.power(res),
                           r.energy, starts[order], costs[order]))
    # Stable, so equal values keep the (possibly shuffled) order above
    items.sort(key=lambda it: -it.value)
    return items


def _relaxation(items, i, capacity_energy):
    """Fractional bound on the value still reachable from items[i:] with `capacity_energy` kWh left."""
    rest = [it for it in items[i:] if len(it.starts)]
    plain = math.fsum(it.value for it in rest)
    rest.sort(key=lambda it: -it.value / it.energy)
    bound, room = 0.0, capacity_energy
    for it in rest:
        if room <= 0:
            break
        take = min(1.0, room / it.energy)
        bound += take * it.value
        room -= take * it.energy
    return min(plain, bound)


def _branch_and_bound(items, available, step_hours, incumbent=None, max_nodes=const.EXACT_MAX_NODES):
    """Depth-first search over start assignments.

    Returns
    -------
    assign : list of int
        Start period per item, -1 when unserved
    complete : bool
        False when the node budget ran out, in which case `assign` is the best schedule seen so far
    """
    assign = [-1] * len(items)
    best = dict(value=-math.inf, assign=list(assign))
    if incumbent is not None:
        best["value"] = math.fsum(it.value for it, s in zip(items, incumbent) if s >= 0)
        best["assign"] = list(incumbent)
    nodes = [0]

    def dfs(i):
        nodes[0] += 1
        if nodes[0] > max_nodes:
            return
        if i == len(items):
            value = math.fsum(it.value for it, s in zip(items, assign) if s >= 0)
            if value > best["value"]:
                best["value"], best["assign"] = value, list(assign)
            return

        current = math.fsum(it.value for it, s in zip(items[:i], assign[:i]) if s >= 0)
        bound = current + _relaxation(items, i, float(available.sum()) * step_hours)
        if bound <= best["value"] + PRUNE_TOL:
            return

        it = items[i]
        for s in it.starts:
            if fits(available, s, it.n, it.power):
                occupy(available, s, it.n, it.power, 1.0)
                assign[i] = int(s)
                dfs(i + 1)
                occupy(available, s, it.n, it.power, -1.0)
        assign[i] = -1
        dfs(i + 1)

    dfs(0)
    return best["assign"], nodes[0] <= max_nodes


def _insert(it, available):
    for s in it.starts:
        if fits(available, s, it.n, it.power):
            occupy(available, s, it.n, it.power, 1.0)
            return int(s)
    return -1


def _greedy_local_search(items, available, rounds=const.LOCAL_SEARCH_ROUNDS):
    assign = [_insert(it, available) for it in items]

    for _ in range(rounds):
        improved = False
        for u, item_u in enumerate(items):
            if assign[u] >= 0 or not len(item_u.starts):
                continue
            s = _insert(item_u, available)
            if s >= 0:
                assign[u], improved = s, True
                continue

            # Swap out a cheaper request, then try to relocate it elsewhere
            for v, item_v in enumerate(items):
                if assign[v] < 0 or item_v.value >= item_u.value:
                    continue
                old = assign[v]
                occupy(available, old, item_v.n, item_v.power, -1.0)
                s = _insert(item_u, available)
                if s < 0:
                    occupy(available, old, item_v.n, item_v.power, 1.0)
                    continue
                assign[u] = s
                assign[v] = _insert(item_v, available)
                improved = True
                break
        if not improved:
            break
    return assign


def _solve(requests, state, objective, heuristic=False, rng=None):
    requests = list(requests)
    too_big = len(requests) > const.EXACT_MAX_REQUESTS or len(state.grid) > const.EXACT_MAX_PERIODS
    if too_big and not heuristic:
        raise SizeError(f"{len(requests)} requests over {len(state.grid)} periods exceeds the exact solver limit of "
                        f"{const.EXACT_MAX_REQUESTS} x {const.EXACT_MAX_PERIODS}; allow the heuristic to proceed")

    bp = state.bp.copy()
    items = _items(requests, state, objective, bp, rng)
    available = np.ascontiguousarray(state.available.copy())
    if too_big:
        assign, exact = _greedy_local_search(items, available), False
    else:
        incumbent = _greedy_local_search(items, available.copy())
        assign, exact = _branch_and_bound(items, available, state.step_hours, incumbent)
        if not exact:
            logger.warning("Branch-and-bound stopped after %d nodes with %d requests; keeping its best schedule",
                           const.EXACT_MAX_NODES, len(items))

    outcomes = []
    for it, s in zip(items, assign):
        if s < 0:
            outcomes.append(AllocationOutcome.unserved(it.request))
            continue
        cost = state.slot_cost(it.request, s, bp)
        outcomes.append(AllocationOutcome.served_at(it.request, Slot(s, it.n, it.power, cost), state.grid))
    outcomes.sort(key=lambda o: o.request_id)

    served = [it.request for it, s in zip(items, assign) if s >= 0]
    result = ScheduleResult(outcomes, schedule_objective(served, objective), exact=exact)
    logger.debug("%s maximisation served %d of %d requests (objective %.4f, exact=%s)",
                 objective, len(served), len(requests), result.objective, result.exact)
    return result


def volume_max_solve(requests, state, heuristic=False, rng=None):
    """Schedule maximising delivered energy; the state is not modified."""
    return _solve(requests, state, "volume", heuristic, rng)


def revenue_max_solve(requests, state, heuristic=False, rng=None):
    """Schedule maximising the budgets of served requests; the state is not modified."""
    return _solve(requests, state, "revenue", heuristic, rng)


def apply_schedule(state, requests, result, bp=None):
    """Commits a solver's schedule to `state`, charging the prices it was optimised against."""
    bp = state.bp.copy() if bp is None else bp
    by_id = {r.id: r for r in requests}
    for o in result.outcomes:
        r = by_id[o.request_id]
        if o.served:
            commit_request(state, r, o.slot.start_period, payments=state.slot_payments(r, o.slot.start_period, bp))
        else:
            state.withdraw(r)
    return state
