import numpy as np

import src.common.constants as const
from src.allocation.schedule import OBJECTIVES, schedule_objective
from src.allocation.utils import candidate_starts, fits, occupy
from src.common.exceptions import SizeError, InputError


def brute_force_oracle(requests, state, objective):
    """Optimal objective by enumerating every start assignment, "unserved" included.

    Only meant to check the exact solvers on small instances.
    """
    requests = sorted(requests, key=lambda r: r.id)
    if len(requests) > const.ORACLE_MAX_REQUESTS or len(state.grid) > const.ORACLE_MAX_PERIODS:
        raise SizeError(f"Oracle is limited to {const.ORACLE_MAX_REQUESTS} requests over "
                        f"{const.ORACLE_MAX_PERIODS} periods")

    res = state.config.resolution
    bp = state.bp.copy()
    options = [(r, candidate_starts(r, state, bp)[0], r.n_periods(res), r.power(res)) for r in requests]
    if objective not in OBJECTIVES:
        raise InputError(f"Unknown objective '{objective}', choose from {OBJECTIVES}")

    available = np.ascontiguousarray(state.available.copy())
    served = []
    best = [0.0]

    def enumerate_from(i):
        if i == len(options):
            best[0] = max(best[0], schedule_objective(served, objective))
            return
        r, starts, n, p = options[i]
        enumerate_from(i + 1)
        for s in starts:
            if fits(available, s, n, p):
                occupy(available, s, n, p, 1.0)
                served.append(r)
                enumerate_from(i + 1)
                served.pop()
                occupy(available, s, n, p, -1.0)

    enumerate_from(0)
    return best[0]
