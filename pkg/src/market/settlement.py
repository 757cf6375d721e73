import logging
import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

import src.common.constants as const

logger = logging.getLogger(__name__)


@dataclass
class Settlement:
    buyer_payments: np.ndarray = field(repr=False)  # GBP per period
    seller_receipts: Dict[str, np.ndarray] = field(repr=False)  # GBP per period per supplier
    energy_sold: Dict[str, float]  # kWh per supplier
    budget_gap: float  # buyers minus sellers [GBP]
    buyer_rational: bool
    seller_rational: bool

    @property
    def total_paid(self):
        return math.fsum(self.buyer_payments)

    @property
    def total_received(self):
        return math.fsum(math.fsum(v) for v in self.seller_receipts.values())

    @property
    def budget_balanced(self):
        return abs(self.budget_gap) < const.BUDGET_TOLERANCE


def seller_receipts(payments, suppliers):
    """Splits per-period buyer payments between suppliers pro rata to their share of total supply.

    Parameters
    ----------
    payments : np.ndarray
        Buyer payments per period [GBP]
    suppliers : dict
        Supplier name to power per period [kW]

    Returns
    -------
    dict
        Supplier name to receipts per period [GBP]
    """
    payments = np.asarray(payments, dtype=float)
    total = np.zeros_like(payments)
    for power in suppliers.values():
        total += power
    share_base = np.where(total > 0, total, 1.0)
    return {name: payments * np.where(total > 0, power / share_base, 0.0) for name, power in suppliers.items()}


def energy_sold(scheduled, suppliers, step_hours):
    total = np.zeros_like(scheduled, dtype=float)
    for power in suppliers.values():
        total += power
    share_base = np.where(total > 0, total, 1.0)
    return {name: float(np.sum(scheduled * np.where(total > 0, power / share_base, 0.0)) * step_hours)
            for name, power in suppliers.items()}


def buyers_rational(ledger, requests):
    """No served request pays above its budget."""
    budgets = {r.id: r.budget for r in requests}
    return all(e.cost <= budgets[e.request_id] + 1e-9 for e in ledger.entries if e.request_id in budgets)


def sellers_rational(receipts, sold, offers):
    """Every accepted offer earns at least its unit floor on the energy it sold."""
    ok = True
    for o in offers:
        if o.id not in receipts:
            continue
        earned = math.fsum(receipts[o.id])
        if earned + 1e-9 < o.unit_floor * sold[o.id]:
            logger.warning("Offer %s earned GBP %.4f for %.3f kWh, below its floor of %.4f GBP/kWh",
                           o.id, earned, sold[o.id], o.unit_floor)
            ok = False
    return ok


def settle(ledger, suppliers, requests=(), offers=()):
    """Clears money for every commitment in the ledger.

    Parameters
    ----------
    ledger : CommitmentLedger
    suppliers : dict
        Supplier name to horizon-wide power [kW]; accepted offers are keyed by offer id
    requests : iterable of Request
    offers : iterable of Offer
        Accepted offers
    """
    payments = ledger.payments()
    receipts = seller_receipts(payments, suppliers)
    sold = energy_sold(ledger.scheduled_power, suppliers, ledger.grid.step_hours)
    paid = math.fsum(payments)
    received = math.fsum(math.fsum(v) for v in receipts.values())
    gap = paid - received
    if abs(gap) >= const.BUDGET_TOLERANCE:
        logger.error("Budget imbalance of GBP %.4f (paid %.4f, received %.4f)", gap, paid, received)

    return Settlement(
        buyer_payments=payments,
        seller_receipts=receipts,
        energy_sold=sold,
        budget_gap=gap,
        buyer_rational=buyers_rational(ledger, requests),
        seller_rational=sellers_rational(receipts, sold, offers)
    )
