"""Live mutation of an open market: grow the structure without repricing it.

Three addition modes, each addressing the four dynamic-structure concerns
(charge a fee, keep prior prices, keep liquidation values, give the new
proposition a sensible initial price):

* ``add_atomic_live`` doubles the outcome space, copying each outcome's
  share balance to both descendants.  Prior prices and liquidation values
  are exactly preserved, the new proposition starts at price 1/2, and the
  payer is charged the flat fee b*log 2, which equals the cost-function
  jump of the doubling.

* ``add_edge_negative_init`` adds a paired proposition "switched off" by
  initializing its share balance at -K*b.  Prior prices move only O(e^-K),
  but the negative balance enlarges the maker's worst-case loss; the payer
  is charged exactly that enlargement so the solvency bound survives.

* ``add_edge_golden_ratio`` adds a NAND edge on a tree and bumps the edge
  and both endpoints by log(phi) shares each.  On balanced tree states
  this lands the new edge at price 1/2 with prior prices untouched.  The
  payer is charged the flat b*log 2 proposition fee plus the measured
  cost-function impact of the increments (about 1.92*b in total on a
  balanced tree).  The method is numerically observed, not proven, so the
  receipt always records the measured new-edge price and prior-price
  drift.

Mutations are atomic: every precondition is checked against staged state
and the market is only touched on success.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .engine import PHI_INCREMENT, MarketState, Security
from .errors import (
    InsufficientCash,
    InvalidEdge,
    NotATree,
    OutcomeSpaceTooLarge,
    StructureError,
)
from .structure import CarrollStructure, OutcomeSpace, Relation


@dataclass
class MutationReceipt:
    kind: str  # "add-atomic" | "add-edge-negative-init" | "add-edge-golden-ratio"
    new_id: str
    fee_charged: float
    payer: str
    prices_before: Dict[str, float]
    prices_after: Dict[str, float]
    worst_case_loss_delta: float
    new_price: float
    max_prior_price_drift: float

    def __post_init__(self):
        if self.fee_charged < 0:
            raise InvalidEdge("mutation produced a negative fee")


def _quoted_securities(market: MarketState) -> List[Security]:
    """Every single-literal security plus everything held in any ledger."""
    seen: Dict[Security, None] = {}
    for pid in market.structure.ids:
        seen.setdefault(Security.yes(pid), None)
    for account in market.accounts.values():
        for security in account.holdings:
            seen.setdefault(security, None)
    return list(seen)

def _price_map(market: MarketState, securities: List[Security]) -> Dict[str, float]:
    return {str(s): market.price(s) for s in securities}


def _doubled_space(outcomes: OutcomeSpace, new_id: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Append new_id as the least-significant proposition: rows interleave
    (old, new=False) then (old, new=True), preserving canonical order."""
    m, n = outcomes.table.shape
    table = np.empty((2 * m, n + 1), dtype=bool)
    table[0::2, :n] = outcomes.table
    table[1::2, :n] = outcomes.table
    table[0::2, n] = False
    table[1::2, n] = True
    codes = np.empty(2 * m, dtype=np.uint64)
    codes[0::2] = outcomes.codes * np.uint64(2)
    codes[1::2] = outcomes.codes * np.uint64(2) + np.uint64(1)
    dup = np.empty(2 * m, dtype=np.intp)
    dup[0::2] = np.arange(m)
    dup[1::2] = np.arange(m)
    return table, codes, dup


def _check_cap(market: MarketState) -> None:
    n = len(market.structure)
    if (1 << (n + 1)) > market.structure.outcome_cap:
        raise OutcomeSpaceTooLarge(
            f"2^{n + 1} candidate assignments would exceed the cap of "
            f"{market.structure.outcome_cap}"
        )


def _commit(
    market: MarketState,
    structure: CarrollStructure,
    outcomes: OutcomeSpace,
    q: np.ndarray,
    initial_q: np.ndarray,
    payer: str,
    fee: float,
) -> None:
    market.structure = structure
    market.outcomes = outcomes
    market.q = q
    market.initial_q = initial_q
    market._mask_cache.clear()
    market.accounts[payer].cash -= fee
    market.maker_cash_in += fee


def add_atomic_live(
    market: MarketState, label: str, payer: str, ident: Optional[str] = None
) -> MutationReceipt:
    """Add an atomic proposition to an open market for a flat b*log 2 fee."""
    market._ensure_open()
    account = market.account(payer)
    fee = market.b * math.log(2.0)
    if account.cash < fee - 1e-9:
        raise InsufficientCash(f"{payer} has {account.cash:.6g}, fee is {fee:.6g}")
    _check_cap(market)

    quoted = _quoted_securities(market)
    prices_before = _price_map(market, quoted)
    wcl_before = market.worst_case_loss()

    structure = market.structure.copy()
    new_id = structure.add_atomic(label, ident=ident)
    table, codes, dup = _doubled_space(market.outcomes, new_id)
    outcomes = OutcomeSpace(structure.ids, table, codes)
    q = market.q[dup]
    initial_q = market.initial_q[dup]

    _commit(market, structure, outcomes, q, initial_q, payer, fee)
    prices_after = _price_map(market, quoted)
    drift = max(abs(prices_after[k] - prices_before[k]) for k in prices_before)
    return MutationReceipt(
        kind="add-atomic",
        new_id=new_id,
        fee_charged=fee,
        payer=payer,
        prices_before=prices_before,
        prices_after=prices_after,
        worst_case_loss_delta=market.worst_case_loss() - wcl_before,
        new_price=market.price_literal(new_id),
        max_prior_price_drift=drift,
    )


def _staged_edge(
    market: MarketState,
    source: str,
    target: str,
    relation: Relation,
    ident: Optional[str],
) -> Tuple[CarrollStructure, str, OutcomeSpace, np.ndarray]:
    """New structure/space with the edge appended and its constraint applied."""
    structure = market.structure.copy()
    try:
        new_id = structure.add_paired(source, target, relation, ident=ident)
    except StructureError as exc:
        raise InvalidEdge(str(exc)) from exc
    table, codes, dup = _doubled_space(market.outcomes, new_id)
    r = table[:, -1]
    b_col = table[:, market.structure.index_of(source)]
    a_col = table[:, market.structure.index_of(target)]
    if relation is Relation.NAND:
        keep = ~(r & a_col & b_col)
    elif relation is Relation.SUPPORT:
        keep = a_col | ~b_col | ~r
    else:
        keep = ~r | (a_col == b_col)
    outcomes = OutcomeSpace(structure.ids, table[keep], codes[keep])
    return structure, new_id, outcomes, dup[keep]


def add_edge_negative_init(
    market: MarketState,
    source: str,
    target: str,
    relation: Relation,
    K: float,
    payer: str,
    ident: Optional[str] = None,
    k_floor: float = 5.0,
) -> MutationReceipt:
    """Add an edge with share balance -K*b; fee = worst-case-loss increase."""
    market._ensure_open()
    account = market.account(payer)
    if K < k_floor:
        raise InvalidEdge(f"K={K} is below the floor of {k_floor}")
    _check_cap(market)

    quoted = _quoted_securities(market)
    prices_before = _price_map(market, quoted)
    wcl_before = market.worst_case_loss()

    structure, new_id, outcomes, dup = _staged_edge(market, source, target, relation, ident)
    new_mask = outcomes.column(new_id)
    q = market.q[dup]
    initial_q = market.initial_q[dup]
    q[new_mask] -= K * market.b
    initial_q[new_mask] -= K * market.b

    from . import kernels

    wcl_after = kernels.cost(initial_q, market.b) + float(np.maximum(0.0, -initial_q).sum())
    fee = wcl_after - wcl_before
    if account.cash < fee - 1e-9:
        raise InsufficientCash(f"{payer} has {account.cash:.6g}, fee is {fee:.6g}")

    _commit(market, structure, outcomes, q, initial_q, payer, fee)
    prices_after = _price_map(market, quoted)
    drift = max(abs(prices_after[k] - prices_before[k]) for k in prices_before)
    return MutationReceipt(
        kind="add-edge-negative-init",
        new_id=new_id,
        fee_charged=fee,
        payer=payer,
        prices_before=prices_before,
        prices_after=prices_after,
        worst_case_loss_delta=fee,
        new_price=market.price_literal(new_id),
        max_prior_price_drift=drift,
    )


def add_edge_golden_ratio(
    market: MarketState,
    source: str,
    target: str,
    payer: str,
    relation: Relation = Relation.NAND,
    ident: Optional[str] = None,
) -> MutationReceipt:
    """Add a NAND edge on a tree via golden-ratio share increments."""
    market._ensure_open()
    account = market.account(payer)
    if relation is not Relation.NAND:
        raise InvalidEdge("golden-ratio addition supports NAND edges only")
    if not market.structure.is_tree():
        raise NotATree("structure must be a tree before the addition")
    _check_cap(market)

    quoted = _quoted_securities(market)
    prices_before = _price_map(market, quoted)
    wcl_before = market.worst_case_loss()
    cost_before = market.cost()

    structure, new_id, outcomes, dup = _staged_edge(market, source, target, relation, ident)
    if not structure.is_tree():
        raise NotATree("adding this edge would create a cycle")
    q = market.q[dup]
    initial_q = market.initial_q[dup]
    increment = PHI_INCREMENT * market.b
    for pid in (new_id, source, target):
        mask = outcomes.literal_mask(pid, True)
        q[mask] += increment
        initial_q[mask] += increment

    from . import kernels

    fee = market.b * math.log(2.0) + (kernels.cost(q, market.b) - cost_before)
    if fee < 0:
        raise InvalidEdge("golden-ratio addition is unsupported for this market state")
    if account.cash < fee - 1e-9:
        raise InsufficientCash(f"{payer} has {account.cash:.6g}, fee is {fee:.6g}")

    _commit(market, structure, outcomes, q, initial_q, payer, fee)
    prices_after = _price_map(market, quoted)
    drift = max(abs(prices_after[k] - prices_before[k]) for k in prices_before)
    return MutationReceipt(
        kind="add-edge-golden-ratio",
        new_id=new_id,
        fee_charged=fee,
        payer=payer,
        prices_before=prices_before,
        prices_after=prices_after,
        worst_case_loss_delta=market.worst_case_loss() - wcl_before,
        new_price=market.price_literal(new_id),
        max_prior_price_drift=drift,
    )
