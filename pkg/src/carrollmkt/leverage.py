"""Phantom-purchase restake and the attack lab that probes it.

A restake on a NAND triple (A, r, B) is "I hold A, and I am buying the
claim r that B would change my mind."  Buying r intrinsically pushes the
price of A down, so the mechanism compensates the restaker with a
*phantom* purchase of A (an uncredited share adjustment) sized by
buy_to_price to put price(A) back exactly where it was before the r
purchase.  The phantom raises the cost function without any cash intake;
it is either left as unfunded maker exposure or funded by burning a
uniform sliver of every outstanding holding.  Burned shares move from the
traders' ledgers into a mechanism-held pool (prices stay put), and the
burn fraction is bisected so the pool's liquidation value equals the
phantom's cost-function jump.

The lab measures what this buys an attacker:

* ria_attack / ria_sweep: pump the counterpoint B, restake, dump B, and
  compare the final price of A against simply investing everything in A.
* capital_extraction_attack: the two-account enter-and-exit script that
  drains value through the phantom, plus a pure-LMSR control that cannot.
* restake_bonus_surface: the restaker's liquidation advantage over a
  plain A buyer across a grid of market movements (dB, dr), with verdicts
  for the monotonicity requirements a compliant bonus must satisfy.

Phantom shares are permanent market-level adjustments: they survive later
sales of the triggering r position and are never paid out at resolution.
Every run is a pure function of its parameters; reports embed full
per-step price/ledger traces and are zero-sum in cash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .engine import MarketState, Security
from .errors import (
    BurnUnderfunded,
    InsufficientCash,
    NoAPosition,
    NotANandTriple,
)
from .mutation import add_atomic_live, add_edge_golden_ratio
from .structure import CarrollStructure, Relation

BURN_TOLERANCE = 1e-12


def nand_triple_structure() -> CarrollStructure:
    """The canonical restake setting: atoms A, B and NAND edge r on (B, A)."""
    s = CarrollStructure()
    s.add_atomic("A")
    s.add_atomic("B")
    s.add_paired("B", "A", Relation.NAND, ident="r")
    return s


def nand_triple_market(
    b: float = 1.0, init: str = "zero", traders: Optional[Dict[str, float]] = None
) -> MarketState:
    return MarketState.from_structure(nand_triple_structure(), b, init=init, traders=traders)


@dataclass
class RestakeEvent:
    trader: str
    a: Security
    r: Security
    b: Security
    r_shares_bought: float
    phantom_a_shares: float
    funding_mode: str  # "unfunded" | "burn"
    burn_fraction: float
    phantom_cost: float  # cost-function jump of the phantom purchase

    def to_dict(self) -> dict:
        return {
            "trader": self.trader,
            "a": str(self.a),
            "r": str(self.r),
            "b": str(self.b),
            "r_shares_bought": self.r_shares_bought,
            "phantom_a_shares": self.phantom_a_shares,
            "funding_mode": self.funding_mode,
            "burn_fraction": self.burn_fraction,
            "phantom_cost": self.phantom_cost,
        }


def _require_nand_triple(market: MarketState, a_id: str, r_id: str, b_id: str) -> None:
    if r_id not in market.structure:
        raise NotANandTriple(f"no proposition {r_id!r}")
    prop = market.structure[r_id]
    if prop.is_atomic or prop.is_hyper or prop.relation is not Relation.NAND:
        raise NotANandTriple(f"{r_id!r} is not a binary NAND edge")
    if {prop.source, prop.target} != {a_id, b_id}:
        raise NotANandTriple(
            f"edge {r_id!r} joins {prop.source!r},{prop.target!r}, not {a_id!r},{b_id!r}"
        )


def restake(
    market: MarketState,
    trader: str,
    a_id: str,
    r_id: str,
    b_id: str,
    cash_amount: float,
    funding_mode: str = "unfunded",
) -> RestakeEvent:
    """Buy r with cash_amount and phantom-restore price(A)."""
    if funding_mode not in ("unfunded", "burn"):
        raise ValueError(f"unknown funding mode {funding_mode!r}")
    _require_nand_triple(market, a_id, r_id, b_id)
    account = market.account(trader)
    a_sec, r_sec, b_sec = Security.yes(a_id), Security.yes(r_id), Security.yes(b_id)
    if account.holdings.get(a_sec, 0.0) <= 0.0:
        raise NoAPosition(f"{trader} holds no {a_id} position to restake")
    if cash_amount < 0:
        raise ValueError("cash_amount must be nonnegative")
    if cash_amount > account.cash + 1e-9:
        raise InsufficientCash(f"{trader} has {account.cash:.6g}, restake needs {cash_amount:.6g}")
    if cash_amount == 0.0:
        return RestakeEvent(trader, a_sec, r_sec, b_sec, 0.0, 0.0, funding_mode, 0.0, 0.0)

    price_a_before = market.price(a_sec)
    r_shares = market.buy_for_cash(r_sec, cash_amount)
    market.execute_trade(trader, r_sec, r_shares)

    phantom_shares = market.buy_to_price(a_sec, price_a_before)
    phantom_cost = market.apply_phantom(a_sec, phantom_shares, note=f"restake:{trader}")

    burn_fraction = 0.0
    if funding_mode == "burn":
        burn_fraction = _burn_to_refund(market, phantom_cost)
    else:
        market.unfunded_exposure += phantom_cost

    return RestakeEvent(
        trader,
        a_sec,
        r_sec,
        b_sec,
        r_shares,
        phantom_shares,
        funding_mode,
        burn_fraction,
        phantom_cost,
    )


def _burn_to_refund(market: MarketState, phantom_cost: float) -> float:
    """Confiscate the smallest uniform holdings sliver worth the phantom.

    Burned shares leave the traders' ledgers but stay outstanding in q as a
    mechanism-held pool, so prices (including the just-restored price of A)
    do not move.  Beta is bisected so the pool's bundle liquidation value,
    C(q) - C(q - beta*H), equals the phantom purchase's cost-function jump:
    the maker's worst-case payout increase is offset by collateral of equal
    value taken pro rata from every outstanding holding.
    """
    if phantom_cost <= BURN_TOLERANCE:
        return 0.0
    held = market.total_holdings_expansion()
    base = market.cost()

    def burned_value(beta: float) -> float:
        return base - kernels.cost(market.q - beta * held, market.b)

    if burned_value(1.0) < phantom_cost - BURN_TOLERANCE:
        raise BurnUnderfunded(
            "outstanding holdings are worth less than the phantom purchase"
        )
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap = burned_value(mid) - phantom_cost
        if abs(gap) <= BURN_TOLERANCE or (hi - lo) < 1e-16:
            lo = hi = mid
            break
        if gap < 0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    for account in market.accounts.values():
        for security in list(account.holdings):
            taken = account.holdings[security] * beta
            account.holdings[security] -= taken
            market.burned[security] = market.burned.get(security, 0.0) + taken
    return beta


# -- attack reports ------------------------------------------------------------


@dataclass
class AttackReport:
    kind: str
    p_a: float
    p_a_prime: float
    ria_margin: float
    coalition_pnl: float
    zero_sum_gap: float
    degenerate: bool
    trace: List[dict]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p_a": self.p_a,
            "p_a_prime": self.p_a_prime,
            "ria_margin": self.ria_margin,
            "coalition_pnl": self.coalition_pnl,
            "zero_sum_gap": self.zero_sum_gap,
            "degenerate": self.degenerate,
            "trace": self.trace,
            "meta": self.meta,
        }


def _snap(market: MarketState, step: str, extra: Optional[dict] = None) -> dict:
    entry = {
        "step": step,
        "prices": {pid: market.price_literal(pid) for pid in market.structure.ids},
        "cash": {tid: acct.cash for tid, acct in sorted(market.accounts.items())},
        "maker_cash_in": market.maker_cash_in,
        "cost": market.cost(),
    }
    if extra:
        entry.update(extra)
    return entry


def _buy_for_cash(market: MarketState, trader: str, security: Security, cash: float) -> float:
    """Spend (up to rounding) exactly `cash` on a security; returns shares."""
    if cash <= 0.0:
        return 0.0
    shares = market.buy_for_cash(security, cash)
    market.execute_trade(trader, security, shares)
    return shares


def _sell_all(market: MarketState, trader: str, security: Security) -> float:
    held = market.accounts[trader].holdings.get(security, 0.0)
    if held > 0.0:
        receipt = market.execute_trade(trader, security, -held)
        return receipt.cash_delta
    return 0.0


# -- restake initialization attack ---------------------------------------------


@dataclass
class AttackConfig:
    c: float = 2.0  # total attacker capital
    frac_to_leave: float = 0.5  # fraction reserved for the restake r purchase
    a_frac: float = 0.5  # split of the rest between direct A and B pumping
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("attacker capital c must be positive")
        for name in ("frac_to_leave", "a_frac"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")


def ria_attack(
    config: AttackConfig, b: float = 1.0, init: str = "zero"
) -> AttackReport:
    """Baseline all-in-A versus pump-B/restake/dump-B on identical markets."""
    a_sec, b_sec, r_sec = Security.yes("A"), Security.yes("B"), Security.yes("r")

    baseline = nand_triple_market(b=b, init=init, traders={"attacker": config.c})
    _buy_for_cash(baseline, "attacker", a_sec, config.c)
    p_a = baseline.price(a_sec)

    attack = nand_triple_market(b=b, init=init, traders={"attacker": config.c})
    trace = [_snap(attack, "start")]
    c_restake = config.frac_to_leave * config.c
    c_direct = config.a_frac * (config.c - c_restake)
    c_pump = config.c - c_restake - c_direct

    degenerate = False
    _buy_for_cash(attack, "attacker", a_sec, c_direct)
    trace.append(_snap(attack, "buy-A-direct", {"cash_spent": c_direct}))
    _buy_for_cash(attack, "attacker", b_sec, c_pump)
    trace.append(_snap(attack, "pump-B", {"cash_spent": c_pump}))
    if c_restake > 0.0:
        if attack.accounts["attacker"].holdings.get(a_sec, 0.0) > 0.0:
            event = restake(attack, "attacker", "A", "r", "B", c_restake, "unfunded")
            trace.append(_snap(attack, "restake", {"restake": event.to_dict()}))
        else:
            # No A position, so the restake trigger never fires; the budget
            # goes into a plain r purchase and the run is flagged.
            degenerate = True
            _buy_for_cash(attack, "attacker", r_sec, c_restake)
            trace.append(_snap(attack, "plain-buy-r", {"cash_spent": c_restake}))
    proceeds = _sell_all(attack, "attacker", b_sec)
    trace.append(_snap(attack, "dump-B", {"proceeds": proceeds}))
    leftover = max(0.0, attack.accounts["attacker"].cash)
    _buy_for_cash(attack, "attacker", a_sec, leftover)
    trace.append(_snap(attack, "sweep-into-A", {"cash_spent": leftover}))
    p_a_prime = attack.price(a_sec)

    return AttackReport(
        kind="ria",
        p_a=p_a,
        p_a_prime=p_a_prime,
        ria_margin=p_a - p_a_prime,
        coalition_pnl=attack.accounts["attacker"].cash - 0.0 - config.c
        + attack.liquidation_value("attacker"),
        zero_sum_gap=attack.cash_conservation_gap(config.c),
        degenerate=degenerate,
        trace=trace,
        meta={
            "config": {
                "c": config.c,
                "frac_to_leave": config.frac_to_leave,
                "a_frac": config.a_frac,
                "seed": config.seed,
            },
            "b": b,
            "init": init,
            "loss_budget_spent": config.c - attack.accounts["attacker"].cash
            - attack.liquidation_value("attacker"),
        },
    )


def ria_sweep(
    c: float = 2.0, grid: int = 20, seed: int = 0, b: float = 1.0, init: str = "zero"
) -> dict:
    """Grid sweep over (frac_to_leave, a_frac); reports the margin surface."""
    fracs = np.linspace(0.0, 1.0, grid)
    margins = []
    worst = None
    for ftl in fracs:
        row = []
        for af in fracs:
            report = ria_attack(AttackConfig(c=c, frac_to_leave=float(ftl), a_frac=float(af), seed=seed), b=b, init=init)
            row.append(report.ria_margin)
            if worst is None or report.ria_margin < worst["ria_margin"]:
                worst = {
                    "frac_to_leave": float(ftl),
                    "a_frac": float(af),
                    "ria_margin": report.ria_margin,
                    "degenerate": report.degenerate,
                }
        margins.append(row)
    return {
        "kind": "ria-sweep",
        "c": c,
        "b": b,
        "init": init,
        "seed": seed,
        "prng": "numpy-PCG64",
        "grid": [float(x) for x in fracs],
        "margins": margins,
        "min_margin": min(min(row) for row in margins),
        "worst_cell": worst,
    }


def manipulation_free_variation(
    c: float = 4.0, prior_a_stake_cash: float = 0.5, b: float = 1.0
) -> dict:
    """RIA variation 3: skip the B pump; the cost floor is the creation fees.

    Compares investing c directly in A against creating B and the edge r
    (paying the proposition fees) and restaking the remainder.
    """
    def fresh() -> MarketState:
        s = CarrollStructure()
        s.add_atomic("A")
        return MarketState.from_structure(s, b, traders={"attacker": prior_a_stake_cash + c})

    a_sec = Security.yes("A")

    sig = fresh()
    _buy_for_cash(sig, "attacker", a_sec, prior_a_stake_cash)
    p0 = sig.price(a_sec)
    _buy_for_cash(sig, "attacker", a_sec, c)
    p_sig = sig.price(a_sec)

    res = fresh()
    _buy_for_cash(res, "attacker", a_sec, prior_a_stake_cash)
    atomic_receipt = add_atomic_live(res, "B", payer="attacker")
    edge_receipt = add_edge_golden_ratio(res, "B", "A", payer="attacker", ident="r")
    fees = atomic_receipt.fee_charged + edge_receipt.fee_charged
    remaining = c - fees
    degenerate = remaining <= 0.0
    if not degenerate:
        restake(res, "attacker", "A", "r", "B", remaining, "unfunded")
    p_res = res.price(a_sec)

    return {
        "kind": "ria-manipulation-free",
        "b": b,
        "c": c,
        "prior_a_stake_cash": prior_a_stake_cash,
        "creation_fees": fees,
        "atomic_fee": atomic_receipt.fee_charged,
        "edge_fee": edge_receipt.fee_charged,
        "attack_cost_floor": fees,
        "p_a_initial": p0,
        "sig_signal": p_sig,
        "res_signal": p_res,
        "sig_advantage": p_sig - p0,
        "res_advantage": p_res - p0,
        "res_le_sig": p_res <= p_sig + 1e-9,
        "degenerate": degenerate,
    }


# -- capital extraction ---------------------------------------------------------


@dataclass
class ExtractionParams:
    balice_a_cash: float = 12.0
    alice_a_cash: float = 0.25
    alice_r_cash: float = 0.5
    crowd_a_cash: float = 0.0  # optional background third-party positions
    crowd_b_cash: float = 0.0  # the burn also falls on
    mode: str = "burn"  # "burn" | "unfunded"
    restake_enabled: bool = True
    b: float = 1.0
    init: str = "zero"
    seed: int = 0


def capital_extraction_attack(
    market: Optional[MarketState] = None, params: Optional[ExtractionParams] = None
) -> AttackReport:
    """Alice/Balice enter-and-exit script on a fresh NAND triple market.

    An uninvolved crowd trader takes background positions first; then
    Balice accumulates A, Alice takes a small A stake and restakes (buys r,
    triggering the phantom A restoration), and both unwind everything.
    With restake_enabled=False, Alice plain-buys r instead: a pure-LMSR
    control whose round trip cannot profit.
    """
    params = params or ExtractionParams()
    alice_budget = params.alice_a_cash + params.alice_r_cash
    if market is None:
        market = nand_triple_market(
            b=params.b,
            init=params.init,
            traders={
                "alice": alice_budget,
                "balice": params.balice_a_cash,
                "crowd": params.crowd_a_cash + params.crowd_b_cash,
            },
        )
    initial_total = sum(a.cash for a in market.accounts.values())
    a_sec, b_sec, r_sec = Security.yes("A"), Security.yes("B"), Security.yes("r")

    if "crowd" in market.accounts:
        _buy_for_cash(market, "crowd", a_sec, params.crowd_a_cash)
        _buy_for_cash(market, "crowd", b_sec, params.crowd_b_cash)
    coalition_start = market.accounts["alice"].cash + market.accounts["balice"].cash

    p_a_start = market.price(a_sec)
    trace = [_snap(market, "start")]

    _buy_for_cash(market, "balice", a_sec, params.balice_a_cash)
    trace.append(_snap(market, "balice-buys-A"))

    _buy_for_cash(market, "alice", a_sec, params.alice_a_cash)
    trace.append(_snap(market, "alice-stakes-A"))

    if params.restake_enabled:
        event = restake(market, "alice", "A", "r", "B", params.alice_r_cash, params.mode)
        trace.append(_snap(market, "alice-restakes", {"restake": event.to_dict()}))
    else:
        _buy_for_cash(market, "alice", r_sec, params.alice_r_cash)
        trace.append(_snap(market, "alice-plain-buys-r"))

    _sell_all(market, "balice", a_sec)
    trace.append(_snap(market, "balice-sells-A"))

    _sell_all(market, "alice", r_sec)
    _sell_all(market, "alice", a_sec)
    trace.append(_snap(market, "alice-exits"))

    coalition_end = market.accounts["alice"].cash + market.accounts["balice"].cash
    return AttackReport(
        kind="capital-extraction",
        p_a=p_a_start,
        p_a_prime=market.price(a_sec),
        ria_margin=p_a_start - market.price(a_sec),
        coalition_pnl=coalition_end - coalition_start,
        zero_sum_gap=market.cash_conservation_gap(initial_total),
        degenerate=False,
        trace=trace,
        meta={
            "mode": params.mode,
            "restake_enabled": params.restake_enabled,
            "b": params.b,
            "init": params.init,
            "seed": params.seed,
            "balice_a_cash": params.balice_a_cash,
            "alice_a_cash": params.alice_a_cash,
            "alice_r_cash": params.alice_r_cash,
            "crowd_a_cash": params.crowd_a_cash,
            "crowd_b_cash": params.crowd_b_cash,
            "unfunded_exposure": market.unfunded_exposure,
            "burned_pool": {str(s): x for s, x in market.burned.items()},
        },
    )


# -- restake bonus surface ---------------------------------------------------------


@dataclass
class SurfaceCell:
    target_b: float
    target_r: float
    delta_b: float
    delta_r: float
    advantage: float
    reachable: bool

    def to_dict(self) -> dict:
        return {
            "target_b": self.target_b,
            "target_r": self.target_r,
            "delta_b": self.delta_b,
            "delta_r": self.delta_r,
            "advantage": self.advantage,
            "reachable": self.reachable,
        }


def _move_to(market: MarketState, security: Security, target: float, budget: float) -> bool:
    """Exogenous move to an absolute price target; False if over budget.

    Movements are uncredited market-level adjustments (the rest of the
    world shifting the price), so they can push in either direction; the
    budget bounds the cost-function change a single move may cause.
    """
    delta = market.buy_to_price(security, target)
    mask = market.security_mask(security)
    m, s_in, s_out = kernels.masked_sums(market.q, market.b, mask)
    before = market.b * (m + math.log(s_in + s_out))
    after = market.b * (m + math.log(s_in * math.exp(delta / market.b) + s_out))
    if abs(after - before) > budget:
        return False
    market.apply_phantom(security, delta, note="exogenous-move")
    return True


def restake_bonus_surface(
    grid: int = 7,
    stake_cash: float = 1.0,
    restake_cash: float = 0.5,
    pre_b_target: float = 0.8,
    r_initial_targets: Optional[Sequence[Optional[float]]] = None,
    funding_mode: str = "unfunded",
    b: float = 1.0,
    init: str = "zero",
    mover_budget: float = 1e4,
    seed: int = 0,
) -> dict:
    """Liquidation advantage of a restaker over a plain A buyer.

    Both traders spend stake_cash + restake_cash after the counterpoint B
    has been pumped to pre_b_target; the restaker's second tranche goes
    through restake, the control's goes straight into A.  Exogenous moves
    then push B and r to each grid cell's absolute price targets and the
    liquidation values are compared.  r_initial_targets adds an optional
    outer sweep over the r price at restake time.
    """
    a_sec, b_sec, r_sec = Security.yes("A"), Security.yes("B"), Security.yes("r")
    targets = [float(t) for t in np.linspace(0.1, 0.9, grid)]
    r_axis = list(r_initial_targets) if r_initial_targets else [None]

    surfaces = []
    for r_init in r_axis:
        def prepared(kind: str) -> MarketState:
            market = nand_triple_market(
                b=b,
                init=init,
                traders={"rst": stake_cash + restake_cash, "dir": stake_cash + restake_cash},
            )
            _move_to(market, b_sec, pre_b_target, mover_budget)
            if r_init is not None:
                _move_to(market, r_sec, float(r_init), mover_budget)
            trader = "rst" if kind == "restake" else "dir"
            _buy_for_cash(market, trader, a_sec, stake_cash)
            if kind == "restake":
                restake(market, "rst", "A", "r", "B", restake_cash, funding_mode)
            else:
                _buy_for_cash(market, "dir", a_sec, restake_cash)
            return market

        base_x = prepared("restake")
        base_y = prepared("direct")
        b0, r0 = base_x.price(b_sec), base_x.price(r_sec)

        def measure(target_b: float, target_r: float) -> SurfaceCell:
            mx, my = base_x.clone(), base_y.clone()
            ok = True
            for market in (mx, my):
                for sec, tgt in ((b_sec, target_b), (r_sec, target_r), (b_sec, target_b), (r_sec, target_r)):
                    ok = _move_to(market, sec, tgt, mover_budget) and ok
            return SurfaceCell(
                target_b=target_b,
                target_r=target_r,
                delta_b=mx.price(b_sec) - b0,
                delta_r=mx.price(r_sec) - r0,
                advantage=mx.liquidation_value("rst") - my.liquidation_value("dir"),
                reachable=ok,
            )

        cells = [measure(tb, tr) for tb in targets for tr in targets]
        zero_cell = measure(b0, r0)

        reachable = [c for c in cells if c.reachable]
        if reachable:
            max_adv = max(c.advantage for c in reachable)
            corner = min(reachable, key=lambda c: (c.delta_b, -c.delta_r))
            b_falling = [c for c in reachable if c.delta_b < -1e-12]
            verdicts = {
                "bonus_nonpositive_when_b_rises": all(
                    c.advantage <= 1e-9 for c in reachable if c.delta_b >= -1e-12
                ),
                "bonus_nonpositive_when_r_falls": all(
                    c.advantage <= 1e-9 for c in reachable if c.delta_r <= 1e-12
                ),
                "double_vindication_cell_is_max": corner.advantage >= max_adv - 1e-12,
                "double_vindication_cell_is_max_when_b_falls": (
                    not b_falling
                    or corner.advantage >= max(c.advantage for c in b_falling) - 1e-12
                ),
                "double_vindication_bonus_positive": corner.advantage > 0.0,
                "zero_cell_nonpositive": zero_cell.advantage <= 1e-9,
            }
        else:
            max_adv = None
            corner = None
            verdicts = {}
        surfaces.append(
            {
                "r_initial_target": r_init,
                "b_at_restake": b0,
                "r_at_restake": r0,
                "cells": [c.to_dict() for c in cells],
                "zero_cell": zero_cell.to_dict(),
                "max_advantage": max_adv,
                "double_vindication_cell": corner.to_dict() if corner else None,
                "verdicts": verdicts,
            }
        )

    return {
        "kind": "restake-bonus-surface",
        "grid_targets": targets,
        "stake_cash": stake_cash,
        "restake_cash": restake_cash,
        "pre_b_target": pre_b_target,
        "funding_mode": funding_mode,
        "b": b,
        "init": init,
        "seed": seed,
        "prng": "numpy-PCG64",
        "surfaces": surfaces,
    }
