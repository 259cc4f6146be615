"""Exact combinatorial LMSR market maker over an enumerated outcome space.

State is a per-outcome share vector q and a liquidity parameter b > 0:

    cost       C(q)  = b * log(sum_w exp(q_w / b))
    price      p(S)  = sum_{w in S} exp(q_w/b) / sum_w exp(q_w/b)
    trade cost        C(q_after) - C(q_before)

A security is a conjunction of proposition literals; it denotes the set S
of feasible outcomes satisfying every literal, and buying x shares of it
adds x to q_w for each w in S.  Cost is a state function, so any trade
sequence returning q to its start nets zero cash.

The maker's worst-case resolution loss is C(q0) + sum_w max(0, -q0_w);
negative initial balances (used when edges are added live) enlarge it.

MarketState is mutated in place and performs no locking; drive each market
from one thread at a time.  All operations are deterministic given state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from . import kernels
from .errors import (
    DegenerateSecurity,
    InfeasibleOutcome,
    InsufficientCash,
    InsufficientHoldings,
    MarketClosed,
    TargetOutOfRange,
    UnknownTrader,
)
from .structure import Assignment, CarrollStructure, OutcomeSpace, Relation

#: Golden-ratio share increment per unit of liquidity, log((1 + sqrt 5) / 2).
#: Balanced ("phi") initialization and the live golden-ratio edge addition
#: bump shares by b * PHI_INCREMENT, which makes every NAND triple's
#: exponential weight a power of the golden ratio regardless of b.
PHI_INCREMENT = math.log((1.0 + math.sqrt(5.0)) / 2.0)

_CASH_EPS = 1e-9


@dataclass(frozen=True)
class Security:
    """A conjunction of proposition literals, e.g. A & !B."""

    literals: frozenset  # of (proposition-id, bool)

    def __post_init__(self):
        if not self.literals:
            raise DegenerateSecurity("security needs at least one literal")
        ids = [pid for pid, _ in self.literals]
        if len(set(ids)) != len(ids):
            raise DegenerateSecurity("security repeats a proposition")

    @classmethod
    def of(cls, literals: Iterable[Tuple[str, bool]]) -> "Security":
        return cls(frozenset(literals))

    @classmethod
    def yes(cls, ident: str) -> "Security":
        return cls(frozenset([(ident, True)]))

    @classmethod
    def no(cls, ident: str) -> "Security":
        return cls(frozenset([(ident, False)]))

    @classmethod
    def parse(cls, text: str) -> "Security":
        lits = []
        for tok in text.replace("&", " ").split():
            if tok.startswith("!"):
                lits.append((tok[1:], False))
            else:
                lits.append((tok, True))
        return cls.of(lits)

    def sorted_literals(self) -> List[Tuple[str, bool]]:
        return sorted(self.literals)

    def satisfied_by(self, values: Assignment) -> bool:
        return all(values[pid] == val for pid, val in self.literals)

    def __str__(self) -> str:
        return " & ".join(pid if val else "!" + pid for pid, val in self.sorted_literals())


@dataclass
class TradeReceipt:
    trader: str
    security: Security
    shares: float
    cash_delta: float  # negative = trader paid
    price_before: float
    price_after: float


@dataclass
class TraderAccount:
    cash: float
    holdings: Dict[Security, float] = field(default_factory=dict)


@dataclass
class PhantomAdjustment:
    """A share-quantity change credited to no trader."""

    security: Security
    shares: float
    note: str


class MarketState:
    """Combinatorial LMSR over one structure's outcome space."""

    def __init__(
        self,
        structure: CarrollStructure,
        outcomes: OutcomeSpace,
        b: float,
        q: np.ndarray,
        initial_q: np.ndarray,
        init_convention: str = "zero",
    ):
        if b <= 0:
            raise ValueError("liquidity parameter b must be positive")
        self.structure = structure
        self.outcomes = outcomes
        self.b = float(b)
        self.q = q
        self.initial_q = initial_q
        self.init_convention = init_convention
        self.accounts: Dict[str, TraderAccount] = {}
        self.maker_cash_in = 0.0
        self.payouts_total = 0.0
        self.phantom_log: List[PhantomAdjustment] = []
        self.burned: Dict[Security, float] = {}  # confiscated, mechanism-held
        self.unfunded_exposure = 0.0
        self.closed = False
        self._mask_cache: Dict[Security, np.ndarray] = {}

    @classmethod
    def from_structure(
        cls,
        structure: CarrollStructure,
        b: float,
        init: str = "zero",
        traders: Optional[Dict[str, float]] = None,
    ) -> "MarketState":
        """Build a fresh market.

        init="zero" starts every outcome at q0=0.  init="phi" additionally
        applies the golden-ratio increment to each binary NAND edge triple
        (edge, source, target), which puts every such triple's literals at
        price 1/2 and makes the triple informationally transparent; this is
        the state a structure grown live through the mutation operations
        would be in, and the segmented approximation relies on it.
        """
        outcomes = structure.enumerate_outcomes()
        q0 = np.zeros(len(outcomes), dtype=np.float64)
        if init == "phi":
            for prop in structure.edges():
                if prop.relation is Relation.NAND and not prop.is_hyper:
                    for pid in (prop.id, prop.source, prop.target):
                        q0[outcomes.literal_mask(pid, True)] += PHI_INCREMENT * b
        elif init != "zero":
            raise ValueError(f"unknown init convention {init!r}")
        market = cls(structure, outcomes, b, q0.copy(), q0, init_convention=init)
        for tid, cash in (traders or {}).items():
            market.add_trader(tid, cash)
        return market

    # -- accounts -----------------------------------------------------------

    def add_trader(self, trader: str, cash: float) -> None:
        if trader in self.accounts:
            raise ValueError(f"trader {trader!r} already exists")
        self.accounts[trader] = TraderAccount(cash=float(cash))

    def account(self, trader: str) -> TraderAccount:
        try:
            return self.accounts[trader]
        except KeyError:
            raise UnknownTrader(f"unknown trader {trader!r}") from None

    # -- pricing ------------------------------------------------------------

    def security_mask(self, security: Security) -> np.ndarray:
        mask = self._mask_cache.get(security)
        if mask is None:
            mask = self.outcomes.conjunction_mask(security.literals)
            self._mask_cache[security] = mask
        return mask

    def _checked_mask(self, security: Security) -> np.ndarray:
        mask = self.security_mask(security)
        n_in = int(mask.sum())
        if n_in == 0 or n_in == len(self.outcomes):
            raise DegenerateSecurity(
                f"security {security} covers {n_in} of {len(self.outcomes)} outcomes"
            )
        return mask

    def cost(self) -> float:
        return kernels.cost(self.q, self.b)

    def price(self, security: Security) -> float:
        mask = self._checked_mask(security)
        _, s_in, s_out = kernels.masked_sums(self.q, self.b, mask)
        return s_in / (s_in + s_out)

    def price_literal(self, ident: str, value: bool = True) -> float:
        return self.price(Security.of([(ident, value)]))

    def single_literal_prices(self) -> Dict[str, float]:
        return {pid: self.price_literal(pid) for pid in self.structure.ids}

    def normalization_gap(self) -> float:
        return abs(kernels.softmax_sum(self.q, self.b) - 1.0)

    # -- trading --------------------------------------------------------------

    def _ensure_open(self) -> None:
        if self.closed:
            raise MarketClosed("market is resolved; no further trades")

    def execute_trade(self, trader: str, security: Security, shares: float) -> TradeReceipt:
        self._ensure_open()
        account = self.account(trader)
        mask = self._checked_mask(security)
        shares = float(shares)
        if shares < 0:
            held = account.holdings.get(security, 0.0)
            if held < -shares - _CASH_EPS:
                raise InsufficientHoldings(
                    f"{trader} holds {held:.6g} of {security}, cannot sell {-shares:.6g}"
                )
        m, s_in, s_out = kernels.masked_sums(self.q, self.b, mask)
        price_before = s_in / (s_in + s_out)
        cost_before = self.b * (m + math.log(s_in + s_out))
        kernels.apply_delta(self.q, mask, shares)
        m2, s_in2, s_out2 = kernels.masked_sums(self.q, self.b, mask)
        price_after = s_in2 / (s_in2 + s_out2)
        cost_after = self.b * (m2 + math.log(s_in2 + s_out2))
        cost_delta = cost_after - cost_before
        if shares > 0 and account.cash < cost_delta - _CASH_EPS:
            kernels.apply_delta(self.q, mask, -shares)  # roll back
            raise InsufficientCash(
                f"{trader} has {account.cash:.6g}, trade costs {cost_delta:.6g}"
            )
        account.cash -= cost_delta
        self.maker_cash_in += cost_delta
        held = account.holdings.get(security, 0.0) + shares
        if held == 0.0:
            account.holdings.pop(security, None)
        else:
            account.holdings[security] = held
        return TradeReceipt(
            trader=trader,
            security=security,
            shares=shares,
            cash_delta=-cost_delta,
            price_before=price_before,
            price_after=price_after,
        )

    def buy_to_price(self, security: Security, target: float) -> float:
        """Signed share quantity moving price(security) exactly to target."""
        if not (0.0 < target < 1.0):
            raise TargetOutOfRange(f"target price {target} outside (0, 1)")
        mask = self._checked_mask(security)
        _, s_in, s_out = kernels.masked_sums(self.q, self.b, mask)
        return self.b * (
            math.log(target) - math.log1p(-target) + math.log(s_out) - math.log(s_in)
        )

    def buy_for_cash(self, security: Security, cash: float) -> float:
        """Share quantity whose trade cost equals the given cash amount."""
        mask = self._checked_mask(security)
        _, s_in, s_out = kernels.masked_sums(self.q, self.b, mask)
        ratio = (s_in + s_out) / s_in
        return self.b * math.log1p(ratio * math.expm1(cash / self.b))

    # -- portfolio values ---------------------------------------------------

    def expansion(self, holdings: Dict[Security, float]) -> np.ndarray:
        """Per-outcome share vector equivalent to a holdings map."""
        out = np.zeros(len(self.outcomes), dtype=np.float64)
        for security, shares in holdings.items():
            out[self.security_mask(security)] += shares
        return out

    def total_holdings_expansion(self) -> np.ndarray:
        out = np.zeros(len(self.outcomes), dtype=np.float64)
        for account in self.accounts.values():
            for security, shares in account.holdings.items():
                out[self.security_mask(security)] += shares
        return out

    def liquidation_value(self, trader: str) -> float:
        """Cash from selling the trader's whole portfolio back in one bundle."""
        account = self.account(trader)
        if not account.holdings:
            return 0.0
        return self.cost() - kernels.cost(self.q - self.expansion(account.holdings), self.b)

    def worst_case_loss(self) -> float:
        return kernels.cost(self.initial_q, self.b) + float(
            np.maximum(0.0, -self.initial_q).sum()
        )

    # -- phantom adjustments --------------------------------------------------

    def apply_phantom(self, security: Security, shares: float, note: str) -> float:
        """Apply an uncredited share change; returns the cost-function jump."""
        mask = self._checked_mask(security)
        before = self.cost()
        kernels.apply_delta(self.q, mask, shares)
        self.phantom_log.append(PhantomAdjustment(security, float(shares), note))
        return self.cost() - before

    # -- resolution -----------------------------------------------------------

    def resolve(self, outcome: Assignment) -> Dict[str, float]:
        self._ensure_open()
        try:
            self.outcomes.index_of(outcome)
        except KeyError as exc:
            raise InfeasibleOutcome(str(exc)) from None
        payouts = {}
        for trader, account in self.accounts.items():
            total = 0.0
            for security, shares in account.holdings.items():
                if security.satisfied_by(outcome):
                    total += shares
            payouts[trader] = total
            account.cash += total
            self.payouts_total += total
        self.closed = True
        return payouts

    def hypothetical_payout(self, outcome_index: int) -> float:
        """Total trader payout if the given feasible outcome realized now."""
        row = self.outcomes.assignment(outcome_index)
        total = 0.0
        for account in self.accounts.values():
            for security, shares in account.holdings.items():
                if security.satisfied_by(row):
                    total += shares
        return total

    # -- integrity ---------------------------------------------------------

    def share_identity_gap(self) -> float:
        """Max |q - (q0 + ledger + phantom + burned-pool expansion)|."""
        rebuilt = self.initial_q + self.total_holdings_expansion()
        for adj in self.phantom_log:
            rebuilt[self.security_mask(adj.security)] += adj.shares
        for security, shares in self.burned.items():
            rebuilt[self.security_mask(security)] += shares
        return float(np.abs(self.q - rebuilt).max(initial=0.0))

    def cash_conservation_gap(self, initial_total_cash: float) -> float:
        now = sum(a.cash for a in self.accounts.values())
        return abs(now + self.maker_cash_in - self.payouts_total - initial_total_cash)

    # -- copying / serialization ---------------------------------------------

    def clone(self) -> "MarketState":
        out = MarketState(
            self.structure,
            self.outcomes,
            self.b,
            self.q.copy(),
            self.initial_q.copy(),
            init_convention=self.init_convention,
        )
        out.accounts = {
            tid: TraderAccount(cash=a.cash, holdings=dict(a.holdings))
            for tid, a in self.accounts.items()
        }
        out.maker_cash_in = self.maker_cash_in
        out.payouts_total = self.payouts_total
        out.phantom_log = list(self.phantom_log)
        out.burned = dict(self.burned)
        out.unfunded_exposure = self.unfunded_exposure
        out.closed = self.closed
        return out

    def snapshot(self) -> dict:
        props = []
        for p in self.structure.propositions:
            entry = {"id": p.id, "label": p.label}
            if p.is_hyper:
                entry["relation"] = p.relation.value
                entry["members"] = list(p.members)
            elif not p.is_atomic:
                entry["relation"] = p.relation.value
                entry["source"] = p.source
                entry["target"] = p.target
            props.append(entry)
        return {
            "format": "carrollmkt-snapshot-1",
            "structure": props,
            "b": self.b,
            "init_convention": self.init_convention,
            "q": self.q.tolist(),
            "initial_q": self.initial_q.tolist(),
            "ledger": {
                tid: {
                    "cash": a.cash,
                    "holdings": [[str(s), x] for s, x in sorted(a.holdings.items(), key=lambda kv: str(kv[0]))],
                }
                for tid, a in sorted(self.accounts.items())
            },
            "maker_cash_in": self.maker_cash_in,
            "payouts_total": self.payouts_total,
            "phantom_adjustments": [[str(p.security), p.shares, p.note] for p in self.phantom_log],
            "burned": [[str(s), x] for s, x in sorted(self.burned.items(), key=lambda kv: str(kv[0]))],
            "unfunded_exposure": self.unfunded_exposure,
            "closed": self.closed,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "MarketState":
        structure = CarrollStructure()
        for entry in snap["structure"]:
            if "members" in entry:
                structure.add_hyper_nand(entry["members"], ident=entry["id"], label=entry["label"])
            elif "relation" in entry:
                structure.add_paired(
                    entry["source"],
                    entry["target"],
                    Relation(entry["relation"]),
                    ident=entry["id"],
                    label=entry["label"],
                )
            else:
                structure.add_atomic(entry["label"], ident=entry["id"])
        outcomes = structure.enumerate_outcomes()
        q = np.asarray(snap["q"], dtype=np.float64)
        q0 = np.asarray(snap["initial_q"], dtype=np.float64)
        if len(q) != len(outcomes):
            raise ValueError("snapshot share vector does not match the outcome space")
        market = cls(structure, outcomes, snap["b"], q, q0, snap.get("init_convention", "zero"))
        for tid, acct in snap["ledger"].items():
            market.add_trader(tid, acct["cash"])
            for sec_text, shares in acct["holdings"]:
                market.accounts[tid].holdings[Security.parse(sec_text)] = shares
        market.maker_cash_in = snap["maker_cash_in"]
        market.payouts_total = snap.get("payouts_total", 0.0)
        for sec_text, shares, note in snap.get("phantom_adjustments", []):
            market.phantom_log.append(PhantomAdjustment(Security.parse(sec_text), shares, note))
        for sec_text, shares in snap.get("burned", []):
            market.burned[Security.parse(sec_text)] = shares
        market.unfunded_exposure = snap.get("unfunded_exposure", 0.0)
        market.closed = snap.get("closed", False)
        return market
