"""Scalable approximate market built from bounded-size linked parts.

Exact combinatorial pricing enumerates every feasible assignment, which is
exponential in the proposition count.  A segmented market instead splits
the structure into parts of at most M propositions, each running its own
exact sub-market; adjacent parts share linking propositions.  A trade
executes in the one part holding all of its literals, then a breadth-first
sweep of *phantom* trades (uncredited share adjustments computed with
buy_to_price) re-equalizes every shared link's price moving outward.

On trees a link is a separator, so the sweep is message passing: each
part's accumulated link tilt ends up equal to the neighbor subtree's
marginal, and every part quotes the exact joint price.  This requires the
parts to start consistent with the exact market, which holds for balanced
("phi") initialization, where every NAND triple's outward message starts
flat; plain zero initialization leaves a structure-dependent baseline gap
that the sweep cannot remove, and compare_exact will measure it.

With cycles, a part pair can share two links whose prices fight each
other; iterate_cycles re-equalizes them alternately and reports the gap
trace without any convergence guarantee.

Segmented markets are quoting/simulation instruments: phantom shares make
part-level resolution accounting undefined, so resolve is not offered.
A segmented trade is one critical section over all affected parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .engine import MarketState, Security, TradeReceipt, TraderAccount
from .errors import (
    CrossPartSecurity,
    InsufficientCash,
    InsufficientHoldings,
    MTooSmall,
    NoCycle,
    NotATree,
    ScriptError,
    SegmentationError,
)
from .structure import CarrollStructure, Relation


@dataclass
class Partition:
    """Parts (tuples of proposition ids) with shared linking propositions."""

    parts: List[Tuple[str, ...]]
    M: int

    def intersections(self) -> Dict[Tuple[int, int], Tuple[str, ...]]:
        out = {}
        for i in range(len(self.parts)):
            si = set(self.parts[i])
            for j in range(i + 1, len(self.parts)):
                shared = si.intersection(self.parts[j])
                if shared:
                    ordered = tuple(p for p in self.parts[i] if p in shared)
                    out[(i, j)] = ordered
        return out

    def cyclic_pairs(self) -> List[Tuple[int, int]]:
        return [pair for pair, links in self.intersections().items() if len(links) >= 2]

    def validate(self, structure: CarrollStructure) -> None:
        seen = set()
        for part in self.parts:
            if len(part) > self.M:
                raise SegmentationError(f"part {part} exceeds M={self.M}")
            for pid in part:
                if pid not in structure:
                    raise SegmentationError(f"part references unknown proposition {pid!r}")
            seen.update(part)
        missing = set(structure.ids) - seen
        if missing:
            raise SegmentationError(f"propositions not covered by any part: {sorted(missing)}")
        for group in structure.constraint_groups():
            if not any(set(group) <= set(part) for part in self.parts):
                raise SegmentationError(
                    f"constraint group {group} is not co-resident in any part"
                )


def _components(vertices: set, adjacency: Dict[str, List[str]]) -> List[set]:
    remaining = set(vertices)
    comps = []
    while remaining:
        seed = next(iter(remaining))
        stack, comp = [seed], {seed}
        while stack:
            v = stack.pop()
            for w in adjacency.get(v, ()):
                if w in remaining and w not in comp:
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
        remaining -= comp
    return comps


def partition_tree(structure: CarrollStructure, M: int) -> Partition:
    """Deterministically split a tree structure into parts of at most M.

    Recursive balanced bisection: pick the cut proposition minimizing the
    larger half, place it in both halves as the link, and recurse.  Cuts
    never separate a constraint group (an edge from its participants), so
    every part prices its own constraints exactly.
    """
    if M < 3:
        raise MTooSmall("M must be at least 3")
    if not structure.is_tree():
        raise NotATree("partition_tree requires an acyclic structure")
    order = {pid: i for i, pid in enumerate(structure.ids)}
    groups = structure.constraint_groups()
    for group in groups:
        if len(set(group)) > M:
            raise MTooSmall(f"constraint group {group} cannot fit in any part of size {M}")
    adjacency: Dict[str, List[str]] = {pid: [] for pid in structure.ids}
    for u, v in structure.incidence_edges():
        adjacency[u].append(v)
        adjacency[v].append(u)
    for pid in adjacency:
        adjacency[pid].sort(key=order.get)

    parts: List[Tuple[str, ...]] = []

    def cut_groups(v: str, vertices: set) -> Optional[List[set]]:
        sub = {u: [w for w in adjacency[u] if w in vertices and w != v] for u in vertices if u != v}
        comps = _components(set(sub), sub)
        # A cut may not separate any constraint group: merge the components
        # of the other members of every group containing v.
        comp_of = {}
        for idx, comp in enumerate(comps):
            for u in comp:
                comp_of[u] = idx
        merged = {idx: idx for idx in range(len(comps))}

        def find(x):
            while merged[x] != x:
                merged[x] = merged[merged[x]]
                x = merged[x]
            return x

        for group in groups:
            if v in group:
                others = [comp_of[u] for u in set(group) if u != v and u in comp_of]
                for a, b in zip(others, others[1:]):
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        merged[ra] = rb
        buckets: Dict[int, set] = {}
        for idx, comp in enumerate(comps):
            buckets.setdefault(find(idx), set()).update(comp)
        grouped = list(buckets.values())
        return grouped if len(grouped) >= 2 else None

    def pack(grouped: List[set]) -> Tuple[set, set]:
        ordered = sorted(grouped, key=lambda g: (-len(g), min(order[u] for u in g)))
        g1, g2 = set(), set()
        for g in ordered:
            (g1 if len(g1) <= len(g2) else g2).update(g)
        return g1, g2

    def split(vertices: set) -> None:
        if len(vertices) <= M:
            parts.append(tuple(sorted(vertices, key=order.get)))
            return
        best = None
        for v in sorted(vertices, key=order.get):
            grouped = cut_groups(v, vertices)
            if grouped is None:
                continue
            g1, g2 = pack(grouped)
            score = max(len(g1), len(g2)) + 1
            if score >= len(vertices):
                continue
            if best is None or score < best[0]:
                best = (score, v, g1, g2)
        if best is None:
            raise MTooSmall(
                f"no cut can reduce a component of {len(vertices)} propositions below M={M}"
            )
        _, v, g1, g2 = best
        split(g1 | {v})
        split(g2 | {v})

    for comp in sorted(_components(set(structure.ids), adjacency), key=lambda c: min(order[u] for u in c)):
        split(comp)
    parts.sort(key=lambda part: min(order[u] for u in part))
    partition = Partition(parts=parts, M=M)
    partition.validate(structure)
    return partition


@dataclass
class ScriptTrade:
    trader: str
    security: Security
    shares: float


class SegmentedMarket:
    """Linked per-part LMSR markets reconciled by phantom trades."""

    def __init__(
        self,
        structure: CarrollStructure,
        partition: Partition,
        b: float,
        init: str = "phi",
        traders: Optional[Dict[str, float]] = None,
    ):
        partition.validate(structure)
        self.structure = structure
        self.partition = partition
        self.b = float(b)
        self.init_convention = init
        self.accounts: Dict[str, TraderAccount] = {}
        self.phantom_log: List[Tuple[int, Security, float]] = []

        # Each constraint group is owned by exactly one part; elsewhere the
        # edge proposition degrades to an opaque binary variable.
        owner: Dict[str, int] = {}
        for prop in structure.edges():
            group = {prop.id, *prop.participants()}
            for i, part in enumerate(partition.parts):
                if group <= set(part):
                    owner[prop.id] = i
                    break
        self.parts: List[MarketState] = []
        for i, part in enumerate(partition.parts):
            sub = CarrollStructure(outcome_cap=structure.outcome_cap)
            for pid in part:
                prop = structure[pid]
                if prop.is_atomic or owner.get(pid) != i:
                    sub.add_atomic(prop.label, ident=pid)
                elif prop.is_hyper:
                    sub.add_hyper_nand(prop.members, ident=pid, label=prop.label)
                else:
                    sub.add_paired(prop.source, prop.target, prop.relation, ident=pid, label=prop.label)
            self.parts.append(MarketState.from_structure(sub, b, init=init))

        self._links = partition.intersections()
        self._neighbors: Dict[int, List[int]] = {i: [] for i in range(len(self.parts))}
        for (i, j) in self._links:
            self._neighbors[i].append(j)
            self._neighbors[j].append(i)
        for i in self._neighbors:
            self._neighbors[i].sort()

        for tid, cash in (traders or {}).items():
            self.add_trader(tid, cash)

    @classmethod
    def from_tree(
        cls,
        structure: CarrollStructure,
        b: float,
        M: int,
        init: str = "phi",
        traders: Optional[Dict[str, float]] = None,
    ) -> "SegmentedMarket":
        return cls(structure, partition_tree(structure, M), b, init=init, traders=traders)

    # -- accounts ------------------------------------------------------------

    def add_trader(self, trader: str, cash: float) -> None:
        if trader in self.accounts:
            raise ValueError(f"trader {trader!r} already exists")
        self.accounts[trader] = TraderAccount(cash=float(cash))

    # -- pricing ---------------------------------------------------------------

    def home_part(self, security: Security) -> int:
        ids = {pid for pid, _ in security.literals}
        for i, part in enumerate(self.partition.parts):
            if ids <= set(part):
                return i
        raise CrossPartSecurity(
            f"security {security} does not fit in any single part"
        )

    def price(self, security: Security) -> float:
        return self.parts[self.home_part(security)].price(security)

    def price_literal(self, ident: str, value: bool = True) -> float:
        return self.price(Security.of([(ident, value)]))

    def link_gaps(self) -> Dict[Tuple[int, int, str], float]:
        out = {}
        for (i, j), links in self._links.items():
            for pid in links:
                out[(i, j, pid)] = abs(
                    self.parts[i].price_literal(pid) - self.parts[j].price_literal(pid)
                )
        return out

    def total_outcome_count(self) -> int:
        return sum(len(p.outcomes) for p in self.parts)

    # -- trading -----------------------------------------------------------

    def _raw_apply(self, part_idx: int, security: Security, shares: float) -> Tuple[float, float, float]:
        """Uncredited share application in one part; returns (cost_delta, p_before, p_after)."""
        part = self.parts[part_idx]
        mask = part._checked_mask(security)
        m, s_in, s_out = kernels.masked_sums(part.q, part.b, mask)
        before = part.b * (m + math.log(s_in + s_out))
        p_before = s_in / (s_in + s_out)
        kernels.apply_delta(part.q, mask, shares)
        m2, s_in2, s_out2 = kernels.masked_sums(part.q, part.b, mask)
        after = part.b * (m2 + math.log(s_in2 + s_out2))
        p_after = s_in2 / (s_in2 + s_out2)
        return after - before, p_before, p_after

    def _reconcile_from(self, home: int) -> None:
        visited = {home}
        queue = [home]
        while queue:
            i = queue.pop(0)
            for j in self._neighbors[i]:
                if j in visited:
                    continue
                links = self._links[(i, j) if i < j else (j, i)]
                for pid in links:
                    target = self.parts[i].price_literal(pid)
                    delta = self.parts[j].buy_to_price(Security.yes(pid), target)
                    self._raw_apply(j, Security.yes(pid), delta)
                    self.phantom_log.append((j, Security.yes(pid), delta))
                visited.add(j)
                queue.append(j)

    def execute_trade(self, trader: str, security: Security, shares: float) -> TradeReceipt:
        try:
            account = self.accounts[trader]
        except KeyError:
            raise SegmentationError(f"unknown trader {trader!r}") from None
        home = self.home_part(security)
        shares = float(shares)
        if shares < 0:
            held = account.holdings.get(security, 0.0)
            if held < -shares - 1e-9:
                raise InsufficientHoldings(
                    f"{trader} holds {held:.6g} of {security}, cannot sell {-shares:.6g}"
                )
        cost_delta, p_before, p_after = self._raw_apply(home, security, shares)
        if shares > 0 and account.cash < cost_delta - 1e-9:
            self._raw_apply(home, security, -shares)  # roll back
            raise InsufficientCash(
                f"{trader} has {account.cash:.6g}, trade costs {cost_delta:.6g}"
            )
        self.parts[home].maker_cash_in += cost_delta
        account.cash -= cost_delta
        held = account.holdings.get(security, 0.0) + shares
        if held == 0.0:
            account.holdings.pop(security, None)
        else:
            account.holdings[security] = held
        self._reconcile_from(home)
        return TradeReceipt(
            trader=trader,
            security=security,
            shares=shares,
            cash_delta=-cost_delta,
            price_before=p_before,
            price_after=p_after,
        )

    # -- portfolio value ----------------------------------------------------------

    def clone(self) -> "SegmentedMarket":
        out = object.__new__(SegmentedMarket)
        out.structure = self.structure
        out.partition = self.partition
        out.b = self.b
        out.init_convention = self.init_convention
        out.accounts = {
            tid: TraderAccount(cash=a.cash, holdings=dict(a.holdings))
            for tid, a in self.accounts.items()
        }
        out.phantom_log = list(self.phantom_log)
        out.parts = [p.clone() for p in self.parts]
        out._links = self._links
        out._neighbors = self._neighbors
        return out

    def liquidation_value(self, trader: str) -> float:
        """Cash received selling the whole portfolio back, link-reconciled."""
        if trader not in self.accounts:
            raise SegmentationError(f"unknown trader {trader!r}")
        sandbox = self.clone()
        received = 0.0
        for security, shares in list(sandbox.accounts[trader].holdings.items()):
            receipt = sandbox.execute_trade(trader, security, -shares)
            received += receipt.cash_delta
        return received


# -- differential and cyclic instrumentation ---------------------------------


@dataclass
class DivergenceReport:
    per_trade_max_price_gap: List[float]
    max_price_gap: float
    final_liquidation_gap: Dict[str, float]
    max_liquidation_gap: float
    max_link_gap: float
    phantom_log_size: int

    def to_dict(self) -> dict:
        return {
            "per_trade_max_price_gap": self.per_trade_max_price_gap,
            "max_price_gap": self.max_price_gap,
            "final_liquidation_gap": self.final_liquidation_gap,
            "max_liquidation_gap": self.max_liquidation_gap,
            "max_link_gap": self.max_link_gap,
            "phantom_log_size": self.phantom_log_size,
        }


def compare_exact(
    seg: SegmentedMarket, exact: MarketState, script: Sequence[ScriptTrade]
) -> DivergenceReport:
    """Run one trade script on both markets and report their divergence."""
    gaps: List[float] = []
    max_link_gap = 0.0
    for step, trade in enumerate(script):
        try:
            seg.execute_trade(trade.trader, trade.security, trade.shares)
            exact.execute_trade(trade.trader, trade.security, trade.shares)
        except Exception as exc:  # noqa: BLE001 - rewrapped with context
            raise ScriptError(f"script step {step} ({trade}) failed: {exc}") from exc
        worst = max(
            abs(seg.price_literal(pid) - exact.price_literal(pid))
            for pid in exact.structure.ids
        )
        gaps.append(worst)
        link_worst = max(seg.link_gaps().values(), default=0.0)
        max_link_gap = max(max_link_gap, link_worst)
    liq = {
        trader: abs(seg.liquidation_value(trader) - exact.liquidation_value(trader))
        for trader in exact.accounts
    }
    return DivergenceReport(
        per_trade_max_price_gap=gaps,
        max_price_gap=max(gaps, default=0.0),
        final_liquidation_gap=liq,
        max_liquidation_gap=max(liq.values(), default=0.0),
        max_link_gap=max_link_gap,
        phantom_log_size=len(seg.phantom_log),
    )


@dataclass
class IterationReport:
    pair: Tuple[int, int]
    links: Tuple[str, str]
    trace: List[Tuple[float, float]]
    converged: bool
    iterations_used: int

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "links": list(self.links),
            "trace": [list(row) for row in self.trace],
            "converged": self.converged,
            "iterations_used": self.iterations_used,
        }


def iterate_cycles(
    seg: SegmentedMarket, tolerance: float = 1e-9, max_iterations: int = 50
) -> List[IterationReport]:
    """Alternately re-equalize doubly-linked part pairs; report gap traces.

    Convergence is not guaranteed; hitting max_iterations is a reported
    outcome, not an error.
    """
    pairs = seg.partition.cyclic_pairs()
    if not pairs:
        raise NoCycle("no part pair shares two or more linking propositions")
    reports = []
    for (i, j) in pairs:
        links = seg._links[(i, j)][:2]
        trace: List[Tuple[float, float]] = []
        converged = False
        used = 0
        for it in range(max_iterations):
            gap_pair = tuple(
                abs(seg.parts[i].price_literal(pid) - seg.parts[j].price_literal(pid))
                for pid in links
            )
            trace.append(gap_pair)
            if max(gap_pair) < tolerance:
                converged = True
                break
            used = it + 1
            src, dst = (i, j) if it % 2 == 0 else (j, i)
            for pid in links:
                target = seg.parts[src].price_literal(pid)
                delta = seg.parts[dst].buy_to_price(Security.yes(pid), target)
                seg._raw_apply(dst, Security.yes(pid), delta)
                seg.phantom_log.append((dst, Security.yes(pid), delta))
        else:
            gap_pair = tuple(
                abs(seg.parts[i].price_literal(pid) - seg.parts[j].price_literal(pid))
                for pid in links
            )
            trace.append(gap_pair)
            converged = max(gap_pair) < tolerance
        reports.append(
            IterationReport(
                pair=(i, j),
                links=(links[0], links[1]),
                trace=trace,
                converged=converged,
                iterations_used=used,
            )
        )
    return reports


def random_script(
    ids: Sequence[str],
    traders: Sequence[str],
    n: int,
    rng: np.random.Generator,
    max_shares: float = 1.0,
) -> List[ScriptTrade]:
    """Seeded random single-literal trade script (PRNG: numpy PCG64).

    Sells are only generated against shares the script itself has bought,
    so the script is valid on any fresh market with solvent traders.
    """
    held: Dict[Tuple[str, str], float] = {}
    script = []
    for _ in range(n):
        trader = traders[int(rng.integers(len(traders)))]
        pid = ids[int(rng.integers(len(ids)))]
        shares = float(rng.uniform(0.05, max_shares))
        if rng.random() < 0.4 and held.get((trader, pid), 0.0) > 0.0:
            shares = -min(shares, held[(trader, pid)])
        held[(trader, pid)] = held.get((trader, pid), 0.0) + shares
        script.append(ScriptTrade(trader, Security.yes(pid), shares))
    return script
