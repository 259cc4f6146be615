"""Scenario runner and deterministic machine-readable reports.

run() executes a scenario's script sequentially on a fresh market, aborts
on the first hard error (flagging the partial report), and always appends
an invariant-check summary covering price normalization, the per-outcome
share identity, cash conservation, and the maker solvency bound.

Reports serialize through canonical_json: sorted keys, floats rounded to
12 significant digits, no whitespace variation, so that a replay with the
same seed is byte-identical.  The only randomness is the scenario seed,
consumed by a numpy PCG64 generator that is named in the report.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Dict, List, Optional

import numpy as np

from .engine import MarketState, Security
from .errors import CarrollError
from .leverage import (
    AttackConfig,
    ExtractionParams,
    capital_extraction_attack,
    restake,
    ria_sweep,
)
from .mutation import add_atomic_live, add_edge_golden_ratio, add_edge_negative_init
from .scenario import (
    AttackVerb,
    GrowAtomicVerb,
    GrowEdgeNegVerb,
    GrowEdgePhiVerb,
    QuoteVerb,
    RandomTradesVerb,
    ResolveVerb,
    RestakeVerb,
    Scenario,
    SnapshotVerb,
    TradeVerb,
)
from .structure import Relation

PRNG_NAME = "numpy-PCG64"
SOLVENCY_EXHAUSTIVE_LIMIT = 64


def canonical_json(obj) -> str:
    """Sorted-key JSON with floats at 12 significant digits."""
    import json

    def norm(x):
        if isinstance(x, bool):
            return x
        if isinstance(x, (np.floating, float)):
            x = float(x)
            if not math.isfinite(x):
                return repr(x)
            return float(f"{x:.12g}")
        if isinstance(x, (np.integer, int)):
            return int(x)
        if isinstance(x, dict):
            return {str(k): norm(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [norm(v) for v in x]
        return x

    return json.dumps(norm(obj), sort_keys=True, separators=(",", ":")) + "\n"


def _receipt_dict(receipt) -> dict:
    return {
        "trader": receipt.trader,
        "security": str(receipt.security),
        "shares": receipt.shares,
        "cash_delta": receipt.cash_delta,
        "price_before": receipt.price_before,
        "price_after": receipt.price_after,
    }


def solvency_summary(market: MarketState) -> dict:
    bound = market.worst_case_loss()
    if market.closed:
        loss = market.payouts_total - market.maker_cash_in
        return {"checked": True, "mode": "realized", "worst_loss": loss,
                "bound": bound, "ok": loss <= bound + 1e-9}
    if len(market.outcomes) <= SOLVENCY_EXHAUSTIVE_LIMIT:
        worst = max(
            market.hypothetical_payout(i) for i in range(len(market.outcomes))
        ) - market.maker_cash_in
        return {"checked": True, "mode": "exhaustive", "worst_loss": worst,
                "bound": bound, "ok": worst <= bound + 1e-9}
    return {"checked": False, "mode": "skipped", "worst_loss": None, "bound": bound, "ok": True}


def invariant_summary(market: MarketState, initial_total_cash: float) -> dict:
    solvency = solvency_summary(market)
    normalization = market.normalization_gap()
    identity = market.share_identity_gap()
    conservation = market.cash_conservation_gap(initial_total_cash)
    ok = (
        normalization <= 1e-9
        and identity <= 1e-9
        and conservation <= 1e-9
        and solvency["ok"]
    )
    return {
        "normalization_gap": normalization,
        "share_identity_gap": identity,
        "cash_conservation_gap": conservation,
        "solvency": solvency,
        "ok": ok,
    }


def run(scenario: Scenario, seed: Optional[int] = None) -> dict:
    seed = scenario.seed if seed is None else seed
    rng = np.random.Generator(np.random.PCG64(seed))
    market = MarketState.from_structure(
        scenario.structure.copy(), scenario.b, init=scenario.init, traders=dict(scenario.traders)
    )
    initial_total_cash = sum(scenario.traders.values())
    receipts: List[dict] = []
    quote_targets: List[Security] = []
    aborted = False
    error = None

    for index, verb in enumerate(scenario.script):
        try:
            if isinstance(verb, TradeVerb):
                receipt = market.execute_trade(verb.trader, Security.of(verb.literals), verb.shares)
                receipts.append({"verb": "trade", **_receipt_dict(receipt)})
            elif isinstance(verb, GrowAtomicVerb):
                receipt = add_atomic_live(market, verb.ident, verb.payer, ident=verb.ident)
                receipts.append({"verb": "grow-atomic", **dataclasses.asdict(receipt)})
            elif isinstance(verb, GrowEdgeNegVerb):
                receipt = add_edge_negative_init(
                    market, verb.source, verb.target, Relation(verb.kind), verb.K,
                    verb.payer, ident=verb.ident,
                )
                receipts.append({"verb": "grow-edge-neg", **dataclasses.asdict(receipt)})
            elif isinstance(verb, GrowEdgePhiVerb):
                receipt = add_edge_golden_ratio(
                    market, verb.source, verb.target, verb.payer, ident=verb.ident
                )
                receipts.append({"verb": "grow-edge-phi", **dataclasses.asdict(receipt)})
            elif isinstance(verb, RestakeVerb):
                event = restake(market, verb.trader, verb.a, verb.r, verb.b, verb.cash, verb.mode)
                receipts.append({"verb": "restake", **event.to_dict()})
            elif isinstance(verb, QuoteVerb):
                security = Security.of(verb.literals)
                if security not in quote_targets:
                    quote_targets.append(security)
                receipts.append(
                    {"verb": "quote", "security": str(security), "price": market.price(security)}
                )
            elif isinstance(verb, SnapshotVerb):
                receipts.append({"verb": "snapshot", "snapshot": market.snapshot()})
            elif isinstance(verb, ResolveVerb):
                payouts = market.resolve(dict(verb.values))
                receipts.append({"verb": "resolve", "payouts": payouts})
            elif isinstance(verb, RandomTradesVerb):
                trades = _random_trades(market, rng, verb.count, verb.max_shares)
                receipts.append({"verb": "randomtrades", "count": verb.count, "trades": trades})
            elif isinstance(verb, AttackVerb):
                receipts.append({"verb": f"attack-{verb.mode}", "report": _run_attack(verb, seed)})
            else:  # pragma: no cover - parser emits only known verbs
                raise CarrollError(f"unhandled verb {verb!r}")
        except CarrollError as exc:
            aborted = True
            error = {"verb_index": index, "type": type(exc).__name__, "message": str(exc)}
            break

    report = {
        "format": "carrollmkt-report-1",
        "seed": seed,
        "prng": PRNG_NAME,
        "b": scenario.b,
        "init": scenario.init,
        "aborted": aborted,
        "error": error,
        "receipts": receipts,
        "final_quotes": {str(s): market.price(s) for s in quote_targets},
        "ledger": {
            tid: {
                "cash": acct.cash,
                "holdings": {str(s): x for s, x in acct.holdings.items()},
            }
            for tid, acct in sorted(market.accounts.items())
        },
        "maker_cash_in": market.maker_cash_in,
        "payouts_total": market.payouts_total,
        "invariants": invariant_summary(market, initial_total_cash),
    }
    return report


def _random_trades(market: MarketState, rng: np.random.Generator, count: int, max_shares: float) -> List[dict]:
    traders = sorted(market.accounts)
    ids = market.structure.ids
    out = []
    for _ in range(count):
        trader = traders[int(rng.integers(len(traders)))]
        pid = ids[int(rng.integers(len(ids)))]
        security = Security.yes(pid)
        shares = float(rng.uniform(0.05, max_shares))
        held = market.accounts[trader].holdings.get(security, 0.0)
        if rng.random() < 0.4 and held > 0.0:
            shares = -min(shares, held)
        receipt = market.execute_trade(trader, security, shares)
        out.append(_receipt_dict(receipt))
    return out


def _run_attack(verb: AttackVerb, seed: int) -> dict:
    opts = verb.options
    if verb.mode == "ria":
        return ria_sweep(
            c=float(opts.get("c", "2.0")),
            grid=int(opts.get("grid", "5")),
            seed=int(opts.get("seed", str(seed))),
            b=float(opts.get("b", "1.0")),
            init=opts.get("init", "zero"),
        )
    defaults = ExtractionParams()
    params = ExtractionParams(
        balice_a_cash=float(opts.get("balice", defaults.balice_a_cash)),
        alice_a_cash=float(opts.get("alice_a", defaults.alice_a_cash)),
        alice_r_cash=float(opts.get("alice_r", defaults.alice_r_cash)),
        crowd_a_cash=float(opts.get("crowd_a", defaults.crowd_a_cash)),
        crowd_b_cash=float(opts.get("crowd_b", defaults.crowd_b_cash)),
        mode=opts.get("mode", "burn"),
        restake_enabled=opts.get("restake", "on") != "off",
        b=float(opts.get("b", "1.0")),
        init=opts.get("init", "zero"),
        seed=int(opts.get("seed", str(seed))),
    )
    return capital_extraction_attack(params=params).to_dict()
