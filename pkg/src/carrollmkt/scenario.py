"""Scenario files: a line-oriented format driving every module.

Example::

    # structure
    atomic A "school starts at 9am"
    atomic B
    edge r nand B A
    hyperedge h nand A B C        # needs C declared first

    # market
    market b=1.0 init=zero
    trader alice cash=100
    seed 42

    # optional manual partition override (used by compare-segmentation)
    part A r B
    part B s C

    # script
    trade alice 2.5 A !B
    grow atomic C payer=alice
    grow edge-neg s nand A C K=10 payer=alice
    grow edge-phi t A C payer=alice
    restake alice A r B cash=0.5 mode=unfunded
    randomtrades 20 max_shares=1.0
    quote A !B
    snapshot
    resolve A=T B=F r=F

    attack extract mode=burn
    attack ria c=2 grid=5

Ids must be declared before use (grow verbs declare their new id at that
point in the script); unknown verbs are errors.  All parse problems are
collected and raised together as ParseError with line numbers.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import ParseError
from .structure import CarrollStructure, Relation

_EDGE_KINDS = {"nand", "support", "equivalence"}


@dataclass
class TradeVerb:
    trader: str
    shares: float
    literals: Tuple[Tuple[str, bool], ...]


@dataclass
class GrowAtomicVerb:
    ident: str
    payer: str


@dataclass
class GrowEdgeNegVerb:
    ident: str
    kind: str
    source: str
    target: str
    K: float
    payer: str


@dataclass
class GrowEdgePhiVerb:
    ident: str
    source: str
    target: str
    payer: str


@dataclass
class RestakeVerb:
    trader: str
    a: str
    r: str
    b: str
    cash: float
    mode: str


@dataclass
class QuoteVerb:
    literals: Tuple[Tuple[str, bool], ...]


@dataclass
class SnapshotVerb:
    pass


@dataclass
class ResolveVerb:
    values: Dict[str, bool]


@dataclass
class RandomTradesVerb:
    count: int
    max_shares: float = 1.0


@dataclass
class AttackVerb:
    mode: str  # "ria" | "extract"
    options: Dict[str, str] = field(default_factory=dict)


@dataclass
class Scenario:
    structure: CarrollStructure
    b: float
    init: str
    traders: Dict[str, float]
    seed: int
    script: List[object]
    parts: Optional[List[Tuple[str, ...]]] = None


def _kv(token: str) -> Tuple[str, str]:
    if "=" not in token:
        raise ValueError(f"expected key=value, got {token!r}")
    key, value = token.split("=", 1)
    return key, value


def _literal(token: str, declared: set) -> Tuple[str, bool]:
    value = not token.startswith("!")
    ident = token if value else token[1:]
    if ident not in declared:
        raise ValueError(f"undeclared proposition {ident!r}")
    return ident, value


def parse_scenario(text: str) -> Scenario:
    structure = CarrollStructure()
    declared: set = set()
    traders: Dict[str, float] = {}
    b = 1.0
    init = "zero"
    seed = 0
    script: List[object] = []
    parts: List[Tuple[str, ...]] = []
    errors: List[Tuple[int, str]] = []

    def fail(line_no: int, message: str) -> None:
        errors.append((line_no, message))

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            fail(line_no, f"bad quoting: {exc}")
            continue
        verb, args = tokens[0], tokens[1:]
        try:
            if verb == "atomic":
                ident = args[0]
                label = args[1] if len(args) > 1 else ident
                structure.add_atomic(label, ident=ident)
                declared.add(ident)
            elif verb == "edge":
                ident, kind, source, target = args
                if kind not in _EDGE_KINDS:
                    raise ValueError(f"unknown edge kind {kind!r}")
                structure.add_paired(source, target, Relation(kind), ident=ident)
                declared.add(ident)
            elif verb == "hyperedge":
                ident, kind, *members = args
                if kind != "nand":
                    raise ValueError(f"unknown hyperedge kind {kind!r}")
                structure.add_hyper_nand(members, ident=ident)
                declared.add(ident)
            elif verb == "market":
                for token in args:
                    key, value = _kv(token)
                    if key == "b":
                        b = float(value)
                    elif key == "init":
                        if value not in ("zero", "phi"):
                            raise ValueError(f"unknown init {value!r}")
                        init = value
                    else:
                        raise ValueError(f"unknown market option {key!r}")
            elif verb == "trader":
                name = args[0]
                opts = dict(_kv(t) for t in args[1:])
                traders[name] = float(opts.pop("cash", "0"))
                if opts:
                    raise ValueError(f"unknown trader options {sorted(opts)}")
            elif verb == "seed":
                seed = int(args[0])
            elif verb == "part":
                for pid in args:
                    if pid not in declared:
                        raise ValueError(f"undeclared proposition {pid!r}")
                parts.append(tuple(args))
            elif verb == "trade":
                trader, shares, *lits = args
                if trader not in traders:
                    raise ValueError(f"undeclared trader {trader!r}")
                if not lits:
                    raise ValueError("trade needs at least one literal")
                script.append(
                    TradeVerb(trader, float(shares), tuple(_literal(t, declared) for t in lits))
                )
            elif verb == "grow":
                mode, *rest = args
                if mode == "atomic":
                    ident, payer_kv = rest
                    key, payer = _kv(payer_kv)
                    if key != "payer" or payer not in traders:
                        raise ValueError(f"bad payer {payer_kv!r}")
                    if ident in declared:
                        raise ValueError(f"id {ident!r} already declared")
                    declared.add(ident)
                    script.append(GrowAtomicVerb(ident, payer))
                elif mode == "edge-neg":
                    ident, kind, source, target, *opts = rest
                    if kind not in _EDGE_KINDS:
                        raise ValueError(f"unknown edge kind {kind!r}")
                    for pid in (source, target):
                        if pid not in declared:
                            raise ValueError(f"undeclared proposition {pid!r}")
                    opts = dict(_kv(t) for t in opts)
                    payer = opts.pop("payer", None)
                    K = float(opts.pop("K", "10"))
                    if payer not in traders:
                        raise ValueError(f"bad payer {payer!r}")
                    if opts:
                        raise ValueError(f"unknown options {sorted(opts)}")
                    if ident in declared:
                        raise ValueError(f"id {ident!r} already declared")
                    declared.add(ident)
                    script.append(GrowEdgeNegVerb(ident, kind, source, target, K, payer))
                elif mode == "edge-phi":
                    ident, source, target, payer_kv = rest
                    key, payer = _kv(payer_kv)
                    if key != "payer" or payer not in traders:
                        raise ValueError(f"bad payer {payer_kv!r}")
                    for pid in (source, target):
                        if pid not in declared:
                            raise ValueError(f"undeclared proposition {pid!r}")
                    if ident in declared:
                        raise ValueError(f"id {ident!r} already declared")
                    declared.add(ident)
                    script.append(GrowEdgePhiVerb(ident, source, target, payer))
                else:
                    raise ValueError(f"unknown grow mode {mode!r}")
            elif verb == "restake":
                trader, a, r, b_id, *opts = args
                if trader not in traders:
                    raise ValueError(f"undeclared trader {trader!r}")
                for pid in (a, r, b_id):
                    if pid not in declared:
                        raise ValueError(f"undeclared proposition {pid!r}")
                opts = dict(_kv(t) for t in opts)
                cash = float(opts.pop("cash", "0"))
                mode = opts.pop("mode", "unfunded")
                if mode not in ("unfunded", "burn"):
                    raise ValueError(f"unknown restake mode {mode!r}")
                if opts:
                    raise ValueError(f"unknown options {sorted(opts)}")
                script.append(RestakeVerb(trader, a, r, b_id, cash, mode))
            elif verb == "quote":
                if not args:
                    raise ValueError("quote needs at least one literal")
                script.append(QuoteVerb(tuple(_literal(t, declared) for t in args)))
            elif verb == "snapshot":
                script.append(SnapshotVerb())
            elif verb == "resolve":
                values = {}
                for token in args:
                    key, value = _kv(token)
                    if key not in declared:
                        raise ValueError(f"undeclared proposition {key!r}")
                    if value not in ("T", "F"):
                        raise ValueError(f"resolve values must be T or F, got {value!r}")
                    values[key] = value == "T"
                script.append(ResolveVerb(values))
            elif verb == "randomtrades":
                count = int(args[0])
                opts = dict(_kv(t) for t in args[1:])
                max_shares = float(opts.pop("max_shares", "1.0"))
                if opts:
                    raise ValueError(f"unknown options {sorted(opts)}")
                if not traders:
                    raise ValueError("randomtrades needs at least one declared trader")
                script.append(RandomTradesVerb(count, max_shares))
            elif verb == "attack":
                mode, *opts = args
                if mode not in ("ria", "extract"):
                    raise ValueError(f"unknown attack mode {mode!r}")
                script.append(AttackVerb(mode, dict(_kv(t) for t in opts)))
            else:
                raise ValueError(f"unknown verb {verb!r}")
        except (ValueError, IndexError) as exc:
            fail(line_no, str(exc) if str(exc) else f"malformed {verb!r} line")
        except Exception as exc:  # structure errors carry good messages
            fail(line_no, str(exc))

    if len(structure) == 0:
        errors.insert(0, (0, "missing structure block"))
    if errors:
        raise ParseError(errors)
    return Scenario(
        structure=structure,
        b=b,
        init=init,
        traders=traders,
        seed=seed,
        script=script,
        parts=parts or None,
    )
