"""Proposition networks with contestable logical edges.

A structure holds an ordered set of propositions.  A proposition is either
atomic or *paired*: an ordered (source, target) pair carrying a logical
relation.  Paired propositions ("edges") are themselves truth-valued and
tradeable; the relation constrains the joint truth values of the edge and
its endpoints:

    nand         r on (B, A): forbids A and B and r
    support      r on (B, A): allows only (A or not B or not r)
    equivalence  r on (B, A): allows only (not r) or (A == B)
    hyper-nand   r on {A, B, C, ...}: forbids r and all members

The truth assignments satisfying every active constraint form the outcome
space used by the market engine.  Enumeration order is canonical:
lexicographic in proposition insertion order with False < True, so equal
structures always enumerate to identical ordered outcome lists.

Structures are plain mutable objects; callers needing concurrent access
must hold them exclusively while mutating.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import (
    DuplicateId,
    NonAtomicSource,
    OutcomeSpaceTooLarge,
    SelfReference,
    StructureError,
    UnknownEndpoint,
)

DEFAULT_OUTCOME_CAP = 1 << 20

#: A full truth assignment, proposition id -> bool.
Assignment = Dict[str, bool]


class Relation(str, Enum):
    NAND = "nand"
    SUPPORT = "support"
    EQUIVALENCE = "equivalence"
    HYPER_NAND = "hyper-nand"

    @classmethod
    def binary(cls, name: str) -> "Relation":
        rel = cls(name)
        if rel is cls.HYPER_NAND:
            raise StructureError("hyper-nand is not a binary relation")
        return rel


@dataclass(frozen=True)
class Proposition:
    id: str
    label: str
    relation: Optional[Relation] = None
    source: Optional[str] = None
    target: Optional[str] = None
    members: Tuple[str, ...] = ()

    @property
    def is_atomic(self) -> bool:
        return self.relation is None

    @property
    def is_hyper(self) -> bool:
        return self.relation is Relation.HYPER_NAND

    def participants(self) -> Tuple[str, ...]:
        """Ids whose truth values this proposition's constraint reads."""
        if self.is_atomic:
            return ()
        if self.is_hyper:
            return self.members
        return (self.source, self.target)

    def satisfied_by(self, values: Assignment) -> bool:
        """Evaluate this proposition's constraint on one assignment."""
        if self.is_atomic:
            return True
        r = values[self.id]
        if self.is_hyper:
            return not (r and all(values[m] for m in self.members))
        b, a = values[self.source], values[self.target]
        if self.relation is Relation.NAND:
            return not (r and a and b)
        if self.relation is Relation.SUPPORT:
            return a or (not b) or (not r)
        return (not r) or (a == b)  # equivalence


class CarrollStructure:
    """Ordered proposition set plus the edge constraints it induces."""

    def __init__(self, outcome_cap: int = DEFAULT_OUTCOME_CAP):
        self.outcome_cap = outcome_cap
        self._props: List[Proposition] = []
        self._index: Dict[str, int] = {}

    # -- basic access --------------------------------------------------

    def __len__(self) -> int:
        return len(self._props)

    def __contains__(self, ident: str) -> bool:
        return ident in self._index

    def __getitem__(self, ident: str) -> Proposition:
        try:
            return self._props[self._index[ident]]
        except KeyError:
            raise UnknownEndpoint(f"unknown proposition {ident!r}") from None

    @property
    def propositions(self) -> Tuple[Proposition, ...]:
        return tuple(self._props)

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(p.id for p in self._props)

    def index_of(self, ident: str) -> int:
        if ident not in self._index:
            raise UnknownEndpoint(f"unknown proposition {ident!r}")
        return self._index[ident]

    def edges(self) -> Tuple[Proposition, ...]:
        return tuple(p for p in self._props if not p.is_atomic)

    # -- construction ---------------------------------------------------

    def _register(self, prop: Proposition) -> str:
        if prop.id in self._index:
            raise DuplicateId(f"proposition id {prop.id!r} already used")
        self._index[prop.id] = len(self._props)
        self._props.append(prop)
        return prop.id

    def add_atomic(self, label: str, ident: Optional[str] = None) -> str:
        if not label:
            raise StructureError("label must be non-empty")
        return self._register(Proposition(id=ident or label, label=label))

    def add_paired(
        self,
        source: str,
        target: str,
        relation: Relation,
        ident: Optional[str] = None,
        label: Optional[str] = None,
    ) -> str:
        if relation is Relation.HYPER_NAND:
            raise StructureError("use add_hyper_nand for hyperedges")
        if source == target:
            raise SelfReference(f"edge source and target are both {source!r}")
        if source not in self._index:
            raise UnknownEndpoint(f"unknown source {source!r}")
        if target not in self._index:
            raise UnknownEndpoint(f"unknown target {target!r}")
        if not self[source].is_atomic:
            raise NonAtomicSource(f"source {source!r} is not atomic")
        ident = ident or f"e{len(self._props)}"
        label = label or f"{relation.value}({source},{target})"
        return self._register(
            Proposition(id=ident, label=label, relation=relation, source=source, target=target)
        )

    def add_hyper_nand(
        self,
        members: Iterable[str],
        ident: Optional[str] = None,
        label: Optional[str] = None,
    ) -> str:
        members = tuple(members)
        if len(members) < 3:
            raise StructureError("hyperedge needs at least 3 members")
        if len(set(members)) != len(members):
            raise StructureError("hyperedge members must be distinct")
        for m in members:
            if m not in self._index:
                raise UnknownEndpoint(f"unknown member {m!r}")
            if not self[m].is_atomic:
                raise NonAtomicSource(f"hyperedge member {m!r} is not atomic")
        ident = ident or f"h{len(self._props)}"
        label = label or "nand(" + ",".join(members) + ")"
        return self._register(
            Proposition(id=ident, label=label, relation=Relation.HYPER_NAND, members=members)
        )

    def copy(self) -> "CarrollStructure":
        out = CarrollStructure(outcome_cap=self.outcome_cap)
        out._props = list(self._props)
        out._index = dict(self._index)
        return out

    # -- queries ---------------------------------------------------------

    def nesting_depth(self, ident: str) -> int:
        prop = self[ident]
        depth = 0
        while not prop.is_atomic and not prop.is_hyper:
            target = self[prop.target]
            if target.is_atomic or target.is_hyper:
                return depth + 1
            depth += 1
            prop = target
        return depth if prop.is_atomic else depth + 1

    def validation_warnings(self) -> List[str]:
        """Non-fatal oddities, currently chains of edges targeting edges."""
        warnings = []
        for p in self._props:
            if p.is_atomic or p.is_hyper:
                continue
            target = self[p.target]
            if not target.is_atomic and not target.is_hyper:
                inner = self[target.target]
                if not inner.is_atomic and not inner.is_hyper:
                    warnings.append(
                        f"edge {p.id!r} starts a nesting chain deeper than one level"
                    )
        return warnings

    def incidence_edges(self) -> List[Tuple[str, str]]:
        """Undirected graph edges: each paired proposition links to its participants."""
        out = []
        for p in self._props:
            for other in p.participants():
                out.append((other, p.id))
        return out

    def is_tree(self) -> bool:
        """True iff the proposition incidence graph is acyclic (a forest)."""
        parent = {pid: pid for pid in self._index}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.incidence_edges():
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def constraint_groups(self) -> List[Tuple[str, ...]]:
        """Each edge with the participants its constraint reads, edge first."""
        return [(p.id,) + p.participants() for p in self._props if not p.is_atomic]

    # -- outcome enumeration ----------------------------------------------

    def enumerate_outcomes(self) -> "OutcomeSpace":
        n = len(self._props)
        if (1 << n) > self.outcome_cap:
            raise OutcomeSpaceTooLarge(
                f"2^{n} candidate assignments exceed the cap of {self.outcome_cap}"
            )
        codes = np.arange(1 << n, dtype=np.uint64)
        table = np.empty((1 << n, n), dtype=bool)
        for j in range(n):
            table[:, j] = (codes >> np.uint64(n - 1 - j)) & np.uint64(1)
        keep = np.ones(1 << n, dtype=bool)
        for p in self._props:
            if p.is_atomic:
                continue
            r = table[:, self._index[p.id]]
            if p.is_hyper:
                viol = r.copy()
                for m in p.members:
                    viol &= table[:, self._index[m]]
                keep &= ~viol
            else:
                b = table[:, self._index[p.source]]
                a = table[:, self._index[p.target]]
                if p.relation is Relation.NAND:
                    keep &= ~(r & a & b)
                elif p.relation is Relation.SUPPORT:
                    keep &= a | ~b | ~r
                else:  # equivalence
                    keep &= ~r | (a == b)
        return OutcomeSpace(self.ids, table[keep], codes[keep])


class OutcomeSpace:
    """Feasible assignments of one structure, in canonical order.

    Rows of ``table`` are assignments; column order is proposition
    insertion order; ``codes`` are the lexicographic ranks of the rows in
    the unconstrained 2^n grid and are strictly increasing.
    """

    def __init__(self, prop_ids: Tuple[str, ...], table: np.ndarray, codes: np.ndarray):
        self.prop_ids = tuple(prop_ids)
        self.table = table
        self.codes = codes
        self._col_index = {pid: j for j, pid in enumerate(self.prop_ids)}

    def __len__(self) -> int:
        return self.table.shape[0]

    def column(self, ident: str) -> np.ndarray:
        try:
            return self.table[:, self._col_index[ident]]
        except KeyError:
            raise UnknownEndpoint(f"unknown proposition {ident!r}") from None

    def literal_mask(self, ident: str, value: bool) -> np.ndarray:
        col = self.column(ident)
        return col if value else ~col

    def conjunction_mask(self, literals: Iterable[Tuple[str, bool]]) -> np.ndarray:
        mask = np.ones(len(self), dtype=bool)
        for ident, value in literals:
            mask &= self.literal_mask(ident, value)
        return mask

    def assignment(self, i: int) -> Assignment:
        row = self.table[i]
        return {pid: bool(row[j]) for j, pid in enumerate(self.prop_ids)}

    def assignments(self) -> List[Assignment]:
        return [self.assignment(i) for i in range(len(self))]

    def index_of(self, values: Assignment) -> int:
        """Row index of a full assignment; raises KeyError if infeasible."""
        missing = [pid for pid in self.prop_ids if pid not in values]
        if missing:
            raise KeyError(f"assignment missing propositions {missing}")
        code = 0
        n = len(self.prop_ids)
        for j, pid in enumerate(self.prop_ids):
            if values[pid]:
                code |= 1 << (n - 1 - j)
        pos = int(np.searchsorted(self.codes, np.uint64(code)))
        if pos >= len(self) or int(self.codes[pos]) != code:
            raise KeyError("assignment violates the structure's constraints")
        return pos
