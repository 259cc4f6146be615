"""Independent reference implementations used to pin expected values.

Deliberately share nothing with the package internals: assignments are
enumerated with itertools over plain dicts, and market quantities are
evaluated with mpmath at 50 decimal digits.  Structures are described by
plain tuples:

    ("atomic", id)
    ("edge", id, kind, source, target)      kind: nand|support|equivalence
    ("hyper", id, (m1, m2, m3, ...))
"""

import itertools
from typing import Dict, List, Sequence, Tuple

import mpmath

mpmath.mp.dps = 50

PropSpec = Tuple


def spec_ids(props: Sequence[PropSpec]) -> List[str]:
    return [p[1] for p in props]


def constraint_ok(values: Dict[str, bool], spec: PropSpec) -> bool:
    if spec[0] == "edge":
        _, rid, kind, source, target = spec
        r, b, a = values[rid], values[source], values[target]
        if kind == "nand":
            return not (r and a and b)
        if kind == "support":
            return a or (not b) or (not r)
        if kind == "equivalence":
            return (not r) or (a == b)
        raise ValueError(kind)
    if spec[0] == "hyper":
        _, rid, members = spec
        return not (values[rid] and all(values[m] for m in members))
    return True


def feasible_assignments(props: Sequence[PropSpec]) -> List[Dict[str, bool]]:
    """All satisfying assignments, lexicographic in (insertion order, F<T)."""
    ids = spec_ids(props)
    out = []
    for bits in itertools.product([False, True], repeat=len(ids)):
        values = dict(zip(ids, bits))
        if all(constraint_ok(values, p) for p in props):
            out.append(values)
    return out


def lmsr_cost(q: Sequence[float], b: float) -> mpmath.mpf:
    b = mpmath.mpf(b)
    return b * mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(x) / b) for x in q))


def lmsr_price(q: Sequence[float], b: float, members: Sequence[int]) -> mpmath.mpf:
    b = mpmath.mpf(b)
    total = mpmath.fsum(mpmath.exp(mpmath.mpf(x) / b) for x in q)
    part = mpmath.fsum(mpmath.exp(mpmath.mpf(q[i]) / b) for i in members)
    return part / total


def trade_cost(q: Sequence[float], b: float, members: Sequence[int], shares: float) -> mpmath.mpf:
    q2 = list(q)
    for i in members:
        q2[i] += shares
    return lmsr_cost(q2, b) - lmsr_cost(q, b)


def security_members(assignments: List[Dict[str, bool]], literals) -> List[int]:
    return [
        i
        for i, values in enumerate(assignments)
        if all(values[pid] == val for pid, val in literals)
    ]
