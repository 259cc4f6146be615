import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carrollmkt.errors import (
    DuplicateId,
    NonAtomicSource,
    OutcomeSpaceTooLarge,
    SelfReference,
    UnknownEndpoint,
)
from carrollmkt.structure import CarrollStructure, Relation

from oracles import feasible_assignments


def nand_pair():
    s = CarrollStructure()
    s.add_atomic("A")
    s.add_atomic("B")
    s.add_paired("B", "A", Relation.NAND, ident="r")
    return s


def figure_structure():
    """Atoms A, B, C, R with edges r=(B,A), s=(C,A) and nested t=(R,r)."""
    s = CarrollStructure()
    for ident in ("A", "B", "C", "R"):
        s.add_atomic(ident)
    s.add_paired("B", "A", Relation.NAND, ident="r")
    s.add_paired("C", "A", Relation.NAND, ident="s")
    s.add_paired("R", "r", Relation.NAND, ident="t")
    return s


class TestCounts:
    def test_single_atomic_two_outcomes(self):
        s = CarrollStructure()
        s.add_atomic("A")
        assert len(s.enumerate_outcomes()) == 2

    def test_three_atomics_eight_outcomes(self):
        s = CarrollStructure()
        for ident in "ABC":
            s.add_atomic(ident)
        assert len(s.enumerate_outcomes()) == 8

    def test_nand_seven_outcomes(self):
        assert len(nand_pair().enumerate_outcomes()) == 7

    def test_nand_excludes_all_true(self):
        rows = nand_pair().enumerate_outcomes().assignments()
        assert {"A": True, "B": True, "r": True} not in rows

    def test_support_seven_outcomes(self):
        s = CarrollStructure()
        s.add_atomic("A")
        s.add_atomic("B")
        s.add_paired("B", "A", Relation.SUPPORT, ident="r")
        assert len(s.enumerate_outcomes()) == 7
        # the one excluded row: r and B true while A false
        rows = s.enumerate_outcomes().assignments()
        assert {"A": False, "B": True, "r": True} not in rows

    def test_equivalence_six_outcomes(self):
        s = CarrollStructure()
        s.add_atomic("A")
        s.add_atomic("B")
        s.add_paired("B", "A", Relation.EQUIVALENCE, ident="r")
        assert len(s.enumerate_outcomes()) == 6

    def test_hyper_nand_fifteen_of_sixteen(self):
        s = CarrollStructure()
        for ident in "ABC":
            s.add_atomic(ident)
        s.add_hyper_nand(["A", "B", "C"], ident="h")
        space = s.enumerate_outcomes()
        assert len(space) == 15
        oracle = feasible_assignments(
            [("atomic", "A"), ("atomic", "B"), ("atomic", "C"), ("hyper", "h", ("A", "B", "C"))]
        )
        assert space.assignments() == oracle

    def test_figure_structure_constructible(self):
        s = figure_structure()
        assert len(s) == 7
        assert s.is_tree()


class TestCanonicalOrder:
    def test_single_atomic_order(self):
        s = CarrollStructure()
        s.add_atomic("A")
        assert s.enumerate_outcomes().assignments() == [{"A": False}, {"A": True}]

    def test_matches_oracle_order(self):
        s = nand_pair()
        oracle = feasible_assignments(
            [("atomic", "A"), ("atomic", "B"), ("edge", "r", "nand", "B", "A")]
        )
        assert s.enumerate_outcomes().assignments() == oracle

    def test_deterministic(self):
        a = figure_structure().enumerate_outcomes()
        b = figure_structure().enumerate_outcomes()
        assert np.array_equal(a.table, b.table)
        assert np.array_equal(a.codes, b.codes)


@st.composite
def random_structures(draw):
    """Mixed random structures: 2-5 atoms, 0-3 edges of any kind."""
    n_atoms = draw(st.integers(2, 5))
    atoms = [f"P{i}" for i in range(n_atoms)]
    s = CarrollStructure()
    specs = [("atomic", a) for a in atoms]
    for a in atoms:
        s.add_atomic(a)
    n_edges = draw(st.integers(0, 3))
    for k in range(n_edges):
        kind = draw(st.sampled_from(["nand", "support", "equivalence"]))
        src = draw(st.sampled_from(atoms))
        dst = draw(st.sampled_from([a for a in atoms if a != src]))
        ident = f"e{k}"
        s.add_paired(src, dst, Relation(kind), ident=ident)
        specs.append(("edge", ident, kind, src, dst))
    return s, specs


class TestAgainstOracle:
    @settings(max_examples=60, deadline=None)
    @given(random_structures())
    def test_enumeration_matches_bruteforce(self, pair):
        s, specs = pair
        assert s.enumerate_outcomes().assignments() == feasible_assignments(specs)

    @settings(max_examples=60, deadline=None)
    @given(random_structures())
    def test_every_row_satisfies_every_constraint(self, pair):
        s, _ = pair
        for values in s.enumerate_outcomes().assignments():
            for prop in s.propositions:
                assert prop.satisfied_by(values)

    def test_isolated_edge_removal_fractions(self):
        # an isolated nand or support removes 1/8 of assignments, an
        # isolated equivalence removes 2/8
        for kind, kept in (("nand", 7), ("support", 7), ("equivalence", 6)):
            s = CarrollStructure()
            for ident in ("A", "B", "C", "D"):
                s.add_atomic(ident)
            s.add_paired("A", "B", Relation(kind), ident="e1")
            s.add_paired("C", "D", Relation(kind), ident="e2")
            # 2^(4+2) * (kept/8)^2
            assert len(s.enumerate_outcomes()) == 64 * kept * kept // 64


class TestValidation:
    def test_unknown_endpoint(self):
        s = CarrollStructure()
        s.add_atomic("A")
        with pytest.raises(UnknownEndpoint):
            s.add_paired("A", "Z", Relation.NAND)

    def test_non_atomic_source(self):
        s = nand_pair()
        s.add_atomic("C")
        with pytest.raises(NonAtomicSource):
            s.add_paired("r", "C", Relation.NAND)

    def test_self_reference(self):
        s = CarrollStructure()
        s.add_atomic("A")
        with pytest.raises(SelfReference):
            s.add_paired("A", "A", Relation.NAND)

    def test_duplicate_id(self):
        s = CarrollStructure()
        s.add_atomic("A")
        with pytest.raises(DuplicateId):
            s.add_atomic("A")

    def test_outcome_cap(self):
        s = CarrollStructure(outcome_cap=8)
        for ident in "ABCD":
            s.add_atomic(ident)
        with pytest.raises(OutcomeSpaceTooLarge):
            s.enumerate_outcomes()

    def test_hyperedge_needs_three_members(self):
        s = CarrollStructure()
        s.add_atomic("A")
        s.add_atomic("B")
        with pytest.raises(Exception):
            s.add_hyper_nand(["A", "B"])


class TestNestingWarnings:
    def test_single_nesting_is_silent(self):
        assert figure_structure().validation_warnings() == []

    def test_deep_chain_warns(self):
        s = figure_structure()
        s.add_atomic("X")
        s.add_paired("X", "t", Relation.NAND, ident="u")
        warnings = s.validation_warnings()
        assert len(warnings) == 1 and "u" in warnings[0]


class TestIsTree:
    def test_chain_is_tree(self):
        s = CarrollStructure()
        for ident in ("A", "B", "C"):
            s.add_atomic(ident)
        s.add_paired("B", "A", Relation.NAND, ident="r")
        s.add_paired("C", "A", Relation.NAND, ident="s")
        assert s.is_tree()

    def test_triangle_is_not_tree(self):
        s = CarrollStructure()
        for ident in ("A", "B", "C"):
            s.add_atomic(ident)
        s.add_paired("A", "B", Relation.NAND, ident="r")
        s.add_paired("B", "C", Relation.NAND, ident="s")
        s.add_paired("C", "A", Relation.NAND, ident="u")
        assert not s.is_tree()

    def test_figure_structure_with_nested_edge_is_tree(self):
        assert figure_structure().is_tree()

    def test_isolated_atoms_count_as_forest(self):
        s = CarrollStructure()
        s.add_atomic("A")
        s.add_atomic("B")
        assert s.is_tree()
