import pytest
from hypothesis import given
from hypothesis import strategies as st

from srlkit.data import (
    DEP,
    NULL_ROLE,
    RoleInventory,
    Sentence,
    Span,
    SrlGraph,
    SrlTuple,
    enumerate_arguments,
    enumerate_predicates,
)
from srlkit.errors import EmptySentence


class TestSpan:
    def test_width_and_overlap(self):
        assert Span(2, 4).width == 3
        assert Span(1, 1).width == 1
        assert Span(1, 3).overlaps(Span(3, 5))
        assert not Span(1, 2).overlaps(Span(3, 4))

    def test_rejects_reversed_and_nonpositive(self):
        with pytest.raises(ValueError):
            Span(3, 2)
        with pytest.raises(ValueError):
            Span(0, 1)


class TestRoleInventory:
    def test_from_observed_keeps_data_order_after_null(self):
        inv = RoleInventory.from_observed(["A1", "AM-TMP", "A0", "A1"])
        assert inv.labels == (NULL_ROLE, "A1", "AM-TMP", "A0")
        assert inv.core_labels == {"A1", "A0"}
        assert inv.index("AM-TMP") == 2
        assert inv.label(0) == NULL_ROLE

    def test_null_must_sit_at_zero_exactly_once(self):
        with pytest.raises(ValueError):
            RoleInventory(("A0", NULL_ROLE))
        with pytest.raises(ValueError):
            RoleInventory((NULL_ROLE, "A0", NULL_ROLE))

    def test_core_indices(self):
        inv = RoleInventory.from_observed(["AM-LOC", "A0"])
        assert inv.core_indices() == (2,)


class TestTuplesAndGraphs:
    def test_null_role_never_stored(self):
        with pytest.raises(ValueError):
            SrlTuple(1, Span(1, 1), NULL_ROLE)

    def test_graph_rejects_duplicate_pairs(self):
        t1 = SrlTuple(2, Span(1, 1), "A0")
        t2 = SrlTuple(2, Span(1, 1), "A1")
        with pytest.raises(ValueError):
            SrlGraph(frozenset({t1, t2}))

    def test_graph_predicates_derived(self):
        g = SrlGraph(frozenset({SrlTuple(2, Span(1, 1), "A0"),
                                SrlTuple(4, Span(3, 3), "A1")}))
        assert g.predicates == {2, 4}


class TestSentence:
    def test_char_seqs_default_to_characters(self):
        s = Sentence.make(["ab", "c"])
        assert s.char_seqs == (("a", "b"), ("c",))

    def test_dep_mode_requires_single_token_arguments(self):
        with pytest.raises(ValueError):
            Sentence.make(["a", "b", "c"], [(2, 1, 2, "A0")], mode=DEP)
        s = Sentence.make(["a", "b", "c"], [(2, 1, 1, "A0")], mode=DEP)
        assert len(s.gold_tuples) == 1

    def test_tuple_indices_must_fit(self):
        with pytest.raises(ValueError):
            Sentence.make(["a", "b"], [(3, 1, 1, "A0")])
        with pytest.raises(ValueError):
            Sentence.make(["a", "b"], [(1, 1, 3, "A0")])

    def test_empty_rejected(self):
        with pytest.raises(EmptySentence):
            Sentence.make([])


class TestEnumeration:
    def test_arguments_n3_l2(self):
        spans = enumerate_arguments(3, 2)
        assert [(s.start, s.end) for s in spans] == [
            (1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]

    def test_single_token_sentence(self):
        assert enumerate_arguments(1, 30) == [Span(1, 1)]

    def test_length_one_is_the_dependency_candidate_set(self):
        spans = enumerate_arguments(5, 1)
        assert spans == [Span(i, i) for i in range(1, 6)]

    def test_predicates(self):
        assert enumerate_predicates(3) == [1, 2, 3]
        assert enumerate_predicates(1) == [1]
        with pytest.raises(EmptySentence):
            enumerate_predicates(0)

    @given(st.integers(1, 50), st.integers(1, 50))
    def test_count_matches_closed_form(self, n, max_len):
        # brute force over the full inclusive-pair grid as the oracle
        brute = sum(
            1
            for i in range(1, n + 1)
            for j in range(i, n + 1)
            if j - i + 1 <= max_len
        )
        spans = enumerate_arguments(n, max_len)
        assert len(spans) == brute
        ell = min(max_len, n)
        assert len(spans) == n * ell - ell * (ell - 1) // 2
        assert spans == sorted(spans)
        assert len(set(spans)) == len(spans)
