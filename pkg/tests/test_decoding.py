"""Decoder correctness against exhaustive search, plus beam contracts."""

import itertools

import numpy as np
import pytest

from srlkit.data import RoleInventory, Span, SrlGraph, SrlTuple, enumerate_arguments
from srlkit.decoding import (
    Beam,
    ConstraintSet,
    ScoreTable,
    beam_capacity,
    decode_constrained,
    decode_greedy,
    prune,
)
from srlkit.errors import CoreMaskOverflow


def make_table(n, max_len, roles, scores, predicates=None):
    arguments = tuple(enumerate_arguments(n, max_len))
    predicates = predicates or tuple(range(1, n + 1))
    scores = np.asarray(scores, dtype=np.float64)
    scores[:, :, 0] = 0.0
    return ScoreTable(n=n, predicates=tuple(predicates), arguments=arguments,
                      roles=roles, scores=scores)


def random_table(rng, n, max_len, roles):
    arguments = enumerate_arguments(n, max_len)
    scores = rng.normal(size=(n, len(arguments), len(roles)))
    return make_table(n, max_len, roles, scores)


def brute_force_optimum(table, constraints):
    """Exhaustive search over all labelings, one predicate at a time."""
    core = set(table.roles.core_indices())
    total = 0.0
    for pi in range(len(table.predicates)):
        best = None
        for labeling in itertools.product(
                range(len(table.roles)), repeat=len(table.arguments)):
            if constraints.unique_core:
                used = [r for r in labeling if r in core]
                if len(used) != len(set(used)):
                    continue
            if constraints.non_overlap:
                chosen = [a for a, r in zip(table.arguments, labeling) if r != 0]
                if any(x.overlaps(y)
                       for x, y in itertools.combinations(chosen, 2)):
                    continue
            score = sum(table.scores[pi, ai, r]
                        for ai, r in enumerate(labeling))
            if best is None or score > best:
                best = score
        total += best
    return total


def graph_score(table, graph):
    return sum(table.tuple_score(t.predicate, t.argument,
                                 table.roles.index(t.role))
               for t in graph.tuples)


ROLES3 = RoleInventory.from_observed(["A0", "AM-TMP"])


class TestPrune:
    def test_capacity_uses_ceiling(self):
        assert beam_capacity(10, 0.4) == 4
        assert beam_capacity(1, 0.4) == 1  # length-1 sentences keep one
        assert beam_capacity(7, 0.8) == 6

    def test_equal_scores_fall_back_to_tie_order(self):
        beam = prune(np.zeros(6), 10, 0.4)
        assert beam.kept == (0, 1, 2, 3)

    def test_full_beam_is_identity(self):
        scores = np.array([0.3, -1.0, 2.0])
        beam = prune(scores, 3, 1.0)
        assert sorted(beam.kept) == [0, 1, 2]
        assert beam.kept == (2, 0, 1)  # score order preserved

    def test_span_tie_break_prefers_earlier_start_then_end(self):
        spans = enumerate_arguments(3, 2)
        keys = [(s.start, s.end) for s in spans]
        beam = prune(np.zeros(len(spans)), 3, 0.5)
        assert beam.kept == (0, 1)
        beam = prune(np.array([0.0, 1.0, 0.0, 1.0, 0.0]), 3, 0.8,
                     tie_keys=keys)
        assert beam.kept == (1, 3, 0)

    def test_scores_non_increasing_along_beam(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 51))
            scores = rng.normal(size=n)
            beam = prune(scores, n, 0.4)
            kept_scores = [scores[k] for k in beam.kept]
            assert all(a >= b for a, b in zip(kept_scores, kept_scores[1:]))
            assert len(beam.kept) == min(n, beam.capacity)


class TestConstraintSet:
    def test_from_letters(self):
        cs = ConstraintSet.from_letters("U,O")
        assert cs.unique_core and cs.non_overlap
        assert not cs.continuation and not cs.reference
        assert cs.letters() == "UO"
        with pytest.raises(ValueError):
            ConstraintSet.from_letters("UX")

    def test_defaults_per_style(self):
        assert ConstraintSet.default_for_style("SPAN").letters() == "UO"
        assert ConstraintSet.default_for_style("DEP").letters() == "U"


class TestGreedy:
    def test_all_zero_scores_decode_empty(self):
        table = random_table(np.random.default_rng(0), 3, 2, ROLES3)
        table.scores[:] = 0.0
        assert decode_greedy(table).tuples == frozenset()

    def test_single_winning_pair(self):
        scores = np.zeros((2, 2, 3))
        scores[0, 1, 1] = 2.0
        table = make_table(2, 1, ROLES3, scores)
        graph = decode_greedy(table)
        assert graph.tuples == {SrlTuple(1, Span(2, 2), "A0")}

    def test_matches_brute_force_per_pair_argmax(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            table = random_table(rng, 3, 1, ROLES3)
            graph = decode_greedy(table)
            for pi, p in enumerate(table.predicates):
                for ai, span in enumerate(table.arguments):
                    r = max(range(3), key=lambda k: (table.scores[pi, ai, k],
                                                     -k))
                    found = {t.role for t in graph.tuples
                             if t.predicate == p and t.argument == span}
                    if r == 0:
                        assert not found
                    else:
                        assert found == {table.roles.label(r)}


class TestConstrainedDecoding:
    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(11)
        constraints = ConstraintSet(unique_core=True, non_overlap=True)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            max_len = int(rng.integers(1, 3))
            table = random_table(rng, n, max_len, ROLES3)
            graph = decode_constrained(table, constraints)
            assert graph_score(table, graph) == pytest.approx(
                brute_force_optimum(table, constraints), abs=1e-9)
            check_structure(graph, constraints, table)

    def test_all_constraints_off_equals_greedy(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            table = random_table(rng, 4, 2, ROLES3)
            a = decode_constrained(table, ConstraintSet())
            b = decode_greedy(table)
            assert a.tuples == b.tuples

    def test_overlapping_spans_keep_only_the_better_one(self):
        roles = RoleInventory.from_observed(["A0"])
        arguments = (Span(1, 2), Span(2, 3))
        scores = np.zeros((1, 2, 2))
        scores[0, 0, 1] = 3.0
        scores[0, 1, 1] = 2.0
        table = ScoreTable(n=3, predicates=(1,), arguments=arguments,
                           roles=roles, scores=scores)
        graph = decode_constrained(
            table, ConstraintSet(unique_core=True, non_overlap=True))
        assert graph.tuples == {SrlTuple(1, Span(1, 2), "A0")}

    def test_dependency_unique_core_flips_the_weaker_candidate(self):
        # both tokens prefer the core role; the weaker one must take its
        # best remaining option (a non-core role here)
        roles = RoleInventory.from_observed(["A0", "AM-TMP"])
        scores = np.zeros((1, 2, 3))
        scores[0, 0, 1] = 3.0
        scores[0, 0, 2] = 1.0
        scores[0, 1, 1] = 2.5
        scores[0, 1, 2] = 2.0
        table = make_table(2, 1, roles, scores, predicates=(1,))
        graph = decode_constrained(table, ConstraintSet(unique_core=True))
        assert graph.tuples == {SrlTuple(1, Span(1, 1), "A0"),
                                SrlTuple(1, Span(2, 2), "AM-TMP")}

    def test_monotonicity_raising_a_chosen_tuple_keeps_it(self):
        rng = np.random.default_rng(23)
        constraints = ConstraintSet(unique_core=True, non_overlap=True)
        kept = 0
        for _ in range(100):
            table = random_table(rng, 3, 2, ROLES3)
            graph = decode_constrained(table, constraints)
            if not graph.tuples:
                continue
            kept += 1
            target = sorted(graph.tuples)[0]
            pi = table.predicates.index(target.predicate)
            ai = table.arguments.index(target.argument)
            table.scores[pi, ai, table.roles.index(target.role)] += 0.5
            again = decode_constrained(table, constraints)
            assert target in again.tuples
        assert kept > 50

    def test_core_mask_overflow(self):
        labels = [f"A{i}" for i in range(6)] + ["AA"]
        roles = RoleInventory(
            tuple(["<null>"] + labels + [f"X{i}" for i in range(6)]),
            frozenset(labels + [f"X{i}" for i in range(6)]))
        scores = np.zeros((1, 1, len(roles)))
        table = ScoreTable(n=1, predicates=(1,), arguments=(Span(1, 1),),
                           roles=roles, scores=scores)
        with pytest.raises(CoreMaskOverflow):
            decode_constrained(table, ConstraintSet(unique_core=True))

    def test_continuation_and_reference_post_filters(self):
        roles = RoleInventory.from_observed(["A0", "C-A0", "R-A1", "A1"])
        scores = np.zeros((1, 3, 5))
        scores[0, 0, 2] = 1.0  # C-A0 at token 1, base A0 never realized
        scores[0, 1, 3] = 1.0  # R-A1 at token 2
        scores[0, 2, 4] = 1.0  # A1 at token 3 licenses R-A1
        table = make_table(3, 1, roles, scores, predicates=(1,))
        graph = decode_constrained(
            table, ConstraintSet(continuation=True, reference=True))
        assert graph.tuples == {SrlTuple(1, Span(2, 2), "R-A1"),
                                SrlTuple(1, Span(3, 3), "A1")}

    def test_decoded_graph_never_contains_pruned_candidates(self):
        rng = np.random.default_rng(2)
        table = random_table(rng, 4, 2, ROLES3)
        graph = decode_constrained(
            table, ConstraintSet(unique_core=True, non_overlap=True))
        for t in graph.tuples:
            assert t.predicate in table.predicates
            assert t.argument in table.arguments
            assert t.role != "<null>"


def check_structure(graph, constraints, table):
    by_pred = {}
    for t in graph.tuples:
        by_pred.setdefault(t.predicate, []).append(t)
    for tuples in by_pred.values():
        if constraints.unique_core:
            cores = [t.role for t in tuples
                     if t.role in table.roles.core_labels]
            assert len(cores) == len(set(cores))
        if constraints.non_overlap:
            for a, b in itertools.combinations(tuples, 2):
                assert not a.argument.overlaps(b.argument)
