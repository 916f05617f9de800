"""Candidate beam pruning and decoding of score tables into graphs.

Pruning keeps the top ceil(beta * n) predicate and argument candidates
by unary score (ceiling so length-1 sentences keep a candidate), which
bounds the number of scored tuples by ceil(bp*n) * ceil(ba*n) * |roles|.

The constrained decoder maximizes, per predicate, the total score of a
role assignment to its surviving candidate arguments subject to the
enabled structural constraints:

* unique core roles (each core label at most once per predicate),
* non-overlap of the arguments labeled non-null (span style only;
  single-token arguments cannot overlap, so it is vacuous for
  dependency style),
* continuation/reference licensing, applied as post-filters since they
  are disabled by default.

The search processes arguments sorted by end position and tracks a
bitmask of used core roles plus the last covered position, which makes
it exact: a new span overlaps some chosen span iff it starts at or
before the furthest end seen so far. Exhaustive search over all
labelings is the correctness oracle at small sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RoleInventory, Span, SrlGraph, SrlTuple
from .errors import CoreMaskOverflow

MAX_CORE_ROLES = 12


def beam_capacity(n: int, ratio: float) -> int:
    return math.ceil(ratio * n)


@dataclass(frozen=True)
class Beam:
    """Kept candidate ids in unary-score order (descending).

    Ties break toward the smaller sort key: earlier start, then earlier
    end (which is plain candidate order for predicates).
    """

    kept: tuple[int, ...]
    capacity: int


def prune(scores: np.ndarray, n: int, ratio: float, tie_keys=None) -> Beam:
    """Top-ceil(ratio*n) candidate ids with the deterministic tie-break."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("beam ratio must be in (0, 1]")
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if tie_keys is None:
        tie_keys = list(range(scores.size))
    capacity = beam_capacity(n, ratio)
    order = sorted(range(scores.size), key=lambda k: (-scores[k], tie_keys[k]))
    return Beam(kept=tuple(order[:capacity]), capacity=capacity)


@dataclass(frozen=True)
class ConstraintSet:
    """Which structural constraints the decoder enforces."""

    unique_core: bool = False
    continuation: bool = False
    reference: bool = False
    non_overlap: bool = False

    @classmethod
    def from_letters(cls, letters: str) -> "ConstraintSet":
        """Parse a compact flag string such as "UO" or "u,o"."""
        cleaned = {ch for ch in letters.upper() if ch.isalpha()}
        unknown = cleaned - set("UCRO")
        if unknown:
            raise ValueError(f"unknown constraint letters {sorted(unknown)}")
        return cls(unique_core="U" in cleaned, continuation="C" in cleaned,
                   reference="R" in cleaned, non_overlap="O" in cleaned)

    def letters(self) -> str:
        out = ""
        for ch, on in (("U", self.unique_core), ("C", self.continuation),
                       ("R", self.reference), ("O", self.non_overlap)):
            if on:
                out += ch
        return out

    @classmethod
    def default_for_style(cls, style: str) -> "ConstraintSet":
        # non-overlap is automatically satisfied by single-token arguments
        if style == "DEP":
            return cls(unique_core=True)
        return cls(unique_core=True, non_overlap=True)


@dataclass
class ScoreTable:
    """Scores for every surviving (predicate, argument, role) tuple.

    scores has shape (|predicates|, |arguments|, |roles|) with the null
    column identically zero; predicates and arguments are in ascending
    position order.
    """

    n: int
    predicates: tuple[int, ...]
    arguments: tuple[Span, ...]
    roles: RoleInventory
    scores: np.ndarray
    pruned_gold: int = 0
    gold_total: int = 0

    def __post_init__(self):
        expected = (len(self.predicates), len(self.arguments), len(self.roles))
        if self.scores.shape != expected:
            raise ValueError(f"score array {self.scores.shape}, want {expected}")
        if self.scores.size and np.any(self.scores[:, :, 0] != 0.0):
            raise ValueError("null-role scores must be exactly zero")

    def tuple_score(self, predicate: int, argument: Span, role_idx: int) -> float:
        pi = self.predicates.index(predicate)
        ai = self.arguments.index(argument)
        return float(self.scores[pi, ai, role_idx])

    @property
    def tuple_count(self) -> int:
        return self.scores.size


def decode_greedy(table: ScoreTable) -> SrlGraph:
    """Independent per-pair argmax; the null role wins exact ties."""
    tuples = []
    if table.scores.size:
        best = np.argmax(table.scores, axis=2)  # first max -> null on ties
        for pi, p in enumerate(table.predicates):
            for ai, span in enumerate(table.arguments):
                r = int(best[pi, ai])
                if r != 0:
                    tuples.append(SrlTuple(p, span, table.roles.label(r)))
    return SrlGraph(frozenset(tuples))


def decode_constrained(table: ScoreTable,
                       constraints: ConstraintSet) -> SrlGraph:
    """Maximum-total-score assignment per predicate under the constraints."""
    core_bit = _core_bits(table.roles)
    if constraints.unique_core or constraints.non_overlap:
        tuples = []
        order = sorted(range(len(table.arguments)),
                       key=lambda ai: (table.arguments[ai].end,
                                       table.arguments[ai].start))
        for pi, p in enumerate(table.predicates):
            assignment = _best_assignment(
                table.scores[pi], table.arguments, order, core_bit,
                constraints.unique_core, constraints.non_overlap)
            for ai, r in assignment:
                tuples.append(SrlTuple(p, table.arguments[ai],
                                       table.roles.label(r)))
        graph = SrlGraph(frozenset(tuples))
    else:
        graph = decode_greedy(table)
    if constraints.continuation or constraints.reference:
        graph = _license_filter(graph, constraints)
    return SrlGraph(graph.tuples, tuple(constraints.letters()))


def _core_bits(roles: RoleInventory) -> dict[int, int]:
    core = roles.core_indices()
    if len(core) > MAX_CORE_ROLES:
        raise CoreMaskOverflow(
            f"{len(core)} core roles exceed the {MAX_CORE_ROLES}-bit mask")
    return {r: 1 << b for b, r in enumerate(core)}


def _best_assignment(scores: np.ndarray, arguments, order, core_bit,
                     unique_core: bool, non_overlap: bool):
    """Exact DP over arguments sorted by end position.

    State is (used-core-role bitmask, furthest end of any argument
    assigned a non-null role); both collapse to 0 when the matching
    constraint is off. Returns [(argument id, role)] for non-null roles.
    """
    n_roles = scores.shape[1]
    states: dict[tuple[int, int], float] = {(0, 0): 0.0}
    trail: list[dict] = []
    for ai in order:
        span = arguments[ai]
        new_states: dict[tuple[int, int], float] = {}
        choices: dict[tuple[int, int], tuple[tuple[int, int], int]] = {}

        def consider(state, total, prev, role):
            best = new_states.get(state)
            if best is None or total > best:
                new_states[state] = total
                choices[state] = (prev, role)

        for state in sorted(states):
            total = states[state]
            mask, last_end = state
            consider(state, total, state, 0)  # null first: wins score ties
            for r in range(1, n_roles):
                if non_overlap and span.start <= last_end:
                    break
                bit = core_bit.get(r, 0) if unique_core else 0
                if bit and mask & bit:
                    continue
                new_state = (mask | bit, span.end if non_overlap else 0)
                consider(new_state, total + float(scores[ai, r]), state, r)
        states = new_states
        trail.append(choices)

    best_state = max(sorted(states), key=lambda s: states[s])
    assignment = []
    state = best_state
    for ai, choices in zip(reversed(order), reversed(trail)):
        state, role = choices[state]
        if role != 0:
            assignment.append((ai, role))
    return assignment


def _license_filter(graph: SrlGraph, constraints: ConstraintSet) -> SrlGraph:
    """Drop continuation/reference roles whose base role is unrealized."""
    kept = []
    for t in graph.tuples:
        prefix = t.role[:2]
        if constraints.continuation and prefix == "C-":
            base = t.role[2:]
            if not any(o.predicate == t.predicate and o.role == base
                       and o.argument.start < t.argument.start
                       for o in graph.tuples):
                continue
        if constraints.reference and prefix == "R-":
            base = t.role[2:]
            if not any(o.predicate == t.predicate and o.role == base
                       for o in graph.tuples):
                continue
        kept.append(t)
    return SrlGraph(frozenset(kept), graph.constraints)
