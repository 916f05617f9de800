"""Domain types shared by every stage: sentences, spans, roles, graphs.

Token indices are 1-based throughout (the column-format convention);
0 is reserved for the syntactic root in head annotations. Dependency
arguments are the degenerate single-token span (i, i), so one span type
serves both annotation styles. All values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptySentence

#: Reserved "no relation" label. Always sits at inventory index 0 so
#: score vectors can hard-wire position 0 to zero. Never stored in gold.
NULL_ROLE = "<null>"

#: Labels treated as core when observed in data; at most one of each may
#: attach to a predicate under the uniqueness constraint.
CORE_ROLE_LABELS = ("A0", "A1", "A2", "A3", "A4", "A5", "AA")

SPAN = "SPAN"
DEP = "DEP"
MODES = (SPAN, DEP)


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive 1-based token range; start == end is a single-word argument."""

    start: int
    end: int

    def __post_init__(self):
        if not 1 <= self.start <= self.end:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "Span") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True, order=True)
class SrlTuple:
    """One (predicate token, argument span, role label) fact."""

    predicate: int
    argument: Span
    role: str

    def __post_init__(self):
        if self.role == NULL_ROLE:
            raise ValueError("the null role encodes absence and is never stored")
        if not self.role:
            raise ValueError("empty role label")


@dataclass(frozen=True)
class RoleInventory:
    """Ordered role labels with the null label pinned at index 0.

    core_labels is the subset subject to the uniqueness constraint;
    built from data, so a core label is present only if observed.
    """

    labels: tuple[str, ...]
    core_labels: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.labels or self.labels[0] != NULL_ROLE:
            raise ValueError(f"label 0 must be the reserved null role {NULL_ROLE!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate role labels")
        if not self.core_labels <= set(self.labels):
            raise ValueError("core labels not a subset of the inventory")

    @classmethod
    def from_observed(cls, roles) -> "RoleInventory":
        """Build from role labels in first-appearance order, null first."""
        ordered: list[str] = [NULL_ROLE]
        for role in roles:
            if role != NULL_ROLE and role not in ordered:
                ordered.append(role)
        core = frozenset(r for r in ordered if r in CORE_ROLE_LABELS)
        return cls(tuple(ordered), core)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def label(self, index: int) -> str:
        return self.labels[index]

    def core_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.labels) if r in self.core_labels)


@dataclass(frozen=True)
class SrlGraph:
    """The set of labeled predicate-argument facts decoded for one sentence.

    constraints records which structural constraints the producing
    decoder enforced (empty for gold or greedy output).
    """

    tuples: frozenset[SrlTuple]
    constraints: tuple[str, ...] = ()

    def __post_init__(self):
        pairs = [(t.predicate, t.argument) for t in self.tuples]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate (predicate, argument) pair in graph")

    @property
    def predicates(self) -> frozenset[int]:
        return frozenset(t.predicate for t in self.tuples)

    def sorted_tuples(self) -> tuple[SrlTuple, ...]:
        return tuple(sorted(self.tuples))

    def restricted_to(self, predicates) -> "SrlGraph":
        keep = frozenset(t for t in self.tuples if t.predicate in predicates)
        return SrlGraph(keep, self.constraints)


@dataclass(frozen=True)
class Sentence:
    """Tokens plus optional gold syntax and gold predicate-argument facts.

    mode_tag records the annotation style of gold_tuples: DEP gold may
    only use single-token arguments.
    """

    tokens: tuple[str, ...]
    char_seqs: tuple[tuple[str, ...], ...] = ()
    gold_heads: tuple[int, ...] | None = None
    gold_tuples: frozenset[SrlTuple] = frozenset()
    mode_tag: str = SPAN

    def __post_init__(self):
        n = len(self.tokens)
        if n == 0:
            raise EmptySentence("a sentence needs at least one token")
        if not self.char_seqs:
            object.__setattr__(
                self, "char_seqs", tuple(tuple(tok) for tok in self.tokens)
            )
        if len(self.char_seqs) != n:
            raise ValueError("char_seqs length disagrees with tokens")
        if self.mode_tag not in MODES:
            raise ValueError(f"unknown mode tag {self.mode_tag!r}")
        if self.gold_heads is not None:
            if len(self.gold_heads) != n:
                raise ValueError("gold_heads length disagrees with tokens")
            for h in self.gold_heads:
                if not 0 <= h <= n:
                    raise ValueError(f"head index {h} outside [0, {n}]")
        for t in self.gold_tuples:
            if not (1 <= t.predicate <= n and t.argument.end <= n):
                raise ValueError(f"tuple {t} references tokens outside [1, {n}]")
            if self.mode_tag == DEP and t.argument.width != 1:
                raise ValueError("DEP-mode gold must use single-token arguments")

    @classmethod
    def make(cls, tokens, tuples=(), heads=None, mode=SPAN) -> "Sentence":
        """Convenience constructor from plain lists and 4-tuples."""
        facts = frozenset(
            t if isinstance(t, SrlTuple) else SrlTuple(t[0], Span(t[1], t[2]), t[3])
            for t in tuples
        )
        return cls(
            tokens=tuple(tokens),
            gold_heads=None if heads is None else tuple(heads),
            gold_tuples=facts,
            mode_tag=mode,
        )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def gold_graph(self) -> SrlGraph:
        return SrlGraph(self.gold_tuples)


def enumerate_predicates(n: int) -> list[int]:
    """All candidate predicate positions: every token, 1..n."""
    if n < 1:
        raise EmptySentence("cannot enumerate predicates of an empty sentence")
    return list(range(1, n + 1))


def enumerate_arguments(n: int, max_len: int) -> list[Span]:
    """All candidate argument spans of width <= max_len, lexicographic.

    max_len = 1 yields exactly the dependency candidate set.
    """
    if n < 1:
        raise EmptySentence("cannot enumerate arguments of an empty sentence")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return [
        Span(i, j)
        for i in range(1, n + 1)
        for j in range(i, min(i + max_len - 1, n) + 1)
    ]
