"""Precision/recall/F1 over labeled tuples, and span-to-head conversion.

A predicted tuple matches a gold tuple iff (predicate, argument start,
argument end, role) are identical: exact boundaries for span style,
the exact head token for dependency style. Percentages are rounded
half-up to two decimals; the raw counts always travel with them.

The conversion maps a span argument to its syntactic head tokens under
a gold dependency tree: every token whose head lies outside the span.
A span cannot be wholly self-contained in an acyclic tree, so the head
set is never empty. Spans with several such tokens yield one dependency
tuple each (deduplicated afterwards). Because gold syntax drives it,
the converted score is an upper-bound-style measure, not a parse.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .data import SrlGraph, SrlTuple, Span
from .errors import CyclicHeads, LengthMismatch, MissingSyntax

END_TO_END = "end-to-end"
PRE_IDENTIFIED = "pre-identified"


def _percent(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 0.0
    return float(Decimal(100.0 * numerator / denominator).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP))


def _f1_percent(matched: int, predicted: int, gold: int) -> float:
    if matched == 0:
        return 0.0
    p = matched / predicted
    r = matched / gold
    return float(Decimal(200.0 * p * r / (p + r)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted: int
    gold: int
    mode: str
    style: str

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matched": self.matched,
            "predicted": self.predicted,
            "gold": self.gold,
            "mode": self.mode,
            "style": self.style,
        }

    def as_table(self) -> str:
        return (
            f"style={self.style} mode={self.mode}\n"
            f"  precision  {self.precision:6.2f}  ({self.matched}/{self.predicted})\n"
            f"  recall     {self.recall:6.2f}  ({self.matched}/{self.gold})\n"
            f"  f1         {self.f1:6.2f}"
        )


def evaluate(predicted, gold, mode: str = END_TO_END,
             style: str = "SPAN") -> EvalReport:
    """Micro-averaged labeled-tuple P/R/F1 over aligned graph lists."""
    predicted = list(predicted)
    gold = list(gold)
    if len(predicted) != len(gold):
        raise LengthMismatch(
            f"{len(predicted)} predicted sentences vs {len(gold)} gold")
    matched = n_pred = n_gold = 0
    for p_graph, g_graph in zip(predicted, gold):
        p_set, g_set = set(p_graph.tuples), set(g_graph.tuples)
        matched += len(p_set & g_set)
        n_pred += len(p_set)
        n_gold += len(g_set)
    return EvalReport(
        precision=_percent(matched, n_pred),
        recall=_percent(matched, n_gold),
        f1=_f1_percent(matched, n_pred, n_gold),
        matched=matched, predicted=n_pred, gold=n_gold,
        mode=mode, style=style)


def _check_heads(heads) -> None:
    if heads is None:
        raise MissingSyntax("span-to-head conversion needs gold heads")
    n = len(heads)
    for start in range(1, n + 1):
        node, hops = start, 0
        while node != 0:
            node = heads[node - 1]
            hops += 1
            if hops > n:
                raise CyclicHeads(f"no path from token {start} to the root")
    if sum(1 for h in heads if h == 0) != 1:
        raise ValueError("expected exactly one root (head 0)")


def span_heads(span: Span, heads) -> list[int]:
    """Tokens in the span whose syntactic head lies outside it."""
    return [t for t in range(span.start, span.end + 1)
            if not span.start <= heads[t - 1] <= span.end]


def span_to_dep(graph: SrlGraph, heads) -> SrlGraph:
    """Convert span arguments to single-token head arguments.

    A span with several head tokens emits one dependency tuple per
    head; exact duplicates after conversion collapse.
    """
    _check_heads(heads)
    out = set()
    for t in graph.tuples:
        for head_token in span_heads(t.argument, heads):
            out.add(SrlTuple(t.predicate, Span(head_token, head_token), t.role))
    deduped = {}
    for t in sorted(out):
        deduped.setdefault((t.predicate, t.argument), t)
    return SrlGraph(frozenset(deduped.values()), graph.constraints)


@dataclass(frozen=True)
class StyleComparison:
    dependency: EvalReport
    converted: EvalReport

    @property
    def delta_f1(self) -> float:
        return round(self.dependency.f1 - self.converted.f1, 2)


def compare_styles(span_predictions, dep_predictions, dep_gold, heads_list,
                   mode: str = END_TO_END,
                   exclude_predicates=None) -> StyleComparison:
    """Score both styles against one dependency gold standard.

    Span predictions are converted with the gold heads first. Sentences
    may carry a set of predicate positions to exclude (e.g. nominal
    predicates when the span side annotates only verbal ones).
    """
    span_predictions = list(span_predictions)
    dep_predictions = list(dep_predictions)
    dep_gold = list(dep_gold)
    heads_list = list(heads_list)
    if not (len(span_predictions) == len(dep_predictions) == len(dep_gold)
            == len(heads_list)):
        raise LengthMismatch("style comparison needs four aligned lists")
    if exclude_predicates is None:
        exclude_predicates = [frozenset()] * len(dep_gold)

    converted = [span_to_dep(g, heads)
                 for g, heads in zip(span_predictions, heads_list)]

    def drop(graphs):
        return [g.restricted_to(g.predicates - set(excl))
                for g, excl in zip(graphs, exclude_predicates)]

    gold = drop(dep_gold)
    dep_report = evaluate(drop(dep_predictions), gold, mode=mode, style="DEP")
    conv_report = evaluate(drop(converted), gold, mode=mode, style="DEP")
    return StyleComparison(dependency=dep_report, converted=conv_report)
