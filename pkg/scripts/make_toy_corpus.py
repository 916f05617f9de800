#!/usr/bin/env python3
"""Regenerate the 20-sentence toy corpora under data/.

Grammar-ish templates over a tiny vocabulary: every sentence has one or
two verbs, each verb takes an agent and a patient noun phrase plus an
optional time adverb. The span corpus uses full noun-phrase arguments;
the dependency corpus marks the phrase-head noun instead. Both carry
gold syntactic heads (determiners and adjectives attach to their noun,
nouns and adverbs to their verb, the second verb to the first), so the
span file also exercises the head-finding conversion.

Sentences are drawn with a fixed seed and deduplicated, so reruns are
byte-stable.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from srlkit.corpus import emit_jsonl  # noqa: E402
from srlkit.data import DEP, SPAN, Sentence  # noqa: E402

DETS = ["the", "a"]
ADJS = ["red", "old", "tall", "small"]
NOUNS = ["bird", "cat", "dog", "fox", "man", "boy", "river", "stone"]
VERBS = ["saw", "chased", "liked", "found", "pushed", "heard"]
ADVS = ["today", "yesterday", "slowly"]


def noun_phrase(rng, tokens, heads, max_width):
    """Append an NP; returns (span, head position). Heads fill in later
    for the noun itself (it attaches to its verb)."""
    start = len(tokens) + 1
    shape = rng.integers(0, min(max_width, 3))
    if shape >= 1:
        tokens.append(DETS[rng.integers(len(DETS))])
    if shape == 2:
        tokens.append(ADJS[rng.integers(len(ADJS))])
    tokens.append(NOUNS[rng.integers(len(NOUNS))])
    noun = len(tokens)
    for pos in range(start, noun):
        heads[pos] = noun
    return (start, noun), noun


def clause(rng, tokens, heads, tuples, dep_tuples, max_np, with_adverb):
    a0_span, a0_head = noun_phrase(rng, tokens, heads, max_np)
    tokens.append(VERBS[rng.integers(len(VERBS))])
    verb = len(tokens)
    heads[a0_head] = verb
    a1_span, a1_head = noun_phrase(rng, tokens, heads, max_np)
    heads[a1_head] = verb
    tuples += [[verb, a0_span[0], a0_span[1], "A0"],
               [verb, a1_span[0], a1_span[1], "A1"]]
    dep_tuples += [[verb, a0_head, a0_head, "A0"],
                   [verb, a1_head, a1_head, "A1"]]
    if with_adverb:
        tokens.append(ADVS[rng.integers(len(ADVS))])
        adv = len(tokens)
        heads[adv] = verb
        tuples.append([verb, adv, adv, "AM-TMP"])
        dep_tuples.append([verb, adv, adv, "AM-TMP"])
    return verb


def draw_sentence(rng):
    tokens, heads = [], {}
    tuples, dep_tuples = [], []
    if rng.random() < 0.3:
        # two clauses joined by "and", single-word noun phrases
        v1 = clause(rng, tokens, heads, tuples, dep_tuples, 1, False)
        tokens.append("and")
        heads[len(tokens)] = v1
        v2 = clause(rng, tokens, heads, tuples, dep_tuples, 1, False)
        heads[v2] = v1
        heads[v1] = 0
    else:
        v = clause(rng, tokens, heads, tuples, dep_tuples, 3,
                   rng.random() < 0.5)
        heads[v] = 0
    head_list = [heads[i] for i in range(1, len(tokens) + 1)]
    return tokens, head_list, tuples, dep_tuples


def build_corpus(seed, size):
    rng = np.random.default_rng(seed)
    span_sentences, dep_sentences, seen = [], [], set()
    while len(span_sentences) < size:
        tokens, heads, tuples, dep_tuples = draw_sentence(rng)
        key = tuple(tokens)
        if key in seen:
            continue
        seen.add(key)
        span_sentences.append(Sentence.make(tokens, tuples, heads, SPAN))
        dep_sentences.append(Sentence.make(tokens, dep_tuples, heads, DEP))
    return span_sentences, dep_sentences


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=Path(__file__).parent.parent / "data")
    parser.add_argument("--seed", type=int, default=20240501)
    parser.add_argument("--size", type=int, default=20)
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    span_sentences, dep_sentences = build_corpus(args.seed, args.size)
    (out / "toy_span.jsonl").write_text(emit_jsonl(span_sentences))
    (out / "toy_dep.jsonl").write_text(emit_jsonl(dep_sentences))
    lengths = sorted(len(s) for s in span_sentences)
    print(f"wrote {args.size} sentences to {out} (lengths {lengths[0]}"
          f"..{lengths[-1]})")


if __name__ == "__main__":
    main()
