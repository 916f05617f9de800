"""Training loop, prediction, and the versioned model checkpoint.

A checkpoint is one JSON file carrying the config, the vocabulary, and
every named parameter as a flat float list; Python's float repr round-
trips 64-bit values exactly, so save/load is bit-stable and two runs
with the same seed write identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .corpus import Vocabulary
from .data import Sentence, SrlGraph
from .decoding import ConstraintSet, decode_constrained
from .errors import IncompatibleCheckpoint, UnreadableFile
from .evaluation import END_TO_END, PRE_IDENTIFIED, evaluate
from .network import ModelConfig, SrlModel, score_sentence, sentence_loss

CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: SrlModel) -> None:
    blob = {
        "version": CHECKPOINT_VERSION,
        "style": model.config.style,
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_json(),
        "params": {
            name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in sorted(model.params.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True)


def load_checkpoint(path) -> SrlModel:
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except OSError as exc:
        raise UnreadableFile(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IncompatibleCheckpoint(f"{path} is not a checkpoint: {exc}") from exc
    if blob.get("version") != CHECKPOINT_VERSION:
        raise IncompatibleCheckpoint(
            f"checkpoint version {blob.get('version')}, "
            f"this build reads {CHECKPOINT_VERSION}")
    config = ModelConfig.from_dict(blob["config"])
    vocab = Vocabulary.from_json(blob["vocab"])
    model = SrlModel(config, vocab, np.random.default_rng(0))
    saved = blob["params"]
    if set(saved) != set(model.params):
        raise IncompatibleCheckpoint("parameter names disagree with the config")
    for name, p in model.params.items():
        entry = saved[name]
        if tuple(entry["shape"]) != p.shape:
            raise IncompatibleCheckpoint(
                f"{name}: shape {entry['shape']} does not fit {p.shape}")
        p.data = np.array(entry["data"], dtype=np.float64).reshape(p.shape)
    return model


def check_input_style(model: SrlModel, sentences) -> None:
    for s in sentences:
        if s.mode_tag != model.config.style:
            raise IncompatibleCheckpoint(
                f"{model.config.style}-style checkpoint on a "
                f"{s.mode_tag}-flagged input")


def predict_graphs(model: SrlModel, sentences, *, mode: str = END_TO_END,
                   constraints: ConstraintSet | None = None,
                   externals=None) -> list[SrlGraph]:
    """Decode each sentence on the frozen model (no tape, no dropout)."""
    if constraints is None:
        constraints = ConstraintSet.default_for_style(model.config.style)
    graphs = []
    for k, s in enumerate(sentences):
        gold_predicates = None
        if mode == PRE_IDENTIFIED:
            gold_predicates = sorted(s.gold_graph.predicates)
            if not gold_predicates:
                graphs.append(SrlGraph(frozenset(), tuple(constraints.letters())))
                continue
        scored = score_sentence(
            model, s, external=externals[k] if externals else None,
            gold_predicates=gold_predicates)
        graphs.append(decode_constrained(scored.table, constraints))
    return graphs


@dataclass
class TrainResult:
    best_f1: float
    best_epoch: int
    history: list[dict] = field(default_factory=list)


def train_model(model: SrlModel, train_sentences, *, rng,
                dev_sentences=None, mode: str = END_TO_END,
                constraints: ConstraintSet | None = None,
                externals=None, epochs: int | None = None,
                stop_f1: float | None = None, best_path=None,
                log=None) -> TrainResult:
    """Adam over shuffled mini-batches; keeps the best checkpoint by F1.

    Evaluation runs each epoch on dev_sentences (the training set when
    none is given). All randomness (shuffling, dropout masks) flows
    from the single rng, so a seed fixes the whole run.
    """
    config = model.config
    if constraints is None:
        constraints = ConstraintSet.default_for_style(config.style)
    epochs = epochs or config.max_epochs
    optimizer = ad.Adam(model.params, lr=config.learning_rate)
    eval_sentences = dev_sentences if dev_sentences is not None else train_sentences
    eval_gold = [s.gold_graph for s in eval_sentences]
    result = TrainResult(best_f1=-1.0, best_epoch=0)

    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_sentences))
        total_loss = 0.0
        n_scored = 0
        survived_gold = 0
        total_gold = 0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            optimizer.zero_grad()
            n_in_batch = 0
            for idx in batch:
                s = train_sentences[int(idx)]
                gold_predicates = None
                if mode == PRE_IDENTIFIED:
                    gold_predicates = sorted(s.gold_graph.predicates)
                    if not gold_predicates:
                        continue
                with ad.Tape() as tape:
                    scored = score_sentence(
                        model, s, train=True, rng=rng,
                        external=externals[int(idx)] if externals else None,
                        gold_predicates=gold_predicates)
                    loss = sentence_loss(scored, s, model.vocab.roles)
                tape.backward(loss)
                total_loss += float(loss.data[0])
                n_scored += 1
                n_in_batch += 1
                survived_gold += scored.table.gold_total - scored.table.pruned_gold
                total_gold += scored.table.gold_total
            if n_in_batch == 0:
                continue
            for p in model.params.values():
                if p.grad is not None:
                    p.grad /= n_in_batch
            optimizer.step()

        predicted = predict_graphs(model, eval_sentences, mode=mode,
                                   constraints=constraints,
                                   externals=externals if dev_sentences is None
                                   else None)
        report = evaluate(predicted, eval_gold, mode=mode, style=config.style)
        record = {
            "epoch": epoch,
            "loss": total_loss / max(n_scored, 1),
            "pruning_recall": survived_gold / total_gold if total_gold else 1.0,
            "f1": report.f1,
            "precision": report.precision,
            "recall": report.recall,
            "seconds": round(time.perf_counter() - started, 3),
        }
        result.history.append(record)
        if log is not None:
            log(record)
        if report.f1 > result.best_f1:
            result.best_f1 = report.f1
            result.best_epoch = epoch
            if best_path is not None:
                save_checkpoint(best_path, model)
        if stop_f1 is not None and report.f1 >= stop_f1:
            break
    return result
