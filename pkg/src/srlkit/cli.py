"""Command-line entry point: train, predict, evaluate, convert.

Run configuration is a JSON file (see README for the documented keys)
plus flag overrides; flags win. One root seed governs every source of
randomness in a run: parameter init, dropout masks, and shuffling.
Logs are line-oriented JSON on stdout, mirrored to <checkpoint_dir>/
log.jsonl when a checkpoint directory is set.

Exit codes: 0 success, 1 processing failure, 2 usage/configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import (
    build_vocab,
    emit_conll,
    emit_jsonl,
    load_external,
    load_pretrained,
    read_corpus,
)
from .data import DEP, Sentence
from .decoding import ConstraintSet
from .errors import SrlkitError
from .evaluation import END_TO_END, PRE_IDENTIFIED, evaluate, span_to_dep
from .network import ModelConfig, SrlModel
from .training import (
    check_input_style,
    load_checkpoint,
    predict_graphs,
    train_model,
)

MODES = (END_TO_END, PRE_IDENTIFIED)


class UsageError(Exception):
    """Configuration problems found before any work starts (exit 2)."""


@dataclass
class RunConfig:
    seed: int | None = None
    train: str | None = None
    dev: str | None = None
    mode: str = END_TO_END
    constraints: str | None = None
    checkpoint_dir: str | None = None
    epochs: int | None = None
    stop_f1: float | None = None
    embeddings: str | None = None
    external: str | None = None
    min_freq: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)

    @classmethod
    def from_sources(cls, config_path, args) -> "RunConfig":
        """Config file first, then flag overrides on top."""
        blob: dict = {}
        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise UsageError(f"config file not found: {path}")
            try:
                blob = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {path} is not valid JSON: {exc}")
        model_blob = dict(blob.pop("model", {}))
        known = {f for f in cls.__dataclass_fields__ if f != "model"}
        unknown = set(blob) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(blob)
        for name in known:
            value = getattr(args, name, None)
            if value is not None:
                merged[name] = value
        for name in ("batch_size", "learning_rate", "max_span_length"):
            value = getattr(args, name, None)
            if value is not None:
                model_blob[name] = value
        try:
            model = ModelConfig.from_dict({**ModelConfig().to_dict(),
                                           **model_blob})
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad model configuration: {exc}")
        run = cls(**{**merged, "model": model})
        if run.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {run.mode!r}")
        return run


def _require_file(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing required {what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _constraints_for(run_constraints, style: str) -> ConstraintSet:
    if run_constraints is None:
        return ConstraintSet.default_for_style(style)
    try:
        return ConstraintSet.from_letters(run_constraints)
    except ValueError as exc:
        raise UsageError(str(exc))


def _check_corpus_style(sentences, style: str, what: str) -> None:
    for s in sentences:
        if s.mode_tag != style:
            raise UsageError(
                f"{what} is {s.mode_tag}-style but the model expects {style}")


def _cmd_train(args) -> int:
    run = RunConfig.from_sources(args.config, args)
    if run.seed is None:
        raise UsageError("training needs a seed (--seed or config key)")
    train_path = _require_file(run.train, "training corpus")
    dev_sentences = None
    if run.dev is not None:
        dev_sentences = read_corpus(_require_file(run.dev, "dev corpus"))
    log_fh = None
    best_path = None
    if run.checkpoint_dir is not None:
        ckpt_dir = Path(run.checkpoint_dir)
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        best_path = ckpt_dir / "best.json"
        log_fh = open(ckpt_dir / "log.jsonl", "w", encoding="utf-8")

    sentences = read_corpus(train_path)
    if not sentences:
        raise UsageError(f"training corpus is empty: {train_path}")
    style = run.model.style
    _check_corpus_style(sentences, style, "training corpus")
    if dev_sentences is not None:
        _check_corpus_style(dev_sentences, style, "dev corpus")

    rng = np.random.default_rng(run.seed)
    vocab = build_vocab(sentences, min_freq=run.min_freq)
    word_matrix = None
    if run.embeddings is not None:
        word_matrix = load_pretrained(
            _require_file(run.embeddings, "embedding file"), vocab, rng)
    externals = None
    if run.external is not None:
        externals = load_external(
            _require_file(run.external, "external vector file"), sentences)
    model = SrlModel(run.model, vocab, rng, word_matrix=word_matrix)

    def log(record):
        line = json.dumps(record, sort_keys=True)
        print(line)
        if log_fh is not None:
            log_fh.write(line + "\n")
            log_fh.flush()

    try:
        result = train_model(
            model, sentences, rng=rng, dev_sentences=dev_sentences,
            mode=run.mode, constraints=_constraints_for(run.constraints, style),
            externals=externals, epochs=run.epochs, stop_f1=run.stop_f1,
            best_path=best_path, log=log)
    finally:
        if log_fh is not None:
            log_fh.close()
    summary = {"best_f1": result.best_f1, "best_epoch": result.best_epoch,
               "epochs_run": len(result.history), "seed": run.seed}
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_predict(args) -> int:
    checkpoint = _require_file(args.checkpoint, "checkpoint")
    input_path = _require_file(args.input, "input corpus")
    if args.mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    model = load_checkpoint(checkpoint)
    sentences = read_corpus(input_path)
    check_input_style(model, sentences)
    externals = None
    if args.external is not None:
        externals = load_external(
            _require_file(args.external, "external vector file"), sentences)
    constraints = _constraints_for(args.constraints, model.config.style)
    graphs = predict_graphs(model, sentences, mode=args.mode,
                            constraints=constraints, externals=externals)
    predicted = [
        Sentence(tokens=s.tokens, gold_heads=s.gold_heads,
                 gold_tuples=g.tuples, mode_tag=model.config.style)
        for s, g in zip(sentences, graphs)
    ]
    text = (emit_conll(predicted) if args.output_format == "conll"
            else emit_jsonl(predicted))
    Path(args.output).write_text(text, encoding="utf-8")
    return 0


def _cmd_evaluate(args) -> int:
    pred = read_corpus(_require_file(args.pred, "prediction file"))
    gold = read_corpus(_require_file(args.gold, "gold file"))
    if args.mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    styles = {s.mode_tag for s in pred} | {s.mode_tag for s in gold}
    if len(styles) > 1:
        raise SrlkitError(f"mixed annotation styles in evaluation: {styles}")
    style = styles.pop() if styles else "SPAN"
    report = evaluate([s.gold_graph for s in pred],
                      [s.gold_graph for s in gold],
                      mode=args.mode, style=style)
    print(report.as_table())
    print(json.dumps(report.as_dict(), sort_keys=True))
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(report.as_dict(), sort_keys=True) + "\n",
            encoding="utf-8")
    return 0


def _cmd_convert(args) -> int:
    sentences = read_corpus(_require_file(args.input, "input corpus"))
    converted = []
    for s in sentences:
        graph = span_to_dep(s.gold_graph, s.gold_heads)
        converted.append(Sentence(tokens=s.tokens, gold_heads=s.gold_heads,
                                  gold_tuples=graph.tuples, mode_tag=DEP))
    Path(args.output).write_text(emit_jsonl(converted), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlkit",
        description="Uniform span/dependency semantic role labeling.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model")
    train.add_argument("--config", help="JSON run configuration")
    train.add_argument("--train", help="training corpus (.jsonl or columns)")
    train.add_argument("--dev", help="development corpus")
    train.add_argument("--seed", type=int)
    train.add_argument("--mode", choices=MODES)
    train.add_argument("--constraints", help='constraint letters, e.g. "UO"')
    train.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    train.add_argument("--epochs", type=int)
    train.add_argument("--stop-f1", dest="stop_f1", type=float,
                       help="stop once evaluation F1 reaches this value")
    train.add_argument("--embeddings", help="pretrained word vector file")
    train.add_argument("--external", help="external context vector file")
    train.add_argument("--min-freq", dest="min_freq", type=int)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--lr", dest="learning_rate", type=float)
    train.add_argument("--max-span-length", dest="max_span_length", type=int)
    train.set_defaults(handler=_cmd_train)

    predict = sub.add_parser("predict", help="label a corpus with a checkpoint")
    predict.add_argument("--checkpoint", required=True)
    predict.add_argument("--input", required=True)
    predict.add_argument("--output", required=True)
    predict.add_argument("--mode", choices=MODES, default=END_TO_END)
    predict.add_argument("--constraints")
    predict.add_argument("--external")
    predict.add_argument("--output-format", dest="output_format",
                         choices=("jsonl", "conll"), default="jsonl")
    predict.set_defaults(handler=_cmd_predict)

    ev = sub.add_parser("evaluate", help="score predictions against gold")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gold", required=True)
    ev.add_argument("--mode", choices=MODES, default=END_TO_END)
    ev.add_argument("--json-out", dest="json_out")
    ev.set_defaults(handler=_cmd_evaluate)

    conv = sub.add_parser("convert",
                          help="span corpus to dependency style via gold heads")
    conv.add_argument("--input", required=True)
    conv.add_argument("--output", required=True)
    conv.set_defaults(handler=_cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SrlkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
