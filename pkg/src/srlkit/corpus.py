"""Corpus parsing/emission, vocabularies, and embedding loading.

Two interchange formats are supported:

* a canonical JSON-lines format (one object per line) that carries both
  annotation styles::

      {"tokens": ["He", "borrowed", "it"],
       "heads": [2, 0, 2],                  # optional, 0 = root
       "tuples": [[2, 1, 1, "A0"], [2, 3, 3, "A1"]],
       "mode": "SPAN"}                      # or "DEP"

* a tab-separated column subset for dependency-style data. Fixed
  columns ID, FORM, HEAD, FILLPRED, PRED, then exactly one role column
  per FILLPRED=Y row; "_" means empty; sentences are separated by blank
  lines. The role in column k of token t attaches t to the k-th marked
  predicate.

Word embedding files are plain text, one "word v1 ... vd" per line.
External per-token context vectors (the pluggable pretrained slot) come
as JSON lines {"sentence": ordinal, "vectors": [[...], ...]}.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import DEP, MODES, NULL_ROLE, RoleInventory, Sentence, Span, SrlTuple
from .errors import (
    BadIndex,
    ColumnCountMismatch,
    DanglingApred,
    DimensionDrift,
    EmptyCorpus,
    EpsilonRoleInGold,
    IndexOutOfRange,
    MalformedRecord,
    UnreadableFile,
)

PAD = "<pad>"
UNK = "<unk>"
EMPTY = "_"
_FIXED_COLUMNS = 5  # ID FORM HEAD FILLPRED PRED


# --- canonical JSONL ---------------------------------------------------------


def parse_jsonl(text: str) -> list[Sentence]:
    """Parse the canonical JSON-lines format."""
    sentences = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: invalid JSON: {exc}") from exc
        sentences.append(_sentence_from_record(record, lineno))
    return sentences


def _sentence_from_record(record, lineno: int) -> Sentence:
    if not isinstance(record, dict):
        raise MalformedRecord(f"line {lineno}: expected an object")
    tokens = record.get("tokens")
    if not isinstance(tokens, list) or not tokens or not all(
            isinstance(t, str) and t for t in tokens):
        raise MalformedRecord(f"line {lineno}: 'tokens' must be nonempty strings")
    n = len(tokens)
    mode = record.get("mode", "SPAN")
    if mode not in MODES:
        raise MalformedRecord(f"line {lineno}: unknown mode {mode!r}")
    heads = record.get("heads")
    if heads is not None:
        if (not isinstance(heads, list) or len(heads) != n
                or not all(isinstance(h, int) for h in heads)):
            raise MalformedRecord(f"line {lineno}: 'heads' must be {n} integers")
        if any(not 0 <= h <= n for h in heads):
            raise IndexOutOfRange(f"line {lineno}: head index outside [0, {n}]")
    tuples = []
    for raw in record.get("tuples", []):
        if (not isinstance(raw, list) or len(raw) != 4
                or not all(isinstance(v, int) for v in raw[:3])
                or not isinstance(raw[3], str)):
            raise MalformedRecord(f"line {lineno}: tuple must be [p, i, j, role]")
        p, i, j, role = raw
        if role == NULL_ROLE:
            raise EpsilonRoleInGold(
                f"line {lineno}: the null role may not appear in gold")
        if not (1 <= p <= n and 1 <= i <= j <= n):
            raise IndexOutOfRange(f"line {lineno}: tuple {raw} outside [1, {n}]")
        if mode == DEP and i != j:
            raise IndexOutOfRange(
                f"line {lineno}: DEP-mode argument must satisfy i == j")
        tuples.append(SrlTuple(p, Span(i, j), role))
    try:
        return Sentence(
            tokens=tuple(tokens),
            gold_heads=None if heads is None else tuple(heads),
            gold_tuples=frozenset(tuples),
            mode_tag=mode,
        )
    except ValueError as exc:
        raise MalformedRecord(f"line {lineno}: {exc}") from exc


def emit_jsonl(sentences) -> str:
    """Serialize to the canonical format, one sentence per line."""
    lines = []
    for s in sentences:
        record = {"tokens": list(s.tokens)}
        if s.gold_heads is not None:
            record["heads"] = list(s.gold_heads)
        record["tuples"] = [
            [t.predicate, t.argument.start, t.argument.end, t.role]
            for t in sorted(s.gold_tuples)
        ]
        record["mode"] = s.mode_tag
        lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


# --- column format -----------------------------------------------------------


def parse_conll(text: str) -> list[Sentence]:
    """Parse the documented column subset; annotation style is DEP."""
    sentences = []
    block: list[str] = []
    start_line = 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            if not block:
                start_line = lineno
            block.append(line)
        elif block:
            sentences.append(_sentence_from_block(block, start_line))
            block = []
    if block:
        sentences.append(_sentence_from_block(block, start_line))
    return sentences


def _sentence_from_block(lines: list[str], start_line: int) -> Sentence:
    rows = [line.split("\t") for line in lines]
    width = len(rows[0])
    if width < _FIXED_COLUMNS:
        raise ColumnCountMismatch(
            f"line {start_line}: need at least {_FIXED_COLUMNS} columns, got {width}")
    for off, row in enumerate(rows):
        if len(row) != width:
            raise ColumnCountMismatch(
                f"line {start_line + off}: {len(row)} columns, block has {width}")
    n = len(rows)
    for t, row in enumerate(rows, start=1):
        if row[0] != str(t):
            raise BadIndex(f"line {start_line + t - 1}: ID column must be {t}")
    tokens = tuple(row[1] for row in rows)

    head_cells = [row[2] for row in rows]
    if all(c == EMPTY for c in head_cells):
        heads = None
    else:
        heads = []
        for off, cell in enumerate(head_cells):
            try:
                h = int(cell)
            except ValueError:
                raise BadIndex(
                    f"line {start_line + off}: HEAD must be an integer or '_'")
            if not 0 <= h <= n:
                raise BadIndex(f"line {start_line + off}: HEAD {h} outside [0, {n}]")
            heads.append(h)
        heads = tuple(heads)

    predicates = []
    for t, row in enumerate(rows, start=1):
        flag = row[3]
        if flag == "Y":
            predicates.append(t)
        elif flag != EMPTY:
            raise MalformedRecord(
                f"line {start_line + t - 1}: FILLPRED must be 'Y' or '_'")
    n_role_columns = width - _FIXED_COLUMNS
    if n_role_columns != len(predicates):
        raise DanglingApred(
            f"line {start_line}: {n_role_columns} role columns "
            f"for {len(predicates)} marked predicates")

    tuples = []
    for t, row in enumerate(rows, start=1):
        for k, cell in enumerate(row[_FIXED_COLUMNS:]):
            if cell == EMPTY:
                continue
            if cell == NULL_ROLE:
                raise EpsilonRoleInGold(
                    f"line {start_line + t - 1}: the null role may not appear in gold")
            tuples.append(SrlTuple(predicates[k], Span(t, t), cell))
    return Sentence(
        tokens=tokens,
        gold_heads=heads,
        gold_tuples=frozenset(tuples),
        mode_tag=DEP,
    )


def emit_conll(sentences) -> str:
    """Emit the column subset. Only DEP-style sentences are expressible."""
    blocks = []
    for s in sentences:
        if s.mode_tag != DEP:
            raise ValueError("the column format carries DEP-style sentences only")
        predicates = sorted(s.gold_graph.predicates)
        col_of = {p: k for k, p in enumerate(predicates)}
        roles = {(t.argument.start, col_of[t.predicate]): t.role
                 for t in s.gold_tuples}
        lines = []
        for t, form in enumerate(s.tokens, start=1):
            head = EMPTY if s.gold_heads is None else str(s.gold_heads[t - 1])
            is_pred = t in col_of
            row = [str(t), form, head, "Y" if is_pred else EMPTY,
                   form if is_pred else EMPTY]
            row += [roles.get((t, k), EMPTY) for k in range(len(predicates))]
            lines.append("\t".join(row))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# --- vocabulary --------------------------------------------------------------


@dataclass
class Vocabulary:
    """Frozen word/char/role index maps. PAD is index 0, UNK index 1.

    Word lookup falls back to the lowercase form before UNK, matching
    common practice with cased corpora over uncased vector files.
    """

    words: tuple[str, ...]
    chars: tuple[str, ...]
    roles: RoleInventory
    word_counts: dict[str, int]

    def __post_init__(self):
        if self.words[:2] != (PAD, UNK) or self.chars[:2] != (PAD, UNK):
            raise ValueError("index 0 must be PAD and index 1 UNK")
        self._word_index = {w: i for i, w in enumerate(self.words)}
        self._char_index = {c: i for i, c in enumerate(self.chars)}
        if len(self._word_index) != len(self.words):
            raise ValueError("duplicate word entries")

    def word_id(self, word: str) -> int:
        idx = self._word_index.get(word)
        if idx is None:
            idx = self._word_index.get(word.lower(), 1)
        return idx

    def char_id(self, char: str) -> int:
        return self._char_index.get(char, 1)

    def word_ids(self, tokens) -> np.ndarray:
        return np.array([self.word_id(t) for t in tokens], dtype=np.intp)

    def char_ids(self, chars, pad_to: int = 0) -> np.ndarray:
        ids = [self.char_id(c) for c in chars]
        while len(ids) < pad_to:
            ids.append(0)
        return np.array(ids, dtype=np.intp)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "words": list(self.words),
            "chars": list(self.chars),
            "roles": list(self.roles.labels),
            "core_roles": sorted(self.roles.core_labels),
            "word_counts": dict(sorted(self.word_counts.items())),
        }

    @classmethod
    def from_json(cls, blob: dict) -> "Vocabulary":
        if blob.get("version") != 1:
            raise ValueError(f"unsupported vocabulary version {blob.get('version')}")
        return cls(
            words=tuple(blob["words"]),
            chars=tuple(blob["chars"]),
            roles=RoleInventory(tuple(blob["roles"]),
                                frozenset(blob["core_roles"])),
            word_counts={k: int(v) for k, v in blob["word_counts"].items()},
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def content_hash(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def build_vocab(sentences, min_freq: int = 1) -> Vocabulary:
    """Index words seen >= min_freq times plus all characters and roles.

    Order is first appearance, which keeps indices stable for a given
    corpus; roles are taken from tuples sorted per sentence so the
    inventory does not depend on set iteration order.
    """
    sentences = list(sentences)
    if not sentences:
        raise EmptyCorpus("cannot build a vocabulary from zero sentences")
    counts: Counter[str] = Counter()
    word_order: list[str] = []
    char_order: list[str] = []
    seen_chars: set[str] = set()
    role_order: list[str] = []
    seen_roles: set[str] = set()
    for s in sentences:
        for tok in s.tokens:
            if tok not in counts:
                word_order.append(tok)
            counts[tok] += 1
        for seq in s.char_seqs:
            for c in seq:
                if c not in seen_chars:
                    seen_chars.add(c)
                    char_order.append(c)
        for t in sorted(s.gold_tuples):
            if t.role not in seen_roles:
                seen_roles.add(t.role)
                role_order.append(t.role)
    words = (PAD, UNK) + tuple(w for w in word_order if counts[w] >= min_freq)
    chars = (PAD, UNK) + tuple(char_order)
    return Vocabulary(
        words=words,
        chars=chars,
        roles=RoleInventory.from_observed(role_order),
        word_counts={w: counts[w] for w in words[2:]},
    )


# --- embeddings --------------------------------------------------------------


@dataclass
class EmbeddingMatrix:
    """One row per vocabulary word; source records where the rows came from."""

    rows: np.ndarray
    source: str  # RANDOM | PRETRAINED


def random_embeddings(vocab: Vocabulary, dim: int, rng) -> EmbeddingMatrix:
    rows = rng.uniform(-0.01, 0.01, size=(len(vocab.words), dim))
    rows[0] = 0.0
    return EmbeddingMatrix(rows=rows, source="RANDOM")


def load_pretrained(path, vocab: Vocabulary, rng) -> EmbeddingMatrix:
    """Read "word v1 ... vd" lines; misses get uniform(-0.01, 0.01) rows."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UnreadableFile(f"cannot read embedding file {path}: {exc}") from exc
    table: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise DimensionDrift(f"line {lineno}: no vector values")
        elif len(values) != dim:
            raise DimensionDrift(
                f"line {lineno}: dimension {len(values)} after seeing {dim}")
        try:
            table[word] = np.array([float(v) for v in values])
        except ValueError as exc:
            raise MalformedRecord(f"line {lineno}: non-numeric value") from exc
    if dim is None:
        raise DimensionDrift(f"{path}: empty embedding file")
    rows = np.zeros((len(vocab.words), dim))
    for i, word in enumerate(vocab.words):
        if i == 0:
            continue  # PAD stays zero
        vec = table.get(word)
        if vec is None:
            vec = table.get(word.lower())
        rows[i] = vec if vec is not None else rng.uniform(-0.01, 0.01, size=dim)
    return EmbeddingMatrix(rows=rows, source="PRETRAINED")


def load_external(path, sentences) -> list[np.ndarray]:
    """Load per-token context vectors keyed by sentence ordinal.

    Every record must match its sentence's length, and the vector width
    must be constant across the file.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise UnreadableFile(f"cannot read external file {path}: {exc}") from exc
    by_ordinal: dict[int, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(lines, start=1):
        try:
            record = json.loads(line)
            ordinal = int(record["sentence"])
            vectors = np.array(record["vectors"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from exc
        if vectors.ndim != 2:
            raise MalformedRecord(f"line {lineno}: 'vectors' must be a matrix")
        if dim is None:
            dim = vectors.shape[1]
        elif vectors.shape[1] != dim:
            raise DimensionDrift(
                f"line {lineno}: width {vectors.shape[1]} after seeing {dim}")
        by_ordinal[ordinal] = vectors
    out = []
    for i, s in enumerate(sentences):
        vec = by_ordinal.get(i)
        if vec is None:
            raise MalformedRecord(f"no external record for sentence {i}")
        if vec.shape[0] != len(s):
            raise MalformedRecord(
                f"sentence {i}: {vec.shape[0]} vectors for {len(s)} tokens")
        out.append(vec)
    return out


def read_corpus(path) -> list[Sentence]:
    """Parse a corpus file, picking the format from the extension.

    .jsonl/.json use the canonical format, everything else the column
    format.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UnreadableFile(f"cannot read corpus {path}: {exc}") from exc
    if str(path).endswith((".jsonl", ".json")):
        return parse_jsonl(text)
    return parse_conll(text)
