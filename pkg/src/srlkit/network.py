"""The labeling network.

Pipeline per sentence: character-CNN + word (+ optional external
context) token vectors, a stacked bidirectional LSTM with gated highway
connections between layers, ReLU MLPs for predicate/argument candidate
vectors, attention-weighted span summaries for span-style arguments,
unary candidate scorers, and a per-role biaffine relation scorer. The
final score of (predicate, argument, role) is the sum of both unary
scores and the relation score, with the null role pinned to exactly
zero before the per-pair softmax.

Dependency style is the single-token degeneration: with maximum
argument width 1 the argument's final vector is its MLP vector
directly, and the token/encoder stages are bit-identical to span style.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .corpus import EmbeddingMatrix, Vocabulary
from .data import DEP, SPAN, Sentence, Span, enumerate_arguments

#: Span-width feature buckets: widths 1-4 are their own bucket, wider
#: spans share coarser ones. Widths beyond the last edge clamp into it.
WIDTH_BUCKETS = ((1, 1), (2, 2), (3, 3), (4, 4), (5, 7), (8, 15), (16, 30))


def width_bucket(width: int) -> int:
    for b, (lo, hi) in enumerate(WIDTH_BUCKETS):
        if lo <= width <= hi:
            return b
    return len(WIDTH_BUCKETS) - 1


@dataclass(frozen=True)
class ModelConfig:
    """Network and training hyperparameters.

    Defaults follow the benchmark-scale setup (300-d word vectors, 8-d
    characters with 3/4/5-wide convolutions of 50 filters each, 3
    bidirectional LSTM layers of 200 units per direction, 300-d
    candidate MLPs, 150-d scorer MLPs, beams 0.4/0.8, spans up to
    width 30, Adam at 0.001, batch 40, up to 600 epochs). max_span_length
    = 1 selects dependency style.
    """

    word_dim: int = 300
    char_dim: int = 8
    char_windows: tuple[int, ...] = (3, 4, 5)
    char_filters: int = 50
    ext_dim: int = 0
    lstm_layers: int = 3
    lstm_hidden: int = 200
    mlp_dim: int = 300
    scorer_mlp_dim: int = 150
    width_dim: int = 20
    dropout_embed: float = 0.5
    dropout_hidden: float = 0.2
    dropout_recurrent: float = 0.4
    max_span_length: int = 30
    predicate_beam: float = 0.4
    argument_beam: float = 0.8
    learning_rate: float = 0.001
    batch_size: int = 40
    max_epochs: int = 600

    def __post_init__(self):
        object.__setattr__(self, "char_windows", tuple(self.char_windows))
        positive = ("word_dim", "char_dim", "char_filters", "lstm_layers",
                    "lstm_hidden", "mlp_dim", "scorer_mlp_dim", "width_dim",
                    "max_span_length", "batch_size", "max_epochs")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.ext_dim < 0:
            raise ValueError("ext_dim must be >= 0")
        for name in ("dropout_embed", "dropout_hidden", "dropout_recurrent"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        for name in ("predicate_beam", "argument_beam"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if not self.char_windows:
            raise ValueError("need at least one convolution window")

    @property
    def char_out_dim(self) -> int:
        return len(self.char_windows) * self.char_filters

    @property
    def token_dim(self) -> int:
        return self.char_out_dim + self.word_dim + self.ext_dim

    @property
    def context_dim(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def is_dependency(self) -> bool:
        return self.max_span_length == 1

    @property
    def style(self) -> str:
        return DEP if self.is_dependency else SPAN

    @property
    def arg_final_dim(self) -> int:
        if self.is_dependency:
            return self.mlp_dim
        return 3 * self.mlp_dim + self.width_dim

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, blob: dict) -> "ModelConfig":
        blob = dict(blob)
        if "char_windows" in blob:
            blob["char_windows"] = tuple(blob["char_windows"])
        return cls(**blob)


# --- initializers ------------------------------------------------------------


def glorot(rng, *shape) -> np.ndarray:
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else 1
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng, size: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(size, size)))
    # fix the sign ambiguity so the result is deterministic per seed
    return q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)


def _recurrent_matrix(rng, hidden: int) -> np.ndarray:
    # one orthogonal block per gate
    blocks = [orthogonal(rng, hidden) for _ in range(4)]
    return np.concatenate(blocks, axis=1)


@dataclass
class DropoutMasks:
    """Per-sentence dropout masks, all drawn up front for determinism.

    Recurrent masks are shared across timesteps (variational); the rest
    are plain elementwise masks scaled by 1/keep.
    """

    word: np.ndarray | None
    char: np.ndarray | None
    recurrent: list  # [layer][direction] -> (1, hidden) or None
    hidden: list     # [layer] -> (n, 2*hidden) or None
    pred_mlp: np.ndarray | None
    arg_mlp: np.ndarray | None
    width_feature: np.ndarray | None


def _mask(rng, shape, rate):
    if rate <= 0.0:
        return None
    keep = (rng.random(shape) >= rate).astype(np.float64)
    return keep / (1.0 - rate)


def draw_dropout_masks(n: int, n_args: int, config: ModelConfig,
                       rng) -> DropoutMasks:
    return DropoutMasks(
        word=_mask(rng, (n, config.word_dim), config.dropout_embed),
        char=_mask(rng, (n, config.char_out_dim), config.dropout_embed),
        recurrent=[
            [_mask(rng, (1, config.lstm_hidden), config.dropout_recurrent)
             for _ in range(2)]
            for _ in range(config.lstm_layers)
        ],
        hidden=[_mask(rng, (n, config.context_dim), config.dropout_hidden)
                for _ in range(config.lstm_layers)],
        pred_mlp=_mask(rng, (n, config.mlp_dim), config.dropout_hidden),
        arg_mlp=_mask(rng, (n, config.mlp_dim), config.dropout_hidden),
        width_feature=None if config.is_dependency else _mask(
            rng, (n_args, config.width_dim), config.dropout_hidden),
    )


def _maybe_drop(x, mask):
    return x if mask is None else ad.dropout(x, mask)


class SrlModel:
    """Parameters plus the forward computation for one sentence at a time."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, rng,
                 word_matrix: EmbeddingMatrix | None = None):
        self.config = config
        self.vocab = vocab
        self.params: dict[str, ad.Tensor] = {}
        c = config
        p = self._new_param

        if word_matrix is not None:
            if word_matrix.rows.shape != (len(vocab.words), c.word_dim):
                raise ValueError("embedding matrix does not match vocab/config")
            self.params["embed.word"] = ad.parameter(word_matrix.rows, "embed.word")
        else:
            p(rng, "embed.word", len(vocab.words), c.word_dim)
        p(rng, "embed.char", len(vocab.chars), c.char_dim)
        for w in c.char_windows:
            p(rng, f"char_conv.w{w}.weight", w * c.char_dim, c.char_filters)
            self._zero(f"char_conv.w{w}.bias", c.char_filters)

        in_dim = c.token_dim
        for layer in range(c.lstm_layers):
            for tag in ("fw", "bw"):
                p(rng, f"lstm.l{layer}.{tag}.wx", in_dim, 4 * c.lstm_hidden)
                self.params[f"lstm.l{layer}.{tag}.wh"] = ad.parameter(
                    _recurrent_matrix(rng, c.lstm_hidden),
                    f"lstm.l{layer}.{tag}.wh")
                bias = np.zeros(4 * c.lstm_hidden)
                bias[c.lstm_hidden:2 * c.lstm_hidden] = 1.0  # forget gate
                self.params[f"lstm.l{layer}.{tag}.bias"] = ad.parameter(
                    bias, f"lstm.l{layer}.{tag}.bias")
            if layer >= 1:
                p(rng, f"highway.l{layer}.weight", c.context_dim, c.context_dim)
                self._zero(f"highway.l{layer}.bias", c.context_dim)
            in_dim = c.context_dim

        for tag in ("pred", "arg"):
            p(rng, f"mlp.{tag}.weight", c.context_dim, c.mlp_dim)
            self._zero(f"mlp.{tag}.bias", c.mlp_dim)
        if not c.is_dependency:
            p(rng, "attn.mlp.weight", c.mlp_dim, c.mlp_dim)
            self._zero("attn.mlp.bias", c.mlp_dim)
            p(rng, "attn.vector", c.mlp_dim, 1)
            p(rng, "width.embed", len(WIDTH_BUCKETS), c.width_dim)

        p(rng, "score.pred.weight", c.mlp_dim, c.scorer_mlp_dim)
        self._zero("score.pred.bias", c.scorer_mlp_dim)
        p(rng, "score.pred.vector", c.scorer_mlp_dim, 1)
        p(rng, "score.arg.weight", c.arg_final_dim, c.scorer_mlp_dim)
        self._zero("score.arg.bias", c.scorer_mlp_dim)
        p(rng, "score.arg.vector", c.scorer_mlp_dim, 1)

        n_roles = len(vocab.roles)
        if n_roles < 2:
            raise ValueError("the role inventory needs at least one real role")
        for r in range(n_roles):
            p(rng, f"biaffine.bilinear.{r}", c.mlp_dim, c.arg_final_dim)
        p(rng, "biaffine.linear", c.mlp_dim + c.arg_final_dim, n_roles)
        self._zero("biaffine.bias", n_roles)

    def _new_param(self, rng, name, *shape):
        self.params[name] = ad.parameter(glorot(rng, *shape), name)

    def _zero(self, name, *shape):
        self.params[name] = ad.parameter(np.zeros(shape), name)

    def parameters(self) -> dict[str, ad.Tensor]:
        return self.params

    # --- token representation -------------------------------------------

    def _char_vectors(self, sentence: Sentence) -> ad.Tensor:
        """(n, windows*filters) matrix of character-CNN outputs."""
        c = self.config
        wmax = max(c.char_windows)
        rows = []
        for chars in sentence.char_seqs:
            ids = self.vocab.char_ids(chars, pad_to=wmax)
            table = ad.embedding_lookup(self.params["embed.char"], ids)
            m = len(ids)
            pooled = []
            for w in c.char_windows:
                # im2col via a row gather, then one matmul per window
                gather = np.concatenate(
                    [np.arange(pos, pos + w) for pos in range(m - w + 1)])
                patches = ad.reshape(
                    ad.embedding_lookup(table, gather), (m - w + 1, w * c.char_dim))
                conv = ad.relu(ad.add_bias(
                    ad.matmul(patches, self.params[f"char_conv.w{w}.weight"]),
                    self.params[f"char_conv.w{w}.bias"]))
                pooled.append(ad.reshape(ad.max_over_time(conv),
                                         (1, c.char_filters)))
            rows.append(ad.concat(pooled, axis=1))
        return ad.concat(rows, axis=0)

    def token_representation(self, sentence: Sentence,
                             external: np.ndarray | None = None,
                             masks: DropoutMasks | None = None) -> ad.Tensor:
        """Per-token context-independent vectors, (n, token_dim)."""
        c = self.config
        chars = self._char_vectors(sentence)
        words = ad.embedding_lookup(self.params["embed.word"],
                                    self.vocab.word_ids(sentence.tokens))
        if masks is not None:
            chars = _maybe_drop(chars, masks.char)
            words = _maybe_drop(words, masks.word)
        parts = [chars, words]
        if c.ext_dim:
            if external is None:
                external = np.zeros((len(sentence), c.ext_dim))
            if external.shape != (len(sentence), c.ext_dim):
                raise ValueError(
                    f"external vectors {external.shape} do not fit "
                    f"({len(sentence)}, {c.ext_dim})")
            parts.append(ad.constant(external))
        return ad.concat(parts, axis=1)

    # --- encoder -----------------------------------------------------------

    def _run_direction(self, xs_proj: ad.Tensor, layer: int, tag: str,
                       rec_mask) -> ad.Tensor:
        c = self.config
        h_dim = c.lstm_hidden
        wh = self.params[f"lstm.l{layer}.{tag}.wh"]
        bias = self.params[f"lstm.l{layer}.{tag}.bias"]
        n = xs_proj.shape[0]
        h = ad.constant(np.zeros((1, h_dim)))
        cell = ad.constant(np.zeros((1, h_dim)))
        steps = range(n) if tag == "fw" else range(n - 1, -1, -1)
        outputs = [None] * n
        for t in steps:
            x_t = ad.slice_axis(xs_proj, 0, t, t + 1)
            h_in = h if rec_mask is None else ad.dropout(h, rec_mask)
            z = ad.add_bias(ad.add(x_t, ad.matmul(h_in, wh)), bias)
            gate_in = ad.sigmoid(ad.slice_axis(z, 1, 0, h_dim))
            gate_forget = ad.sigmoid(ad.slice_axis(z, 1, h_dim, 2 * h_dim))
            candidate = ad.tanh(ad.slice_axis(z, 1, 2 * h_dim, 3 * h_dim))
            gate_out = ad.sigmoid(ad.slice_axis(z, 1, 3 * h_dim, 4 * h_dim))
            cell = ad.add(ad.mul(gate_forget, cell), ad.mul(gate_in, candidate))
            h = ad.mul(gate_out, ad.tanh(cell))
            outputs[t] = h
        return ad.concat(outputs, axis=0)

    def encode(self, tokens: ad.Tensor,
               masks: DropoutMasks | None = None) -> ad.Tensor:
        """Stacked bidirectional LSTM with highway gates, (n, 2*hidden)."""
        c = self.config
        x = tokens
        n = tokens.shape[0]
        for layer in range(c.lstm_layers):
            halves = []
            for d, tag in enumerate(("fw", "bw")):
                xs_proj = ad.matmul(x, self.params[f"lstm.l{layer}.{tag}.wx"])
                rec = masks.recurrent[layer][d] if masks is not None else None
                halves.append(self._run_direction(xs_proj, layer, tag, rec))
            out = ad.concat(halves, axis=1)
            if layer >= 1:
                # gate computed from the layer input; input and output
                # widths match here so no projection is needed
                gate = ad.sigmoid(ad.add_bias(
                    ad.matmul(x, self.params[f"highway.l{layer}.weight"]),
                    self.params[f"highway.l{layer}.bias"]))
                ones = ad.constant(np.ones((n, c.context_dim)))
                out = ad.add(ad.mul(gate, out),
                             ad.mul(ad.sub(ones, gate), x))
            if masks is not None:
                out = _maybe_drop(out, masks.hidden[layer])
            x = out
        return x

    # --- candidate representations ------------------------------------------

    def _mlp(self, x: ad.Tensor, tag: str) -> ad.Tensor:
        return ad.relu(ad.add_bias(
            ad.matmul(x, self.params[f"mlp.{tag}.weight"]),
            self.params[f"mlp.{tag}.bias"]))

    def candidate_representations(self, context: ad.Tensor, spans: list[Span],
                                  masks: DropoutMasks | None = None):
        """Predicate vectors, argument vectors, and final argument vectors.

        Span style builds [start, end, attention summary, width feature]
        per candidate; dependency style returns the argument vectors
        unchanged (the spans are exactly the tokens, in order).
        """
        pred = self._mlp(context, "pred")
        arg = self._mlp(context, "arg")
        if masks is not None:
            pred = _maybe_drop(pred, masks.pred_mlp)
            arg = _maybe_drop(arg, masks.arg_mlp)
        if self.config.is_dependency:
            return pred, arg, arg
        rows = []
        for span in spans:
            window = ad.slice_axis(arg, 0, span.start - 1, span.end)
            hidden = ad.relu(ad.add_bias(
                ad.matmul(window, self.params["attn.mlp.weight"]),
                self.params["attn.mlp.bias"]))
            logits = ad.reshape(ad.matmul(hidden, self.params["attn.vector"]),
                                (span.width,))
            weights = ad.softmax(logits)
            summary = ad.matmul(ad.reshape(weights, (1, span.width)), window)
            start = ad.slice_axis(arg, 0, span.start - 1, span.start)
            end = ad.slice_axis(arg, 0, span.end - 1, span.end)
            rows.append((start, end, summary, span))
        width_ids = np.array([width_bucket(s.width) for s in spans], dtype=np.intp)
        widths = ad.embedding_lookup(self.params["width.embed"], width_ids)
        if masks is not None:
            widths = _maybe_drop(widths, masks.width_feature)
        final_rows = []
        for k, (start, end, summary, span) in enumerate(rows):
            wrow = ad.slice_axis(widths, 0, k, k + 1)
            final_rows.append(ad.concat([start, end, summary, wrow], axis=1))
        return pred, arg, ad.concat(final_rows, axis=0)

    # --- scorers -----------------------------------------------------------

    def unary_scores(self, pred: ad.Tensor, arg_final: ad.Tensor):
        """One scalar per predicate candidate and per argument candidate."""
        def score(x, tag):
            hidden = ad.relu(ad.add_bias(
                ad.matmul(x, self.params[f"score.{tag}.weight"]),
                self.params[f"score.{tag}.bias"]))
            return ad.matmul(hidden, self.params[f"score.{tag}.vector"])

        return score(pred, "pred"), score(arg_final, "arg")

    def biaffine_scores(self, pred_rows: ad.Tensor,
                        arg_rows: ad.Tensor) -> ad.Tensor:
        """Relation scores for every (predicate, argument) pair and role.

        Returns (|P|*|A|, roles) with pairs in predicate-major order:
        a bilinear form per role plus a shared linear term on the
        concatenated pair plus a per-role bias.
        """
        n_roles = len(self.vocab.roles)
        n_pred, n_arg = pred_rows.shape[0], arg_rows.shape[0]
        arg_t = ad.transpose(arg_rows)
        columns = []
        for r in range(n_roles):
            bilinear = ad.matmul(
                ad.matmul(pred_rows, self.params[f"biaffine.bilinear.{r}"]),
                arg_t)
            columns.append(ad.reshape(bilinear, (n_pred * n_arg, 1)))
        scores = ad.concat(columns, axis=1)

        linear = self.params["biaffine.linear"]
        d_pred = self.config.mlp_dim
        lin_pred = ad.matmul(pred_rows, ad.slice_axis(linear, 0, 0, d_pred))
        lin_arg = ad.matmul(arg_rows,
                            ad.slice_axis(linear, 0, d_pred, linear.shape[0]))
        pair_p = np.repeat(np.arange(n_pred), n_arg)
        pair_a = np.tile(np.arange(n_arg), n_pred)
        scores = ad.add(scores, ad.embedding_lookup(lin_pred, pair_p))
        scores = ad.add(scores, ad.embedding_lookup(lin_arg, pair_a))
        return ad.add_bias(scores, self.params["biaffine.bias"])


def candidate_spans(n: int, config: ModelConfig) -> list[Span]:
    return enumerate_arguments(n, config.max_span_length)


@dataclass
class ScoredSentence:
    """One sentence's pruned candidates with scores, ready for loss/decoding.

    table carries plain-array scores for the decoder; nonnull is the
    tape-connected (|P|*|A|, roles-1) block behind it, kept so the
    training loss can backpropagate. Pair order is predicate-major.
    """

    table: "ScoreTable"
    nonnull: ad.Tensor

    @property
    def pairs(self):
        return [(p, a) for p in self.table.predicates
                for a in self.table.arguments]


def score_sentence(model: SrlModel, sentence: Sentence, *, train: bool = False,
                   rng=None, external: np.ndarray | None = None,
                   gold_predicates=None) -> ScoredSentence:
    """Run the full pipeline: represent, encode, score, prune, assemble.

    gold_predicates switches to the pre-identified setting: the
    predicate beam is replaced by exactly the given token positions.
    Training mode draws dropout masks from rng; inference applies none.
    """
    from .decoding import ScoreTable, prune  # local to avoid a module cycle

    config = model.config
    n = len(sentence)
    spans = candidate_spans(n, config)
    masks = None
    if train:
        if rng is None:
            raise ValueError("training mode needs an rng for dropout masks")
        masks = draw_dropout_masks(n, len(spans), config, rng)

    tokens = model.token_representation(sentence, external, masks)
    context = model.encode(tokens, masks)
    pred, arg, arg_final = model.candidate_representations(context, spans, masks)
    phi_pred, phi_arg = model.unary_scores(pred, arg_final)

    if gold_predicates is not None:
        kept_pred = sorted(set(gold_predicates))
        if any(not 1 <= p <= n for p in kept_pred):
            raise ValueError("pre-identified predicate outside the sentence")
        pred_ids = np.array([p - 1 for p in kept_pred], dtype=np.intp)
    else:
        beam = prune(phi_pred.data, n, config.predicate_beam)
        pred_ids = np.array(sorted(beam.kept), dtype=np.intp)
        kept_pred = [int(i) + 1 for i in pred_ids]
    arg_beam = prune(phi_arg.data, n, config.argument_beam,
                     tie_keys=[(s.start, s.end) for s in spans])
    arg_ids = np.array(sorted(arg_beam.kept), dtype=np.intp)
    kept_spans = [spans[i] for i in arg_ids]

    n_roles = len(model.vocab.roles)
    n_pred, n_arg = len(kept_pred), len(kept_spans)
    rel = model.biaffine_scores(ad.embedding_lookup(pred, pred_ids),
                                ad.embedding_lookup(arg_final, arg_ids))
    # add both unary scores to every non-null role column; the null
    # score is pinned to zero downstream no matter what
    pair_p = np.repeat(np.arange(n_pred), n_arg)
    pair_a = np.tile(np.arange(n_arg), n_pred)
    unary = ad.add(
        ad.embedding_lookup(ad.embedding_lookup(phi_pred, pred_ids), pair_p),
        ad.embedding_lookup(ad.embedding_lookup(phi_arg, arg_ids), pair_a))
    nonnull = ad.add(ad.slice_axis(rel, 1, 1, n_roles),
                     ad.matmul(unary, ad.constant(np.ones((1, n_roles - 1)))))

    scores = np.zeros((n_pred, n_arg, n_roles))
    if nonnull.size:
        scores[:, :, 1:] = nonnull.data.reshape(n_pred, n_arg, n_roles - 1)
    survived = {(p, s) for p in kept_pred for s in kept_spans}
    gold_total = len(sentence.gold_tuples)
    pruned_gold = sum(1 for t in sentence.gold_tuples
                      if (t.predicate, t.argument) not in survived)
    table = ScoreTable(
        n=n, predicates=tuple(kept_pred), arguments=tuple(kept_spans),
        roles=model.vocab.roles, scores=scores,
        pruned_gold=pruned_gold, gold_total=gold_total)
    return ScoredSentence(table=table, nonnull=nonnull)


def sentence_loss(scored: ScoredSentence, sentence: Sentence,
                  roles) -> ad.Tensor:
    """Summed per-pair cross-entropy against gold roles (null if absent).

    Gold tuples whose pair was pruned away contribute nothing; the
    table's pruned_gold counter records them for the epoch log.
    """
    gold = {(t.predicate, t.argument): roles.index(t.role)
            for t in sentence.gold_tuples}
    n_roles = len(roles)
    zero = ad.constant(np.zeros(1))
    losses = []
    for k, pair in enumerate(scored.pairs):
        row = ad.reshape(ad.slice_axis(scored.nonnull, 0, k, k + 1),
                         (n_roles - 1,))
        vec = ad.concat([zero, row], axis=0)
        losses.append(ad.cross_entropy(vec, gold.get(pair, 0)))
    if not losses:
        return ad.constant(np.zeros(1))
    return ad.reduce_sum(ad.concat(losses, axis=0))
