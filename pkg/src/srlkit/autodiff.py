"""Dense float64 tensors with tape-based reverse-mode differentiation.

Exactly the operations the labeling network needs, nothing more. Kept
deliberately small and auditable:

* 64-bit floats everywhere; desk-scale models make speed irrelevant and
  finite-difference checks reliable.
* no implicit broadcasting. The only shape mixes accepted are the ones
  written out per operation (scalar * tensor, and the explicit row-wise
  add_bias); everything else raises ShapeMismatch.
* dropout takes a precomputed mask, so variational (timestep-shared)
  masks are built once per sequence by the caller.

One tape per training thread; tapes are not shareable. With no tape
active every operation is plain forward arithmetic, which is how
inference runs.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import NoTape, NotScalar, ShapeMismatch, TapeConsumed

_STATE = threading.local()


def _tape() -> "Tape | None":
    return getattr(_STATE, "tape", None)


class Tensor:
    """A dense float64 array plus an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad", "_tracked", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._tracked = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def gradient(self) -> np.ndarray:
        """Accumulated gradient; zeros if this tensor was unreachable."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = self.name or "tensor"
        return f"<{tag} {self.data.shape} grad={'yes' if self.grad is not None else 'no'}>"


class Tape:
    """Ordered record of executed primitives for one backward pass.

    Usable as a context manager; operations executed inside record a
    backward rule whenever any differentiable input is involved.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, callable]] = []
        self._produced: set[int] = set()
        self._consumed = False

    def __enter__(self) -> "Tape":
        if _tape() is not None:
            raise RuntimeError("a tape is already active on this thread")
        _STATE.tape = self
        return self

    def __exit__(self, *exc):
        _STATE.tape = None
        return False

    def _record(self, out: Tensor, rule) -> None:
        out._tracked = True
        self._records.append((out, rule))
        self._produced.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Populate .grad of every tensor loss depends on.

        Visits each recorded node exactly once, in reverse. Running a
        tape twice would silently double-accumulate, so it is an error.
        """
        if self._consumed:
            raise TapeConsumed("this tape has already been played back")
        if loss.size != 1:
            raise NotScalar(f"loss must be scalar, got shape {loss.shape}")
        if id(loss) not in self._produced:
            raise NoTape("loss value was not produced under this tape")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for out, rule in reversed(self._records):
            if out.grad is not None:
                rule(out.grad)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data, inputs, rule_factory) -> Tensor:
    """Build an output tensor, recording a backward rule if needed."""
    out = Tensor(data)
    tape = _tape()
    if tape is not None and any(t._tracked for t in inputs):
        tape._record(out, rule_factory(out))
    return out


def constant(data) -> Tensor:
    """A tensor that never receives gradient (inputs, masks, selectors)."""
    return Tensor(data)


def parameter(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


# --- primitives -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g)
            if b._tracked:
                _accumulate(b, g)
        return run

    return _make(a.data + b.data, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g)
            if b._tracked:
                _accumulate(b, -g)
        return run

    return _make(a.data - b.data, (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; one operand may be a scalar (size 1)."""
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                ga = g * b.data
                if a.size == 1 and ga.shape != a.shape:
                    ga = np.sum(ga).reshape(a.shape)
                _accumulate(a, ga)
            if b._tracked:
                gb = g * a.data
                if b.size == 1 and gb.shape != b.shape:
                    gb = np.sum(gb).reshape(b.shape)
                _accumulate(b, gb)
        return run

    return _make(a.data * b.data, (a, b), rule)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g @ b.data.T)
            if b._tracked:
                _accumulate(b, a.data.T @ g)
        return run

    return _make(a.data @ b.data, (a, b), rule)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose needs a matrix, got {a.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g.T)
        return run

    return _make(a.data.T.copy(), (a,), rule)


def add_bias(m: Tensor, b: Tensor) -> Tensor:
    """Add a length-c vector to every row of an (r, c) matrix."""
    if m.data.ndim != 2 or b.shape != (m.shape[1],):
        raise ShapeMismatch(f"add_bias: {m.shape} + {b.shape}")

    def rule(out):
        def run(g):
            if m._tracked:
                _accumulate(m, g)
            if b._tracked:
                _accumulate(b, g.sum(axis=0))
        return run

    return _make(m.data + b.data, (m, b), rule)


def concat(parts, axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeMismatch("concat of nothing")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {[p.shape for p in parts]}") from exc
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def rule(out):
        def run(g):
            for p, lo, hi in zip(parts, offsets, offsets[1:]):
                if p._tracked:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    _accumulate(p, g[tuple(idx)])
        return run

    return _make(data, parts, rule)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if axis >= a.data.ndim or not 0 <= start < stop <= a.shape[axis]:
        raise ShapeMismatch(f"slice [{start}:{stop}] on axis {axis} of {a.shape}")
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def rule(out):
        def run(g):
            if a._tracked:
                if a.grad is None:
                    a.grad = np.zeros_like(a.data)
                a.grad[idx] += g
        return run

    return _make(a.data[idx].copy(), (a,), rule)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g.reshape(a.shape))
        return run

    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape {a.shape} -> {shape}") from exc
    return _make(data.copy(), (a,), rule)


def relu(a: Tensor) -> Tensor:
    def rule(out):
        mask = a.data > 0.0

        def run(g):
            if a._tracked:
                _accumulate(a, g * mask)
        return run

    return _make(np.maximum(a.data, 0.0), (a,), rule)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g * out.data * (1.0 - out.data))
        return run

    return _make(y, (a,), rule)


def tanh(a: Tensor) -> Tensor:
    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g * (1.0 - out.data * out.data))
        return run

    return _make(np.tanh(a.data), (a,), rule)


def softmax(a: Tensor) -> Tensor:
    """Softmax over a 1-D vector (max-shifted for stability)."""
    if a.data.ndim != 1:
        raise ShapeMismatch(f"softmax expects a vector, got {a.shape}")
    z = np.exp(a.data - a.data.max())
    y = z / z.sum()

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, (g - np.dot(g, out.data)) * out.data)
        return run

    return _make(y, (a,), rule)


def reduce_sum(a: Tensor) -> Tensor:
    """Sum of all elements, as a shape-(1,) scalar."""

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, np.full_like(a.data, g[0]))
        return run

    return _make(np.array([a.data.sum()]), (a,), rule)


def max_over_time(a: Tensor) -> Tensor:
    """Column-wise max over the rows of a (t, d) matrix -> (d,).

    Ties resolve to the earliest row, which keeps backward deterministic.
    """
    if a.data.ndim != 2:
        raise ShapeMismatch(f"max_over_time expects a matrix, got {a.shape}")
    winners = np.argmax(a.data, axis=0)

    def rule(out):
        def run(g):
            if a._tracked:
                if a.grad is None:
                    a.grad = np.zeros_like(a.data)
                a.grad[winners, np.arange(a.shape[1])] += g
        return run

    return _make(a.data[winners, np.arange(a.shape[1])].copy(), (a,), rule)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a (v, d) table; gradient scatter-adds back."""
    ids = np.asarray(ids, dtype=np.intp)
    if table.data.ndim != 2 or ids.ndim != 1:
        raise ShapeMismatch(f"lookup into {table.shape} with ids {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeMismatch("lookup index outside the table")

    def rule(out):
        def run(g):
            if table._tracked:
                if table.grad is None:
                    table.grad = np.zeros_like(table.data)
                np.add.at(table.grad, ids, g)
        return run

    return _make(table.data[ids].copy(), (table,), rule)


def dropout(a: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a fixed 0/(1/keep) mask built by the caller."""
    if mask.shape != a.shape:
        raise ShapeMismatch(f"dropout mask {mask.shape} on {a.shape}")

    def rule(out):
        def run(g):
            if a._tracked:
                _accumulate(a, g * mask)
        return run

    return _make(a.data * mask, (a,), rule)


def cross_entropy(scores: Tensor, target: int) -> Tensor:
    """-log softmax(scores)[target] for a 1-D score vector, shape (1,).

    Computed as logsumexp(scores) - scores[target]; backward is the
    softmax minus the one-hot target, which keeps it stable when one
    score dominates.
    """
    if scores.data.ndim != 1:
        raise ShapeMismatch(f"cross_entropy expects a vector, got {scores.shape}")
    if not 0 <= target < scores.size:
        raise ShapeMismatch(f"target {target} outside vector of {scores.size}")
    m = scores.data.max()
    z = np.exp(scores.data - m)
    logsum = m + np.log(z.sum())

    def rule(out):
        probs = z / z.sum()

        def run(g):
            if scores._tracked:
                delta = probs.copy()
                delta[target] -= 1.0
                _accumulate(scores, g[0] * delta)
        return run

    return _make(np.array([logsum - scores.data[target]]), (scores,), rule)


# --- optimizer --------------------------------------------------------------


def adam_step(value, grad, m, v, t, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update with bias correction; returns nothing.

    value/m/v are mutated arrays of identical shape; t is the 1-based
    step count after this update.
    """
    if not (value.shape == grad.shape == m.shape == v.shape):
        raise ShapeMismatch("adam_step: mismatched shapes")
    if t < 1:
        raise ValueError("step count must be >= 1")
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    value -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a named parameter dict, with per-parameter moments."""

    def __init__(self, params: dict[str, Tensor], lr=0.001, beta1=0.9,
                 beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        for name, p in self.params.items():
            adam_step(p.data, p.gradient(), self._m[name], self._v[name],
                      self.t, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()
