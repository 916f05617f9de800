"""Gradient correctness via central finite differences, plus tape rules.

The finite-difference harness is the independent oracle for every
primitive: perturb one input element at a time with step 1e-5 and
compare against the tape gradient at relative tolerance 1e-4.
"""

import numpy as np
import pytest

from srlkit import autodiff as ad
from srlkit.errors import NoTape, NotScalar, ShapeMismatch, TapeConsumed

STEP = 1e-5
RTOL = 1e-4


def numeric_grad(f, x: np.ndarray) -> np.ndarray:
    """Central finite differences of a scalar-valued f at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + STEP
        hi = f()
        flat[i] = keep - STEP
        lo = f()
        flat[i] = keep
        out[i] = (hi - lo) / (2 * STEP)
    return g


def check_op(build, *arrays, seed=0):
    """Tape gradient of sum(build(*tensors)) vs finite differences."""
    tensors = [ad.parameter(a.copy(), f"x{i}") for i, a in enumerate(arrays)]
    with ad.Tape() as tape:
        out = build(*tensors)
        loss = out if out.size == 1 and out.data.ndim == 1 else ad.reduce_sum(out)
    tape.backward(loss)
    for t in tensors:
        exact = t.gradient()
        approx = numeric_grad(
            lambda: float(np.sum(build(*[ad.constant(u.data) for u in tensors]).data)),
            t.data,
        )
        scale = np.maximum(np.abs(exact), np.abs(approx))
        err = np.abs(exact - approx) / np.maximum(scale, 1.0)
        assert err.max() < RTOL, f"{t.name}: max rel err {err.max():.2e}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


class TestForwardValues:
    def test_relu(self):
        assert ad.relu(ad.constant([-1.0, 2.0])).data.tolist() == [0.0, 2.0]

    def test_softmax_uniform(self):
        np.testing.assert_allclose(
            ad.softmax(ad.constant([0.0, 0.0])).data, [0.5, 0.5])

    def test_softmax_sums_to_one(self, rng):
        y = ad.softmax(ad.constant(rng.normal(size=9))).data
        assert abs(y.sum() - 1.0) < 1e-12

    def test_cross_entropy_uniform_is_log_n(self):
        loss = ad.cross_entropy(ad.constant([0.0, 0.0, 0.0]), 1)
        np.testing.assert_allclose(loss.data[0], np.log(3.0), rtol=1e-12)

    def test_cross_entropy_dominant_gold_tends_to_zero(self):
        loss = ad.cross_entropy(ad.constant([0.0, 500.0, 0.0]), 1)
        assert loss.data[0] < 1e-12

    def test_max_over_time(self):
        m = ad.constant([[1.0, 5.0], [3.0, 2.0]])
        assert ad.max_over_time(m).data.tolist() == [3.0, 5.0]

    def test_shape_errors(self):
        with pytest.raises(ShapeMismatch):
            ad.add(ad.constant([1.0]), ad.constant([1.0, 2.0]))
        with pytest.raises(ShapeMismatch):
            ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))
        with pytest.raises(ShapeMismatch):
            ad.add_bias(ad.constant(np.ones((2, 3))), ad.constant(np.ones(2)))


class TestGradientsAgainstFiniteDifferences:
    """Every primitive on randomized shapes up to 8x8."""

    def test_add_sub(self, rng):
        a, b = rng.normal(size=(5, 7)), rng.normal(size=(5, 7))
        check_op(ad.add, a, b)
        check_op(ad.sub, a, b)

    def test_mul_same_shape_and_scalar(self, rng):
        check_op(ad.mul, rng.normal(size=(4, 6)), rng.normal(size=(4, 6)))
        check_op(ad.mul, rng.normal(size=(1,)), rng.normal(size=(5, 3)))
        check_op(ad.mul, rng.normal(size=(6,)), rng.normal(size=(1,)))

    def test_matmul(self, rng):
        check_op(ad.matmul, rng.normal(size=(2, 3)), rng.normal(size=(3, 1)))
        check_op(ad.matmul, rng.normal(size=(7, 8)), rng.normal(size=(8, 5)))

    def test_transpose(self, rng):
        check_op(lambda a: ad.transpose(a), rng.normal(size=(3, 5)))

    def test_add_bias(self, rng):
        check_op(ad.add_bias, rng.normal(size=(6, 4)), rng.normal(size=4))

    def test_concat_both_axes(self, rng):
        check_op(lambda a, b: ad.concat([a, b], axis=0),
                 rng.normal(size=(2, 4)), rng.normal(size=(3, 4)))
        check_op(lambda a, b: ad.concat([a, b], axis=1),
                 rng.normal(size=(3, 2)), rng.normal(size=(3, 5)))

    def test_slice_axis(self, rng):
        check_op(lambda a: ad.slice_axis(a, 0, 1, 3), rng.normal(size=(5, 4)))
        check_op(lambda a: ad.slice_axis(a, 1, 0, 2), rng.normal(size=(4, 6)))

    def test_reshape(self, rng):
        check_op(lambda a: ad.reshape(a, (8,)), rng.normal(size=(2, 4)))

    def test_activations(self, rng):
        # keep relu inputs away from the kink at zero
        x = rng.normal(size=(6, 6))
        x = np.where(np.abs(x) < 0.05, 0.2, x)
        check_op(ad.relu, x)
        check_op(ad.sigmoid, rng.normal(size=(5, 5)))
        check_op(ad.tanh, rng.normal(size=(8, 3)))

    def test_softmax(self, rng):
        w = rng.normal(size=7)
        check_op(lambda a: ad.mul(ad.softmax(a), ad.constant(w)),
                 rng.normal(size=7))

    def test_reduce_sum(self, rng):
        check_op(ad.reduce_sum, rng.normal(size=(3, 8)))

    def test_max_over_time(self, rng):
        check_op(ad.max_over_time, rng.normal(size=(6, 5)))

    def test_embedding_lookup(self, rng):
        ids = np.array([2, 0, 2, 4])
        weights = ad.constant(rng.normal(size=(4, 3)))
        check_op(lambda t: ad.mul(ad.embedding_lookup(t, ids), weights),
                 rng.normal(size=(5, 3)))

    def test_dropout(self, rng):
        mask = (rng.random((6, 4)) > 0.3).astype(float) / 0.7
        check_op(lambda a: ad.dropout(a, mask), rng.normal(size=(6, 4)))

    def test_cross_entropy(self, rng):
        check_op(lambda a: ad.cross_entropy(a, 2), rng.normal(size=6))

    def test_composition(self, rng):
        w1 = rng.normal(size=(4, 5))
        w2 = rng.normal(size=(5, 1))
        x = rng.normal(size=(3, 4))

        def net(a, b, c):
            h = ad.tanh(ad.matmul(a, b))
            return ad.matmul(h, c)

        check_op(net, x, w1, w2)


class TestBackwardContract:
    def test_sum_gradient_is_ones(self):
        x = ad.parameter([1.0, -2.0, 3.0], "x")
        with ad.Tape() as tape:
            loss = ad.reduce_sum(x)
        tape.backward(loss)
        assert x.gradient().tolist() == [1.0, 1.0, 1.0]

    def test_elementwise_square_gradient(self):
        x = ad.parameter([1.0, 2.0], "x")
        with ad.Tape() as tape:
            loss = ad.reduce_sum(ad.mul(x, x))
        tape.backward(loss)
        assert x.gradient().tolist() == [2.0, 4.0]

    def test_unreachable_parameter_reads_zero(self):
        x = ad.parameter([1.0], "x")
        y = ad.parameter([5.0], "y")
        with ad.Tape() as tape:
            loss = ad.reduce_sum(ad.mul(x, x))
        tape.backward(loss)
        assert y.gradient().tolist() == [0.0]

    def test_not_scalar(self):
        x = ad.parameter([1.0, 2.0], "x")
        with ad.Tape() as tape:
            y = ad.mul(x, x)
        with pytest.raises(NotScalar):
            tape.backward(y)

    def test_foreign_value_rejected(self):
        x = ad.parameter([1.0], "x")
        with ad.Tape() as tape:
            ad.mul(x, x)
        with pytest.raises(NoTape):
            tape.backward(ad.constant([3.0]))

    def test_double_backward_is_an_error(self):
        x = ad.parameter([1.0, 2.0], "x")
        with ad.Tape() as tape:
            loss = ad.reduce_sum(ad.mul(x, x))
        tape.backward(loss)
        with pytest.raises(TapeConsumed):
            tape.backward(loss)

    def test_gradients_accumulate_across_uses(self):
        x = ad.parameter([3.0], "x")
        with ad.Tape() as tape:
            loss = ad.reduce_sum(ad.add(ad.mul(x, x), ad.mul(x, x)))
        tape.backward(loss)
        assert x.gradient().tolist() == [12.0]


class TestAdam:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = ad.parameter([1.5, -2.0], "p")
        opt = ad.Adam({"p": p}, lr=0.001)
        before = p.data.copy()
        opt.step()
        np.testing.assert_array_equal(p.data, before)

    def test_first_step_moves_by_learning_rate(self):
        # hand-run of the recurrence: m-hat = v-hat = 1 at t = 1, so the
        # update is lr / (1 + eps) regardless of gradient magnitude sign
        p = ad.parameter([1.0], "p")
        p.grad = np.array([1.0])
        opt = ad.Adam({"p": p}, lr=0.001)
        opt.step()
        np.testing.assert_allclose(p.data[0], 1.0 - 0.001 / (1.0 + 1e-8),
                                   rtol=0, atol=1e-15)
        assert abs(p.data[0] - 0.999) < 1e-10

    def test_repeated_identical_gradient_never_grows_the_step(self):
        p = ad.parameter([1.0], "p")
        opt = ad.Adam({"p": p}, lr=0.001)
        p.grad = np.array([0.7])
        before = p.data[0]
        opt.step()
        delta1 = abs(p.data[0] - before)
        before = p.data[0]
        p.grad = np.array([0.7])
        opt.step()
        delta2 = abs(p.data[0] - before)
        assert delta2 <= delta1 + 1e-12

    def test_functional_step_shape_check(self):
        with pytest.raises(ShapeMismatch):
            ad.adam_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), 1)


class TestDeterminism:
    def test_forward_backward_update_bit_reproducible(self):
        def run():
            rng = np.random.default_rng(7)
            w = ad.parameter(rng.normal(size=(4, 4)), "w")
            x = ad.constant(rng.normal(size=(2, 4)))
            opt = ad.Adam({"w": w}, lr=0.01)
            for _ in range(3):
                opt.zero_grad()
                with ad.Tape() as tape:
                    loss = ad.reduce_sum(ad.tanh(ad.matmul(x, w)))
                tape.backward(loss)
                opt.step()
            return w.data.tobytes()

        assert run() == run()
