import math

import numpy as np
import pytest

from gazecontrol import numcore as nc


def test_softmax_uniform():
    out = nc.softmax(nc.tensor([0.0, 0.0, 0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [0.2] * 5)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    out = nc.softmax(nc.tensor(rng.normal(size=(7, 5))), axis=-1)
    assert np.allclose(out.data.sum(axis=-1), 1.0)


def test_softmax_stable_at_large_magnitude():
    out = nc.softmax(nc.tensor([1e4, 0.0, -1e4]))
    assert np.all(np.isfinite(out.data))
    assert abs(out.data.sum() - 1.0) < 1e-12


def test_swish_zero():
    assert nc.swish(nc.tensor(np.array([0.0]))).data[0] == 0.0


def test_swish_values():
    x = np.array([1.5, -2.0])
    expected = x / (1.0 + np.exp(-x)) * 1.0  # x * sigmoid(x)
    expected = x * (1.0 / (1.0 + np.exp(-x)))
    assert np.allclose(nc.swish(nc.tensor(x)).data, expected)


def test_cross_entropy_uniform_is_log5():
    probs = nc.tensor(np.full((1, 5), 0.2))
    onehot = np.zeros((1, 5))
    onehot[0, 3] = 1.0
    loss = nc.cross_entropy(probs, onehot)
    assert abs(float(loss.data) - math.log(5)) < 1e-12


def test_layer_norm_zero_mean_unit_variance():
    rng = np.random.default_rng(1)
    x = rng.normal(2.0, 3.0, size=(4, 6))
    out = nc.layer_norm(nc.tensor(x), nc.tensor(np.ones(6)), nc.tensor(np.zeros(6)))
    assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-7)
    assert np.allclose(out.data.std(axis=-1), 1.0, atol=1e-3)


def test_shape_mismatch_messages_carry_shapes():
    with pytest.raises(nc.ShapeMismatch) as exc:
        nc.matmul(nc.tensor(np.zeros((2, 3))), nc.tensor(np.zeros((4, 2))))
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)
    with pytest.raises(nc.ShapeMismatch):
        nc.add(nc.tensor(np.zeros((2, 3))), nc.tensor(np.zeros((4,))))


def test_backward_linear_case():
    # loss = sum(W @ x): dL/dW = broadcast of x along rows
    W = nc.tensor(np.ones((3, 4)), requires_grad=True)
    x = np.arange(4.0).reshape(4, 1)
    loss = nc.sum_all(nc.matmul(W, nc.tensor(x)))
    loss.backward()
    assert np.allclose(W.grad, np.tile(x.T, (3, 1)))


def test_backward_requires_scalar():
    W = nc.tensor(np.ones((2, 2)), requires_grad=True)
    out = nc.matmul(W, nc.tensor(np.ones((2, 2))))
    with pytest.raises(nc.NotScalarLoss):
        out.backward()


def test_unused_parameter_gets_no_gradient():
    used = nc.tensor(np.ones(3), requires_grad=True)
    unused = nc.tensor(np.ones(3), requires_grad=True)
    loss = nc.sum_all(nc.mul(used, used))
    loss.backward()
    assert used.grad is not None
    assert unused.grad is None  # no path to the loss


def test_gradcheck_each_primitive():
    rng = np.random.default_rng(42)
    ps = nc.ParamSet()
    a = ps.add("a", rng.normal(size=(3, 4)))
    b = ps.add("b", rng.normal(size=(4, 5)))
    g = ps.add("g", rng.normal(size=5) * 0.1 + 1.0)
    beta = ps.add("beta", rng.normal(size=5) * 0.1)
    onehot = np.zeros((3, 5))
    onehot[np.arange(3), [1, 0, 4]] = 1.0

    def loss_fn():
        h = nc.matmul(a, b)
        h = nc.layer_norm(h, g, beta)
        h = nc.concat([nc.tanh(h), nc.sigmoid(h), nc.swish(h)], axis=1)
        h = nc.slice_axis(h, 1, 2, 5)
        h = nc.add(nc.scale(h, 0.7), nc.mul(h, h))
        h = nc.sub(h, nc.global_max(nc.reshape(h, (3, 1, 5)), axis=1))
        probs = nc.softmax(h, axis=-1)
        return nc.cross_entropy(probs, onehot)

    err = nc.gradient_check(loss_fn, ps)
    assert err < 1e-4


def test_gradcheck_transpose_exp_log():
    rng = np.random.default_rng(3)
    ps = nc.ParamSet()
    a = ps.add("a", rng.uniform(0.5, 1.5, size=(2, 3, 4)))

    def loss_fn():
        h = nc.transpose(a, (1, 0, 2))
        h = nc.log(nc.exp(nc.scale(h, 0.3)))
        return nc.mean_all(nc.mul(h, h))

    assert nc.gradient_check(loss_fn, ps) < 1e-4


def test_adam_zero_gradient_keeps_parameters():
    ps = nc.ParamSet()
    w = ps.add("w", np.ones(4))
    before = w.data.copy()
    w.grad = np.zeros(4)
    nc.adam_step(ps)
    assert np.allclose(w.data, before)


def test_adam_first_step_magnitude_is_lr():
    ps = nc.ParamSet()
    w = ps.add("w", np.zeros(3))
    w.grad = np.array([0.5, -2.0, 1e-3])
    nc.adam_step(ps, lr=0.001)
    # first bias-corrected step ~ -lr * sign(g)
    assert np.allclose(np.abs(w.data), 0.001, rtol=1e-4)
    assert np.sign(w.data[1]) == 1.0 and np.sign(w.data[0]) == -1.0


def test_adam_missing_gradient_raises():
    ps = nc.ParamSet()
    ps.add("w", np.ones(2))
    with pytest.raises(nc.MissingGradient):
        nc.adam_step(ps)


def test_adam_clears_gradients_and_counts_steps():
    ps = nc.ParamSet()
    w = ps.add("w", np.ones(2))
    w.grad = np.ones(2)
    nc.adam_step(ps)
    assert w.grad is None
    assert ps.step_count == 1


def test_adam_deterministic_across_runs():
    def run():
        ps = nc.ParamSet()
        w = ps.add("w", np.full(3, 0.3))
        rng = np.random.default_rng(9)
        for _ in range(20):
            x = nc.tensor(rng.normal(size=(3,)))
            loss = nc.sum_all(nc.mul(nc.sub(w, x), nc.sub(w, x)))
            ps.zero_grad()
            loss.backward()
            nc.adam_step(ps)
        return w.data.copy()

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_no_grad_blocks_tape():
    w = nc.tensor(np.ones(3), requires_grad=True)
    with nc.no_grad():
        out = nc.mul(w, w)
    assert out._backward is None and not out.requires_grad


def test_concat_slice_round_trip():
    a = np.arange(6.0).reshape(2, 3)
    b = np.arange(4.0).reshape(2, 2)
    cat = nc.concat([nc.tensor(a), nc.tensor(b)], axis=1)
    assert np.array_equal(nc.slice_axis(cat, 1, 0, 3).data, a)
    assert np.array_equal(nc.slice_axis(cat, 1, 3, 2).data, b)


def test_global_max_forward_and_ties():
    x = np.array([[[1.0, 5.0], [3.0, 5.0]]])  # tie in column 1 along axis 1
    t = nc.tensor(x, requires_grad=True)
    out = nc.global_max(t, axis=1)
    assert np.array_equal(out.data, [[3.0, 5.0]])
    nc.sum_all(out).backward()
    # tie routes to the first argmax position
    assert np.array_equal(t.grad, [[[0.0, 1.0], [1.0, 0.0]]])
