import numpy as np
import pytest

from pkdmamba.errors import LabelIndexError, NumericalError, ParameterError, ShapeError, UsageError
from pkdmamba.tensor import (
    SGD,
    LRSchedule,
    Tensor,
    backward,
    causal_conv1d,
    check_gradients,
    concat,
    cross_entropy,
    log_softmax,
    matmul,
    no_grad,
    parameter,
    sgd_step,
    silu,
    softmax_t,
)


def test_matmul_values_and_shape_check(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, a @ b)
    with pytest.raises(ShapeError):
        matmul(Tensor(a), Tensor(a))


def test_matmul_gradients(rng):
    a = parameter(rng.normal(size=(3, 4)))
    b = parameter(rng.normal(size=(4, 2)))
    errors = check_gradients(lambda: (matmul(a, b) ** 2).sum(), [("a", a), ("b", b)])
    assert max(errors.values()) < 1e-7


def test_softmax_t_rows_sum_to_one_and_flatten_with_temperature(rng):
    logits = Tensor(rng.normal(size=(5, 4)) * 3)
    cold = softmax_t(logits, 1.0).data
    hot = softmax_t(logits, 1e4).data
    np.testing.assert_allclose(cold.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(hot, 0.25, atol=1e-3)
    with pytest.raises(ParameterError):
        softmax_t(logits, 0.0)


def test_softmax_t_is_stable_for_large_logits():
    probs = softmax_t(Tensor([[1000.0, 0.0, -1000.0]])).data
    assert np.all(np.isfinite(probs))
    assert probs[0, 0] == pytest.approx(1.0)


def test_cross_entropy_uniform_logits_is_log_labels():
    loss = cross_entropy(Tensor(np.zeros((3, 5))), [0, 2, 4])
    assert loss.item() == pytest.approx(np.log(5))


def test_cross_entropy_accepts_probabilities():
    probs = np.array([[0.25, 0.75], [0.5, 0.5]])
    loss = cross_entropy(Tensor(probs), [1, 0], from_logits=False)
    assert loss.item() == pytest.approx(-(np.log(0.75) + np.log(0.5)) / 2)


def test_cross_entropy_rejects_out_of_range_targets():
    with pytest.raises(LabelIndexError):
        cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])
    with pytest.raises(ShapeError):
        cross_entropy(Tensor(np.zeros((2, 3))), [0])


def test_silu_value_and_slope_at_zero():
    x = parameter(np.array([0.0, 2.0]))
    y = silu(x)
    assert y.data[0] == 0.0
    assert y.data[1] == pytest.approx(2.0 / (1.0 + np.exp(-2.0)))
    backward(y.sum())
    assert x.grad[0] == pytest.approx(0.5)


def test_backward_sums_over_all_consumers():
    x = parameter(np.array([1.5, -2.0]))
    backward((x * x + x).sum())
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_backward_needs_scalar_on_tape():
    x = parameter(np.ones(3))
    with pytest.raises(UsageError):
        backward(x * 2)
    with pytest.raises(UsageError):
        backward(Tensor(1.0))


def test_no_grad_skips_the_tape():
    x = parameter(np.ones(2))
    with no_grad():
        y = (x * 3).sum()
    assert not y.requires_grad
    assert y.detach().requires_grad is False


def test_composite_primitives_match_finite_differences(rng):
    x = parameter(rng.normal(size=(2, 5, 3)))
    w = parameter(rng.normal(size=(3, 2)))
    b = parameter(rng.normal(size=(3,)))
    target = np.array([1, 0])

    def loss():
        y = causal_conv1d(x, w, b)
        pooled = concat([y[:, 0], y.mean(axis=1)], axis=1)
        return cross_entropy(log_softmax(pooled), target)

    errors = check_gradients(loss, [("x", x), ("w", w), ("b", b)])
    assert max(errors.values()) < 1e-6


def test_causal_conv_only_sees_the_past(rng):
    x = rng.normal(size=(1, 6, 2))
    w = rng.normal(size=(2, 3))
    y0 = causal_conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(2))).data
    x[:, 4:] += 10.0
    y1 = causal_conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(2))).data
    np.testing.assert_array_equal(y0[:, :4], y1[:, :4])


def test_sgd_step_is_exact():
    p = parameter(np.array([1.0, 2.0]))
    sgd_step([p], [np.array([0.5, -1.0])], 0.1)
    np.testing.assert_array_equal(p.data, np.array([1.0 - 0.1 * 0.5, 2.0 + 0.1 * 1.0]))
    with pytest.raises(ShapeError):
        sgd_step([p], [np.ones(3)], 0.1)


def test_sgd_step_with_zero_lr_leaves_params_unchanged():
    p = parameter(np.array([1.0, 2.0]))
    sgd_step([p], [np.array([5.0, 5.0])], 0.0)
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_lr_schedule_decays_geometrically():
    schedule = LRSchedule(1e-4, 0.9, 1)
    assert schedule.lr_at(0) == 1e-4
    assert schedule.lr_at(3) == pytest.approx(1e-4 * 0.9 ** 3)
    assert LRSchedule(1.0, 0.5, 2).lr_at(3) == 0.5
    with pytest.raises(ParameterError):
        LRSchedule(1.0, 1.5)


def test_plain_sgd_matches_sgd_step():
    p = parameter(np.array([1.0, -1.0]))
    q = parameter(np.array([1.0, -1.0]))
    opt = SGD([("p", p)], LRSchedule(0.1))
    backward((p * p).sum())
    opt.step()
    sgd_step([q], [2 * np.array([1.0, -1.0])], 0.1)
    np.testing.assert_array_equal(p.data, q.data)
    opt.advance_epoch()
    assert opt.lr == pytest.approx(0.09)


def test_clipping_bounds_the_update():
    p = parameter(np.zeros(2))
    opt = SGD([("p", p)], LRSchedule(1.0), clip_norm=1.0)
    p.grad = np.array([30.0, 40.0])
    opt.step()
    np.testing.assert_allclose(p.data, [-0.6, -0.8])


def test_non_finite_gradient_names_the_parameter():
    p = parameter(np.zeros(2))
    opt = SGD([("blocks.0.weight", p)], LRSchedule(0.1))
    p.grad = np.array([np.nan, 1.0])
    with pytest.raises(NumericalError, match="blocks.0.weight"):
        opt.step()


def test_softmax_t_of_zero_and_log_three():
    probs = softmax_t(Tensor([[0.0, np.log(3.0)]])).data
    np.testing.assert_allclose(probs, [[0.25, 0.75]], atol=1e-12)


def test_silu_vanishes_for_large_negative_inputs():
    assert abs(silu(Tensor(np.array([-20.0]))).data[0]) < 1e-7
