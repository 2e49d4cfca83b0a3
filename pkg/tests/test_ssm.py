import numpy as np
import pytest

from pkdmamba.errors import NumericalError, ParameterError, ShapeError
from pkdmamba.ssm import (
    AffineElem,
    SsmParams,
    combine,
    discretize_euler,
    discretize_zoh,
    linear_scan,
    lti_convolve,
    scan_parallel,
    scan_sequential,
    selective_step_params,
    ssm_forward,
    ssm_kernel_lti,
)
from pkdmamba.tensor import Tensor, check_gradients, parameter


def _random_scan(rng, steps, state_dim):
    a = rng.uniform(0.0, 1.0, size=(steps, state_dim))
    b = rng.normal(size=(steps, state_dim))
    h0 = rng.normal(size=state_dim)
    return a, b, h0


@pytest.mark.parametrize("steps", [1, 2, 7, 64, 1024])
@pytest.mark.parametrize("state_dim", [1, 16, 64])
def test_parallel_scan_matches_sequential(steps, state_dim):
    rng = np.random.default_rng(steps * 100 + state_dim)
    a, b, h0 = _random_scan(rng, steps, state_dim)
    seq = linear_scan(a, b, h0, method="sequential")
    par = linear_scan(a, b, h0, method="parallel")
    assert np.max(np.abs(seq - par)) < 1e-10


def test_affine_element_scans_agree(rng):
    a, b, h0 = _random_scan(rng, 9, 3)
    elems = [AffineElem(a[k], b[k]) for k in range(9)]
    seq = scan_sequential(elems, h0)
    par = scan_parallel(elems, h0, chunk=4)
    np.testing.assert_allclose(np.array(par), np.array(seq), atol=1e-12)
    assert scan_parallel([], h0) == []


def test_combine_is_associative_and_has_identity(rng):
    e1, e2, e3 = (AffineElem(rng.uniform(size=4), rng.normal(size=4)) for _ in range(3))
    left = combine(combine(e1, e2), e3)
    right = combine(e1, combine(e2, e3))
    np.testing.assert_allclose(left.a, right.a, atol=1e-14)
    np.testing.assert_allclose(left.b, right.b, atol=1e-14)
    ident = combine(AffineElem.identity(4), e1)
    np.testing.assert_array_equal(ident.a, e1.a)
    np.testing.assert_array_equal(ident.b, e1.b)
    h = rng.normal(size=4)
    np.testing.assert_allclose(combine(e1, e2).apply(h), e2.apply(e1.apply(h)))


def test_scan_result_does_not_depend_on_worker_count(monkeypatch):
    rng = np.random.default_rng(7)
    a, b, h0 = _random_scan(rng, 1000, 8)
    single = linear_scan(a, b, h0)
    monkeypatch.setenv("PKD_WORKERS", "4")
    pooled = linear_scan(a, b, h0)
    np.testing.assert_array_equal(single, pooled)


def test_scan_argument_validation(rng):
    a, b, _ = _random_scan(rng, 4, 2)
    with pytest.raises(ParameterError):
        linear_scan(a, b, chunk=3)
    with pytest.raises(ParameterError):
        linear_scan(a, b, method="blelloch")
    with pytest.raises(ShapeError):
        linear_scan(a[:, :1].repeat(3, axis=1), b)


def test_scan_along_other_axis(rng):
    a, b, h0 = _random_scan(rng, 5, 3)
    moved = linear_scan(a.T, b.T, h0, axis=1)
    np.testing.assert_allclose(moved.T, linear_scan(a, b, h0), atol=1e-14)


def test_lti_recurrence_equals_kernel_convolution():
    rng = np.random.default_rng(0)
    steps, state_dim = 32, 4
    for _ in range(100):
        A = -rng.uniform(0.1, 2.0, size=state_dim)
        B = rng.normal(size=state_dim)
        C = rng.normal(size=state_dim)
        delta = rng.uniform(0.01, 0.5)
        x = rng.normal(size=steps)
        A_bar, B_bar = discretize_zoh(A, B, delta)
        h = linear_scan(np.broadcast_to(A_bar, (steps, state_dim)), B_bar[np.newaxis, :] * x[:, np.newaxis])
        recurrent = h @ C
        convolved = lti_convolve(x, ssm_kernel_lti(A_bar, B_bar, C, steps))
        assert np.max(np.abs(recurrent - convolved)) < 1e-8


def test_zoh_small_and_large_step_limits():
    A = -np.array([0.5, 1.0, 3.0])
    B = np.array([1.0, -2.0, 0.5])
    A_bar, B_bar = discretize_zoh(A, B, 1e-6)
    assert np.max(np.abs(A_bar - 1.0)) < 1e-5
    assert np.max(np.abs(B_bar - 1e-6 * B)) < 1e-9
    A_bar, _ = discretize_zoh(np.array([-1.0]), np.array([1.0]), 100.0)
    assert abs(A_bar[0]) < 1e-12


def test_zoh_zero_eigenvalue_and_euler():
    A_bar, B_bar = discretize_zoh(np.array([0.0, -1.0]), np.array([2.0, 2.0]), 0.1)
    assert A_bar[0] == 1.0
    assert B_bar[0] == pytest.approx(0.2)
    assert B_bar[1] == pytest.approx(2.0 * (1.0 - np.exp(-0.1)))
    A_bar_e, B_bar_e = discretize_euler(np.array([-1.0]), np.array([2.0]), 0.1)
    assert A_bar_e[0] == pytest.approx(np.exp(-0.1))
    assert B_bar_e[0] == pytest.approx(0.2)
    with pytest.raises(ParameterError):
        discretize_zoh(np.array([-1.0]), np.array([1.0]), 0.0)


def test_kernel_rejects_bad_lengths():
    with pytest.raises(ParameterError):
        ssm_kernel_lti([0.5], [1.0], [1.0], 0)
    with pytest.raises(ShapeError):
        lti_convolve(np.ones(5), np.ones(3))


def _manual_selective(x, params):
    """Step-by-step recurrence from selective_step_params and discretize_zoh."""
    A = -np.exp(params.A_log.data)
    h = np.zeros((x.shape[1], params.state_dim))
    out = []
    for x_k in x:
        delta, B_k, C_k = selective_step_params(x_k, params)
        A_bar, B_bar = discretize_zoh(A, B_k, delta)
        h = A_bar[np.newaxis, :] * h + B_bar[np.newaxis, :] * x_k[:, np.newaxis]
        out.append(h @ C_k + params.D.data * x_k)
    return np.array(out)


def test_ssm_forward_matches_step_recurrence(rng):
    params = SsmParams(3, 5, rng)
    x = rng.normal(size=(11, 3))
    for method in ("sequential", "parallel"):
        y = ssm_forward(x, params, method=method).data
        np.testing.assert_allclose(y, _manual_selective(x, params), atol=1e-10)


def test_batched_forward_equals_per_sequence(rng):
    params = SsmParams(2, 3, rng)
    x = rng.normal(size=(4, 6, 2))
    batched = ssm_forward(x, params).data
    for i in range(4):
        np.testing.assert_allclose(batched[i], ssm_forward(x[i], params).data, atol=1e-12)


def test_frozen_projections_reduce_to_lti_convolution(rng):
    steps, d, n = 16, 2, 4
    params = SsmParams(d, n, rng)
    B = rng.normal(size=n)
    C = rng.normal(size=n)
    params.freeze_lti(0.05, B, C)
    x = rng.normal(size=(steps, d))
    y = ssm_forward(x, params).data
    A = -np.exp(params.A_log.data)
    A_bar, B_bar = discretize_zoh(A, B, 0.05)
    kernel = ssm_kernel_lti(A_bar, B_bar, C, steps)
    expected = lti_convolve(x, kernel) + x * params.D.data
    np.testing.assert_allclose(y, expected, atol=1e-8)


def test_ssm_forward_shape_errors(rng):
    params = SsmParams(3, 2, rng)
    with pytest.raises(ShapeError):
        ssm_forward(np.zeros((5, 4)), params)


def test_non_finite_state_reports_the_step(rng):
    params = SsmParams(2, 2, rng)
    x = rng.normal(size=(6, 2))
    x[3, 0] = np.nan
    with pytest.raises(NumericalError, match="step 3"):
        ssm_forward(x, params, method="sequential")


def test_selective_scan_gradients(rng):
    params = SsmParams(2, 3, rng)
    x = parameter(rng.normal(size=(2, 5, 2)))
    target = Tensor(rng.normal(size=(2, 5, 2)))

    def loss():
        return ((ssm_forward(x, params) - target) ** 2).sum()

    named = [("x", x)] + list(params.named_parameters())
    errors = check_gradients(loss, named)
    assert max(errors.values()) < 1e-6, errors


@pytest.mark.parametrize("method", ["sequential", "parallel"])
def test_scan_of_half_decay_and_unit_inputs(method):
    states = linear_scan(np.full((2, 1), 0.5), np.ones((2, 1)), method=method)
    np.testing.assert_allclose(states[:, 0], [1.0, 1.5])
