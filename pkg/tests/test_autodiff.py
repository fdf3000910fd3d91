import math

import numpy as np
import pytest

from koopinn.autodiff import (DegenerateLayerError, GradTape, NonFiniteError,
                              Var, activation, as_tensor, exp, fd_check,
                              log, log_2p2cosh, log_clamped, logcosh, matmul,
                              max_abs, moveaxis, reshape, spectral_norm,
                              sqrt, square, svd_geomean, vmean, vsum)


def scalar_fn_library():
    """Named scalar builders f(flat) -> Var for the FD sweep."""

    def poly(flat):
        t = GradTape()
        v = t.param(flat)
        return vsum(square(v) * v + v * 2.0)

    def expo(flat):
        t = GradTape()
        v = t.param(flat)
        return vsum(exp(v * 0.3)) + vmean(logcosh(v))

    def mat(flat):
        t = GradTape()
        v = t.param(flat.reshape(2, -1))
        w = matmul(v, moveaxis(v, 0, 1))
        return vsum(square(w)) + vsum(sqrt(square(v) + 1.0))

    def mixed(flat):
        t = GradTape()
        v = t.param(flat)
        return (vsum(log(square(v) + 0.5)) + log_2p2cosh(vmean(v))
                + vsum(activation(v, "sigmoid", 0)))

    return [poly, expo, mat, mixed]


def test_gradients_match_fd_library():
    rng = np.random.default_rng(0)
    for fn in scalar_fn_library():
        point = rng.normal(size=6) * 0.7
        assert fd_check(fn, point, 1e-6) < 1e-5


def test_gradient_accumulates_over_reuse():
    t = GradTape()
    x = t.param(np.array([2.0]))
    y = x * x + x * 3.0          # dy/dx = 2x + 3 = 7
    (g,) = t.gradients(y[0])
    assert g[0] == pytest.approx(7.0)


def test_unused_parameter_gets_zero_gradient():
    t = GradTape()
    x = t.param(np.array([1.0]))
    y = t.param(np.array([5.0]))
    loss = vsum(square(x))
    gx, gy = t.gradients(loss)
    assert gx[0] == pytest.approx(2.0)
    assert gy[0] == 0.0


def test_gradients_rejects_nonscalar_and_foreign_tape():
    t = GradTape()
    x = t.param(np.ones(3))
    with pytest.raises(ValueError):
        t.gradients(x)
    other = GradTape()
    z = other.param(np.ones(1))
    loss = vsum(square(z))
    with pytest.raises(ValueError):
        t.gradients(loss)


def test_broadcast_add_unbroadcasts_gradient():
    t = GradTape()
    a = t.param(np.ones((3, 2)))
    b = t.param(np.ones(2))
    loss = vsum((a + b) * 2.0)
    ga, gb = t.gradients(loss)
    assert np.array_equal(ga, np.full((3, 2), 2.0))
    assert np.array_equal(gb, np.full(2, 6.0))   # summed over the 3 rows


def test_getitem_scatter_gradient():
    t = GradTape()
    x = t.param(np.arange(6.0).reshape(2, 3))
    loss = vsum(square(x[:, 1]))
    (g,) = t.gradients(loss)
    expected = np.zeros((2, 3))
    expected[:, 1] = 2.0 * np.array([1.0, 4.0])
    assert np.array_equal(g, expected)


def test_log_clamped_zero_gradient_on_clamped_branch():
    t = GradTape()
    x = t.param(np.array([2.0, -1.0, 1e-12]))
    loss = vsum(log_clamped(x, 1e-8))
    (g,) = t.gradients(loss)
    assert g[0] == pytest.approx(0.5)
    assert g[1] == 0.0 and g[2] == 0.0
    vals = log_clamped(x, 1e-8).value
    assert vals[1] == pytest.approx(math.log(1e-8))


def test_logcosh_stable_and_correct():
    big = np.array([800.0, -800.0, 0.3])
    out = logcosh(big)
    assert np.isfinite(out).all()
    assert out[2] == pytest.approx(math.log(math.cosh(0.3)), rel=1e-12)
    assert out[0] == pytest.approx(800.0 - math.log(2.0), rel=1e-12)


def test_log_2p2cosh_stable_and_correct():
    out = log_2p2cosh(np.array([700.0, 0.0, 1.3]))
    assert np.isfinite(out).all()
    assert out[1] == pytest.approx(math.log(4.0), rel=1e-12)
    assert out[2] == pytest.approx(math.log(2.0 + 2.0 * math.cosh(1.3)),
                                   rel=1e-12)


def test_max_abs_subgradient_single_argmax():
    t = GradTape()
    x = t.param(np.array([1.0, -3.0, 2.0]))
    m = max_abs(x)
    assert m.value == pytest.approx(3.0)
    (g,) = t.gradients(m)
    assert np.array_equal(g, np.array([0.0, -1.0, 0.0]))


def test_activation_orders_tanh():
    z = np.array([0.3, -0.8])
    v0 = activation(z, "tanh", 0)
    v1 = activation(z, "tanh", 1)
    v2 = activation(z, "tanh", 2)
    tt = np.tanh(z)
    assert np.allclose(v0, tt)
    assert np.allclose(v1, 1.0 - tt ** 2)
    assert np.allclose(v2, -2.0 * tt * (1.0 - tt ** 2))


def test_activation_orders_sigmoid():
    z = np.array([0.4, -1.1])
    s = 1.0 / (1.0 + np.exp(-z))
    assert np.allclose(activation(z, "sigmoid", 0), s)
    assert np.allclose(activation(z, "sigmoid", 1), s * (1 - s))


def test_activation_traced_gradient():
    def f(flat):
        t = GradTape()
        v = t.param(flat)
        return vsum(square(activation(v, "tanh", 1)))

    assert fd_check(f, np.array([0.2, -0.5, 1.1]), 1e-6) < 1e-5


def test_spectral_norm_plain_and_traced():
    w = np.diag([3.0, 1.0])
    assert spectral_norm(w) == pytest.approx(3.0, rel=1e-9)

    t = GradTape()
    wv = t.param(np.array([[2.0, 0.1], [0.0, 0.5]]))
    sn = spectral_norm(wv)
    ref = np.linalg.svd(wv.value, compute_uv=False)[0]
    assert sn.value == pytest.approx(ref, rel=1e-9)

    def f(flat):
        tape = GradTape()
        v = tape.param(flat.reshape(2, 2))
        return spectral_norm(v)

    assert fd_check(f, np.array([1.1, 0.3, -0.2, 0.7]), 1e-6) < 1e-6


def test_spectral_norm_zero_matrix_degenerate():
    with pytest.raises(DegenerateLayerError):
        spectral_norm(np.zeros((3, 2)))


def test_svd_geomean_value_and_gradient():
    # singular values 2 and 8: geometric mean 4 (offset 1e-8 negligible)
    w = np.diag([2.0, 8.0])
    assert svd_geomean(w) == pytest.approx(4.0, rel=1e-6)

    def f(flat):
        tape = GradTape()
        v = tape.param(flat.reshape(2, 3))
        return svd_geomean(v)

    assert fd_check(f, np.array([1.0, 0.2, -0.1, 0.3, 0.9, 0.4]), 1e-6) < 1e-5


def test_svd_geomean_skips_tiny_singular_values():
    w = np.diag([4.0, 0.0])
    # only the positive singular value participates
    assert svd_geomean(w) == pytest.approx(4.0, rel=1e-6)


def test_matmul_requires_2d():
    t = GradTape()
    a = t.param(np.ones((2, 2, 2)))
    b = t.param(np.ones((2, 2)))
    with pytest.raises(ValueError):
        matmul(a, b)


def test_check_finite_raises():
    t = GradTape()
    x = t.param(np.array([1.0]))
    with np.errstate(divide="ignore"):
        y = log(x - 1.0)     # log(0) = -inf
    with pytest.raises(NonFiniteError):
        t.gradients(vsum(y))


def test_reshape_moveaxis_roundtrip_gradient():
    def f(flat):
        t = GradTape()
        v = t.param(flat.reshape(2, 3))
        w = moveaxis(reshape(v, (3, 2)), 0, 1)
        return vsum(square(matmul(w, moveaxis(w, 0, 1))))

    assert fd_check(f, np.linspace(0.1, 0.6, 6), 1e-6) < 1e-5


def test_as_tensor_validates_shape():
    with pytest.raises(ValueError):
        as_tensor(np.ones(3), shape=(2,))
    out = as_tensor([1, 2, 3])
    assert out.dtype == np.float64
