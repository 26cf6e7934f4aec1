import math

import numpy as np
import pytest

from lidarseg.neural import (
    Conv2d,
    ReLU,
    concat_channels,
    max_gradcheck_error,
    numeric_gradient,
    softmax,
    softmax_cross_entropy,
    split_channels,
)

GRAD_TOL = 1e-4


def identity_1x1(channels, dtype=np.float64):
    conv = Conv2d(channels, channels, 1, 1, dtype=dtype)
    conv.kernel.value = np.eye(channels, dtype=dtype).reshape(channels, channels, 1, 1)
    return conv


# ------------------------------------------------------------------- forward

def test_1x1_identity_conv():
    conv = identity_1x1(3)
    x = np.random.default_rng(0).normal(size=(2, 3, 4, 5))
    np.testing.assert_array_equal(conv.forward(x), x)


def test_all_ones_3x3_on_constant_input():
    conv = Conv2d(1, 1, 3, 3, dtype=np.float64)
    conv.kernel.value = np.ones((1, 1, 3, 3))
    x = np.ones((1, 1, 4, 8))
    out = conv.forward(x)
    # interior rows see a full 3x3 window (horizontal wrap is always full)
    np.testing.assert_allclose(out[0, 0, 1:-1], 9.0)
    # edge rows lose one zero-padded row above/below
    np.testing.assert_allclose(out[0, 0, 0], 6.0)
    np.testing.assert_allclose(out[0, 0, -1], 6.0)


def test_circular_wrap_crosses_seam():
    conv = Conv2d(1, 1, 1, 3, dtype=np.float64)
    conv.kernel.value = np.ones((1, 1, 1, 3))
    x = np.zeros((1, 1, 1, 8))
    x[0, 0, 0, 0] = 1.0
    out = conv.forward(x)
    assert out[0, 0, 0, 7] == 1.0  # the seam neighbor sees column 0
    assert out[0, 0, 0, 1] == 1.0
    assert out[0, 0, 0, 0] == 1.0
    assert out[0, 0, 0, 2:7].sum() == 0


def test_conv_shape_validation():
    conv = Conv2d(2, 4, 3, 3)
    with pytest.raises(ValueError):
        conv.forward(np.zeros((1, 3, 4, 8), dtype=np.float32))
    with pytest.raises(ValueError):
        Conv2d(2, 4, 2, 3)  # even kernel


def test_bias_is_added():
    conv = Conv2d(1, 2, 1, 1, dtype=np.float64)
    conv.bias.value = np.array([1.5, -2.0])
    out = conv.forward(np.zeros((1, 1, 2, 2)))
    np.testing.assert_allclose(out[0, 0], 1.5)
    np.testing.assert_allclose(out[0, 1], -2.0)


# ------------------------------------------------------------------ backward

def test_zero_upstream_gradient_gives_zero_grads():
    conv = Conv2d(2, 3, 7, 3, dtype=np.float64)
    conv.kernel.value = np.random.default_rng(1).normal(size=conv.kernel.value.shape)
    x = np.random.default_rng(2).normal(size=(1, 2, 5, 7))
    out = conv.forward(x)
    gx = conv.backward(np.zeros_like(out))
    assert not gx.any() and not conv.kernel.grad.any() and not conv.bias.grad.any()


def test_1x1_identity_backward_passes_gradient():
    conv = identity_1x1(3)
    x = np.random.default_rng(3).normal(size=(2, 3, 4, 5))
    conv.forward(x)
    g = np.random.default_rng(4).normal(size=(2, 3, 4, 5))
    np.testing.assert_array_equal(conv.backward(g), g)


def conv_loss_fixture(kh, kw, in_ch=3, out_ch=4, shape=(2, 3, 5, 7), seed=0):
    rng = np.random.default_rng(seed)
    conv = Conv2d(in_ch, out_ch, kh, kw, dtype=np.float64)
    conv.kernel.value = rng.normal(0, 0.5, conv.kernel.value.shape)
    conv.bias.value = rng.normal(0, 0.5, conv.bias.value.shape)
    x = rng.normal(size=shape)
    w = rng.normal(size=(shape[0], out_ch, shape[2], shape[3]))  # fixed projection

    def loss():
        return float((conv.forward(x) * w).sum())

    return conv, x, w, loss


@pytest.mark.parametrize("kh,kw", [(7, 3), (3, 7), (3, 3), (1, 1)])
def test_conv_gradients_match_finite_differences(kh, kw):
    conv, x, w, loss = conv_loss_fixture(kh, kw)
    conv.zero_grad = lambda: None
    conv.kernel.grad[...] = 0
    conv.bias.grad[...] = 0
    out = conv.forward(x)
    gx = conv.backward(w)
    rng = np.random.default_rng(42)
    err = max_gradcheck_error(loss, [(conv.kernel.value, conv.kernel.grad),
                                     (conv.bias.value, conv.bias.grad),
                                     (x, gx)], rng, samples_per_array=10)
    assert err < GRAD_TOL


def test_conv_input_gradient_includes_wrap():
    # input gradient at the seam must receive wrapped contributions
    conv, x, w, loss = conv_loss_fixture(3, 7, shape=(1, 3, 4, 8), seed=5)
    conv.forward(x)
    gx = conv.backward(w)
    num = numeric_gradient(loss, x, 0)  # x[0,0,0,0]: a seam entry
    assert abs(num - gx.reshape(-1)[0]) / max(abs(num), 1e-9) < GRAD_TOL


# ---------------------------------------------------------------------- relu

def test_relu_forward():
    r = ReLU()
    np.testing.assert_array_equal(r.forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])


def test_relu_backward_examples():
    r = ReLU()
    r.forward(np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(r.backward(np.array([5.0, 5.0])), [0.0, 5.0])


def test_relu_gradient_zero_at_zero():
    r = ReLU()
    r.forward(np.array([0.0]))
    np.testing.assert_array_equal(r.backward(np.array([7.0])), [0.0])


def test_relu_finite_differences_away_from_zero():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(2, 3, 4, 4))
    x[np.abs(x) < 0.05] = 0.1  # keep clear of the kink
    w = rng.normal(size=x.shape)
    r = ReLU()

    def loss():
        return float((r.forward(x) * w).sum())

    r.forward(x)
    gx = r.backward(w)
    err = max_gradcheck_error(loss, [(x, gx)], rng, samples_per_array=16)
    assert err < GRAD_TOL


# -------------------------------------------------------------------- concat

def test_concat_and_split_channels():
    rng = np.random.default_rng(7)
    a, b, c = (rng.normal(size=(2, w, 3, 4)) for w in (2, 3, 4))
    cat = concat_channels(a, b, c)
    assert cat.shape == (2, 9, 3, 4)
    ga, gb, gc = split_channels(cat, [2, 3, 4])
    np.testing.assert_array_equal(ga, a)
    np.testing.assert_array_equal(gb, b)
    np.testing.assert_array_equal(gc, c)


def test_concat_rejects_mismatched_spatial():
    with pytest.raises(ValueError):
        concat_channels(np.zeros((1, 2, 3, 4)), np.zeros((1, 2, 3, 5)))


# ---------------------------------------------------------------------- loss

def test_uniform_logits_loss_is_log_13():
    logits = np.zeros((1, 13, 2, 3))
    target = np.random.default_rng(8).integers(0, 13, (1, 2, 3)).astype(np.uint8)
    loss, _ = softmax_cross_entropy(logits, target)
    assert loss == pytest.approx(math.log(13), abs=1e-12)
    assert loss == pytest.approx(2.5649, abs=1e-4)


def test_all_ignored_pixels_zero_loss_and_grad():
    logits = np.random.default_rng(9).normal(size=(1, 13, 2, 2))
    target = np.full((1, 2, 2), 255, dtype=np.uint8)
    loss, grad = softmax_cross_entropy(logits, target)
    assert loss == 0.0
    assert not grad.any()


def test_ignored_pixels_contribute_nothing():
    rng = np.random.default_rng(10)
    logits = rng.normal(size=(1, 13, 1, 4))
    target = np.array([[[1, 255, 3, 255]]], dtype=np.uint8)
    loss, grad = softmax_cross_entropy(logits, target)
    assert not grad[0, :, 0, 1].any() and not grad[0, :, 0, 3].any()
    dense, _ = softmax_cross_entropy(logits[..., [0, 2]], np.array([[[1, 3]]], dtype=np.uint8))
    assert loss == pytest.approx(dense, abs=1e-12)


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    logits = rng.normal(size=(2, 13, 3, 4))
    target = rng.integers(0, 13, (2, 3, 4)).astype(np.uint8)
    target[0, 0, 0] = 255

    def loss():
        return softmax_cross_entropy(logits, target)[0]

    _, grad = softmax_cross_entropy(logits, target)
    err = max_gradcheck_error(loss, [(logits, grad)], rng, samples_per_array=20)
    assert err < GRAD_TOL


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(12)
    logits = rng.normal(0, 5, size=(2, 13, 4, 6))
    probs = softmax(logits)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert (probs >= 0).all()
