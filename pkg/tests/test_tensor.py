import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from augconformer import tensor as T
from augconformer.errors import DegenerateRowError, EmptyInputError, ShapeError

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False, width=32)


def test_matmul_examples():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T.matmul(np.eye(2), m), m)
    np.testing.assert_array_equal(T.matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])
    np.testing.assert_array_equal(T.matmul(np.zeros((2, 3)), np.ones((3, 5))), np.zeros((2, 5)))


def test_matmul_shape_errors():
    with pytest.raises(ShapeError):
        T.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        T.matmul(np.ones(3), np.ones((3, 1)))


def test_matmul_outputs_float32():
    assert T.matmul(np.ones((2, 2)), np.ones((2, 2))).dtype == np.float32


def test_softmax_examples():
    np.testing.assert_allclose(T.softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])
    np.testing.assert_allclose(T.softmax_rows([[math.log(2), 0.0]]), [[2 / 3, 1 / 3]], rtol=1e-6)
    out = T.softmax_rows([[5.0, -np.inf, -np.inf]])
    assert out.tolist() == [[1.0, 0.0, 0.0]]


def test_softmax_degenerate_rows():
    with pytest.raises(DegenerateRowError):
        T.softmax_rows([[-np.inf, -np.inf]])
    with pytest.raises(DegenerateRowError):
        T.softmax_rows(np.zeros((2, 0)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 4096)), elements=finite))
def test_softmax_rows_sum_to_one(x):
    np.testing.assert_allclose(T.softmax_rows(x).astype(np.float64).sum(axis=1), 1.0, atol=1e-6)


def test_layer_norm_examples():
    g, b = np.ones(2), np.zeros(2)
    np.testing.assert_array_equal(T.layer_norm([[4.0, 4.0]], g, b), [[0.0, 0.0]])
    np.testing.assert_allclose(T.layer_norm([[1.0, -1.0]], g, b, eps=1e-12), [[1.0, -1.0]], atol=1e-6)
    np.testing.assert_allclose(T.layer_norm([[3.0, 1.0]], g, b, eps=1e-12), [[1.0, -1.0]], atol=1e-6)


def test_layer_norm_rejects_bad_eps_and_shapes():
    with pytest.raises(ValueError):
        T.layer_norm([[1.0, 2.0]], np.ones(2), np.zeros(2), eps=0.0)
    with pytest.raises(ShapeError):
        T.layer_norm([[1.0, 2.0]], np.ones(3), np.zeros(2))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 16)), elements=finite),
       st.floats(-100, 100))
def test_layer_norm_shift_invariant(x, c):
    g = np.linspace(0.5, 1.5, x.shape[1])
    b = np.linspace(-1, 1, x.shape[1])
    np.testing.assert_allclose(T.layer_norm(x + c, g, b), T.layer_norm(x, g, b), atol=1e-6)


def test_depthwise_conv_examples():
    x = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(T.depthwise_conv1d(x, [[1.0]]), x)
    np.testing.assert_array_equal(T.depthwise_conv1d(x, [[0.0, 1.0, 0.0]]), x)
    np.testing.assert_array_equal(T.depthwise_conv1d(x, [[1.0, 1.0, 1.0]]), [[3.0], [6.0], [5.0]])


def test_depthwise_conv_even_width_keeps_length():
    x = np.arange(10, dtype=float).reshape(5, 2)
    k = np.zeros((2, 4))
    k[:, 1] = 1.0  # delta at the tap that lines up with the current row
    out = T.depthwise_conv1d(x, k)
    assert out.shape == x.shape
    np.testing.assert_array_equal(out, x)


def test_depthwise_conv_channels_are_independent(rng):
    x = rng.standard_normal((7, 3))
    k = rng.standard_normal((3, 5))
    y = x.copy()
    y[:, 1] += 10.0
    a, b = T.depthwise_conv1d(x, k), T.depthwise_conv1d(y, k)
    np.testing.assert_array_equal(a[:, [0, 2]], b[:, [0, 2]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 6), st.integers(1, 9), st.integers(0, 2**31))
def test_depthwise_conv_linear(n, c, k, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    a, b = rng.standard_normal((n, c)), rng.standard_normal((n, c))
    w = rng.standard_normal((c, k))
    np.testing.assert_allclose(T.depthwise_conv1d(a + b, w),
                               T.depthwise_conv1d(a, w) + T.depthwise_conv1d(b, w), atol=1e-5)


def test_mean_pool_examples():
    np.testing.assert_array_equal(T.mean_pool_rows([[1.0, 2.0]]), [1.0, 2.0])
    np.testing.assert_array_equal(T.mean_pool_rows([[1.0, 3.0], [3.0, 5.0]]), [2.0, 4.0])
    v = np.array([0.1, -2.5, 3.0], dtype=np.float32)
    np.testing.assert_array_equal(T.mean_pool_rows(np.tile(v, (9, 1))), v)
    with pytest.raises(EmptyInputError):
        T.mean_pool_rows(np.zeros((0, 3)))


def test_pointwise_examples(rng):
    x = rng.standard_normal((4, 3)).astype(np.float32)
    np.testing.assert_array_equal(T.linear(x, np.eye(3), np.zeros(3)), x)
    assert T.swish([[0.0]])[0, 0] == 0.0
    a = rng.standard_normal((2, 3))
    np.testing.assert_allclose(T.glu(np.hstack([a, np.zeros((2, 3))])), a * 0.5, rtol=1e-6)
    with pytest.raises(ShapeError):
        T.glu(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        T.linear(x, np.eye(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_matmul_associative(n, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    a, b, c = rng.uniform(-1, 1, (n, 5)), rng.uniform(-1, 1, (5, 4)), rng.uniform(-1, 1, (4, 3))
    np.testing.assert_allclose(T.matmul(T.matmul(a, b), c), T.matmul(a, T.matmul(b, c)), atol=1e-5)
