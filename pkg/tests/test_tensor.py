import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import conv2d_direct, dft2_direct, pixel_shuffle_direct

from dgfd import tensor as T
from dgfd.tensor import ComplexPair, ConfigError, ConvSpec, DimensionError, Tensor

F64 = np.float64


def rand_tensor(rng, shape, requires_grad=False):
    return Tensor(rng.normal(size=shape), dtype=F64, requires_grad=requires_grad)


# ---------------------------------------------------------------------------
# conv2d

# every (kernel, stride, dilation, groups) geometry the network instantiates
CONV_CASES = [
    ("1x1_s1", dict(kernel=1, stride=1, dilation=1, depthwise=False)),
    ("3x3_s1", dict(kernel=3, stride=1, dilation=1, depthwise=False)),
    ("3x3_s2", dict(kernel=3, stride=2, dilation=1, depthwise=False)),
    ("3x3_s1_d2_dw", dict(kernel=3, stride=1, dilation=2, depthwise=True)),
    ("5x5_s1_dw", dict(kernel=5, stride=1, dilation=1, depthwise=True)),
    ("5x5_s1_d2_dw", dict(kernel=5, stride=1, dilation=2, depthwise=True)),
    ("5x5_s1_dense", dict(kernel=5, stride=1, dilation=1, depthwise=False)),
]


class TestConv2d:
    def test_identity_1x1(self, rng):
        x = rand_tensor(rng, (2, 3, 5, 5))
        w = Tensor(np.eye(3, dtype=F64)[:, :, None, None])
        b = Tensor(np.zeros(3, dtype=F64))
        y = T.conv2d(x, w, b, ConvSpec(3, 3, 1))
        np.testing.assert_array_equal(y.data, x.data)

    def test_ones_kernel_constant_input(self):
        c = 0.7
        x = Tensor(np.full((1, 1, 6, 6), c, dtype=F64))
        w = Tensor(np.ones((1, 1, 3, 3), dtype=F64))
        y = T.conv2d(x, w, None, ConvSpec(1, 1, 3, padding=1))
        np.testing.assert_allclose(y.data[0, 0, 1:-1, 1:-1], 9 * c, rtol=1e-12)

    def test_depthwise_dilated_matches_oracle(self, rng):
        x = rng.normal(size=(2, 3, 5, 5))
        w = rng.normal(size=(3, 1, 3, 3))
        spec = ConvSpec.same(3, 3, 3, dilation=2, groups=3)
        y = T.conv2d(Tensor(x, dtype=F64), Tensor(w, dtype=F64), None, spec)
        ref = conv2d_direct(x, w, None, dilation=2, padding=spec.padding, groups=3)
        np.testing.assert_allclose(y.data, ref, atol=1e-6)

    @pytest.mark.parametrize("name,case", CONV_CASES)
    def test_all_network_geometries_match_oracle(self, rng, name, case):
        cin = 4 if case["depthwise"] else 3
        cout = cin if case["depthwise"] else 5
        groups = cin if case["depthwise"] else 1
        k = case["kernel"]
        spec = ConvSpec.same(cin, cout, k, stride=case["stride"],
                             dilation=case["dilation"], groups=groups)
        x = rng.normal(size=(2, cin, 8, 8))
        w = rng.normal(size=(cout, cin // groups, k, k))
        b = rng.normal(size=cout)
        y = T.conv2d(Tensor(x, dtype=F64), Tensor(w, dtype=F64), Tensor(b, dtype=F64), spec)
        ref = conv2d_direct(x, w, b, stride=case["stride"], dilation=case["dilation"],
                            padding=spec.padding, groups=groups)
        np.testing.assert_allclose(y.data, ref, atol=1e-6)

    def test_output_extent_formula(self):
        spec = ConvSpec(3, 4, 3, stride=2, padding=1)
        assert spec.out_extent(8) == 4
        assert ConvSpec.same(3, 3, 5, dilation=2).out_extent(10) == 10

    def test_channel_mismatch_raises(self, rng):
        x = rand_tensor(rng, (1, 2, 4, 4))
        w = rand_tensor(rng, (4, 3, 1, 1))
        with pytest.raises(DimensionError):
            T.conv2d(x, w, None, ConvSpec(3, 4, 1))

    def test_groups_not_dividing_raises(self):
        with pytest.raises(ConfigError):
            ConvSpec(3, 4, 3, groups=2)


# ---------------------------------------------------------------------------
# activations


class TestActivation:
    def test_fixed_points(self):
        x = Tensor(np.zeros((1, 1, 1, 1), dtype=F64))
        assert T.gelu(x).data.item() == 0.0
        assert T.sigmoid(x).data.item() == 0.5
        assert T.relu(x).data.item() == 0.0

    def test_gelu_at_one(self):
        # 1 * Phi(1) via the error function
        from math import erf, sqrt

        expected = 0.5 * (1 + erf(1 / sqrt(2)))
        y = T.gelu(Tensor(np.ones((1, 1, 1, 1), dtype=F64)))
        assert abs(y.data.item() - expected) < 1e-12
        assert abs(y.data.item() - 0.841345) < 1e-6

    @given(st.floats(min_value=-20, max_value=20))
    def test_sigmoid_symmetry(self, v):
        x = Tensor(np.array([[[[v]]]], dtype=F64))
        nx = Tensor(np.array([[[[-v]]]], dtype=F64))
        assert T.sigmoid(nx).data.item() == pytest.approx(1.0 - T.sigmoid(x).data.item(), abs=1e-12)

    def test_unknown_kind_raises(self, rng):
        with pytest.raises(ConfigError):
            T.activation(rand_tensor(rng, (1, 1, 2, 2)), "tanh")


# ---------------------------------------------------------------------------
# batch norm


class TestBatchNorm:
    def test_constant_input_centers_to_zero(self):
        x = Tensor(np.full((2, 3, 4, 4), 0.8, dtype=F64))
        gamma = Tensor(np.ones(3, dtype=F64))
        beta = Tensor(np.zeros(3, dtype=F64))
        y = T.batch_norm(x, gamma, beta, np.zeros(3), np.ones(3), training=True)
        np.testing.assert_allclose(y.data, 0.0, atol=1e-6)

    def test_eval_identity_stats(self, rng):
        x = rand_tensor(rng, (2, 3, 4, 4))
        gamma = Tensor(np.ones(3, dtype=F64))
        beta = Tensor(np.zeros(3, dtype=F64))
        y = T.batch_norm(x, gamma, beta, np.zeros(3), np.ones(3), training=False, eps=1e-5)
        np.testing.assert_allclose(y.data, x.data, atol=1e-4)

    def test_train_moments(self, rng):
        x = rand_tensor(rng, (4, 8, 6, 6))
        gamma = Tensor(np.ones(8, dtype=F64))
        beta = Tensor(np.zeros(8, dtype=F64))
        y = T.batch_norm(x, gamma, beta, np.zeros(8), np.ones(8), training=True)
        mean = y.data.mean(axis=(0, 2, 3))
        var = y.data.var(axis=(0, 2, 3))
        assert np.abs(mean).max() < 1e-5
        assert np.abs(var - 1.0).max() < 1e-4

    def test_zero_variance_channel_no_nan(self):
        x = Tensor(np.ones((2, 1, 3, 3), dtype=F64))
        y = T.batch_norm(x, Tensor(np.ones(1, dtype=F64)), Tensor(np.zeros(1, dtype=F64)),
                         np.zeros(1), np.ones(1), training=True)
        assert np.isfinite(y.data).all()

    def test_running_stats_update(self, rng):
        x = rand_tensor(rng, (4, 2, 5, 5))
        rm, rv = np.zeros(2), np.ones(2)
        T.batch_norm(x, Tensor(np.ones(2, dtype=F64)), Tensor(np.zeros(2, dtype=F64)),
                     rm, rv, training=True, momentum=0.1)
        mu = x.data.mean(axis=(0, 2, 3))
        np.testing.assert_allclose(rm, 0.1 * mu, rtol=1e-10)


# ---------------------------------------------------------------------------
# FFT


class TestFFT:
    def test_constant_image_dc_only(self):
        c, h, w = 0.3, 6, 8
        x = Tensor(np.full((1, 1, h, w), c, dtype=F64))
        spec = T.fft2(x)
        assert spec.real.data[0, 0, 0, 0] == pytest.approx(c * h * w, rel=1e-12)
        rest = spec.real.data.copy()
        rest[0, 0, 0, 0] = 0.0
        assert np.abs(rest).max() < 1e-9
        assert np.abs(spec.imag.data).max() < 1e-9

    @pytest.mark.parametrize("shape", [(2, 4, 15, 17), (1, 2, 8, 8), (1, 1, 7, 4)])
    def test_round_trip(self, rng, shape):
        x = rand_tensor(rng, shape)
        back = T.ifft2(T.fft2(x))
        assert np.abs(back.data - x.data).max() < 1e-5

    def test_matches_naive_dft(self, rng):
        x = rng.normal(size=(5, 6))
        spec = T.fft2(Tensor(x[None, None], dtype=F64))
        full = dft2_direct(x)
        half = full[:, : 6 // 2 + 1]
        np.testing.assert_allclose(spec.real.data[0, 0], half.real, atol=1e-6)
        np.testing.assert_allclose(spec.imag.data[0, 0], half.imag, atol=1e-6)

    @pytest.mark.parametrize("w", [6, 7])
    def test_parseval_with_doubled_interior_columns(self, rng, w):
        x = rng.normal(size=(4, w))
        spec = T.fft2(Tensor(x[None, None], dtype=F64))
        power = spec.real.data[0, 0] ** 2 + spec.imag.data[0, 0] ** 2
        wts = np.full(w // 2 + 1, 2.0)
        wts[0] = 1.0
        if w % 2 == 0:
            wts[-1] = 1.0
        lhs = (x**2).sum()
        rhs = (power * wts).sum() / (4 * w)
        assert abs(lhs - rhs) / abs(lhs) < 1e-5

    def test_ifft_requires_spatial_shape(self, rng):
        pair = ComplexPair(rand_tensor(rng, (1, 1, 4, 3)), rand_tensor(rng, (1, 1, 4, 3)))
        with pytest.raises(DimensionError):
            T.ifft2(pair)
        # odd width is recovered only because the true width is stored
        assert T.ifft2(pair, (4, 5)).shape == (1, 1, 4, 5)
        assert T.ifft2(pair, (4, 4)).shape == (1, 1, 4, 4)


# ---------------------------------------------------------------------------
# pixel shuffle


class TestPixelShuffle:
    def test_shape_contract(self, rng):
        y = T.pixel_shuffle(rand_tensor(rng, (1, 4, 3, 3)), 2)
        assert y.shape == (1, 1, 6, 6)

    def test_index_map(self):
        x = np.zeros((1, 4, 1, 1), dtype=F64)
        x[0, :, 0, 0] = [1.0, 2.0, 3.0, 4.0]
        y = T.pixel_shuffle(Tensor(x), 2)
        np.testing.assert_array_equal(y.data[0, 0], [[1.0, 2.0], [3.0, 4.0]])

    def test_matches_enumerated_oracle(self, rng):
        x = rng.normal(size=(2, 8, 3, 4))
        y = T.pixel_shuffle(Tensor(x, dtype=F64), 2)
        np.testing.assert_array_equal(y.data, pixel_shuffle_direct(x, 2))

    def test_unshuffle_inverts(self, rng):
        x = rand_tensor(rng, (2, 8, 3, 3))
        back = T.pixel_unshuffle(T.pixel_shuffle(x, 2), 2)
        np.testing.assert_array_equal(back.data, x.data)

    def test_indivisible_channels_raise(self, rng):
        with pytest.raises(ConfigError):
            T.pixel_shuffle(rand_tensor(rng, (1, 3, 2, 2)), 2)


# ---------------------------------------------------------------------------
# elementwise / concat / split / pooling


class TestElementwise:
    def test_split_concat_round_trip(self, rng):
        a = rand_tensor(rng, (1, 2, 3, 3))
        b = rand_tensor(rng, (1, 5, 3, 3))
        cat = T.concat([a, b], axis=1)
        ra, rb = T.split(cat, [2, 5], axis=1)
        np.testing.assert_array_equal(ra.data, a.data)
        np.testing.assert_array_equal(rb.data, b.data)

    def test_mul_by_ones_is_identity(self, rng):
        a = rand_tensor(rng, (2, 3, 4, 4))
        ones = Tensor(np.ones_like(a.data))
        np.testing.assert_array_equal(T.mul(a, ones).data, a.data)

    def test_global_avg_pool_arange(self):
        x = Tensor(np.arange(4, dtype=F64).reshape(1, 1, 2, 2))
        assert T.global_avg_pool(x).data.item() == 1.5

    def test_broadcast_only_singletons(self, rng):
        a = rand_tensor(rng, (1, 3, 4, 4))
        bad = rand_tensor(rng, (1, 3, 2, 4))
        with pytest.raises(DimensionError):
            T.add(a, bad)

    def test_split_sizes_must_sum(self, rng):
        with pytest.raises(DimensionError):
            T.split(rand_tensor(rng, (1, 4, 2, 2)), [1, 2], axis=1)

    def test_broadcast_mul_grad(self, rng):
        a = rand_tensor(rng, (2, 3, 4, 4))
        m = rand_tensor(rng, (2, 3, 1, 1), requires_grad=True)
        loss = T.mean_all(T.mul(a, m))
        loss.backward()
        expected = a.data.sum(axis=(2, 3), keepdims=True) / a.data.size
        np.testing.assert_allclose(m.grad, expected, rtol=1e-10)


# ---------------------------------------------------------------------------
# autodiff contracts


class TestBackward:
    def test_sum_of_squares_gradient_exact(self, rng):
        x = rand_tensor(rng, (3, 2, 4, 4), requires_grad=True)
        loss = T.mean_all(T.mul(x, x))
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * x.data / x.data.size, rtol=1e-12)

    def test_backward_non_scalar_raises(self, rng):
        x = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        with pytest.raises(DimensionError):
            T.mul(x, x).backward()

    def test_constant_function_zero_gradient(self, rng):
        x = rand_tensor(rng, (1, 1, 3, 3), requires_grad=True)
        loss = T.mean_all(T.mul(x, Tensor(np.zeros_like(x.data))))
        loss.backward()
        np.testing.assert_array_equal(x.grad, np.zeros_like(x.data))

    def test_disconnected_leaf_keeps_none(self, rng):
        x = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        other = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        T.mean_all(T.mul(x, x)).backward()
        assert other.grad is None  # interpreted as a zero gradient downstream

    def test_grad_accumulates_over_reuse(self, rng):
        x = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        loss = T.mean_all(T.add(T.mul(x, x), T.mul(x, x)))
        loss.backward()
        np.testing.assert_allclose(x.grad, 4 * x.data / 4, rtol=1e-12)

    def test_tape_freed_after_backward(self, rng):
        x = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        y = T.mul(x, x)
        loss = T.mean_all(y)
        loss.backward()
        assert y._vjp is None and y._parents == ()

    def test_no_grad_blocks_taping(self, rng):
        x = rand_tensor(rng, (1, 1, 2, 2), requires_grad=True)
        with T.no_grad():
            y = T.mul(x, x)
        assert not y.requires_grad

    def test_order_limit(self):
        with pytest.raises(DimensionError):
            Tensor(np.zeros((1, 1, 1, 1, 1)))


class TestGradCheck:
    def test_grad_check_passes_for_smooth_composite(self, rng):
        x = rand_tensor(rng, (1, 2, 4, 5), requires_grad=True)

        def f(t):
            y = T.gelu(T.sigmoid(t))
            return T.mean_all(T.mul(y, y))

        report = T.grad_check(f, x)
        assert report.passed and report.checked == x.size

    def test_grad_check_catches_wrong_gradient(self, rng):
        x = rand_tensor(rng, (1, 1, 3, 3), requires_grad=True)

        def wrong(t):
            # mean of x^2 but with a broken scale smuggled in via detach
            y = T.add(T.mul(t, t), T.mul(t, t.detach()))
            return T.mean_all(y)

        # analytic grad = 3x/n but numeric = 4x/n: must be flagged
        report = T.grad_check(wrong, x)
        assert not report.passed


def test_finite_outputs_for_finite_inputs(rng):
    x = Tensor(rng.uniform(-50, 50, (2, 4, 8, 8)), dtype=F64)
    for y in (T.gelu(x), T.sigmoid(x), T.relu(x)):
        assert np.isfinite(y.data).all()
    spec = T.fft2(x)
    assert np.isfinite(spec.real.data).all() and np.isfinite(spec.imag.data).all()
    assert np.isfinite(T.ifft2(spec).data).all()
