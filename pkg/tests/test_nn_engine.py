"""Tensor engine: layer semantics, backward passes, Adam, checkpoints."""

import numpy as np
import pytest

from hdrfuse import nn

F64 = np.float64


def reference_conv3x3(x, kernel, bias):
    """Six-nested-loop cross-correlation with zero padding 1."""
    n, cin, h, w = x.shape
    cout = kernel.shape[0]
    out = np.zeros((n, cout, h, w))
    for b in range(n):
        for o in range(cout):
            for i in range(h):
                for j in range(w):
                    acc = bias[o]
                    for c in range(cin):
                        for di in range(3):
                            for dj in range(3):
                                ii, jj = i + di - 1, j + dj - 1
                                if 0 <= ii < h and 0 <= jj < w:
                                    acc += kernel[o, c, di, dj] * x[b, c, ii, jj]
                    out[b, o, i, j] = acc
    return out


class TestConvForward:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        conv = nn.Conv2d(2, 2, rng, dtype=F64)
        conv.weight.data[:] = 0.0
        conv.weight.data[0, 0, 1, 1] = 1.0
        conv.weight.data[1, 1, 1, 1] = 1.0
        conv.bias.data[:] = 0.0
        x = rng.standard_normal((1, 2, 5, 5))
        assert np.allclose(conv.forward(x), x, atol=1e-15)

    def test_all_ones_kernel_on_constant(self):
        rng = np.random.default_rng(1)
        conv = nn.Conv2d(1, 1, rng, dtype=F64)
        conv.weight.data[:] = 1.0
        conv.bias.data[:] = 0.25
        x = np.full((1, 1, 5, 5), 0.5)
        y = conv.forward(x)
        assert y[0, 0, 2, 2] == pytest.approx(9 * 0.5 + 0.25)
        assert y[0, 0, 0, 0] == pytest.approx(4 * 0.5 + 0.25)  # corner: 4 taps

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_reference(self, seed):
        rng = np.random.default_rng(seed)
        conv = nn.Conv2d(1, 1, rng, dtype=F64)
        x = rng.standard_normal((1, 1, 5, 5))
        want = reference_conv3x3(x, conv.weight.data, conv.bias.data)
        assert np.abs(conv.forward(x) - want).max() < 1e-6

    def test_multichannel_matches_loop_reference(self):
        rng = np.random.default_rng(7)
        conv = nn.Conv2d(3, 4, rng, dtype=F64)
        x = rng.standard_normal((2, 3, 6, 5))
        want = reference_conv3x3(x, conv.weight.data, conv.bias.data)
        assert np.abs(conv.forward(x) - want).max() < 1e-12

    def test_channel_mismatch(self):
        conv = nn.Conv2d(2, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            conv.forward(np.zeros((1, 3, 4, 4), dtype=np.float32))


class TestConvBackward:
    def test_zero_grad_out(self):
        rng = np.random.default_rng(0)
        conv = nn.Conv2d(2, 3, rng, dtype=F64)
        x = rng.standard_normal((1, 2, 4, 4))
        conv.forward(x, training=True)
        gx = conv.backward(np.zeros((1, 3, 4, 4)))
        assert np.all(gx == 0)
        assert np.all(conv.weight.grad == 0) and np.all(conv.bias.grad == 0)

    def test_bias_gradient_is_sum(self):
        rng = np.random.default_rng(1)
        conv = nn.Conv2d(1, 2, rng, dtype=F64)
        x = rng.standard_normal((2, 1, 4, 4))
        conv.forward(x, training=True)
        g = rng.standard_normal((2, 2, 4, 4))
        conv.backward(g)
        assert np.allclose(conv.bias.grad, g.sum(axis=(0, 2, 3)))

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        conv = nn.Conv2d(2, 2, rng, dtype=F64)
        x = rng.standard_normal((1, 2, 5, 5))
        err = nn.gradient_check(conv, x, rng=np.random.default_rng(0))
        assert err < 1e-6


class TestBatchNorm:
    def test_normalized_batch_fixed_point(self):
        rng = np.random.default_rng(0)
        bn = nn.BatchNorm2d(3, dtype=F64)
        x = rng.standard_normal((4, 3, 8, 8)) * 10.0
        x -= x.mean(axis=(0, 2, 3), keepdims=True)
        x /= x.std(axis=(0, 2, 3), keepdims=True)
        y = bn.forward(x, training=True)
        assert np.abs(y - x).max() < 1e-4  # eps shrinks values slightly

    def test_scale_zero_collapses_to_shift(self):
        rng = np.random.default_rng(1)
        bn = nn.BatchNorm2d(2, dtype=F64)
        bn.scale.data[:] = 0.0
        bn.shift.data[:] = 0.7
        y = bn.forward(rng.standard_normal((2, 2, 4, 4)), training=True)
        assert np.allclose(y, 0.7)

    def test_output_statistics(self):
        rng = np.random.default_rng(2)
        bn = nn.BatchNorm2d(3, dtype=F64)
        x = rng.standard_normal((8, 3, 16, 16)) * 10.0 + 3.0
        y = bn.forward(x, training=True)  # scale 1, shift 0
        assert np.abs(y.mean(axis=(0, 2, 3))).max() < 1e-6
        assert np.abs(y.var(axis=(0, 2, 3)) - 1.0).max() < 1e-6

    def test_running_stats_and_inference(self):
        rng = np.random.default_rng(3)
        bn = nn.BatchNorm2d(2, dtype=F64)
        with pytest.raises(RuntimeError):
            bn.forward(np.zeros((1, 2, 4, 4)), training=False)
        x = rng.standard_normal((4, 2, 4, 4)) + 2.0
        for _ in range(200):
            bn.forward(x, training=True)
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        assert np.abs(bn.running_mean.data - mean).max() < 1e-6
        assert np.abs(bn.running_var.data - var).max() < 1e-6
        y = bn.forward(x, training=False)
        want = (x - mean[None, :, None, None]) / np.sqrt(var + 1e-5)[None, :, None, None]
        # bounded by the geometric tail of the running-average updates
        assert np.abs(y - want).max() < 1e-6

    def test_finite_differences_training_mode(self):
        rng = np.random.default_rng(4)
        bn = nn.BatchNorm2d(3, dtype=F64)
        bn.scale.data[:] = rng.uniform(0.5, 1.5, size=3)
        bn.shift.data[:] = rng.uniform(-0.5, 0.5, size=3)
        x = rng.standard_normal((2, 3, 4, 4))
        err = nn.gradient_check(bn, x, rng=np.random.default_rng(0))
        assert err < 1e-7


class TestSimpleLayers:
    def test_relu_values(self):
        x = np.array([[[[-1.0, 0.0], [2.0, -3.0]]]])
        relu = nn.ReLU()
        assert np.array_equal(relu.forward(x), [[[[0, 0], [2, 0]]]])

    def test_maxpool_values_and_tie_break(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        mp = nn.MaxPool2d()
        assert mp.forward(x, training=True)[0, 0, 0, 0] == 4.0
        gx = mp.backward(np.ones((1, 1, 1, 1)))
        assert gx[0, 0].tolist() == [[0, 0], [0, 1]]
        # tie: first index in row-major order wins
        tie = np.full((1, 1, 2, 2), 0.5)
        mp.forward(tie, training=True)
        gx = mp.backward(np.ones((1, 1, 1, 1)))
        assert gx[0, 0].tolist() == [[1, 0], [0, 0]]

    def test_maxpool_rejects_odd_dims(self):
        with pytest.raises(ValueError):
            nn.MaxPool2d().forward(np.zeros((1, 1, 3, 4)))

    def test_pool_then_upsample_constant_identity(self):
        x = np.full((1, 2, 6, 6), 0.4)
        y = nn.Upsample2d().forward(nn.MaxPool2d().forward(x))
        assert np.array_equal(y, x)

    def test_upsample_repeats(self):
        x = np.arange(4.0).reshape(1, 1, 2, 2)
        y = nn.Upsample2d().forward(x)
        assert y.shape == (1, 1, 4, 4)
        want = [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]
        assert np.array_equal(y[0, 0], want)

    def test_softmax_values(self):
        sm = nn.ChannelSoftmax()
        x = np.zeros((1, 2, 1, 1))
        assert np.allclose(sm.forward(x), 0.5)
        x = np.array([1.0, -1.0]).reshape(1, 2, 1, 1)
        y = sm.forward(x)
        e2 = np.exp(2.0)
        assert y[0, 0, 0, 0] == pytest.approx(e2 / (e2 + 1), rel=1e-12)
        assert y[0, 1, 0, 0] == pytest.approx(1 / (e2 + 1), rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_softmax_normalization(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 4, 6, 6)).astype(np.float32) * 20
        y = nn.ChannelSoftmax().forward(x)
        assert np.all(y > 0)
        assert np.abs(y.sum(axis=1) - 1.0).max() < 1e-7


class TestAdam:
    def test_zero_gradient_no_move(self):
        p = nn.Tensor(np.array([1.0, 2.0]))
        opt = nn.Adam([p], lr0=0.1)
        p.ensure_grad()
        opt.step()
        assert np.array_equal(p.data, [1.0, 2.0])

    def test_first_step_unit_gradient(self):
        p = nn.Tensor(np.array([1.0]))
        opt = nn.Adam([p], lr0=1e-2)
        p.ensure_grad()[:] = 1.0
        opt.step()
        assert p.data[0] == pytest.approx(1.0 - 1e-2 / (1 + 1e-8), rel=1e-12)

    def test_lr_schedule(self):
        opt = nn.Adam([], lr0=1e-4, decay=0.99)
        assert opt.set_epoch(2) == pytest.approx(9.801e-5, rel=1e-12)
        assert opt.set_epoch(5) == pytest.approx(1e-4 * 0.99 ** 5, rel=1e-12)
        assert opt.set_epoch(5) == pytest.approx(9.50990049e-5, rel=1e-9)

    def test_descends_quadratic(self):
        p = nn.Tensor(np.array([5.0]))
        opt = nn.Adam([p], lr0=0.1)
        for _ in range(300):
            opt.zero_grad()
            p.ensure_grad()[:] = 2 * p.data
            opt.step()
        assert abs(p.data[0]) < 0.2


class TestGradientSuite:
    """Every layer backward vs central differences, many seeds."""

    @pytest.mark.parametrize("seed", range(20))
    def test_all_layers(self, seed):
        rng = np.random.default_rng(seed)
        checks = []
        conv = nn.Conv2d(2, 3, rng, dtype=F64)
        checks.append((conv, rng.standard_normal((1, 2, 8, 8))))
        bn = nn.BatchNorm2d(2, dtype=F64)
        bn.scale.data[:] = rng.uniform(0.5, 1.5, size=2)
        checks.append((bn, rng.standard_normal((2, 2, 6, 6))))
        checks.append((nn.ReLU(), nn.relu_safe_input(rng, (1, 2, 8, 8))))
        checks.append((nn.MaxPool2d(), nn.pool_safe_input(rng, (1, 2, 8, 8))))
        checks.append((nn.Upsample2d(), rng.standard_normal((1, 2, 5, 5))))
        checks.append((nn.ChannelSoftmax(), rng.standard_normal((1, 3, 5, 5))))
        for layer, x in checks:
            err = nn.gradient_check(layer, x, rng=np.random.default_rng(seed + 1))
            assert err < 1e-5, f"{type(layer).__name__}: {err}"

    def test_composite_fragment(self):
        # two convs, relu, softmax; h = 1e-4 keeps finite differences off
        # the relu kinks for pre-activations of typical magnitude
        rng = np.random.default_rng(11)
        frag = nn.Sequential([
            nn.Conv2d(2, 4, rng, dtype=F64), nn.ReLU(),
            nn.Conv2d(4, 2, rng, dtype=F64), nn.ChannelSoftmax(),
        ])
        x = rng.standard_normal((1, 2, 8, 8))
        err = nn.gradient_check(frag, x, h=1e-4, rng=np.random.default_rng(0))
        assert err < 1e-5

    def test_linear_fragment_near_exact(self):
        rng = np.random.default_rng(12)
        conv = nn.Conv2d(1, 1, rng, dtype=F64)
        x = rng.standard_normal((1, 1, 6, 6))
        err = nn.gradient_check(conv, x, rng=np.random.default_rng(0))
        assert err < 1e-9

    def test_pool_and_upsample_block(self):
        rng = np.random.default_rng(13)
        frag = nn.Sequential([nn.MaxPool2d(), nn.Upsample2d()])
        x = nn.pool_safe_input(rng, (1, 2, 8, 8))
        err = nn.gradient_check(frag, x, rng=np.random.default_rng(0))
        assert err < 1e-9


class TestDeterminismAndShape:
    def test_forward_deterministic(self):
        rng = np.random.default_rng(0)
        conv = nn.Conv2d(2, 3, rng)
        x = rng.standard_normal((2, 2, 8, 8)).astype(np.float32)
        assert np.array_equal(conv.forward(x), conv.forward(x))

    def test_conv_preserves_spatial_dims(self):
        rng = np.random.default_rng(1)
        conv = nn.Conv2d(1, 4, rng)
        for h, w in ((3, 3), (5, 9), (16, 16)):
            y = conv.forward(np.zeros((1, 1, h, w), dtype=np.float32))
            assert y.shape == (1, 4, h, w)


class TestCheckpointFormat:
    def test_magic_and_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = [nn.Tensor(rng.standard_normal((3, 2, 3, 3)).astype(np.float32)),
                   nn.Tensor(rng.standard_normal(3).astype(np.float32))]
        specs = [(nn.CONV, 2, 3), (nn.RELU, 0, 0)]
        path = tmp_path / "t.ckpt"
        nn.save_checkpoint(path, 0.25, 7, specs, tensors)
        blob = path.read_bytes()
        assert blob[:4] == b"HDRW"
        width, steps, specs2, arrays = nn.load_checkpoint(path)
        assert width == 0.25 and steps == 7
        assert specs2 == specs
        for t, a in zip(tensors, arrays):
            assert np.array_equal(t.data, a)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(nn.CheckpointError):
            nn.load_checkpoint(path)
        path.write_bytes(b"HDRW")
        with pytest.raises(nn.CheckpointError):
            nn.load_checkpoint(path)
