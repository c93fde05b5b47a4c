"""Weighted-SSIM loss: value, reference loop, gradient, invariances."""

import numpy as np
import pytest

from hdrfuse.attributes import AttributeKind, gamma_for_pair
from hdrfuse.image import ExposurePair, window_anchors
from hdrfuse.loss import LossConfig, weighted_ssim_loss
from hdrfuse.metrics import ssim_window
from hdrfuse.nn.gradcheck import relative_error

LC = LossConfig()


def random_triple(seed, size=16):
    rng = np.random.default_rng(seed)
    under = rng.random((size, size, 3))
    over = np.clip(under + rng.random((size, size, 3)) * 0.3, 0, 1)
    pair = ExposurePair(under=under, over=over)
    alpha = rng.random((size, size, 1))
    fused = np.clip(alpha * under + (1 - alpha) * over, 0, 1)
    return pair, fused


def reference_loss(pair, fused, cfg):
    """Scalar per-window loop over the loss definition."""
    spec = cfg.window
    k = spec.window_size
    h, w = fused.shape[:2]
    rows = window_anchors(h, k, spec.stride)
    cols = window_anchors(w, k, spec.stride)
    gamma = gamma_for_pair(pair.under_gray, pair.over_gray, cfg.gamma_kind,
                           spec, cfg.sigma_e, cfg.gamma_floor)
    total = 0.0
    for c in range(3):
        for i, r in enumerate(rows):
            for j, cc in enumerate(cols):
                win = (slice(r, r + k), slice(cc, cc + k), c)
                su = ssim_window(pair.under[win], fused[win], spec)
                so = ssim_window(pair.over[win], fused[win], spec)
                total += gamma[i, j] * su + (1 - gamma[i, j]) * so
    return 1.0 - total / (3 * len(rows) * len(cols))


class TestLossValue:
    def test_identical_everything_is_zero(self):
        img = np.random.default_rng(0).random((16, 16, 3))
        pair = ExposurePair(under=img, over=img)
        loss, grad = weighted_ssim_loss(pair, img, LC)
        assert loss == 0.0
        assert np.abs(grad).max() < 1e-12

    def test_degenerate_gamma_selects_one_exposure(self):
        pair, _ = random_triple(1)
        ones = np.ones((3, 3))
        loss = weighted_ssim_loss(pair, pair.under, LC, gamma=ones,
                                  want_grad=False)
        assert loss == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_reference_loop(self, seed):
        pair, fused = random_triple(seed)
        for kind in (AttributeKind.VARIANCE, AttributeKind.VAR_GRAD,
                     AttributeKind.WELL_EXPOSEDNESS):
            cfg = LossConfig(gamma_kind=kind)
            got = weighted_ssim_loss(pair, fused, cfg, want_grad=False)
            assert got == pytest.approx(reference_loss(pair, fused, cfg),
                                        abs=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_loss_in_range(self, seed):
        pair, _ = random_triple(seed, size=14)
        fused = np.random.default_rng(seed + 100).random((14, 14, 3))
        loss = weighted_ssim_loss(pair, fused, LC, want_grad=False)
        assert 0.0 <= loss <= 2.0

    def test_shape_errors(self):
        pair, fused = random_triple(0)
        with pytest.raises(ValueError):
            weighted_ssim_loss(pair, fused[:8], LC)
        gray_pair = ExposurePair(under=np.zeros((8, 8)), over=np.zeros((8, 8)))
        with pytest.raises(ValueError):
            weighted_ssim_loss(gray_pair, np.zeros((8, 8)), LC)
        with pytest.raises(ValueError):
            weighted_ssim_loss(pair, fused, LC, gamma=np.ones((2, 2)))


class TestLossGradient:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_central_differences(self, seed):
        pair, fused = random_triple(seed)
        loss, grad = weighted_ssim_loss(pair, fused, LC)
        h = 1e-5
        flat = fused.reshape(-1)
        rng = np.random.default_rng(seed)
        coords = rng.choice(flat.size, size=120, replace=False)
        numeric = np.zeros(coords.size)
        for out_i, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + h
            lp = weighted_ssim_loss(pair, fused, LC, want_grad=False)
            flat[i] = orig - h
            lm = weighted_ssim_loss(pair, fused, LC, want_grad=False)
            flat[i] = orig
            numeric[out_i] = (lp - lm) / (2 * h)
        assert relative_error(grad.reshape(-1)[coords], numeric) < 1e-5

    def test_gamma_is_stop_gradient(self):
        # gradient with frozen gamma equals gradient with recomputed gamma,
        # since gamma never depends on the fused image
        pair, fused = random_triple(3)
        gamma = gamma_for_pair(pair.under_gray, pair.over_gray, LC.gamma_kind,
                               LC.window, LC.sigma_e, LC.gamma_floor)
        _, g_auto = weighted_ssim_loss(pair, fused, LC)
        _, g_frozen = weighted_ssim_loss(pair, fused, LC, gamma=gamma)
        assert np.array_equal(g_auto, g_frozen)


class TestLossInvariances:
    @pytest.mark.parametrize("seed", range(5))
    def test_swap_exposures_and_complement_gamma(self, seed):
        pair, fused = random_triple(seed)
        rng = np.random.default_rng(seed + 50)
        gamma = rng.random((3, 3))
        la = weighted_ssim_loss(pair, fused, LC, gamma=gamma, want_grad=False)
        lb = weighted_ssim_loss(pair.swapped(), fused, LC, gamma=1.0 - gamma,
                                want_grad=False)
        assert la == pytest.approx(lb, abs=1e-12)

    def test_attribute_gamma_consistent_under_swap(self):
        pair, fused = random_triple(7)
        la = weighted_ssim_loss(pair, fused, LC, want_grad=False)
        lb = weighted_ssim_loss(pair.swapped(), fused, LC, want_grad=False)
        assert la == pytest.approx(lb, abs=1e-12)
