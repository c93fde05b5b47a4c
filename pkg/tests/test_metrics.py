"""SSIM building block and the stack-fidelity score."""

import numpy as np
import pytest

from hdrfuse.image import window_anchors
from hdrfuse.metrics import (MEF_SSIM_SPEC, SsimWindowSpec,
                             ideal_reference_fusion, mef_ssim, ssim_window)
from hdrfuse.synthetic import synthetic_pair

C1 = 0.01 ** 2
C2 = 0.03 ** 2


def reference_mef_ssim(stack, fused, spec):
    """Slow per-window loop implementation used as the oracle."""
    k = spec.window_size
    n = k * k
    h, w = fused.shape
    scores = []
    rows = window_anchors(h, k, spec.stride)
    cols = window_anchors(w, k, spec.stride)
    for r in rows:
        for c in cols:
            patches = [img[r:r + k, c:c + k].astype(np.float64) for img in stack]
            centered = [p - p.mean() for p in patches]
            contrasts = [np.sqrt((p * p).sum()) for p in centered]
            quart = sum(cc ** 4 for cc in contrasts)
            if quart <= 1e-12:
                ref = np.zeros((k, k))
            else:
                z = sum((cc ** 3 / quart) * p for cc, p in zip(contrasts, centered))
                zn = np.sqrt((z * z).sum())
                ref = max(contrasts) * z / zn if zn > 1e-12 else np.zeros((k, k))
            y = fused[r:r + k, c:c + k]
            yc = y - y.mean()
            cov = (ref * yc).mean()
            var_ref = (ref * ref).mean()
            var_y = (yc * yc).mean()
            scores.append((2 * cov + spec.c2) / (var_ref + var_y + spec.c2))
    return float(np.mean(scores))


class TestSsimWindow:
    def test_identity_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a = rng.random((7, 7))
            assert ssim_window(a, a) == 1.0

    def test_constant_zero_vs_one(self):
        a = np.zeros((7, 7))
        b = np.ones((7, 7))
        got = ssim_window(a, b)
        assert got == pytest.approx(C1 / (1 + C1), rel=1e-12)

    def test_constant_shift_reduces_to_luminance_term(self):
        rng = np.random.default_rng(1)
        a = rng.random((7, 7))
        b = a + 0.1
        ma, mb = a.mean(), b.mean()
        want = (2 * ma * mb + C1) / (ma * ma + mb * mb + C1)
        assert ssim_window(a, b) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.random((9, 9)), rng.random((9, 9))
        assert abs(ssim_window(a, b) - ssim_window(b, a)) < 1e-12

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            v = ssim_window(rng.random((5, 5)), rng.random((5, 5)))
            assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            ssim_window(np.zeros((3, 3)), np.zeros((4, 4)))


class TestSpecValidation:
    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            SsimWindowSpec(window_size=1)
        with pytest.raises(ValueError):
            SsimWindowSpec(stride=0)
        with pytest.raises(ValueError):
            SsimWindowSpec(c1=0.0)


class TestMefSsim:
    def test_duplicate_stack_scores_one(self):
        rng = np.random.default_rng(0)
        img = rng.random((24, 24))
        rep = mef_ssim([img, img], img)
        assert abs(rep.global_score - 1.0) < 1e-9

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(3)
        stack = [rng.random((20, 22)), rng.random((20, 22)), rng.random((20, 22))]
        fused = rng.random((20, 22))
        for spec in (MEF_SSIM_SPEC, SsimWindowSpec(window_size=5, stride=3)):
            got = mef_ssim(stack, fused, spec).global_score
            want = reference_mef_ssim(stack, fused, spec)
            assert got == pytest.approx(want, abs=1e-10)

    def test_constant_fusion_scores_low(self):
        rng = np.random.default_rng(7)
        stack = [rng.random((32, 32)), rng.random((32, 32))]
        fused = np.full((32, 32), 0.5)
        got = mef_ssim(stack, fused).global_score
        assert got == pytest.approx(reference_mef_ssim(stack, fused, MEF_SSIM_SPEC),
                                    abs=1e-10)
        assert got < 0.2

    def test_order_invariance(self):
        pair = synthetic_pair(0, 40)
        u, o = pair.under_gray, pair.over_gray
        fused = 0.5 * u + 0.5 * o
        a = mef_ssim([u, o], fused).global_score
        b = mef_ssim([o, u], fused).global_score
        assert abs(a - b) < 1e-12

    def test_color_inputs_scored_on_grayscale(self):
        pair = synthetic_pair(1, 40)
        fused = 0.5 * pair.under + 0.5 * pair.over
        color = mef_ssim([pair.under, pair.over], fused).global_score
        gray = mef_ssim([pair.under_gray, pair.over_gray],
                        0.5 * pair.under_gray + 0.5 * pair.over_gray).global_score
        # not identical (fusion and conversion do not commute) but same metric
        assert color == pytest.approx(
            mef_ssim([pair.under_gray, pair.over_gray],
                     (0.299 * fused[:, :, 0] + 0.587 * fused[:, :, 1]
                      + 0.114 * fused[:, :, 2])).global_score, abs=1e-12)
        assert abs(color - gray) < 0.05

    def test_ideal_fusion_dominates(self):
        spec = SsimWindowSpec(window_size=8, stride=8)
        pair = synthetic_pair(2, 48)
        stack = [pair.under_gray, pair.over_gray]
        ideal = ideal_reference_fusion(stack, spec)
        best = mef_ssim(stack, ideal, spec).global_score
        assert best == pytest.approx(1.0, abs=1e-6)
        rng = np.random.default_rng(0)
        for _ in range(5):
            alpha = rng.random()
            candidate = np.clip(alpha * stack[0] + (1 - alpha) * stack[1], 0, 1)
            assert best >= mef_ssim(stack, candidate, spec).global_score - 1e-9

    def test_flat_windows_handled(self):
        flat = np.full((16, 16), 0.4)
        rep = mef_ssim([flat, flat], flat)
        assert rep.global_score == pytest.approx(1.0)

    def test_report_consistency(self):
        pair = synthetic_pair(3, 24)
        rep = mef_ssim([pair.under_gray, pair.over_gray], pair.under_gray)
        assert rep.global_score == pytest.approx(rep.scores.mean(), abs=1e-12)
        per_patch = rep.per_patch_scores
        assert rep.global_score == pytest.approx(np.mean(list(per_patch.values())),
                                                 abs=1e-12)
        rows = list(rep.iter_rows())
        assert len(rows) == rep.scores.size
        assert rows[0][:2] == (0, 0)

    def test_errors(self):
        img = np.zeros((8, 8))
        with pytest.raises(ValueError):
            mef_ssim([img], img)
        with pytest.raises(ValueError):
            mef_ssim([img, np.zeros((9, 9))], img)
