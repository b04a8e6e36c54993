import numpy as np
import pytest

from trajcomply.errors import LengthMismatch
from trajcomply.losses import LossConfig, LossWeights
from trajcomply.metrics import min_ade
from trajcomply.refine import (
    RefineConfig,
    alpha_sweep,
    original_loss,
    refine,
)
from trajcomply.scene import PredictionSet

import fd_checks
from conftest import random_predictions, random_scene


class TestOriginalLoss:
    def test_gradient_zero_off_winner(self):
        rng = np.random.default_rng(80)
        for _ in range(10):
            gt = rng.uniform(-5, 5, (6, 2))
            preds = rng.uniform(-5, 5, (4, 6, 2))
            out = original_loss(preds, gt)
            value, winner = min_ade(preds, gt)
            assert out.value == value
            losers = [m for m in range(4) if m != winner]
            assert np.all(out.grad[losers] == 0.0)

    def test_two_mode_fixture(self):
        gt = np.array([[0.0, 0.0], [1.0, 0.0]])
        preds = np.stack([gt + [0.0, 1.0], gt + [0.0, 5.0]])
        out = original_loss(preds, gt)
        assert np.all(out.grad[1] == 0.0)
        np.testing.assert_allclose(out.grad[0], [[0.0, 0.5], [0.0, 0.5]], atol=1e-12)

    def test_coincident_points_subgradient_zero(self):
        gt = np.array([[0.0, 0.0], [1.0, 0.0]])
        preds = np.stack([gt, gt + [0.0, 5.0]])
        out = original_loss(preds, gt)
        assert out.value == 0.0
        assert np.all(out.grad == 0.0)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(81)
        checked = 0
        for _ in range(10):
            gt = rng.uniform(-5, 5, (5, 2))
            preds = rng.uniform(-5, 5, (3, 5, 2))
            if not fd_checks.winner_smooth(preds, gt):
                continue
            got = original_loss(preds, gt).grad
            fd = fd_checks.central_diff(lambda m: original_loss(m, gt).value, preds)
            np.testing.assert_allclose(got, fd, atol=fd_checks.FD_TOL)
            checked += 1
        assert checked >= 6

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            original_loss(np.zeros((2, 3, 2)), np.zeros((5, 2)))


class TestRefine:
    def test_alpha_zero_descends_min_ade(self):
        rng = np.random.default_rng(82)
        scene = random_scene(rng, horizon=6)
        noisy = scene.ground_truth.points[None] + rng.normal(0, 0.8, (3, 6, 2))
        preds = PredictionSet(modes=noisy, dt=scene.dt)
        cfg = RefineConfig(alpha=0.0, max_iters=100, step_size=0.05)
        trace = refine(preds, scene, LossConfig(), cfg)
        start, _ = min_ade(preds, scene.ground_truth)
        end, _ = min_ade(trace.final, scene.ground_truth)
        assert end < start

    def test_deterministic(self):
        rng = np.random.default_rng(83)
        scene = random_scene(rng)
        preds = random_predictions(rng, scene)
        cfg = RefineConfig(alpha=2.0, max_iters=40, seed=7,
                           weights=LossWeights(1.0, 0.5, 0.1))
        a = refine(preds, scene, LossConfig(), cfg)
        b = refine(preds, scene, LossConfig(), cfg)
        assert a.records == b.records
        assert np.array_equal(a.final.modes, b.final.modes)

    def test_trace_consistency(self):
        rng = np.random.default_rng(84)
        scene = random_scene(rng)
        preds = random_predictions(rng, scene)
        w = LossWeights(w_off=1.2, w_dir=0.7, w_div=0.05)
        cfg = RefineConfig(alpha=1.7, max_iters=30, weights=w)
        trace = refine(preds, scene, LossConfig(), cfg)
        assert trace.records[0].iteration == 0
        assert len(trace.records) <= cfg.max_iters + 1
        for rec in trace.records:
            aux = w.w_off * rec.offroad + w.w_dir * rec.direction - w.w_div * rec.diversity
            assert rec.final == pytest.approx(rec.original + 1.7 * aux, abs=1e-12)

    def test_single_step_never_increases_on_smooth_fixture(self):
        rng = np.random.default_rng(85)
        tried = 0
        for _ in range(120):
            if tried >= 5:
                break
            scene = random_scene(rng)
            preds = random_predictions(rng, scene, n_modes=3)
            polys = [p.vertices for p in scene.drivable.polygons]
            hist = scene.ego_history.points[-1]
            segs = [s.tolist() for s in scene.centerlines.segments]
            smooth = (fd_checks.winner_smooth(preds.modes, scene.ground_truth.points)
                      and fd_checks.offroad_smooth_mask(preds.modes, polys, 0.0).all()
                      and fd_checks.direction_smooth_modes(
                          preds.modes, segs, 2.0, np.pi / 12, hist).all()
                      and fd_checks.diversity_smooth(preds.modes, polys, 0.0, False))
            if not smooth:
                continue
            cfg = RefineConfig(alpha=1.0, max_iters=1, step_size=1e-4,
                               weights=LossWeights(1.0, 1.0, 0.1))
            trace = refine(preds, scene, LossConfig(), cfg)
            assert trace.records[1].final <= trace.records[0].final + 1e-9
            tried += 1
        assert tried >= 5

    def test_convergence_tol_stops_early(self):
        rng = np.random.default_rng(86)
        scene = random_scene(rng)
        preds = PredictionSet(modes=np.repeat(scene.ground_truth.points[None], 2, axis=0),
                              dt=scene.dt)
        cfg = RefineConfig(alpha=0.0, max_iters=500, convergence_tol=1e-12)
        trace = refine(preds, scene, LossConfig(), cfg)
        assert len(trace.records) < 501

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RefineConfig(alpha=-1.0)
        with pytest.raises(ValueError):
            RefineConfig(step_size=0.0)
        with pytest.raises(ValueError):
            RefineConfig(max_iters=0)
        with pytest.raises(ValueError):
            RefineConfig(step_decay=0.0)


class TestAlphaSweep:
    def test_zero_alpha_row_matches_plain_refine(self):
        rng = np.random.default_rng(87)
        scene = random_scene(rng)
        preds = random_predictions(rng, scene)
        loss_cfg = LossConfig()
        cfg = RefineConfig(alpha=123.0, max_iters=20)  # alpha overridden per row
        rows = alpha_sweep([(scene, preds)], loss_cfg, cfg, [0.0])
        from trajcomply.metrics import quality_metrics
        from dataclasses import replace
        trace = refine(preds, scene, loss_cfg, replace(cfg, alpha=0.0))
        ade, _ = min_ade(trace.final, scene.ground_truth)
        off, direction, div = quality_metrics(trace.final, scene, loss_cfg)
        row = rows[0]
        assert row.alpha == 0.0
        assert row.min_ade == pytest.approx(ade, abs=1e-15)
        assert row.offroad == pytest.approx(off, abs=1e-15)
        assert row.direction == pytest.approx(direction, abs=1e-15)
        assert row.diversity == pytest.approx(div, abs=1e-15)

    def test_duplicate_alphas_identical_rows(self):
        rng = np.random.default_rng(88)
        scene = random_scene(rng)
        preds = random_predictions(rng, scene)
        rows = alpha_sweep([(scene, preds)], LossConfig(),
                           RefineConfig(max_iters=15), [0.5, 0.5])
        assert rows[0].min_ade == rows[1].min_ade
        assert rows[0].offroad == rows[1].offroad

    def test_rejects_bad_alphas(self):
        rng = np.random.default_rng(89)
        scene = random_scene(rng)
        preds = random_predictions(rng, scene)
        with pytest.raises(ValueError):
            alpha_sweep([(scene, preds)], LossConfig(), RefineConfig(), [])
        with pytest.raises(ValueError):
            alpha_sweep([(scene, preds)], LossConfig(), RefineConfig(), [-1.0])
