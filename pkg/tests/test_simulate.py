"""Simulator reproducibility, degenerate limits, and planted-truth geometry."""

import dataclasses
import math

import numpy as np
import pytest

from posehsmm.errors import PoseHsmmError
from posehsmm.keyframes import select_keyframes
from posehsmm.simulate import (
    ANCHOR_MAGNITUDES,
    DEFAULT_CHANNELS,
    REGIME_DROPOUT,
    REGIME_NOISE,
    ScenarioConfig,
    build_generating_model,
    preset_config,
    sample_sequence,
    sample_transition_clip,
    transition_protocol,
)
from posehsmm.states import (
    CANONICAL_POSES,
    PoseLabel,
    RotationDirection,
    SceneCondition,
)

PL = PoseLabel


def small_config(**kw):
    base = dict(
        poses=CANONICAL_POSES[:4],
        scene_doubling=False,
        t_target=200,
        duration_mean=6.0,
        duration_std=1.5,
        seed=3,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def streams_equal(a, b):
    if a.T != b.T or a.channels != b.channels:
        return False
    for fa, fb in zip(a.frames, b.frames):
        if fa.available != fb.available:
            return False
        for c in fa.available:
            if fa.vectors[c].tolist() != fb.vectors[c].tolist():
                return False
    return True


class TestConfig:
    def test_scalar_noise_broadcasts(self):
        cfg = small_config(noise=0.1, dropout=0.0)
        assert cfg.noise == {SceneCondition.BC: 0.1, SceneCondition.DO: 0.1}

    def test_resolved_d_max(self):
        assert small_config(duration_mean=6.0).resolved_d_max() == 18
        assert small_config(duration_mean=0.2, d_max=None).resolved_d_max() == 2
        assert small_config(d_max=40).resolved_d_max() == 40

    def test_presets(self):
        assert preset_config("bc-sim").base_scene is SceneCondition.BC
        assert preset_config("do-sim").base_scene is SceneCondition.DO
        assert preset_config("bc-sim", t_target=50).t_target == 50
        with pytest.raises(KeyError):
            preset_config("nope")

    def test_regime_constants(self):
        assert REGIME_NOISE[SceneCondition.BC] == 0.05
        assert REGIME_DROPOUT[SceneCondition.BC] == 0.0
        assert REGIME_NOISE[SceneCondition.DO] > REGIME_NOISE[SceneCondition.BC]
        assert REGIME_DROPOUT[SceneCondition.DO] > 0.0


class TestGeneratingModel:
    def test_shapes_and_normalization(self):
        cfg = small_config()
        model, space = build_generating_model(cfg)
        Q = len(space)
        assert model.pi.shape == (Q,)
        assert model.pi.sum() == 1.0
        assert np.allclose(model.A.sum(axis=1), 1.0)
        assert np.diag(model.A).max() == 0.0
        assert set(model.emissions) == set(DEFAULT_CHANNELS)

    def test_doubled_blocks_share_pose_rows(self):
        cfg = small_config(scene_doubling=True)
        model, space = build_generating_model(cfg)
        p = cfg.n_poses
        assert np.array_equal(model.A[:p, :p], model.A[p:, p:])
        # no scene switching unless asked for
        assert model.A[:p, p:].max() == 0.0

    def test_scene_switch_mass(self):
        cfg = small_config(scene_doubling=True, scene_switch=True)
        model, _ = build_generating_model(cfg)
        p = cfg.n_poses
        assert model.A[:p, p:].sum() > 0.0
        assert np.allclose(model.A.sum(axis=1), 1.0)

    def test_effective_means_follow_noise(self):
        cfg = small_config(noise=0.1, dropout=0.0)
        model, space = build_generating_model(cfg)
        means = model.emissions[DEFAULT_CHANNELS[0]].means
        # flip noise maps bits {0,1} to {0.1, 0.9}
        assert set(np.round(np.unique(means), 12)) <= {0.1, 0.9}

    def test_do_contrast_shrinks_means(self):
        cfg = ScenarioConfig(
            poses=CANONICAL_POSES[:3],
            scene_doubling=True,
            noise=0.1,
            dropout=0.0,
        )
        model, space = build_generating_model(cfg)
        means = model.emissions[DEFAULT_CHANNELS[0]].means
        p = cfg.n_poses
        bc, do = means[:p], means[p:]
        assert np.allclose(do - 0.5, (bc - 0.5) * 0.5)


class TestSampleSequence:
    def test_deterministic(self):
        a_stream, a_truth = sample_sequence(small_config())
        b_stream, b_truth = sample_sequence(small_config())
        assert streams_equal(a_stream, b_stream)
        assert a_truth.segmentation == b_truth.segmentation

    def test_seed_changes_trajectory(self):
        a, _ = sample_sequence(small_config(seed=3))
        b, _ = sample_sequence(small_config(seed=4))
        assert not streams_equal(a, b)

    def test_t_target_hit_exactly(self):
        stream, truth = sample_sequence(small_config(t_target=137))
        assert stream.T == 137
        assert sum(seg.d for seg in truth.segmentation) == 137

    def test_zero_noise_emits_rounded_templates(self):
        cfg = small_config(noise=0.0, dropout=0.0)
        stream, truth = sample_sequence(cfg)
        model = truth.generating_model
        labels = []
        for seg in truth.segmentation:
            labels.extend([seg.y_index] * seg.d)
        for c in cfg.channels:
            # stored means are clamped away from {0, 1}; emitted bits are not
            bits = (model.emissions[c].means >= 0.5).astype(float)
            for t, frame in enumerate(stream.frames):
                assert frame.vectors[c].tolist() == bits[labels[t]].tolist()
                assert c in frame.available

    def test_consecutive_segments_change_pose(self):
        _, truth = sample_sequence(small_config(t_target=500))
        space = truth.generating_model.states
        poses = [space[seg.y_index].pose for seg in truth.segmentation]
        assert all(a is not b for a, b in zip(poses, poses[1:]))

    def test_duration_statistics(self):
        cfg = small_config(t_target=6000, duration_mean=6.0, duration_std=1.5)
        _, truth = sample_sequence(cfg)
        durations = [seg.d for seg in truth.segmentation][:-1]  # last is truncated
        assert abs(np.mean(durations) - 6.0) < 0.4
        assert 1.0 < np.std(durations) < 2.0

    def test_dropout_rate(self):
        cfg = small_config(noise=0.0, dropout=0.4, t_target=2000)
        stream, _ = sample_sequence(cfg)
        miss = np.mean(
            [c not in f.available for f in stream.frames for c in cfg.channels]
        )
        assert abs(miss - 0.4) < 0.05

    def test_scene_track(self):
        cfg = ScenarioConfig(poses=CANONICAL_POSES[:3], scene_switch=True,
                             t_target=100, seed=5)
        _, truth = sample_sequence(cfg)
        track = truth.scene_track
        assert track[0] is SceneCondition.BC
        assert track[-1] is SceneCondition.DO
        flips = sum(a is not b for a, b in zip(track, track[1:]))
        assert flips == 1
        switch = track.index(SceneCondition.DO)
        assert 100 // 4 <= switch <= 3 * 100 // 4


class TestTransitionClips:
    CFG = ScenarioConfig(
        poses=CANONICAL_POSES,
        scene_doubling=False,
        noise=0.0,
        dropout=0.0,
        seed=9,
    )
    COMBO = (PL.SOLDIER_UP, PL.FETAL_RIGHT, RotationDirection.LEFT)

    def test_clip_layout(self):
        stream, truth = sample_transition_clip(*self.COMBO, self.CFG)
        h, g = self.CFG.transition_hold, self.CFG.transition_ramp
        assert stream.T == 2 * h + 4 * g - 1
        assert truth.transition.anchor_ticks == (h + g, h + 2 * g, h + 3 * g)
        assert truth.transition.n_pseudo == 3

    def test_holds_equal_templates(self):
        stream, truth = sample_transition_clip(*self.COMBO, self.CFG)
        h = self.CFG.transition_hold
        first = stream.frames[0]
        for t in range(h):
            for c in self.CFG.channels:
                assert stream.frames[t].vectors[c].tolist() == first.vectors[c].tolist()
        last = stream.frames[-1]
        for t in range(stream.T - h + 1, stream.T):
            for c in self.CFG.channels:
                assert stream.frames[t].vectors[c].tolist() == last.vectors[c].tolist()

    def test_directions_share_holds_but_not_intermediates(self):
        a, b = self.COMBO[0], self.COMBO[1]
        left, lt = sample_transition_clip(a, b, RotationDirection.LEFT, self.CFG)
        right, _ = sample_transition_clip(a, b, RotationDirection.RIGHT, self.CFG)
        c = self.CFG.channels[0]
        t1, t2, t3 = lt.transition.anchor_ticks
        assert left.frames[0].vectors[c].tolist() == right.frames[0].vectors[c].tolist()
        assert left.frames[-1].vectors[c].tolist() == right.frames[-1].vectors[c].tolist()
        for t in (t1, t2, t3):
            assert left.frames[t - 1].vectors[c].tolist() != right.frames[t - 1].vectors[c].tolist()

    def test_self_pair_is_static_at_zero_noise(self):
        clip, _ = sample_transition_clip(
            PL.SOLDIER_UP, PL.SOLDIER_UP, RotationDirection.LEFT, self.CFG
        )
        kfs = select_keyframes(clip, threshold=0.25)
        assert kfs.static

    def test_midpoint_recovered_by_keyframes(self):
        stream, truth = sample_transition_clip(*self.COMBO, self.CFG)
        kfs = select_keyframes(stream, k_max=5, threshold=0.25)
        assert not kfs.static
        mid = truth.transition.anchor_ticks[1]
        assert min(abs(kf.frame_index - mid) for kf in kfs) <= 1

    def test_anchor_magnitude_balance(self):
        # the middle anchor is the motion peak, but the outer anchors must
        # still swing: they carry direction evidence of their own
        assert ANCHOR_MAGNITUDES[1] > ANCHOR_MAGNITUDES[0]
        assert ANCHOR_MAGNITUDES[1] > ANCHOR_MAGNITUDES[2]
        assert min(ANCHOR_MAGNITUDES) >= 0.3

    def test_planted_segmentation(self):
        stream, truth = sample_transition_clip(*self.COMBO, self.CFG)
        segs = truth.segmentation.segments
        assert len(segs) == 2
        space = truth.generating_model.states
        assert space[segs[0].y_index].pose is self.COMBO[0]
        assert space[segs[1].y_index].pose is self.COMBO[1]
        mid = truth.transition.anchor_ticks[1]
        assert segs[0].d == mid

    def test_endpoints_survive_dropout(self):
        cfg = dataclasses.replace(self.CFG, dropout=0.9, seed=2)
        stream, _ = sample_transition_clip(*self.COMBO, cfg)
        for c in cfg.channels:
            assert c in stream.frames[0].available
            assert c in stream.frames[-1].available

    def test_deterministic(self):
        a, _ = sample_transition_clip(*self.COMBO, self.CFG)
        b, _ = sample_transition_clip(*self.COMBO, self.CFG)
        assert streams_equal(a, b)

    def test_unknown_pose_rejected(self):
        cfg = small_config()
        with pytest.raises(PoseHsmmError):
            sample_transition_clip(
                PL.OTHER, CANONICAL_POSES[0], RotationDirection.LEFT, cfg
            )


class TestProtocol:
    def test_full_protocol(self):
        combos = transition_protocol()
        assert len(combos) == 200
        assert len(set(combos)) == 200
        assert sum(a is b for a, b, _ in combos) == 20  # self-pairs, both ways

    def test_restricted_protocol(self):
        combos = transition_protocol(CANONICAL_POSES[:3])
        assert len(combos) == 18
