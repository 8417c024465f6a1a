"""Windowed pose history and transition-library classification."""

import numpy as np
import pytest

from posehsmm.emission import ChannelEmissionModel, ChannelId, FeatureStream
from posehsmm.errors import LabelMismatch, NoTransitionDetected
from posehsmm.inference import HsmmModel
from posehsmm.states import (
    DurationModel,
    PoseLabel,
    RotationDirection,
    SceneCondition,
    StateSpace,
)
from posehsmm.summarize import (
    HistoryRecord,
    build_transition_library,
    classify_transition,
    history_from_labels,
    summarize_history,
    window_detection_rate,
)

PL = PoseLabel
RGB = ChannelId.parse("left:RGB")

SPACE3 = StateSpace.from_poses(
    [PL.SOLDIER_UP, PL.YEARNER_RIGHT, PL.LOG_RIGHT], scene_doubling=False
)


def clip_from(rows, channel=RGB):
    return FeatureStream.from_arrays({channel: np.asarray(rows, dtype=float)})


class TestHistoryFromLabels:
    def test_nine_of_ten_reported(self):
        labels = [0] * 9 + [1]
        (rec,) = history_from_labels(labels, SPACE3, window=10)
        assert rec.label is PL.SOLDIER_UP
        assert rec.confidence == pytest.approx(0.9)

    def test_seven_of_ten_demoted_to_other(self):
        labels = [0] * 7 + [1] * 3
        (rec,) = history_from_labels(labels, SPACE3, window=10)
        assert rec.label is PL.OTHER
        assert rec.confidence == pytest.approx(0.7)

    def test_trailing_partial_window_kept(self):
        labels = [0] * 23
        recs = history_from_labels(labels, SPACE3, window=10)
        assert [r.window_start for r in recs] == [1, 11, 21]
        assert recs[-1].window_len == 3

    def test_sampling_rate(self):
        # samples at ticks 1, 4, 7, 10: three of the four hit state 0
        labels = [0, 1, 1, 0, 1, 1, 0, 1, 1, 1]
        (rec,) = history_from_labels(labels, SPACE3, sample_every=3, window=10,
                                     consistency=0.7)
        assert rec.label is PL.SOLDIER_UP
        assert rec.confidence == pytest.approx(0.75)

    def test_pose_tie_breaks_by_name(self):
        # 5 vs 5: logR sorts before solU
        labels = [0] * 5 + [2] * 5
        (rec,) = history_from_labels(labels, SPACE3, window=10, consistency=0.5)
        assert rec.label is PL.LOG_RIGHT

    def test_scene_mode(self):
        space = StateSpace.from_poses([PL.SOLDIER_UP], scene_doubling=True)
        labels = [0, 0, 1]  # two BC ticks, one DO tick
        (rec,) = history_from_labels(labels, space, window=3)
        assert rec.scene is SceneCondition.BC
        assert history_from_labels([0], SPACE3)[0].scene is None

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            history_from_labels([0], SPACE3, sample_every=4, window=2)
        with pytest.raises(ValueError):
            history_from_labels([0], SPACE3, sample_every=0)


class TestSummarizeHistory:
    def test_matches_truth_on_peaked_emissions(self):
        # near-deterministic emissions make the decode recover the plan
        plan = [0] * 10 + [1] * 10 + [0] * 10
        probs = np.array([[0.99], [0.01], [0.5]])
        # feed the Bernoulli means back as soft evidence: decode is exact
        x = np.array([[probs[y, 0]] for y in plan])
        stream = FeatureStream.from_arrays({RGB: x})
        A = np.array([[0, 1, 0], [1, 0, 0], [0.5, 0.5, 0]], dtype=float)
        model = HsmmModel(
            pi=np.array([0.8, 0.1, 0.1]),
            A=A,
            durations=DurationModel(np.full(3, 10.0), np.full(3, 1.0), 15),
            emissions={RGB: ChannelEmissionModel(RGB, probs)},
            states=SPACE3,
        )
        recs = summarize_history(stream, model, window=10)
        assert [r.label for r in recs] == [PL.SOLDIER_UP, PL.YEARNER_RIGHT,
                                           PL.SOLDIER_UP]
        assert all(r.confidence == 1.0 for r in recs)

    def test_requires_state_space(self):
        model = HsmmModel(
            pi=np.ones(2) / 2,
            A=np.array([[0.0, 1.0], [1.0, 0.0]]),
            durations=DurationModel(np.ones(2), np.ones(2), 4),
            emissions={RGB: ChannelEmissionModel(RGB, np.array([[0.2], [0.8]]))},
        )
        with pytest.raises(ValueError):
            summarize_history(clip_from([[1.0]] * 4), model)


class TestWindowDetectionRate:
    def rec(self, label):
        return HistoryRecord(1, 10, label, None, 1.0)

    def test_exact_match(self):
        recs = [self.rec(PL.SOLDIER_UP), self.rec(PL.OTHER)]
        assert window_detection_rate(recs, list(recs)) == 1.0

    def test_partial(self):
        a = [self.rec(PL.SOLDIER_UP), self.rec(PL.OTHER), self.rec(PL.LOG_RIGHT)]
        b = [self.rec(PL.SOLDIER_UP), self.rec(PL.LOG_RIGHT), self.rec(PL.LOG_RIGHT)]
        assert window_detection_rate(a, b) == pytest.approx(2 / 3)

    def test_length_mismatch(self):
        with pytest.raises(LabelMismatch):
            window_detection_rate([self.rec(PL.OTHER)], [])


def ramp_clip(lo=0.0, hi=1.0, T=21, F=2):
    rows = np.linspace(lo, hi, T)[:, None] * np.ones(F)
    return FeatureStream.from_arrays({RGB: rows})


class TestTransitionLibrary:
    KEY = (PL.SOLDIER_UP, PL.YEARNER_RIGHT, RotationDirection.LEFT)

    def test_single_clip_means_are_keyframe_vectors(self):
        from posehsmm.keyframes import select_keyframes

        clip = ramp_clip()
        lib = build_transition_library([(clip, *self.KEY)], threshold=0.4)
        chain = lib.entries[self.KEY]
        kfs = select_keyframes(clip, 5, 0.4)
        assert chain.length == len(kfs)
        for p, kf in enumerate(kfs):
            expect = clip.frames[kf.frame_index - 1].vectors[RGB]
            assert chain.means[RGB][p].tolist() == expect.tolist()
        assert chain.n_clips == 1

    def test_two_clips_average_positionwise(self):
        a = ramp_clip(0.0, 1.0)
        b = ramp_clip(0.0, 0.9)
        lib = build_transition_library(
            [(a, *self.KEY), (b, *self.KEY)], threshold=0.4
        )
        chain = lib.entries[self.KEY]
        assert chain.n_clips == 2
        # endpoints align at position 0 and the last position
        assert chain.means[RGB][0, 0] == pytest.approx(0.0)
        assert chain.means[RGB][-1, 0] == pytest.approx((1.0 + 0.9) / 2)

    def test_static_clips_contribute_nothing(self):
        still = clip_from([[0.5, 0.5]] * 8)
        lib = build_transition_library([(still, *self.KEY)], threshold=0.4)
        assert len(lib) == 0

    def test_gap_statistics(self):
        clip = ramp_clip(T=21)
        lib = build_transition_library([(clip, *self.KEY)], threshold=0.4)
        chain = lib.entries[self.KEY]
        from posehsmm.keyframes import select_keyframes

        ticks = select_keyframes(clip, 5, 0.4).ticks
        expect = [t1 - t0 for t0, t1 in zip(ticks, ticks[1:])] + [21 + 1 - ticks[-1]]
        assert chain.gap_mean.tolist() == pytest.approx(expect)
        assert (chain.gap_std >= 0.5).all()  # floored for single-clip chains


class TestClassifyTransition:
    KEY_A = (PL.SOLDIER_UP, PL.YEARNER_RIGHT, RotationDirection.LEFT)
    KEY_B = (PL.SOLDIER_UP, PL.LOG_RIGHT, RotationDirection.LEFT)

    def test_self_match(self):
        up = ramp_clip(0.0, 1.0)
        down = ramp_clip(1.0, 0.0)
        lib = build_transition_library(
            [(up, *self.KEY_A), (down, *self.KEY_B)], threshold=0.4
        )
        rec = classify_transition(up, lib, threshold=0.4)
        assert (rec.from_pose, rec.to_pose, rec.direction) == self.KEY_A
        rec = classify_transition(down, lib, threshold=0.4)
        assert (rec.from_pose, rec.to_pose, rec.direction) == self.KEY_B

    def test_full_rate_self_match(self):
        up = ramp_clip(0.0, 1.0)
        down = ramp_clip(1.0, 0.0)
        lib = build_transition_library(
            [(up, *self.KEY_A), (down, *self.KEY_B)], threshold=0.4
        )
        rec = classify_transition(up, lib, threshold=0.4, use_keyframes=False)
        assert rec.to_pose is PL.YEARNER_RIGHT
        assert rec.n_pseudo_poses == lib.entries[self.KEY_A].length

    def test_static_clip_rejected(self):
        lib = build_transition_library(
            [(ramp_clip(), *self.KEY_A)], threshold=0.4
        )
        with pytest.raises(NoTransitionDetected):
            classify_transition(clip_from([[0.5, 0.5]] * 8), lib, threshold=0.4)

    def test_empty_library_rejected(self):
        from posehsmm.summarize import TransitionLibrary

        with pytest.raises(ValueError):
            classify_transition(ramp_clip(), TransitionLibrary({}), threshold=0.4)

    def test_clip_shorter_than_every_chain(self):
        lib = build_transition_library([(ramp_clip(), *self.KEY_A)], threshold=0.4)
        assert lib.entries[self.KEY_A].length > 2
        two = clip_from([[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(NoTransitionDetected):
            classify_transition(two, lib, threshold=0.4)

    def test_exact_tie_breaks_by_name_order(self):
        # identical chains under two labels: LEFT sorts before RIGHT
        clip = ramp_clip()
        key_r = (PL.SOLDIER_UP, PL.YEARNER_RIGHT, RotationDirection.RIGHT)
        lib = build_transition_library(
            [(clip, *self.KEY_A), (clip, *key_r)], threshold=0.4
        )
        rec = classify_transition(clip, lib, threshold=0.4)
        assert rec.direction is RotationDirection.LEFT

    def test_deterministic(self):
        up = ramp_clip(0.0, 1.0)
        lib = build_transition_library([(up, *self.KEY_A)], threshold=0.4)
        a = classify_transition(up, lib, threshold=0.4)
        b = classify_transition(up, lib, threshold=0.4)
        assert a == b
