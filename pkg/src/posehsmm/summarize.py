"""Two-resolution motion summaries: windowed pose history and transition labels.

The coarse resolution decodes a long stream, samples the decoded labels at a
fixed rate, and reports one modal pose per time window, demoting windows
whose modal fraction falls below a consistency threshold to ``other``.  The
fine resolution classifies a short transition clip by compressing it to
keyframes and scoring the resulting pseudo-pose stream against a library of
left-to-right chains, one per (initial pose, final pose, rotation direction).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .emission import (
    ChannelEmissionModel,
    ChannelId,
    FeatureStream,
    _channel_sort_key,
    log_emission_matrix,
)
from .errors import LabelMismatch, NoFeasiblePath, NoTransitionDetected
from .inference import DecodeResult, HsmmModel, hsmm_viterbi, segment_viterbi_on_tables
from .keyframes import KeyframeSet, keyframes_to_pseudo_pose_stream, select_keyframes
from .states import (
    DurationModel,
    PoseLabel,
    RotationDirection,
    SceneCondition,
    StateSpace,
)

#: Minimum fraction of window samples that must agree before a pose is reported.
DEFAULT_CONSISTENCY = 0.8

#: Duration std floor reused for chain dwell statistics.
MIN_GAP_STD = 0.5


@dataclass(frozen=True)
class HistoryRecord:
    """One summarized window: modal pose, modal scene, and the modal fraction.

    ``label`` is OTHER whenever ``confidence`` is below the consistency
    threshold, but the confidence always reports the true modal fraction.
    """

    window_start: int
    window_len: int
    label: PoseLabel
    scene: SceneCondition | None
    confidence: float


@dataclass(frozen=True)
class TransitionRecord:
    """A classified transition.  Self-pairs denote a roll away and back."""

    from_pose: PoseLabel
    to_pose: PoseLabel
    direction: RotationDirection
    log_prob: float
    n_pseudo_poses: int


def history_from_labels(
    state_indices: Sequence[int],
    space: StateSpace,
    sample_every: int = 1,
    window: int = 10,
    consistency: float = DEFAULT_CONSISTENCY,
) -> list[HistoryRecord]:
    """Windowed modal summary of a per-tick state sequence.

    Ticks 1, 1+sample_every, ... are sampled; windows tile from tick 1 and
    the trailing partial window is kept as long as it contains a sample.
    Ties on the modal pose or scene resolve by name order for determinism.
    """
    if sample_every < 1 or window < sample_every:
        raise ValueError("need window >= sample_every >= 1")
    T = len(state_indices)
    samples = range(1, T + 1, sample_every)
    records: list[HistoryRecord] = []
    for start in range(1, T + 1, window):
        end = min(start + window - 1, T)
        in_window = [t for t in samples if start <= t <= end]
        if not in_window:
            continue
        sampled = [space[int(state_indices[t - 1])] for t in in_window]
        pose_counts = Counter(s.pose for s in sampled)
        pose, count = sorted(
            pose_counts.items(), key=lambda kv: (-kv[1], kv[0].value)
        )[0]
        confidence = count / len(sampled)
        label = pose if confidence >= consistency else PoseLabel.OTHER
        scenes = [s.scene for s in sampled if s.scene is not None]
        if scenes:
            scene = sorted(
                Counter(scenes).items(), key=lambda kv: (-kv[1], kv[0].value)
            )[0][0]
        else:
            scene = None
        records.append(HistoryRecord(start, end - start + 1, label, scene, confidence))
    return records


def summarize_history(
    stream: FeatureStream,
    model: HsmmModel,
    sample_every: int = 1,
    window: int = 10,
    consistency: float = DEFAULT_CONSISTENCY,
) -> list[HistoryRecord]:
    """Decode a stream and produce its windowed pose history."""
    if model.states is None:
        raise ValueError("model carries no state space; cannot name poses")
    result = hsmm_viterbi(stream, model)
    labels: list[int] = []
    for seg in result.segmentation:
        labels.extend([seg.y_index] * seg.d)
    return history_from_labels(labels, model.states, sample_every, window, consistency)


def window_detection_rate(
    predicted: Sequence[HistoryRecord], reference: Sequence[HistoryRecord]
) -> float:
    """Fraction of windows whose pose label matches the reference summary."""
    if len(predicted) != len(reference):
        raise LabelMismatch(
            f"{len(predicted)} predicted windows vs {len(reference)} reference"
        )
    hits = sum(p.label is r.label for p, r in zip(predicted, reference))
    return hits / len(reference)


# =====================================================================
# Transition library
# =====================================================================


@dataclass
class TransitionChain:
    """Mean pseudo-pose chain for one (from, to, direction) combination.

    ``means`` holds one (L, F) matrix per channel; ``gap_mean``/``gap_std``
    are dwell statistics of the original keyframe tick gaps, used when a
    full-rate clip is scored instead of its keyframe compression.
    """

    means: dict[ChannelId, np.ndarray]
    gap_mean: np.ndarray
    gap_std: np.ndarray
    n_clips: int

    @property
    def length(self) -> int:
        return self.gap_mean.shape[0]


@dataclass
class TransitionLibrary:
    """Chains keyed by (from, to, direction); at most 10 x 10 x 2 entries."""

    entries: dict[
        tuple[PoseLabel, PoseLabel, RotationDirection], TransitionChain
    ]

    def __len__(self) -> int:
        return len(self.entries)

    def sorted_keys(self):
        return sorted(
            self.entries, key=lambda k: (k[0].value, k[1].value, k[2].value)
        )


def build_transition_library(
    clips: Iterable[
        tuple[FeatureStream, PoseLabel, PoseLabel, RotationDirection]
    ],
    k_max: int = 5,
    threshold: float = 0.8,
    stage2_threshold: float | None = None,
) -> TransitionLibrary:
    """Fit pseudo-pose chains from labeled training clips.

    Each clip is compressed to keyframes; clips sharing a combination are
    aligned by keyframe ordinal and averaged per position and channel.
    Static clips contribute nothing.  A position's channel mean falls back to
    0.5 when the channel was never available there.
    """
    grouped: dict[tuple, list[tuple[FeatureStream, KeyframeSet]]] = {}
    for stream, from_pose, to_pose, direction in clips:
        kfs = select_keyframes(stream, k_max, threshold, stage2_threshold)
        if kfs.static:
            continue
        grouped.setdefault((from_pose, to_pose, direction), []).append((stream, kfs))

    entries = {}
    for key, members in grouped.items():
        length = max(len(kfs) for _, kfs in members)
        channels = sorted(
            {c for stream, _ in members for c in stream.channels},
            key=_channel_sort_key,
        )
        F = members[0][0].F
        sums = {c: np.zeros((length, F)) for c in channels}
        counts = {c: np.zeros(length) for c in channels}
        gaps: list[list[float]] = [[] for _ in range(length)]
        for stream, kfs in members:
            ticks = kfs.ticks
            for p, kf in enumerate(kfs):
                frame = stream.frames[kf.frame_index - 1]
                for c in frame.available:
                    sums[c][p] += frame.vectors[c]
                    counts[c][p] += 1.0
                nxt = ticks[p + 1] if p + 1 < len(ticks) else stream.T + 1
                gaps[p].append(float(nxt - ticks[p]))
        means = {}
        for c in channels:
            m = np.full((length, F), 0.5)
            seen = counts[c] > 0
            m[seen] = sums[c][seen] / counts[c][seen, None]
            means[c] = m
        gap_mean = np.zeros(length)
        gap_std = np.zeros(length)
        for p, values in enumerate(gaps):
            arr = np.asarray(values if values else [1.0])
            gap_mean[p] = arr.mean()
            gap_std[p] = max(float(arr.std()), MIN_GAP_STD)
        entries[key] = TransitionChain(means, gap_mean, gap_std, len(members))
    return TransitionLibrary(entries)


def _score_chain(
    chain: TransitionChain, stream: FeatureStream, use_keyframes: bool
) -> DecodeResult:
    """Best left-to-right alignment of a stream onto one chain."""
    L = chain.length
    log_pi = np.full(L, -np.inf)
    log_pi[0] = 0.0
    log_A = np.full((L, L), -np.inf)
    for p in range(L - 1):
        log_A[p, p + 1] = 0.0
    if use_keyframes:
        dur = DurationModel(np.ones(L), np.full(L, MIN_GAP_STD), stream.T)
    else:
        dur = DurationModel(chain.gap_mean, chain.gap_std, stream.T)
    models = {c: ChannelEmissionModel(c, m) for c, m in chain.means.items()}
    E = log_emission_matrix(stream, models, L)
    C = np.vstack([np.zeros(L), np.cumsum(E, axis=0)])
    # the alignment must traverse the whole chain: end at the last pseudo-pose
    final_log = np.full(L, -np.inf)
    final_log[L - 1] = 0.0
    return segment_viterbi_on_tables(
        stream.T, log_pi, log_A, dur.log_pmf_table(), C, final_log
    )


def classify_transition(
    clip: FeatureStream,
    library: TransitionLibrary,
    k_max: int = 5,
    threshold: float = 0.8,
    stage2_threshold: float | None = None,
    use_keyframes: bool = True,
) -> TransitionRecord:
    """Label a clip with the best-scoring library chain.

    The clip is compressed to keyframes (a static clip raises
    NoTransitionDetected) and, by default, the pseudo-pose stream is scored
    against every chain; ``use_keyframes=False`` scores the full-rate clip
    instead, using the chains' original tick-gap dwell statistics.  Ties
    prefer the shorter chain, then name order.
    """
    if not library.entries:
        raise ValueError("transition library is empty")
    kfs = select_keyframes(clip, k_max, threshold, stage2_threshold)
    if kfs.static:
        raise NoTransitionDetected("clip shows no endpoint motion on any channel")
    target = keyframes_to_pseudo_pose_stream(clip, kfs) if use_keyframes else clip

    best = None
    for key in library.sorted_keys():
        chain = library.entries[key]
        try:
            result = _score_chain(chain, target, use_keyframes)
        except NoFeasiblePath:
            # chain longer than the clip: cannot be traversed at all
            continue
        rank = (-result.log_prob, chain.length, key[0].value, key[1].value, key[2].value)
        if best is None or rank < best[0]:
            best = (rank, key, result)
    if best is None:
        raise NoTransitionDetected("no library chain fits within the clip length")
    _, key, result = best
    return TransitionRecord(
        key[0], key[1], key[2], result.log_prob, len(result.segmentation)
    )
