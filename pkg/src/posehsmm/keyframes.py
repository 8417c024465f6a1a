"""Keyframe selection: compress a motion clip to at most K representative frames.

Selection runs in three stages on Euclidean feature dissimilarity, always
normalized by sqrt(F) so channels and clips of different width are
comparable.  Stage 1 finds the channel with the strongest endpoint motion
and admits the first and last frames.  Stage 2 admits interior frames that
are simultaneously far from both endpoints, subject to a plateau ratio rule
and a minimum index gap.  Stage 3 fills in the motion peak between the
second and second-to-last admitted frames.  A clip whose endpoints look the
same on every channel is flagged static and keeps only its endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emission import ChannelId, FeatureFrame, FeatureStream, _channel_sort_key
from .errors import ChannelAbsent, EmptySequence


@dataclass(frozen=True)
class Keyframe:
    """One admitted frame: 1-based tick, the channel that scored it, and the
    dissimilarity score it was admitted with.  ``stage`` records which stage
    admitted it."""

    frame_index: int
    channel: ChannelId | None
    score: float
    stage: int


@dataclass(frozen=True)
class KeyframeSet:
    """Admitted keyframes in tick order plus the selection parameters.

    ``static`` marks clips whose endpoint dissimilarity never clears the
    threshold; such sets hold exactly the two endpoints.
    """

    frames: tuple[Keyframe, ...]
    k_max: int
    threshold: float
    static: bool = False

    @property
    def ticks(self) -> tuple[int, ...]:
        return tuple(kf.frame_index for kf in self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b)) / math.sqrt(a.shape[0])


def channel_endpoint_dissimilarity(clip: FeatureStream, channel: ChannelId) -> float:
    """Normalized Euclidean distance between a channel's first and last frame."""
    first, last = clip.frames[0], clip.frames[-1]
    if channel not in first.available or channel not in last.available:
        raise ChannelAbsent(f"{channel} unavailable at a clip endpoint")
    return _distance(first.vectors[channel], last.vectors[channel])


def _frame_score(
    frame: FeatureFrame,
    ref_a: FeatureFrame,
    ref_b: FeatureFrame,
) -> tuple[float, ChannelId | None]:
    """Best min-distance-to-both-references over channels shared by all three."""
    best = -1.0
    best_channel = None
    shared = sorted(
        frame.available & ref_a.available & ref_b.available, key=_channel_sort_key
    )
    for c in shared:
        d1 = _distance(frame.vectors[c], ref_a.vectors[c])
        d2 = _distance(frame.vectors[c], ref_b.vectors[c])
        score = min(d1, d2)
        if score > best:
            best = score
            best_channel = c
    return best, best_channel


def select_keyframes(
    clip: FeatureStream,
    k_max: int = 5,
    threshold: float = 0.8,
    stage2_threshold: float | None = None,
) -> KeyframeSet:
    """Pick 2..k_max keyframes from a clip.

    ``threshold`` gates Stage 1 (endpoint motion must exceed it) and, unless
    ``stage2_threshold`` overrides it, also sets the Stage-2 plateau ratio:
    interior candidates are admitted best-first while their score stays at or
    above ratio * best, at least ceil(T / k_max) ticks away from every frame
    admitted so far.  Deterministic: ties prefer the earlier frame and the
    channel-order-first channel.
    """
    if clip.T < 2:
        raise EmptySequence(f"clip has {clip.T} frame(s); need at least 2")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    ratio = threshold if stage2_threshold is None else stage2_threshold
    first, last = clip.frames[0], clip.frames[-1]

    # Stage 1: strongest endpoint-motion channel.
    best_dis = -1.0
    best_channel = None
    for c in sorted(first.available & last.available, key=_channel_sort_key):
        dis = _distance(first.vectors[c], last.vectors[c])
        if dis > best_dis:
            best_dis = dis
            best_channel = c
    endpoint_score = max(best_dis, 0.0)
    endpoints = (
        Keyframe(1, best_channel, endpoint_score, 1),
        Keyframe(clip.T, best_channel, endpoint_score, 1),
    )
    if best_channel is None or best_dis <= threshold:
        return KeyframeSet(endpoints, k_max, threshold, static=True)

    admitted: list[Keyframe] = list(endpoints)

    # Stage 2: interior frames far from both endpoints.
    budget = max(0, k_max - 3)
    if budget > 0 and clip.T > 2:
        gap = math.ceil(clip.T / k_max)
        candidates = []
        for n in range(2, clip.T):
            score, channel = _frame_score(clip.frames[n - 1], first, last)
            if channel is not None:
                candidates.append((score, n, channel))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        if candidates:
            top = candidates[0][0]
            taken = 0
            for score, n, channel in candidates:
                if taken == budget:
                    break
                if score <= 0.0 or score < ratio * top:
                    break
                if min(abs(n - kf.frame_index) for kf in admitted) < gap:
                    continue
                admitted.append(Keyframe(n, channel, score, 2))
                taken += 1

    # Stage 3: motion peak between the second and second-to-last keyframes.
    admitted.sort(key=lambda kf: kf.frame_index)
    if len(admitted) < k_max:
        ticks = [kf.frame_index for kf in admitted]
        lo, hi = sorted((ticks[1], ticks[-2]))
        ref_a = clip.frames[lo - 1]
        ref_b = clip.frames[hi - 1]
        used = set(ticks)
        best = (0.0, None, None)
        for n in range(lo + 1, hi):
            if n in used:
                continue
            score, channel = _frame_score(clip.frames[n - 1], ref_a, ref_b)
            if channel is not None and score > best[0]:
                best = (score, n, channel)
        if best[1] is not None:
            admitted.append(Keyframe(best[1], best[2], best[0], 3))
            admitted.sort(key=lambda kf: kf.frame_index)

    return KeyframeSet(tuple(admitted), k_max, threshold, static=False)


def keyframes_to_pseudo_pose_stream(
    clip: FeatureStream, keyframes: KeyframeSet
) -> FeatureStream:
    """Re-tick the selected frames 1..K, keeping every channel they carry."""
    frames = []
    for k, kf in enumerate(keyframes):
        src = clip.frames[kf.frame_index - 1]
        frames.append(FeatureFrame(k + 1, dict(src.vectors), src.available))
    return FeatureStream(tuple(frames), clip.F)
