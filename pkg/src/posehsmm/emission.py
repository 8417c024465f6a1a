"""Multimodal multiview observations and per-state Bernoulli emissions.

A recording exposes up to nine channels (three camera views times three
modalities).  Each channel delivers an F-dimensional feature vector per tick
with values in [0, 1]; channels drop in and out freely.  Emissions are
per-state Bernoulli means fused across available channels by summing log
likelihoods (conditional independence given the state), so a missing channel
is marginalized simply by omission.  Real-valued features are scored with the
same cross-entropy form, which is the natural generalization.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ChannelAbsent, EmptySequence, LabelMismatch, NoObservation

#: Clamp for fitted Bernoulli means; keeps log terms finite.
MEAN_CLAMP = 1e-6


class View(Enum):
    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"


class Modality(Enum):
    RGB = "RGB"
    DEPTH = "Depth"
    MASK = "Mask"


@dataclass(frozen=True, order=True)
class ChannelId:
    """One (camera view, modality) pair, e.g. the left-view depth stream."""

    view: View
    modality: Modality

    def __str__(self) -> str:
        return f"{self.view.value}:{self.modality.value}"

    @classmethod
    def parse(cls, text: str) -> "ChannelId":
        view, _, modality = text.partition(":")
        return cls(View(view), Modality(modality))


def _channel_sort_key(channel: ChannelId):
    return (channel.view.value, channel.modality.value)


@dataclass(frozen=True)
class FeatureFrame:
    """Observations at one tick: per-channel vectors plus availability flags."""

    t: int
    vectors: Mapping[ChannelId, np.ndarray]
    available: frozenset[ChannelId]

    def vector(self, channel: ChannelId) -> np.ndarray:
        return self.vectors[channel]


@dataclass(frozen=True)
class FeatureStream:
    """A fixed-rate sequence of frames with a common feature dimension F."""

    frames: tuple[FeatureFrame, ...]
    F: int

    def __post_init__(self):
        if not self.frames:
            raise EmptySequence("feature stream has no frames")
        for i, frame in enumerate(self.frames):
            if frame.t != i + 1:
                raise ValueError(f"frame {i} has tick {frame.t}, expected {i + 1}")
            for channel in frame.available:
                vec = frame.vectors.get(channel)
                if vec is None:
                    raise ValueError(f"tick {frame.t}: {channel} flagged but missing")
                if vec.shape != (self.F,):
                    raise ValueError(
                        f"tick {frame.t}: {channel} has shape {vec.shape}, expected ({self.F},)"
                    )

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def channels(self) -> list[ChannelId]:
        seen: set[ChannelId] = set()
        for frame in self.frames:
            seen.update(frame.available)
        return sorted(seen, key=_channel_sort_key)

    @classmethod
    def from_arrays(
        cls,
        vectors: Mapping[ChannelId, np.ndarray],
        available: Mapping[ChannelId, np.ndarray] | None = None,
    ) -> "FeatureStream":
        """Build a stream from (T, F) arrays, one per channel.

        ``available`` holds boolean masks of length T; omitted channels are
        treated as always available.
        """
        channels = sorted(vectors, key=_channel_sort_key)
        T, F = next(iter(vectors.values())).shape
        frames = []
        for t in range(T):
            vecs = {}
            avail = set()
            for c in channels:
                if available is None or bool(available[c][t]):
                    vecs[c] = np.asarray(vectors[c][t], dtype=float)
                    avail.add(c)
            frames.append(FeatureFrame(t + 1, vecs, frozenset(avail)))
        return cls(tuple(frames), F)


def binarize_stream(stream: FeatureStream, threshold: float = 0.5) -> FeatureStream:
    """Threshold every feature at ``threshold``; availability is untouched."""
    frames = []
    for frame in stream.frames:
        vecs = {
            c: (frame.vectors[c] >= threshold).astype(float) for c in frame.available
        }
        frames.append(FeatureFrame(frame.t, vecs, frame.available))
    return FeatureStream(tuple(frames), stream.F)


@dataclass
class ChannelEmissionModel:
    """Per-state Bernoulli means for a single channel: a (Q, F) matrix."""

    channel: ChannelId
    means: np.ndarray

    def __post_init__(self):
        self.means = np.clip(np.asarray(self.means, dtype=float), MEAN_CLAMP, 1.0 - MEAN_CLAMP)
        if self.means.ndim != 2:
            raise ValueError("means must be a (Q, F) matrix")

    @property
    def n_states(self) -> int:
        return self.means.shape[0]

    @property
    def F(self) -> int:
        return self.means.shape[1]


def fit_channel_emissions(
    stream: FeatureStream,
    labels: Sequence,
    channel: ChannelId,
    n_states: int,
) -> ChannelEmissionModel:
    """Maximum-likelihood Bernoulli means for one channel.

    mu[i] is the per-feature average of this channel's vectors over ticks
    labeled i; ticks where the channel is unavailable are excluded from both
    numerator and denominator.  States with no observation fall back to the
    uninformative 0.5 row.
    """
    if len(labels) != stream.T:
        raise LabelMismatch(f"{len(labels)} labels for {stream.T} frames")
    sums = np.zeros((n_states, stream.F))
    counts = np.zeros(n_states)
    seen = False
    for frame, label in zip(stream.frames, labels):
        if channel not in frame.available:
            continue
        seen = True
        i = operator.index(label)
        sums[i] += frame.vectors[channel]
        counts[i] += 1.0
    if not seen:
        raise ChannelAbsent(f"{channel} is never available in this stream")
    means = np.full((n_states, stream.F), 0.5)
    observed = counts > 0
    means[observed] = sums[observed] / counts[observed, None]
    return ChannelEmissionModel(channel, means)


def emission_log_likelihood(
    frame: FeatureFrame,
    state: int,
    models: Mapping[ChannelId, ChannelEmissionModel],
) -> float:
    """Fused log-likelihood of one frame under one state.

    Sums the Bernoulli cross-entropy over every channel that is both
    available and modeled, in a fixed channel order so the result is
    deterministic.  Raises NoObservation when nothing is scoreable.
    """
    i = operator.index(state)
    scoreable = sorted(
        (c for c in frame.available if c in models), key=_channel_sort_key
    )
    if not scoreable:
        raise NoObservation(f"tick {frame.t}: no available channel has a model")
    total = 0.0
    for c in scoreable:
        mu = models[c].means[i]
        x = frame.vectors[c]
        total += float(np.sum(x * np.log(mu) + (1.0 - x) * np.log1p(-mu)))
    return total


def log_emission_matrix(
    stream: FeatureStream,
    models: Mapping[ChannelId, ChannelEmissionModel],
    n_states: int,
) -> np.ndarray:
    """(T, Q) fused emission log-likelihoods for a whole stream.

    Frames with no scoreable channel contribute the flat surrogate
    F * log(1/2) to every state, so they never sway the decoder but keep
    scores finite.
    """
    E = np.zeros((stream.T, n_states))
    covered = np.zeros(stream.T, dtype=bool)
    for channel in sorted(models, key=_channel_sort_key):
        model = models[channel]
        rows = [
            t for t, frame in enumerate(stream.frames) if channel in frame.available
        ]
        if not rows:
            continue
        X = np.stack([stream.frames[t].vectors[channel] for t in rows])
        log_mu = np.log(model.means)
        log_1m = np.log1p(-model.means)
        E[rows] += X @ log_mu.T + (1.0 - X) @ log_1m.T
        covered[rows] = True
    E[~covered] = stream.F * np.log(0.5)
    return E
