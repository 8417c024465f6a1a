"""Domain types for pose-state sequences: labels, states, segments, durations.

Everything downstream (decoding, learning, summarization) is built on the
vocabulary defined here.  Time is measured in 1-based integer ticks; a
*segment* is a maximal run of one hidden state, written (b, d, y) for start
tick, duration, and state.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSelfLoop,
    DurationOutOfRange,
    EmptySequence,
    MalformedSegmentation,
)


class PoseLabel(Enum):
    """Decubitus pose vocabulary: ten canonical poses plus catch-alls.

    ``OTHER`` covers sitting, leaning, and out-of-bed activity; ``ASPIRATION``
    is only observed on real recordings and never simulated.
    """

    SOLDIER_UP = "solU"
    FETAL_RIGHT = "fetR"
    FETAL_LEFT = "fetL"
    LOG_RIGHT = "logR"
    SOLDIER_DOWN = "solD"
    YEARNER_LEFT = "yeaL"
    LOG_LEFT = "logL"
    FALLER_DOWN = "falD"
    FALLER_UP = "falU"
    YEARNER_RIGHT = "yeaR"
    OTHER = "other"
    ASPIRATION = "aspiration"

    @property
    def display_symbol(self) -> int:
        """Signed display symbol; sign encodes side/direction of the pose."""
        return _POSE_SYMBOLS[self]

    @classmethod
    def from_symbol(cls, symbol: int) -> "PoseLabel":
        return _SYMBOL_TO_POSE[symbol]

    def __str__(self) -> str:
        return self.value


_POSE_SYMBOLS = {
    PoseLabel.ASPIRATION: 0,
    PoseLabel.SOLDIER_UP: 1,
    PoseLabel.SOLDIER_DOWN: -1,
    PoseLabel.YEARNER_RIGHT: 2,
    PoseLabel.YEARNER_LEFT: -2,
    PoseLabel.LOG_RIGHT: 3,
    PoseLabel.LOG_LEFT: -3,
    PoseLabel.FALLER_UP: 4,
    PoseLabel.FALLER_DOWN: -4,
    PoseLabel.OTHER: 5,
    PoseLabel.FETAL_RIGHT: 6,
    PoseLabel.FETAL_LEFT: -6,
}
_SYMBOL_TO_POSE = {v: k for k, v in _POSE_SYMBOLS.items()}

#: The ten poses that participate in transition protocols.
CANONICAL_POSES = (
    PoseLabel.SOLDIER_UP,
    PoseLabel.FETAL_RIGHT,
    PoseLabel.FETAL_LEFT,
    PoseLabel.LOG_RIGHT,
    PoseLabel.SOLDIER_DOWN,
    PoseLabel.YEARNER_LEFT,
    PoseLabel.LOG_LEFT,
    PoseLabel.FALLER_DOWN,
    PoseLabel.FALLER_UP,
    PoseLabel.YEARNER_RIGHT,
)

#: Default state vocabulary for simulated bedside scenes.
MOCK_ICU_POSES = CANONICAL_POSES + (PoseLabel.OTHER,)


class SceneCondition(Enum):
    """Scene regime: bright-and-clear vs dark-or-occluded."""

    BC = "BC"
    DO = "DO"

    def __str__(self) -> str:
        return self.value


class RotationDirection(Enum):
    """Which way the patient rolls between two held poses."""

    LEFT = "left"
    RIGHT = "right"

    def __str__(self) -> str:
        return self.value


# Clinically informed start-of-sequence pose frequencies per scene regime.
# The raw column pair sums to 1.049; consumers renormalize (see
# build_initial_distribution), keeping the published numbers recognizable.
INITIAL_POSE_PRIORS: dict[PoseLabel, dict[SceneCondition, float]] = {
    PoseLabel.SOLDIER_UP: {SceneCondition.BC: 0.03, SceneCondition.DO: 0.02},
    PoseLabel.FETAL_RIGHT: {SceneCondition.BC: 0.145, SceneCondition.DO: 0.07},
    PoseLabel.FETAL_LEFT: {SceneCondition.BC: 0.145, SceneCondition.DO: 0.07},
    PoseLabel.LOG_RIGHT: {SceneCondition.BC: 0.05, SceneCondition.DO: 0.03},
    PoseLabel.SOLDIER_DOWN: {SceneCondition.BC: 0.02, SceneCondition.DO: 0.01},
    PoseLabel.YEARNER_LEFT: {SceneCondition.BC: 0.04, SceneCondition.DO: 0.02},
    PoseLabel.LOG_LEFT: {SceneCondition.BC: 0.05, SceneCondition.DO: 0.03},
    PoseLabel.FALLER_DOWN: {SceneCondition.BC: 0.05, SceneCondition.DO: 0.02},
    PoseLabel.FALLER_UP: {SceneCondition.BC: 0.05, SceneCondition.DO: 0.03},
    PoseLabel.YEARNER_RIGHT: {SceneCondition.BC: 0.04, SceneCondition.DO: 0.02},
    PoseLabel.OTHER: {SceneCondition.BC: 0.036, SceneCondition.DO: 0.073},
}


@dataclass(frozen=True)
class StateId:
    """One hidden state: a pose, optionally bound to a scene regime.

    ``scene`` is None when the model is scene-agnostic.  ``index`` is the
    dense position of this state in its StateSpace, so StateId objects can be
    used directly wherever an integer state index is expected.
    """

    pose: PoseLabel
    scene: SceneCondition | None
    index: int

    def __index__(self) -> int:
        return self.index


@dataclass(frozen=True)
class StateSpace:
    """Ordered collection of StateIds with dense contiguous indices."""

    states: tuple[StateId, ...]

    def __post_init__(self):
        for i, s in enumerate(self.states):
            if s.index != i:
                raise ValueError(f"state {s} at position {i} has index {s.index}")

    @classmethod
    def from_poses(
        cls,
        poses: Sequence[PoseLabel],
        scene_doubling: bool = True,
    ) -> "StateSpace":
        """Build a space over ``poses``; doubling adds a BC block then a DO block."""
        states: list[StateId] = []
        if scene_doubling:
            for scene in (SceneCondition.BC, SceneCondition.DO):
                for pose in poses:
                    states.append(StateId(pose, scene, len(states)))
        else:
            for pose in poses:
                states.append(StateId(pose, None, len(states)))
        return cls(tuple(states))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def scene_doubled(self) -> bool:
        return any(s.scene is not None for s in self.states)

    def index_of(self, pose: PoseLabel, scene: SceneCondition | None = None) -> int:
        for s in self.states:
            if s.pose is pose and s.scene is scene:
                return s.index
        raise KeyError((pose, scene))

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i: int) -> StateId:
        return self.states[i]


def default_state_space(scene_doubling: bool = True) -> StateSpace:
    """The simulated-bedside default: 11 poses, 22 states when doubled."""
    return StateSpace.from_poses(MOCK_ICU_POSES, scene_doubling)


def build_initial_distribution(
    space: StateSpace | None = None,
    scene_doubling: bool = True,
) -> np.ndarray:
    """Initial state probabilities from the published per-scene priors.

    With scene doubling each (pose, scene) cell keeps its own raw value;
    without doubling the two scene columns are summed per pose.  Either way
    the raw values are renormalized, and the rounding residual is folded into
    the largest entry so the result sums to 1.0 exactly.  Poses missing from
    the prior table (only ASPIRATION) get probability zero.
    """
    if space is None:
        space = default_state_space(scene_doubling)
    raw = np.zeros(len(space))
    for s in space:
        prior = INITIAL_POSE_PRIORS.get(s.pose)
        if prior is None:
            continue
        if s.scene is None:
            raw[s.index] = prior[SceneCondition.BC] + prior[SceneCondition.DO]
        else:
            raw[s.index] = prior[s.scene]
    total = raw.sum()
    if total <= 0.0:
        raise ValueError("state space has no pose with a nonzero prior")
    pi = raw / total
    pi[np.argmax(pi)] += 1.0 - pi.sum()
    return pi


# =====================================================================
# Segments
# =====================================================================


@dataclass(frozen=True)
class Segment:
    """Maximal run of one state: starts at tick b, lasts d ticks, state y.

    ``y`` may be a plain integer index or a StateId; both support
    ``operator.index`` so numeric code treats them interchangeably.
    """

    b: int
    d: int
    y: object

    @property
    def end(self) -> int:
        """Last tick covered, inclusive."""
        return self.b + self.d - 1

    @property
    def y_index(self) -> int:
        return operator.index(self.y)


@dataclass(frozen=True)
class Segmentation:
    """A gapless, non-overlapping cover of ticks 1..T by maximal runs."""

    segments: tuple[Segment, ...]
    T: int

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        segs = self.segments
        if not segs:
            raise MalformedSegmentation("segmentation has no segments")
        if segs[0].b != 1:
            raise MalformedSegmentation(f"first segment starts at {segs[0].b}, not 1")
        for u, seg in enumerate(segs):
            if seg.d < 1:
                raise MalformedSegmentation(f"segment {u} has duration {seg.d}")
            if u > 0:
                prev = segs[u - 1]
                if seg.b != prev.b + prev.d:
                    raise MalformedSegmentation(
                        f"segment {u} starts at {seg.b}, expected {prev.b + prev.d}"
                    )
                if seg.y_index == prev.y_index:
                    raise MalformedSegmentation(
                        f"segments {u - 1} and {u} share state {seg.y}; runs must be maximal"
                    )
        if segs[-1].end != self.T:
            raise MalformedSegmentation(
                f"segments cover ticks 1..{segs[-1].end} but T={self.T}"
            )

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)


def encode_segments(labels: Sequence) -> Segmentation:
    """Run-length encode a per-tick label sequence into maximal segments."""
    if len(labels) == 0:
        raise EmptySequence("cannot encode an empty label sequence")
    segs: list[Segment] = []
    start = 1
    cur = labels[0]
    for t in range(1, len(labels)):
        if labels[t] != cur:
            segs.append(Segment(start, t - start + 1, cur))
            start = t + 1
            cur = labels[t]
    segs.append(Segment(start, len(labels) - start + 1, cur))
    return Segmentation(tuple(segs), len(labels))


def decode_segments(segmentation: Segmentation) -> list:
    """Expand segments back to one label per tick (inverse of encode)."""
    labels = []
    for seg in segmentation:
        labels.extend([seg.y] * seg.d)
    return labels


# =====================================================================
# Duration models
# =====================================================================


def geometric_duration_pmf(self_loop: float, d: int) -> float:
    """Dwell-time pmf implied by a self-transition probability.

    P(d) = a^(d-1) * (1-a): the chance of d-1 self-loops followed by an exit.
    """
    if not 0.0 <= self_loop < 1.0:
        raise DegenerateSelfLoop(f"self-loop probability {self_loop} not in [0, 1)")
    if d < 1:
        raise DurationOutOfRange(f"duration {d} < 1")
    return self_loop ** (d - 1) * (1.0 - self_loop)


@dataclass
class DurationModel:
    """Per-state dwell-time distributions: Gaussians discretized on 1..d_max.

    The density is evaluated at integer ticks and renormalized over
    [1, d_max], which keeps the pmf well defined even for means near the
    boundary.  Treat instances as immutable; tables are cached lazily.
    """

    mean: np.ndarray
    std: np.ndarray
    d_max: int
    _pmf: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-d arrays of equal length")
        if np.any(self.std <= 0.0):
            raise ValueError("duration std must be positive")
        if self.d_max < 1:
            raise DurationOutOfRange(f"d_max {self.d_max} < 1")

    @property
    def n_states(self) -> int:
        return self.mean.shape[0]

    def pmf_table(self) -> np.ndarray:
        """(Q, d_max) table; rows sum to 1.  Stable for tiny std."""
        if self._pmf is None:
            d = np.arange(1, self.d_max + 1, dtype=float)
            z = -((d[None, :] - self.mean[:, None]) ** 2) / (2.0 * self.std[:, None] ** 2)
            z -= z.max(axis=1, keepdims=True)
            w = np.exp(z)
            self._pmf = w / w.sum(axis=1, keepdims=True)
        return self._pmf

    def log_pmf_table(self) -> np.ndarray:
        """(Q, d_max + 1) log table indexable by duration; column 0 is -inf."""
        table = np.full((self.n_states, self.d_max + 1), -np.inf)
        pmf = self.pmf_table()
        with np.errstate(divide="ignore"):
            table[:, 1:] = np.log(pmf)
        return table


def gaussian_duration_pmf(model: DurationModel, state: int, d: int) -> float:
    """Probability of staying exactly d ticks in ``state``."""
    if not 1 <= d <= model.d_max:
        raise DurationOutOfRange(f"duration {d} outside [1, {model.d_max}]")
    return float(model.pmf_table()[operator.index(state), d - 1])


@dataclass
class GeometricDurationModel:
    """Per-state geometric dwell times, for comparing against self-loop chains.

    ``truncated=False`` keeps the raw closed-form values on 1..d_max (mass
    beyond d_max is simply dropped), which is the variant that matches a
    self-loop Markov chain term for term.
    """

    self_loop: np.ndarray
    d_max: int
    truncated: bool = True
    _pmf: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.self_loop = np.asarray(self.self_loop, dtype=float)
        if np.any((self.self_loop < 0.0) | (self.self_loop >= 1.0)):
            raise DegenerateSelfLoop("self-loop probabilities must lie in [0, 1)")
        if self.d_max < 1:
            raise DurationOutOfRange(f"d_max {self.d_max} < 1")

    @property
    def n_states(self) -> int:
        return self.self_loop.shape[0]

    def pmf_table(self) -> np.ndarray:
        if self._pmf is None:
            d = np.arange(1, self.d_max + 1, dtype=float)
            a = self.self_loop[:, None]
            w = a ** (d[None, :] - 1.0) * (1.0 - a)
            if self.truncated:
                w = w / w.sum(axis=1, keepdims=True)
            self._pmf = w
        return self._pmf

    def log_pmf_table(self) -> np.ndarray:
        table = np.full((self.n_states, self.d_max + 1), -np.inf)
        with np.errstate(divide="ignore"):
            table[:, 1:] = np.log(self.pmf_table())
        return table
