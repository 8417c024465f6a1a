"""Synthetic bedside scenes: pose-sequence streams and transition clips.

Every pose gets a per-channel mean template drawn once from a model seed.
For pose-sequence streams the emitted features are the binarized template
bits with symmetric flip noise; the dark-or-occluded regime additionally
shrinks values toward 0.5 (contrast loss) and drops channels at random.
Transition clips instead interpolate real-valued means through a short chain
of planted pseudo-pose anchors, so the motion path is smooth and the planted
anchor ticks are recoverable by keyframe selection at zero noise.

Two named presets fix the regime constants: ``bc-sim`` (flip noise 0.05, no
dropout) and ``do-sim`` (flip noise 0.18, channel dropout 0.45, halved
contrast).  Everything is reproducible from the two seeds in the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .emission import ChannelEmissionModel, ChannelId, FeatureStream, Modality, View
from .errors import PoseHsmmError
from .inference import HsmmModel
from .states import (
    CANONICAL_POSES,
    INITIAL_POSE_PRIORS,
    MOCK_ICU_POSES,
    DurationModel,
    PoseLabel,
    RotationDirection,
    SceneCondition,
    Segmentation,
    StateSpace,
    encode_segments,
)

#: Per-regime feature corruption constants.
REGIME_NOISE = {SceneCondition.BC: 0.05, SceneCondition.DO: 0.18}
REGIME_DROPOUT = {SceneCondition.BC: 0.0, SceneCondition.DO: 0.45}

#: Dark-or-occluded contrast: features shrink toward 0.5 by this factor.
DO_CONTRAST = 0.5

#: Cross-scene transition mass used when a scene switch is enabled.
SCENE_SWITCH_MASS = 0.02

DEFAULT_CHANNELS = (
    ChannelId(View.LEFT, Modality.RGB),
    ChannelId(View.CENTER, Modality.DEPTH),
    ChannelId(View.RIGHT, Modality.MASK),
)


def _per_scene(value) -> dict[SceneCondition, float]:
    if isinstance(value, Mapping):
        return {s: float(value[s]) for s in SceneCondition}
    return {s: float(value) for s in SceneCondition}


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one synthetic scenario.

    ``seed`` drives the sampled trajectory and noise; ``model_seed`` drives
    the pose templates and generating parameters, so several trajectories can
    share one underlying scene.  ``noise``/``dropout`` may be single floats
    (applied to both regimes) or per-scene maps.
    """

    poses: tuple[PoseLabel, ...] = MOCK_ICU_POSES
    scene_doubling: bool = True
    base_scene: SceneCondition = SceneCondition.BC
    scene_switch: bool = False
    F: int = 6
    channels: tuple[ChannelId, ...] = DEFAULT_CHANNELS
    duration_mean: float | Sequence[float] = 12.0
    duration_std: float | Sequence[float] = 3.0
    d_max: int | None = None
    t_target: int = 400
    noise: Mapping[SceneCondition, float] | float = field(
        default_factory=lambda: dict(REGIME_NOISE)
    )
    dropout: Mapping[SceneCondition, float] | float = field(
        default_factory=lambda: dict(REGIME_DROPOUT)
    )
    transition_hold: int = 6
    transition_ramp: int = 6
    seed: int = 0
    model_seed: int = 7151

    def __post_init__(self):
        self.poses = tuple(self.poses)
        self.channels = tuple(self.channels)
        self.noise = _per_scene(self.noise)
        self.dropout = _per_scene(self.dropout)

    @property
    def n_poses(self) -> int:
        return len(self.poses)

    def duration_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(
            np.asarray(self.duration_mean, dtype=float), (self.n_poses,)
        ).copy()
        std = np.broadcast_to(
            np.asarray(self.duration_std, dtype=float), (self.n_poses,)
        ).copy()
        return mean, std

    def resolved_d_max(self) -> int:
        if self.d_max is not None:
            return self.d_max
        mean, _ = self.duration_arrays()
        return max(2, math.ceil(3.0 * float(mean.max())))


PRESETS = {
    "bc-sim": {"base_scene": SceneCondition.BC},
    "do-sim": {"base_scene": SceneCondition.DO},
}


def preset_config(name: str, **overrides) -> ScenarioConfig:
    """Build a ScenarioConfig for one of the named presets."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[name])
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)


@dataclass(frozen=True)
class TransitionInfo:
    """Planted truth for one transition clip."""

    from_pose: PoseLabel
    to_pose: PoseLabel
    direction: RotationDirection
    anchor_ticks: tuple[int, ...]
    n_pseudo: int


@dataclass
class GroundTruth:
    """Planted state structure behind one emitted stream."""

    segmentation: Segmentation
    scene_track: tuple[SceneCondition, ...]
    generating_model: HsmmModel
    transition: TransitionInfo | None = None


# =====================================================================
# Generating model
# =====================================================================


def _pose_templates(config: ScenarioConfig) -> np.ndarray:
    """(P, C, F) real-valued mean templates, deterministic in model_seed."""
    rng = np.random.default_rng(np.random.SeedSequence(config.model_seed))
    return rng.random((config.n_poses, len(config.channels), config.F))

def _pose_transition_matrix(config: ScenarioConfig) -> np.ndarray:
    """Random zero-diagonal pose transition rows, deterministic in model_seed."""
    rng = np.random.default_rng(np.random.SeedSequence((config.model_seed, 1)))
    p = config.n_poses
    if p == 1:
        return np.zeros((1, 1))
    A = np.zeros((p, p))
    for i in range(p):
        row = rng.dirichlet(np.ones(p - 1))
        A[i, :i] = row[:i]
        A[i, i + 1 :] = row[i:]
    return A


def _effective_state_means(
    config: ScenarioConfig, templates: np.ndarray, space: StateSpace
) -> np.ndarray:
    """(Q, C, F) expected feature values per state, after noise and contrast.

    These are the true Bernoulli parameters of the emitted features, which is
    what the generating model should carry for reference decoding.
    """
    bits = (templates >= 0.5).astype(float)
    out = np.zeros((len(space), templates.shape[1], templates.shape[2]))
    pose_index = {pose: k for k, pose in enumerate(config.poses)}
    for s in space:
        scene = s.scene if s.scene is not None else config.base_scene
        nu = config.noise[scene]
        eff = nu + bits[pose_index[s.pose]] * (1.0 - 2.0 * nu)
        if scene is SceneCondition.DO:
            eff = 0.5 + (eff - 0.5) * DO_CONTRAST
        out[s.index] = eff
    return out


def build_generating_model(config: ScenarioConfig) -> tuple[HsmmModel, StateSpace]:
    """The reference model whose joint law the simulator samples from.

    Emission means are the effective (post-noise, post-contrast) feature
    expectations.  With scene doubling the pose transition rows are copied
    into per-scene blocks; cross-scene mass is nonzero only when the config
    enables a scene switch, and then allows same-pose regime flips.
    """
    space = StateSpace.from_poses(config.poses, config.scene_doubling)
    templates = _pose_templates(config)
    A_pose = _pose_transition_matrix(config)
    p = config.n_poses

    if config.scene_doubling:
        w = SCENE_SWITCH_MASS if config.scene_switch else 0.0
        cross = 0.5 * np.eye(p) + 0.5 * A_pose
        A = np.zeros((2 * p, 2 * p))
        A[:p, :p] = (1.0 - w) * A_pose
        A[p:, p:] = (1.0 - w) * A_pose
        A[:p, p:] = w * cross
        A[p:, :p] = w * cross
        if p == 1 and w > 0.0:
            # single pose: all mass must cross scenes
            A[:] = 0.0
            A[0, 1] = 1.0
            A[1, 0] = 1.0
    else:
        A = A_pose

    mean, std = config.duration_arrays()
    reps = 2 if config.scene_doubling else 1
    durations = DurationModel(
        np.tile(mean, reps), np.tile(std, reps), config.resolved_d_max()
    )

    means = _effective_state_means(config, templates, space)
    emissions = {
        c: ChannelEmissionModel(c, means[:, k, :])
        for k, c in enumerate(config.channels)
    }

    raw = np.array(
        [
            INITIAL_POSE_PRIORS.get(s.pose, {}).get(
                s.scene if s.scene is not None else SceneCondition.BC, 0.0
            )
            + (
                INITIAL_POSE_PRIORS.get(s.pose, {}).get(SceneCondition.DO, 0.0)
                if s.scene is None
                else 0.0
            )
            for s in space
        ]
    )
    pi = raw / raw.sum()
    pi[np.argmax(pi)] += 1.0 - pi.sum()

    return HsmmModel(pi, A, durations, emissions, space), space


# =====================================================================
# Pose-sequence sampling
# =====================================================================


def _sample_pose_segments(
    config: ScenarioConfig, rng: np.random.Generator
) -> list[tuple[PoseLabel, int]]:
    """Sample (pose, duration) runs until t_target ticks are covered."""
    mean, std = config.duration_arrays()
    pmf = DurationModel(mean, std, config.resolved_d_max()).pmf_table()
    A_pose = _pose_transition_matrix(config)
    start_raw = np.array(
        [INITIAL_POSE_PRIORS.get(p, {}).get(config.base_scene, 0.0) for p in config.poses]
    )
    if start_raw.sum() <= 0.0:
        start_raw = np.ones(config.n_poses)
    start = start_raw / start_raw.sum()

    runs: list[tuple[PoseLabel, int]] = []
    total = 0
    pose_idx = int(rng.choice(config.n_poses, p=start))
    while total < config.t_target:
        d = int(rng.choice(pmf.shape[1], p=pmf[pose_idx])) + 1
        d = min(d, config.t_target - total)
        runs.append((config.poses[pose_idx], d))
        total += d
        if total < config.t_target and config.n_poses > 1:
            pose_idx = int(rng.choice(config.n_poses, p=A_pose[pose_idx]))
    return runs


def _scene_track(
    config: ScenarioConfig, rng: np.random.Generator, T: int
) -> list[SceneCondition]:
    track = [config.base_scene] * T
    if config.scene_switch and T >= 4:
        other = (
            SceneCondition.DO
            if config.base_scene is SceneCondition.BC
            else SceneCondition.BC
        )
        switch = int(rng.integers(T // 4, 3 * T // 4 + 1))
        for t in range(switch, T):
            track[t] = other
    return track


def sample_sequence(config: ScenarioConfig) -> tuple[FeatureStream, GroundTruth]:
    """Emit one pose-sequence stream plus its planted truth.

    Per tick and channel: take the pose template bits, flip each with the
    scene's noise probability, shrink toward 0.5 under DO contrast, and drop
    the whole channel with the scene's dropout probability.  At zero noise
    the features equal the rounded templates and, as std shrinks, durations
    concentrate on the rounded mean.
    """
    model, space = build_generating_model(config)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))
    runs = _sample_pose_segments(config, rng)
    T = sum(d for _, d in runs)
    scene_track = _scene_track(config, rng, T)

    pose_per_tick: list[PoseLabel] = []
    for pose, d in runs:
        pose_per_tick.extend([pose] * d)

    pose_index = {pose: k for k, pose in enumerate(config.poses)}
    if config.scene_doubling:
        labels = [
            space.index_of(pose_per_tick[t], scene_track[t]) for t in range(T)
        ]
    else:
        labels = [space.index_of(pose_per_tick[t], None) for t in range(T)]

    templates = _pose_templates(config)
    bits = (templates >= 0.5).astype(float)
    n_channels = len(config.channels)
    noise_t = np.array([config.noise[s] for s in scene_track])
    dropout_t = np.array([config.dropout[s] for s in scene_track])
    do_mask = np.array([s is SceneCondition.DO for s in scene_track])

    pose_rows = np.array([pose_index[p] for p in pose_per_tick])
    base = bits[pose_rows]  # (T, C, F)
    flips = rng.random((T, n_channels, config.F)) < noise_t[:, None, None]
    x = np.abs(base - flips.astype(float))
    x[do_mask] = 0.5 + (x[do_mask] - 0.5) * DO_CONTRAST
    avail = rng.random((T, n_channels)) >= dropout_t[:, None]

    vectors = {c: x[:, k, :] for k, c in enumerate(config.channels)}
    masks = {c: avail[:, k] for k, c in enumerate(config.channels)}
    stream = FeatureStream.from_arrays(vectors, masks)

    truth = GroundTruth(
        segmentation=encode_segments(labels),
        scene_track=tuple(scene_track),
        generating_model=model,
    )
    return stream, truth


# =====================================================================
# Transition clips
# =====================================================================

#: Interpolation weights and perturbation magnitudes of the three planted
#: pseudo-pose anchors along a transition.  The middle anchor swings hardest
#: so the motion peak sits at its tick; the outer anchors still swing enough
#: to carry direction information of their own.
ANCHOR_WEIGHTS = (0.25, 0.5, 0.75)
ANCHOR_MAGNITUDES = (0.5, 0.7, 0.5)


def _transition_anchors(
    config: ScenarioConfig,
    templates: np.ndarray,
    from_pose: PoseLabel,
    to_pose: PoseLabel,
    direction: RotationDirection,
) -> np.ndarray:
    """(3, C, F) planted intermediate means for one (from, to, direction).

    Left and right rotations between the same pose pair share their hold
    templates and differ only in these intermediates.
    """
    pose_index = {pose: k for k, pose in enumerate(config.poses)}
    i, j = pose_index[from_pose], pose_index[to_pose]
    dir_idx = 0 if direction is RotationDirection.LEFT else 1
    rng = np.random.default_rng(
        np.random.SeedSequence((config.model_seed, 3, i, j, dir_idx))
    )
    mu_from, mu_to = templates[i], templates[j]
    anchors = np.zeros((3, templates.shape[1], config.F))
    for k, (w, mag) in enumerate(zip(ANCHOR_WEIGHTS, ANCHOR_MAGNITUDES)):
        base = (1.0 - w) * mu_from + w * mu_to
        u = rng.standard_normal((templates.shape[1], config.F))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        anchors[k] = np.clip(base + mag * math.sqrt(config.F) * u, 0.0, 1.0)
    return anchors


def transition_protocol(
    poses: Sequence[PoseLabel] = CANONICAL_POSES,
) -> list[tuple[PoseLabel, PoseLabel, RotationDirection]]:
    """The full protocol: every ordered pose pair (self-pairs included, i.e.
    roll-away-and-back) in both rotation directions."""
    combos = []
    for a in poses:
        for b in poses:
            for direction in RotationDirection:
                combos.append((a, b, direction))
    return combos


def sample_transition_clip(
    from_pose: PoseLabel,
    to_pose: PoseLabel,
    direction: RotationDirection,
    config: ScenarioConfig,
) -> tuple[FeatureStream, GroundTruth]:
    """Emit one transition clip: hold, three-anchor ramp, hold.

    The mean path interpolates linearly between hold template and anchors;
    features are the path values with symmetric flips (x -> 1-x) at the
    scene's noise rate, then DO contrast and dropout as usual.  Self-pairs
    are allowed and represent a roll away and back.
    """
    if from_pose not in config.poses or to_pose not in config.poses:
        raise PoseHsmmError("transition endpoints must be poses of the scenario")
    model, space = build_generating_model(config)
    templates = _pose_templates(config)
    anchors = _transition_anchors(config, templates, from_pose, to_pose, direction)
    pose_index = {pose: k for k, pose in enumerate(config.poses)}

    h = config.transition_hold
    g = config.transition_ramp
    waypoints = [
        templates[pose_index[from_pose]],
        anchors[0],
        anchors[1],
        anchors[2],
        templates[pose_index[to_pose]],
    ]
    path = [waypoints[0]] * h
    for k in range(4):
        for step in range(1, g + 1):
            a = step / g
            path.append((1.0 - a) * waypoints[k] + a * waypoints[k + 1])
    path.extend([waypoints[4]] * (h - 1))
    means = np.stack(path)  # (T, C, F)
    T = means.shape[0]
    anchor_ticks = (h + g, h + 2 * g, h + 3 * g)

    scene = config.base_scene
    nu = config.noise[scene]
    drop = config.dropout[scene]
    rng = np.random.default_rng(
        np.random.SeedSequence(
            (config.seed, 4, pose_index[from_pose], pose_index[to_pose],
             0 if direction is RotationDirection.LEFT else 1)
        )
    )
    flips = rng.random(means.shape) < nu
    x = np.where(flips, 1.0 - means, means)
    if scene is SceneCondition.DO:
        x = 0.5 + (x - 0.5) * DO_CONTRAST
    avail = rng.random((T, len(config.channels))) >= drop
    # endpoints always observable so keyframe selection has a shared channel
    avail[0, :] = True
    avail[-1, :] = True

    vectors = {c: x[:, k, :] for k, c in enumerate(config.channels)}
    masks = {c: avail[:, k] for k, c in enumerate(config.channels)}
    stream = FeatureStream.from_arrays(vectors, masks)

    mid = anchor_ticks[1]
    scene_value = scene if config.scene_doubling else None
    from_state = space.index_of(from_pose, scene_value)
    to_state = space.index_of(to_pose, scene_value)
    labels = [from_state] * mid + [to_state] * (T - mid)
    truth = GroundTruth(
        segmentation=encode_segments(labels),
        scene_track=tuple([scene] * T),
        generating_model=model,
        transition=TransitionInfo(
            from_pose, to_pose, direction, anchor_ticks, len(anchors)
        ),
    )
    return stream, truth
