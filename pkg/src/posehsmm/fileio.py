"""Line-oriented text persistence for streams, models, and result records.

Every file starts with ``format: v1`` and a ``kind:`` line; unknown versions
are rejected.  Floats are written with 17 significant digits so values
round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emission import ChannelEmissionModel, ChannelId, FeatureStream
from .errors import FormatError
from .inference import HsmmModel
from .keyframes import KeyframeSet
from .states import (
    DurationModel,
    PoseLabel,
    RotationDirection,
    SceneCondition,
    Segment,
    Segmentation,
    StateId,
    StateSpace,
)
from .summarize import HistoryRecord, TransitionRecord

FORMAT_VERSION = "v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header(kind: str, fields: dict) -> list[str]:
    lines = [f"format: {FORMAT_VERSION}", f"kind: {kind}"]
    for key, value in fields.items():
        lines.append(f"{key}: {value}")
    return lines


class _Reader:
    """Header-checked line reader shared by all parsers."""

    def __init__(self, path, kind: str):
        text = Path(path).read_text()
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        self.pos = 0
        self.head: dict[str, str] = {}
        if not self.lines or self.lines[0] != f"format: {FORMAT_VERSION}":
            raise FormatError(f"{path}: missing or unsupported format header")
        if len(self.lines) < 2 or self.lines[1] != f"kind: {kind}":
            raise FormatError(f"{path}: expected kind: {kind}")
        self.pos = 2
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            key, sep, value = line.partition(": ")
            if not sep or " " in key:
                break
            self.head[key] = value
            self.pos += 1

    def records(self):
        for line in self.lines[self.pos :]:
            yield line.split()


def _scene_str(scene: SceneCondition | None) -> str:
    return scene.value if scene is not None else "-"


def _scene_parse(text: str) -> SceneCondition | None:
    return None if text == "-" else SceneCondition(text)


# =====================================================================
# Feature streams
# =====================================================================


def write_stream(stream: FeatureStream, path) -> None:
    channels = stream.channels
    lines = _header(
        "stream",
        {"T": stream.T, "F": stream.F, "channels": " ".join(str(c) for c in channels)},
    )
    for frame in stream.frames:
        mask = "".join("1" if c in frame.available else "0" for c in channels)
        values = []
        for c in channels:
            if c in frame.available:
                values.extend(_fmt(v) for v in frame.vectors[c])
        lines.append(f"tick {frame.t} {mask} " + " ".join(values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_stream(path) -> FeatureStream:
    r = _Reader(path, "stream")
    try:
        T = int(r.head["T"])
        F = int(r.head["F"])
        channels = [ChannelId.parse(c) for c in r.head["channels"].split()]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad stream header: {exc}") from exc
    vectors = {c: np.zeros((T, F)) for c in channels}
    masks = {c: np.zeros(T, dtype=bool) for c in channels}
    seen = 0
    for rec in r.records():
        if rec[0] != "tick":
            raise FormatError(f"{path}: unexpected record {rec[0]!r}")
        t = int(rec[1])
        mask = rec[2]
        values = [float(v) for v in rec[3:]]
        if len(mask) != len(channels) or len(values) != mask.count("1") * F:
            raise FormatError(f"{path}: malformed tick {t}")
        k = 0
        for c, bit in zip(channels, mask):
            if bit == "1":
                vectors[c][t - 1] = values[k : k + F]
                masks[c][t - 1] = True
                k += F
        seen += 1
    if seen != T:
        raise FormatError(f"{path}: {seen} ticks for T={T}")
    return FeatureStream.from_arrays(vectors, masks)


# =====================================================================
# Ground-truth sidecars
# =====================================================================


@dataclass
class TruthFile:
    """Planted truth as persisted: states, segments, scenes, transition."""

    space: StateSpace
    segmentation: Segmentation
    scene_track: tuple[SceneCondition, ...]
    transition: tuple[PoseLabel, PoseLabel, RotationDirection] | None = None

    @property
    def labels(self) -> list[int]:
        out: list[int] = []
        for seg in self.segmentation:
            out.extend([seg.y_index] * seg.d)
        return out


def write_truth(
    space: StateSpace,
    segmentation: Segmentation,
    scene_track,
    path,
    transition=None,
) -> None:
    lines = _header("truth", {"T": segmentation.T, "Q": len(space)})
    for s in space:
        lines.append(f"state {s.index} {s.pose.value} {_scene_str(s.scene)}")
    for seg in segmentation:
        lines.append(f"segment {seg.b} {seg.d} {seg.y_index}")
    start = 0
    while start < len(scene_track):
        end = start
        while end + 1 < len(scene_track) and scene_track[end + 1] is scene_track[start]:
            end += 1
        lines.append(f"scene {start + 1} {end - start + 1} {scene_track[start].value}")
        start = end + 1
    if transition is not None:
        lines.append(
            "transition "
            f"{transition.from_pose.value} {transition.to_pose.value} "
            f"{transition.direction.value}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_truth(path) -> TruthFile:
    r = _Reader(path, "truth")
    T = int(r.head["T"])
    states: list[StateId] = []
    segments: list[Segment] = []
    scenes: list[SceneCondition] = []
    transition = None
    for rec in r.records():
        if rec[0] == "state":
            states.append(
                StateId(PoseLabel(rec[2]), _scene_parse(rec[3]), int(rec[1]))
            )
        elif rec[0] == "segment":
            segments.append(Segment(int(rec[1]), int(rec[2]), int(rec[3])))
        elif rec[0] == "scene":
            scenes.extend([SceneCondition(rec[3])] * int(rec[2]))
        elif rec[0] == "transition":
            transition = (
                PoseLabel(rec[1]),
                PoseLabel(rec[2]),
                RotationDirection(rec[3]),
            )
        else:
            raise FormatError(f"{path}: unexpected record {rec[0]!r}")
    space = StateSpace(tuple(sorted(states, key=lambda s: s.index)))
    return TruthFile(space, Segmentation(tuple(segments), T), tuple(scenes), transition)


# =====================================================================
# Models
# =====================================================================


def write_model(model: HsmmModel, path) -> None:
    if not isinstance(model.durations, DurationModel):
        raise FormatError("only Gaussian-duration models are persisted")
    channels = sorted(model.emissions, key=str)
    F = model.emissions[channels[0]].F if channels else 0
    lines = _header(
        "model",
        {
            "Q": model.n_states,
            "F": F,
            "d_max": model.d_max,
            "channels": " ".join(str(c) for c in channels),
        },
    )
    if model.states is not None:
        for s in model.states:
            lines.append(f"state {s.index} {s.pose.value} {_scene_str(s.scene)}")
    lines.append("pi " + " ".join(_fmt(v) for v in model.pi))
    for i in range(model.n_states):
        lines.append(f"trans {i} " + " ".join(_fmt(v) for v in model.A[i]))
    for i in range(model.n_states):
        lines.append(
            f"dur {i} {_fmt(model.durations.mean[i])} {_fmt(model.durations.std[i])}"
        )
    for c in channels:
        means = model.emissions[c].means
        for i in range(model.n_states):
            lines.append(f"emit {c} {i} " + " ".join(_fmt(v) for v in means[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> HsmmModel:
    r = _Reader(path, "model")
    try:
        Q = int(r.head["Q"])
        F = int(r.head["F"])
        d_max = int(r.head["d_max"])
        channels = [ChannelId.parse(c) for c in r.head["channels"].split()]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad model header: {exc}") from exc
    states: list[StateId] = []
    pi = None
    A = np.zeros((Q, Q))
    mean = np.zeros(Q)
    std = np.ones(Q)
    means = {c: np.full((Q, F), 0.5) for c in channels}
    for rec in r.records():
        if rec[0] == "state":
            states.append(StateId(PoseLabel(rec[2]), _scene_parse(rec[3]), int(rec[1])))
        elif rec[0] == "pi":
            pi = np.array([float(v) for v in rec[1:]])
        elif rec[0] == "trans":
            A[int(rec[1])] = [float(v) for v in rec[2:]]
        elif rec[0] == "dur":
            mean[int(rec[1])] = float(rec[2])
            std[int(rec[1])] = float(rec[3])
        elif rec[0] == "emit":
            means[ChannelId.parse(rec[1])][int(rec[2])] = [float(v) for v in rec[3:]]
        else:
            raise FormatError(f"{path}: unexpected record {rec[0]!r}")
    if pi is None or len(pi) != Q:
        raise FormatError(f"{path}: missing or malformed pi")
    space = (
        StateSpace(tuple(sorted(states, key=lambda s: s.index))) if states else None
    )
    emissions = {c: ChannelEmissionModel(c, means[c]) for c in channels}
    return HsmmModel(pi, A, DurationModel(mean, std, d_max), emissions, space)


# =====================================================================
# Result records
# =====================================================================


def write_decoded(segmentation: Segmentation, log_prob: float, path, space=None) -> None:
    lines = _header("decoded", {"T": segmentation.T, "log_prob": _fmt(log_prob)})
    for seg in segmentation:
        if space is not None:
            s = space[seg.y_index]
            lines.append(
                f"segment {seg.b} {seg.d} {seg.y_index} {s.pose.value} {_scene_str(s.scene)}"
            )
        else:
            lines.append(f"segment {seg.b} {seg.d} {seg.y_index} - -")
    Path(path).write_text("\n".join(lines) + "\n")


def read_decoded(path) -> tuple[Segmentation, float]:
    r = _Reader(path, "decoded")
    T = int(r.head["T"])
    log_prob = float(r.head["log_prob"])
    segments = [
        Segment(int(rec[1]), int(rec[2]), int(rec[3]))
        for rec in r.records()
        if rec[0] == "segment"
    ]
    return Segmentation(tuple(segments), T), log_prob


def write_history(records, path, params: dict | None = None) -> None:
    lines = _header("history", params or {})
    for rec in records:
        lines.append(
            f"record {rec.window_start} {rec.window_len} "
            f"{rec.label.display_symbol} {rec.label.value} "
            f"{_scene_str(rec.scene)} {_fmt(rec.confidence)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_history_header(path) -> dict[str, str]:
    return dict(_Reader(path, "history").head)


def read_history(path) -> list[HistoryRecord]:
    r = _Reader(path, "history")
    records = []
    for rec in r.records():
        if rec[0] != "record":
            raise FormatError(f"{path}: unexpected record {rec[0]!r}")
        records.append(
            HistoryRecord(
                int(rec[1]),
                int(rec[2]),
                PoseLabel(rec[4]),
                _scene_parse(rec[5]),
                float(rec[6]),
            )
        )
    return records


def write_keyframes(kfs: KeyframeSet, path) -> None:
    lines = _header(
        "keyframes",
        {
            "k_max": kfs.k_max,
            "threshold": _fmt(kfs.threshold),
            "static": str(kfs.static).lower(),
        },
    )
    for kf in kfs:
        channel = str(kf.channel) if kf.channel is not None else "-"
        lines.append(f"keyframe {kf.frame_index} {channel} {_fmt(kf.score)} {kf.stage}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_transition(record: TransitionRecord, path) -> None:
    lines = _header("transition", {})
    lines.append(
        f"transition {record.from_pose.value} {record.to_pose.value} "
        f"{record.direction.value} {_fmt(record.log_prob)} {record.n_pseudo_poses}"
    )
    Path(path).write_text("\n".join(lines) + "\n")


def read_transitions(path) -> list[TransitionRecord]:
    r = _Reader(path, "transition")
    records = []
    for rec in r.records():
        if rec[0] != "transition":
            raise FormatError(f"{path}: unexpected record {rec[0]!r}")
        records.append(
            TransitionRecord(
                PoseLabel(rec[1]),
                PoseLabel(rec[2]),
                RotationDirection(rec[3]),
                float(rec[4]),
                int(rec[5]),
            )
        )
    return records
