"""Command-line front end.

Exit codes: 0 on success, 2 on usage errors (argparse's default), 3 when
decoding finds no feasible path or a clip shows no transition, 1 on other
domain errors (bad files, malformed inputs).

Presets can be adjusted without touching code: point POSEHSMM_CONFIG_DIR at a
directory containing ``<preset>.cfg`` files with ``key value`` lines.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .emission import (
    FeatureFrame,
    FeatureStream,
    binarize_stream,
    fit_channel_emissions,
)
from .errors import (
    FormatError,
    NoFeasiblePath,
    NoTransitionDetected,
    PoseHsmmError,
)
from .inference import HsmmModel, fit_durations, fit_transitions, hsmm_viterbi
from .keyframes import select_keyframes
from .simulate import (
    PRESETS,
    REGIME_DROPOUT,
    REGIME_NOISE,
    ScenarioConfig,
    preset_config,
    sample_sequence,
    sample_transition_clip,
)
from .states import (
    PoseLabel,
    RotationDirection,
    SceneCondition,
    build_initial_distribution,
)
from .summarize import (
    build_transition_library,
    classify_transition,
    history_from_labels,
    summarize_history,
    window_detection_rate,
)

_POSE_CHOICES = [p.value for p in PoseLabel]
_DIR_CHOICES = [d.value for d in RotationDirection]

_CFG_INT = {"t_target", "F", "d_max", "transition_hold", "transition_ramp", "seed", "model_seed"}
_CFG_FLOAT = {"duration_mean", "duration_std"}
_CFG_BOOL = {"scene_switch", "scene_doubling"}


def _preset_file_overrides(name: str) -> dict:
    """Read ``$POSEHSMM_CONFIG_DIR/<name>.cfg`` override lines, if present."""
    root = os.environ.get("POSEHSMM_CONFIG_DIR")
    if not root:
        return {}
    path = Path(root) / f"{name}.cfg"
    if not path.exists():
        return {}
    overrides: dict = {}
    noise = dict(REGIME_NOISE)
    dropout = dict(REGIME_DROPOUT)
    touched = {"noise": False, "dropout": False}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        # both "key value" and "key = value" are accepted
        if "=" in line:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
        else:
            key, _, value = line.partition(" ")
            value = value.strip()
        if not key or not value:
            raise FormatError(f"{path}:{lineno}: expected 'key value'")
        try:
            if key in _CFG_INT:
                overrides[key] = int(value)
            elif key in _CFG_FLOAT:
                overrides[key] = float(value)
            elif key in _CFG_BOOL:
                overrides[key] = value.lower() in {"1", "true", "yes"}
            elif key in {"noise", "dropout"}:
                target = noise if key == "noise" else dropout
                for s in SceneCondition:
                    target[s] = float(value)
                touched[key] = True
            elif key in {"noise.bc", "noise.do", "dropout.bc", "dropout.do"}:
                base, scene = key.split(".")
                target = noise if base == "noise" else dropout
                target[SceneCondition(scene.upper())] = float(value)
                touched[base] = True
            else:
                raise FormatError(f"{path}:{lineno}: unknown override {key!r}")
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: bad value {value!r} for {key!r}"
            ) from None
    if touched["noise"]:
        overrides["noise"] = noise
    if touched["dropout"]:
        overrides["dropout"] = dropout
    return overrides


def _scenario_from_args(args) -> ScenarioConfig:
    overrides = _preset_file_overrides(args.preset)
    for key in ("seed", "t_target", "d_max", "duration_mean", "duration_std"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.noise is not None:
        overrides["noise"] = args.noise
    if args.dropout is not None:
        overrides["dropout"] = args.dropout
    if args.scene_switch:
        overrides["scene_switch"] = True
    if getattr(args, "hold", None) is not None:
        overrides["transition_hold"] = args.hold
    if getattr(args, "ramp", None) is not None:
        overrides["transition_ramp"] = args.ramp
    return preset_config(args.preset, **overrides)


def _cmd_simulate(args) -> int:
    config = _scenario_from_args(args)
    if args.transition is not None:
        from_pose = PoseLabel(args.transition[0])
        to_pose = PoseLabel(args.transition[1])
        direction = RotationDirection(args.transition[2])
        stream, truth = sample_transition_clip(from_pose, to_pose, direction, config)
    else:
        stream, truth = sample_sequence(config)
    if args.binarize:
        stream = binarize_stream(stream)
    fileio.write_stream(stream, args.out)
    print(f"wrote {stream.T} ticks x {len(stream.channels)} channels to {args.out}")
    if args.truth_out:
        space = truth.generating_model.states
        info = truth.transition
        fileio.write_truth(
            space, truth.segmentation, truth.scene_track, args.truth_out,
            transition=info,
        )
        print(f"wrote truth sidecar to {args.truth_out}")
    return 0


def _concat_for_emissions(pairs):
    """Stack several (stream, labels) pairs into one stream for mean fitting.

    Emission fitting is order-free, so re-ticking the concatenation is safe;
    transitions and durations are still fit per sequence.
    """
    frames = []
    labels = []
    t = 1
    F = pairs[0][0].F
    for stream, labs in pairs:
        for frame in stream.frames:
            frames.append(FeatureFrame(t, frame.vectors, frame.available))
            t += 1
        labels.extend(labs)
    return FeatureStream(tuple(frames), F), labels


def _cmd_train(args) -> int:
    pairs = []
    for stream_path, truth_path in args.data:
        stream = fileio.read_stream(stream_path)
        truth = fileio.read_truth(truth_path)
        if args.binarize:
            stream = binarize_stream(stream)
        if stream.T != truth.segmentation.T:
            raise FormatError(
                f"{stream_path}: stream has T={stream.T} but truth covers "
                f"T={truth.segmentation.T}"
            )
        pairs.append((stream, truth))

    space = pairs[0][1].space
    for _, truth in pairs[1:]:
        if truth.space != space:
            raise FormatError("all truth sidecars must share one state table")
    n = len(space)

    label_lists = [truth.labels for _, truth in pairs]
    A = fit_transitions(label_lists, n, semi_markov=True)

    segmentations = [truth.segmentation for _, truth in pairs]
    if args.d_max is not None:
        d_max = args.d_max
    else:
        longest = max(max(seg.d for seg in s) for s in segmentations)
        d_max = min(3 * longest, max(s.T for s in segmentations))
    durations = fit_durations(segmentations, n, d_max)

    flat_stream, flat_labels = _concat_for_emissions(
        [(stream, truth.labels) for stream, truth in pairs]
    )
    emissions = {
        c: fit_channel_emissions(flat_stream, flat_labels, c, n)
        for c in flat_stream.channels
    }
    pi = build_initial_distribution(space)
    model = HsmmModel(pi, A, durations, emissions, space)
    fileio.write_model(model, args.out)
    print(f"trained {n}-state model on {len(pairs)} sequence(s); wrote {args.out}")
    return 0


def _load_pair(args):
    model = fileio.read_model(args.model)
    stream = fileio.read_stream(args.stream)
    if args.binarize:
        stream = binarize_stream(stream)
    return model, stream


def _cmd_decode(args) -> int:
    model, stream = _load_pair(args)
    result = hsmm_viterbi(stream, model)
    print(f"log_prob {format(result.log_prob, '.17g')}")
    for seg in result.segmentation:
        if model.states is not None:
            s = model.states[seg.y_index]
            scene = s.scene.value if s.scene is not None else "-"
            print(f"segment {seg.b} {seg.d} {s.pose.value} {scene}")
        else:
            print(f"segment {seg.b} {seg.d} state{seg.y_index}")
    if args.out:
        fileio.write_decoded(result.segmentation, result.log_prob, args.out, model.states)
    return 0


def _cmd_summarize(args) -> int:
    model, stream = _load_pair(args)
    records = summarize_history(
        stream, model, args.sample_every, args.window, args.consistency
    )
    s = args.tick_seconds
    for rec in records:
        t0 = (rec.window_start - 1) * s
        t1 = (rec.window_start - 1 + rec.window_len) * s
        scene = rec.scene.value if rec.scene is not None else "-"
        print(
            f"[{t0:8.1f}s, {t1:8.1f}s)  {rec.label.display_symbol:>3}  "
            f"{rec.label.value:<10}  {scene:<2}  {rec.confidence:.2f}"
        )
    if args.out:
        fileio.write_history(
            records,
            args.out,
            {
                "sample_every": args.sample_every,
                "window": args.window,
                "consistency": format(args.consistency, ".17g"),
                "tick_seconds": format(args.tick_seconds, ".17g"),
            },
        )
    return 0


def _cmd_keyframes(args) -> int:
    stream = fileio.read_stream(args.stream)
    if args.binarize:
        stream = binarize_stream(stream)
    kfs = select_keyframes(stream, args.k_max, args.th, args.stage2_th)
    if kfs.static:
        print("static clip: endpoints only")
    for kf in kfs:
        channel = str(kf.channel) if kf.channel is not None else "-"
        print(f"keyframe {kf.frame_index} {channel} {kf.score:.6f} stage{kf.stage}")
    if args.out:
        fileio.write_keyframes(kfs, args.out)
    return 0


def _read_manifest(path):
    base = Path(path).parent
    items = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(
                f"{path}:{lineno}: expected '<stream> <from> <to> <direction>'"
            )
        clip_path = Path(parts[0])
        if not clip_path.is_absolute():
            clip_path = base / clip_path
        try:
            item = (
                fileio.read_stream(clip_path),
                PoseLabel(parts[1]),
                PoseLabel(parts[2]),
                RotationDirection(parts[3]),
            )
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        items.append(item)
    if not items:
        raise FormatError(f"{path}: manifest lists no clips")
    return items


def _cmd_classify_transition(args) -> int:
    library = build_transition_library(
        _read_manifest(args.manifest), args.k_max, args.th, args.stage2_th
    )
    clip = fileio.read_stream(args.clip)
    record = classify_transition(
        clip,
        library,
        args.k_max,
        args.th,
        args.stage2_th,
        use_keyframes=not args.full_rate,
    )
    print(
        f"transition {record.from_pose.value} -> {record.to_pose.value} "
        f"({record.direction.value}), {record.n_pseudo_poses} pseudo-poses, "
        f"log_prob {record.log_prob:.6f}"
    )
    if args.out:
        fileio.write_transition(record, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    truth = fileio.read_truth(args.truth)
    metrics: list[tuple[str, float]] = []

    if args.decoded:
        segmentation, _ = fileio.read_decoded(args.decoded)
        if segmentation.T != truth.segmentation.T:
            raise FormatError("decoded and truth cover different T")
        pred = []
        for seg in segmentation:
            pred.extend([seg.y_index] * seg.d)
        ref = truth.labels
        metrics.append(
            ("frame_accuracy", sum(p == r for p, r in zip(pred, ref)) / len(ref))
        )

    if args.history:
        head = fileio.read_history_header(args.history)
        predicted = fileio.read_history(args.history)
        reference = history_from_labels(
            truth.labels,
            truth.space,
            int(head.get("sample_every", 1)),
            int(head.get("window", 10)),
            float(head.get("consistency", 0.8)),
        )
        metrics.append(
            ("window_detection_rate", window_detection_rate(predicted, reference))
        )

    if args.transitions:
        if truth.transition is None:
            raise FormatError(f"{args.truth}: sidecar carries no transition label")
        records = fileio.read_transitions(args.transitions)
        want = truth.transition
        hits = sum(
            (r.from_pose, r.to_pose, r.direction) == want for r in records
        )
        metrics.append(("transition_accuracy", hits / len(records)))

    if not metrics:
        raise FormatError("nothing to evaluate; pass --decoded, --history, or --transitions")
    width = max(len(name) for name, _ in metrics)
    for name, value in metrics:
        print(f"{name:<{width}}  {value:.6f}")
    for name, value in metrics:
        print(f"metric {name} {format(value, '.17g')}")
    return 0


def _add_binarize(p):
    p.add_argument(
        "--binarize", action="store_true", help="threshold features at 0.5 first"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posehsmm",
        description="Duration-explicit pose decoding, keyframing, and summaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a synthetic stream (+ truth sidecar)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="bc-sim")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--t-target", dest="t_target", type=int, default=None)
    p.add_argument("--d-max", dest="d_max", type=int, default=None)
    p.add_argument("--duration-mean", dest="duration_mean", type=float, default=None)
    p.add_argument("--duration-std", dest="duration_std", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--scene-switch", action="store_true")
    p.add_argument("--hold", type=int, default=None, help="transition clip hold length")
    p.add_argument("--ramp", type=int, default=None, help="transition clip edge length")
    p.add_argument(
        "--transition",
        nargs=3,
        metavar=("FROM", "TO", "DIRECTION"),
        default=None,
        help=f"emit one transition clip; poses in {{{', '.join(_POSE_CHOICES)}}}, "
        f"direction in {{{', '.join(_DIR_CHOICES)}}}",
    )
    _add_binarize(p)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", dest="truth_out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="fit a model from labeled streams")
    p.add_argument(
        "--data",
        nargs=2,
        metavar=("STREAM", "TRUTH"),
        action="append",
        required=True,
    )
    p.add_argument("--d-max", dest="d_max", type=int, default=None)
    _add_binarize(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="best segmentation of a stream")
    p.add_argument("--model", required=True)
    p.add_argument("--stream", required=True)
    _add_binarize(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("summarize", help="windowed pose history of a stream")
    p.add_argument("--model", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--sample-every", dest="sample_every", type=int, default=1)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--consistency", type=float, default=0.8)
    p.add_argument(
        "--tick-seconds",
        dest="tick_seconds",
        type=float,
        default=1.0,
        help="seconds per tick, presentation only",
    )
    _add_binarize(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("keyframes", help="compress a clip to its key ticks")
    p.add_argument("--stream", required=True)
    p.add_argument("--k-max", dest="k_max", type=int, default=5)
    p.add_argument("--th", type=float, default=0.8)
    p.add_argument("--stage2-th", dest="stage2_th", type=float, default=None)
    _add_binarize(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_keyframes)

    p = sub.add_parser(
        "classify-transition", help="label a clip against a trained chain library"
    )
    p.add_argument("--manifest", required=True, help="training clips: stream from to direction")
    p.add_argument("--clip", required=True)
    p.add_argument("--k-max", dest="k_max", type=int, default=5)
    p.add_argument("--th", type=float, default=0.8)
    p.add_argument("--stage2-th", dest="stage2_th", type=float, default=None)
    p.add_argument(
        "--full-rate",
        dest="full_rate",
        action="store_true",
        help="score the raw clip instead of its keyframe compression",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_classify_transition)

    p = sub.add_parser("evaluate", help="score outputs against a truth sidecar")
    p.add_argument("--truth", required=True)
    p.add_argument("--decoded", default=None)
    p.add_argument("--history", default=None)
    p.add_argument("--transitions", default=None)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NoFeasiblePath, NoTransitionDetected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PoseHsmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
