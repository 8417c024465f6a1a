"""Duration-explicit pose decoding, keyframe compression, and summaries."""

from .emission import (
    ChannelEmissionModel,
    ChannelId,
    FeatureFrame,
    FeatureStream,
    Modality,
    View,
    binarize_stream,
    emission_log_likelihood,
    fit_channel_emissions,
    log_emission_matrix,
)
from .errors import (
    ChannelAbsent,
    DegenerateSelfLoop,
    DurationOutOfRange,
    EmptySequence,
    FormatError,
    InstanceTooLarge,
    LabelMismatch,
    MalformedSegmentation,
    NoFeasiblePath,
    NoObservation,
    NoTransitionDetected,
    PoseHsmmError,
)
from .inference import (
    DecodeResult,
    HmmModel,
    HsmmModel,
    brute_force_decode,
    check_transition_matrix,
    fit_durations,
    fit_transitions,
    hmm_joint_log_prob,
    hmm_viterbi,
    hsmm_from_hmm,
    hsmm_joint_log_prob,
    hsmm_viterbi,
    segment_viterbi_on_tables,
)
from .keyframes import (
    Keyframe,
    KeyframeSet,
    channel_endpoint_dissimilarity,
    keyframes_to_pseudo_pose_stream,
    select_keyframes,
)
from .simulate import (
    GroundTruth,
    ScenarioConfig,
    TransitionInfo,
    build_generating_model,
    preset_config,
    sample_sequence,
    sample_transition_clip,
    transition_protocol,
)
from .states import (
    CANONICAL_POSES,
    INITIAL_POSE_PRIORS,
    MOCK_ICU_POSES,
    DurationModel,
    GeometricDurationModel,
    PoseLabel,
    RotationDirection,
    SceneCondition,
    Segment,
    Segmentation,
    StateId,
    StateSpace,
    build_initial_distribution,
    decode_segments,
    default_state_space,
    encode_segments,
    gaussian_duration_pmf,
    geometric_duration_pmf,
)
from .summarize import (
    HistoryRecord,
    TransitionChain,
    TransitionLibrary,
    TransitionRecord,
    build_transition_library,
    classify_transition,
    history_from_labels,
    summarize_history,
    window_detection_rate,
)

__version__ = "0.1.0"
