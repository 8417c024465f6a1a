"""Exception types shared across the toolkit."""


class PoseHsmmError(Exception):
    """Base class for all toolkit errors."""


class EmptySequence(PoseHsmmError):
    """A label or observation sequence was empty where T >= 1 is required."""


class MalformedSegmentation(PoseHsmmError):
    """Segment list violates the cover/ordering/maximal-run invariants."""


class DegenerateSelfLoop(PoseHsmmError):
    """Self-transition probability of 1 has no finite dwell distribution."""


class DurationOutOfRange(PoseHsmmError):
    """Duration outside [1, d_max]."""


class ChannelAbsent(PoseHsmmError):
    """Requested channel is never available in the data at hand."""


class NoObservation(PoseHsmmError):
    """A frame exposes no scoreable channel."""


class NoFeasiblePath(PoseHsmmError):
    """Every candidate segmentation has probability zero."""


class InstanceTooLarge(PoseHsmmError):
    """Exhaustive enumeration would exceed the safety guard."""


class NoTransitionDetected(PoseHsmmError):
    """Transition classification was handed a motionless clip."""


class LabelMismatch(PoseHsmmError):
    """Label sequence and feature stream disagree in length."""


class FormatError(PoseHsmmError):
    """A persisted file is malformed or has an unsupported format version."""
