"""Decoding and learning for pose-state sequence models.

Two model families share the emission layer: a plain Markov chain over ticks
(self-loops induce geometric dwell times) and the segment-level variant where
dwell times get an explicit per-state distribution and the transition matrix
has a structurally zero diagonal.  All scoring is done in log space.

The segment decoder fills a (time x duration x state) table ``tau`` holding
the best log-probability of any segmentation whose final segment occupies
ticks t-d+1..t in state y, collapses it over durations into ``delta``, and
backtracks through ``phi``/``zeta``.  Ties are broken deterministically:
lower state index first, then longer final duration; the brute-force oracle
applies the identical rule, so decoded paths match exactly.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .emission import ChannelEmissionModel, ChannelId, FeatureStream, log_emission_matrix
from .errors import (
    DegenerateSelfLoop,
    DurationOutOfRange,
    EmptySequence,
    InstanceTooLarge,
    LabelMismatch,
    MalformedSegmentation,
    NoFeasiblePath,
)
from .states import (
    DurationModel,
    GeometricDurationModel,
    Segment,
    Segmentation,
    StateSpace,
    encode_segments,
)

#: Row-stochasticity tolerance for transition matrices.
ROW_SUM_TOL = 1e-12

#: Safety guard for exhaustive decoding: refuse above this many label sequences.
BRUTE_FORCE_GUARD = 10**7


def check_transition_matrix(A: np.ndarray, zero_diagonal: bool = False) -> np.ndarray:
    """Validate a (Q, Q) row-stochastic matrix; returns it as float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"transition matrix has shape {A.shape}")
    if np.any(A < 0.0):
        raise ValueError("transition probabilities must be nonnegative")
    q = A.shape[0]
    if zero_diagonal and q == 1:
        # Degenerate single-state case: no successor exists, row stays zero.
        return A
    if np.any(np.abs(A.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("transition rows must sum to 1")
    if zero_diagonal and np.any(np.diag(A) != 0.0):
        raise ValueError("diagonal must be structurally zero")
    return A


@dataclass
class HmmModel:
    """Tick-level Markov model: self-loops carry the dwell behaviour."""

    pi: np.ndarray
    A: np.ndarray
    emissions: Mapping[ChannelId, ChannelEmissionModel]
    states: StateSpace | None = None

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.A = check_transition_matrix(self.A)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]


@dataclass
class HsmmModel:
    """Segment-level model: explicit dwell distributions, zero-diagonal A."""

    pi: np.ndarray
    A: np.ndarray
    durations: DurationModel | GeometricDurationModel
    emissions: Mapping[ChannelId, ChannelEmissionModel]
    states: StateSpace | None = None

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.A = check_transition_matrix(self.A, zero_diagonal=True)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def d_max(self) -> int:
        return self.durations.d_max


@dataclass(frozen=True)
class DecodeResult:
    """Best segmentation with its log-probability and per-segment breakdown."""

    segmentation: Segmentation
    log_prob: float
    per_segment_scores: tuple[float, ...]


@dataclass
class ViterbiWorkspace:
    """DP arrays for the segment decoder, 1-based on the time axis.

    tau[t, d, j]: best log-prob ending with segment (t-d+1, d, j).
    zeta[t, d, j]: state of the previous segment for that cell (-1 at t=d).
    delta[t, j]: max over d of tau; phi[t, j]: the maximizing duration
    (longest on ties); psi[t, j]: previous state at that duration.
    """

    tau: np.ndarray
    zeta: np.ndarray
    delta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray


# =====================================================================
# Parameter fits
# =====================================================================


def fit_transitions(
    labels: Sequence,
    n_states: int,
    semi_markov: bool = False,
) -> np.ndarray:
    """Maximum-likelihood transition matrix from label sequences.

    a[i, j] = count(i -> j) / count(i -> anything).  With ``semi_markov`` each
    sequence is first collapsed to one label per maximal run, so self-counts
    vanish and the diagonal is structurally zero.  Rows with no outgoing
    observation fall back to uniform (uniform off-diagonal when semi-Markov).
    Accepts one label sequence or a list of them; counts are pooled before
    normalizing.
    """
    if len(labels) == 0:
        raise EmptySequence("cannot fit transitions on an empty sequence")
    try:
        operator.index(labels[0])
        sequences = [labels]
    except TypeError:
        sequences = list(labels)
    counts = np.zeros((n_states, n_states))
    for seq in sequences:
        idx = [operator.index(y) for y in seq]
        if semi_markov:
            idx = [y for k, y in enumerate(idx) if k == 0 or y != idx[k - 1]]
        for a, b in zip(idx[:-1], idx[1:]):
            counts[a, b] += 1.0
    A = np.zeros_like(counts)
    for i in range(n_states):
        row_total = counts[i].sum()
        if row_total > 0.0:
            A[i] = counts[i] / row_total
        elif semi_markov:
            if n_states > 1:
                A[i] = 1.0 / (n_states - 1)
                A[i, i] = 0.0
        else:
            A[i] = 1.0 / n_states
    return check_transition_matrix(A, zero_diagonal=semi_markov)


def fit_durations(
    segmentations: Segmentation | Sequence[Segmentation],
    n_states: int,
    d_max: int,
    min_std: float = 0.5,
) -> DurationModel:
    """Per-state dwell statistics from observed segments.

    Uses the sample mean and the population standard deviation of each
    state's durations, flooring the std at ``min_std`` so single observations
    stay usable.  States with no segment default to (d_max/2, d_max/4).
    """
    if isinstance(segmentations, Segmentation):
        segmentations = [segmentations]
    observed: list[list[int]] = [[] for _ in range(n_states)]
    for seg_list in segmentations:
        for seg in seg_list:
            observed[seg.y_index].append(seg.d)
    mean = np.full(n_states, d_max / 2.0)
    std = np.full(n_states, d_max / 4.0)
    for i, durs in enumerate(observed):
        if durs:
            arr = np.asarray(durs, dtype=float)
            mean[i] = arr.mean()
            std[i] = max(float(arr.std()), min_std)
    std = np.maximum(std, min_std)
    return DurationModel(mean, std, d_max)


# =====================================================================
# Shared log-space tables
# =====================================================================


def _log_tables(model, stream: FeatureStream):
    """Log pi / A / duration table plus cumulative emission sums.

    C has T+1 rows with C[t] holding the emission log-likelihood of ticks
    1..t, so a segment covering b..b+d-1 scores C[b+d-1] - C[b-1] per state.
    """
    n = model.n_states
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.pi)
        log_A = np.log(model.A)
    E = log_emission_matrix(stream, model.emissions, n)
    C = np.vstack([np.zeros(n), np.cumsum(E, axis=0)])
    log_dur = model.durations.log_pmf_table() if hasattr(model, "durations") else None
    return log_pi, log_A, log_dur, E, C


def _check_segment_indices(segmentation: Segmentation, n_states: int) -> None:
    for seg in segmentation:
        if not 0 <= seg.y_index < n_states:
            raise ValueError(f"segment state {seg.y} outside [0, {n_states})")


# =====================================================================
# Tick-level (self-loop) model
# =====================================================================


def hmm_joint_log_prob(labels: Sequence, stream: FeatureStream, model: HmmModel) -> float:
    """log P(labels, stream) under the tick-level Markov model."""
    if len(labels) != stream.T:
        raise LabelMismatch(f"{len(labels)} labels for {stream.T} frames")
    idx = [operator.index(y) for y in labels]
    log_pi, log_A, _, E, _ = _log_tables(model, stream)
    total = log_pi[idx[0]] + E[0, idx[0]]
    for t in range(1, len(idx)):
        total = total + log_A[idx[t - 1], idx[t]]
        total = total + E[t, idx[t]]
    return float(total)


def hmm_viterbi(stream: FeatureStream, model: HmmModel) -> tuple[list[int], float]:
    """Most likely tick-level label sequence.

    Ties take the lowest state index at every argmax, which yields the
    lexicographically smallest optimal labeling read back to front.
    """
    log_pi, log_A, _, E, _ = _log_tables(model, stream)
    T, n = E.shape
    V = np.full((T, n), -np.inf)
    ptr = np.zeros((T, n), dtype=int)
    V[0] = log_pi + E[0]
    for t in range(1, T):
        scores = V[t - 1][:, None] + log_A
        ptr[t] = scores.argmax(axis=0)
        V[t] = scores.max(axis=0) + E[t]
    if not np.isfinite(V[-1].max()):
        raise NoFeasiblePath("all tick-level paths have probability zero")
    y = int(V[-1].argmax())
    log_prob = float(V[-1, y])
    labels = [y]
    for t in range(T - 1, 0, -1):
        y = int(ptr[t, y])
        labels.append(y)
    labels.reverse()
    return labels, log_prob


def hsmm_from_hmm(
    hmm: HmmModel, d_max: int, truncated: bool = False
) -> HsmmModel:
    """Re-express a self-loop chain as an explicit-duration model.

    Dwell times become geometric(a_ii); off-diagonal transitions are
    renormalized by the exit mass 1 - a_ii.  With ``truncated=False`` the
    dwell pmf keeps its closed form, matching the chain term for term (up to
    the final segment's exit mass, which the chain leaves unresolved).
    """
    diag = np.diag(hmm.A).copy()
    if np.any(diag >= 1.0):
        raise DegenerateSelfLoop("a self-loop of 1 cannot be re-expressed")
    A = hmm.A / (1.0 - diag)[:, None]
    np.fill_diagonal(A, 0.0)
    durations = GeometricDurationModel(diag, d_max, truncated=truncated)
    return HsmmModel(hmm.pi.copy(), A, durations, hmm.emissions, hmm.states)


# =====================================================================
# Segment-level model
# =====================================================================


def hsmm_joint_log_prob(
    segmentation: Segmentation, stream: FeatureStream, model: HsmmModel
) -> float:
    """log P(segmentation, stream) under the segment-level model."""
    lp, _ = _scored_segments(segmentation, stream, model)
    return lp


def _scored_segments(
    segmentation: Segmentation, stream: FeatureStream, model: HsmmModel
) -> tuple[float, tuple[float, ...]]:
    if segmentation.T != stream.T:
        raise LabelMismatch(
            f"segmentation covers {segmentation.T} ticks, stream has {stream.T}"
        )
    _check_segment_indices(segmentation, model.n_states)
    for seg in segmentation:
        if seg.d > model.d_max:
            raise DurationOutOfRange(
                f"segment duration {seg.d} exceeds d_max {model.d_max}"
            )
    log_pi, log_A, log_dur, _, C = _log_tables(model, stream)
    scores = []
    prev = None
    for seg in segmentation:
        y = seg.y_index
        head = log_pi[y] if prev is None else log_A[prev, y]
        s = head + log_dur[y, seg.d]
        s = s + (C[seg.end, y] - C[seg.b - 1, y])
        scores.append(float(s))
        prev = y
    total = 0.0
    for s in scores:
        total += s
    return total, tuple(scores)


def hsmm_viterbi(stream: FeatureStream, model: HsmmModel) -> DecodeResult:
    """Most likely segmentation under the segment-level model.

    Tie-break order at every decision: lower state index, then longer
    duration.  Raises NoFeasiblePath when every segmentation scores -inf,
    e.g. when T exceeds d_max and no transition can bridge the gap.
    """
    ws, result = _run_segment_viterbi(stream, model)
    return result


def _run_segment_viterbi(stream: FeatureStream, model: HsmmModel):
    log_pi, log_A, log_dur, _, C = _log_tables(model, stream)
    return _segment_viterbi_core(
        stream.T, model.n_states, model.d_max, log_pi, log_A, log_dur, C
    )


def _segment_viterbi_core(
    T: int,
    n: int,
    d_max: int,
    log_pi: np.ndarray,
    log_A: np.ndarray,
    log_dur: np.ndarray,
    C: np.ndarray,
    final_log: np.ndarray | None = None,
):
    """Segment DP on raw log tables; also serves chain-constrained trellises
    whose transition structure would not pass the public model validation.

    ``final_log`` is an optional per-state additive terminal score (use -inf
    entries to require the path to end in particular states).
    """
    d_cap = min(d_max, T)
    ws = ViterbiWorkspace(
        tau=np.full((T + 1, d_cap + 1, n), -np.inf),
        zeta=np.full((T + 1, d_cap + 1, n), -1, dtype=int),
        delta=np.full((T + 1, n), -np.inf),
        phi=np.zeros((T + 1, n), dtype=int),
        psi=np.full((T + 1, n), -1, dtype=int),
    )
    took = np.arange(n)
    for t in range(1, T + 1):
        dm = min(t, d_cap)
        for d in range(1, dm + 1):
            segsum = C[t] - C[t - d]
            if d == t:
                ws.tau[t, d] = (log_pi + log_dur[:, d]) + segsum
            else:
                scores = ws.delta[t - d][:, None] + log_A
                best_prev = scores.max(axis=0)
                ws.tau[t, d] = (best_prev + log_dur[:, d]) + segsum
                ws.zeta[t, d] = scores.argmax(axis=0)
        block = ws.tau[t, 1 : dm + 1]
        # argmax on the reversed duration axis keeps the longest d on ties
        ws.phi[t] = dm - block[::-1].argmax(axis=0)
        ws.delta[t] = block[ws.phi[t] - 1, took]
        ws.psi[t] = ws.zeta[t, ws.phi[t], took]

    terminal = ws.delta[T] if final_log is None else ws.delta[T] + final_log
    if not np.isfinite(terminal.max()):
        raise NoFeasiblePath("all segmentations have probability zero")
    y = int(terminal.argmax())
    log_prob = float(ws.delta[T, y])

    rev: list[Segment] = []
    t = T
    while t > 0:
        d = int(ws.phi[t, y])
        rev.append(Segment(t - d + 1, d, y))
        y_prev = int(ws.zeta[t, d, y])
        t -= d
        y = y_prev
    segmentation = Segmentation(tuple(reversed(rev)), T)

    per_segment = []
    prev = None
    for seg in segmentation:
        j = seg.y_index
        head = log_pi[j] if prev is None else log_A[prev, j]
        s = head + log_dur[j, seg.d]
        s = s + (C[seg.end, j] - C[seg.b - 1, j])
        per_segment.append(float(s))
        prev = j
    return ws, DecodeResult(segmentation, log_prob, tuple(per_segment))


def segment_viterbi_on_tables(
    T: int,
    log_pi: np.ndarray,
    log_A: np.ndarray,
    log_dur: np.ndarray,
    emission_cumsum: np.ndarray,
    final_log: np.ndarray | None = None,
) -> DecodeResult:
    """Run the segment decoder on caller-built log tables.

    ``log_dur`` is a (Q, d_max + 1) table indexable by duration, and
    ``emission_cumsum`` the (T + 1, Q) prefix-sum matrix of emission log
    likelihoods.  Lets callers score constrained trellises (e.g. strict
    left-to-right chains) without constructing a full public model;
    ``final_log`` adds a terminal per-state score (-inf forbids ending there).
    """
    n = log_pi.shape[0]
    d_max = log_dur.shape[1] - 1
    _, result = _segment_viterbi_core(
        T, n, d_max, log_pi, log_A, log_dur, emission_cumsum, final_log
    )
    return result


def brute_force_decode(
    stream: FeatureStream, model: HsmmModel, guard: int = BRUTE_FORCE_GUARD
) -> DecodeResult:
    """Exhaustive reference decoder for small instances.

    Enumerates every label sequence, scores its run-length encoding with the
    same additions the DP performs, and keeps the argmax under the documented
    tie-break (lower state index, then longer duration, applied back to
    front).  Guarded by ``guard`` on Q**T.
    """
    T = stream.T
    n = model.n_states
    if n**T > guard:
        raise InstanceTooLarge(f"{n}**{T} label sequences exceed guard {guard}")
    log_pi, log_A, log_dur, _, C = _log_tables(model, stream)
    lpi = log_pi.tolist()
    lA = log_A.tolist()
    ldur = log_dur.tolist()
    lC = C.tolist()
    d_max = model.d_max
    neg_inf = -np.inf

    best_score = neg_inf
    best_key = None
    best_segs = None
    for labels in itertools.product(range(n), repeat=T):
        segs = []
        start = 0
        cur = labels[0]
        for t in range(1, T):
            if labels[t] != cur:
                segs.append((start + 1, t - start, cur))
                start = t
                cur = labels[t]
        segs.append((start + 1, T - start, cur))

        acc = 0.0
        feasible = True
        prev = None
        for b, d, y in segs:
            if d > d_max:
                feasible = False
                break
            head = lpi[y] if prev is None else acc + lA[prev][y]
            acc = head + ldur[y][d]
            acc = acc + (lC[b + d - 1][y] - lC[b - 1][y])
            if acc == neg_inf:
                feasible = False
                break
            prev = y
        if not feasible:
            continue
        key = tuple((y, -d) for b, d, y in reversed(segs))
        if acc > best_score or (acc == best_score and key < best_key):
            best_score = acc
            best_key = key
            best_segs = segs
    if best_segs is None:
        raise NoFeasiblePath("all segmentations have probability zero")

    segmentation = Segmentation(
        tuple(Segment(b, d, y) for b, d, y in best_segs), T
    )
    per_segment = []
    prev = None
    for b, d, y in best_segs:
        head = lpi[y] if prev is None else lA[prev][y]
        s = head + ldur[y][d]
        s = s + (lC[b + d - 1][y] - lC[b - 1][y])
        per_segment.append(float(s))
        prev = y
    return DecodeResult(segmentation, float(best_score), tuple(per_segment))
