"""Duration-constrained Viterbi decoding of frame scores into phone sequences.

Each phone is a left-to-right chain of identical-emission states (three
canonically), so every decoded segment lasts at least that many frames.
All transitions carry log-probability zero: the decoder is a pure maximum
over legal segmentations of the summed frame scores. Ties resolve to the
lexicographically smallest state path, which in particular prefers the
smaller phone index.
"""
from dataclasses import dataclass

import numpy as np

from .errors import StructureError

DEFAULT_STATES_PER_PHONE = 3


@dataclass(frozen=True)
class HmmTopology:
    """Connected phone models: `num_phones` chains of equal-emission states."""

    num_phones: int
    states_per_phone: int = DEFAULT_STATES_PER_PHONE

    def __post_init__(self):
        if self.num_phones < 1:
            raise StructureError("topology needs at least one phone")
        if self.states_per_phone < 1:
            raise StructureError("topology needs at least one state per phone")


@dataclass(frozen=True)
class PhoneSequence:
    """Decoded phones with the start frame of each segment."""

    phones: tuple
    boundaries: tuple

    def __post_init__(self):
        if len(self.phones) != len(self.boundaries):
            raise StructureError("one boundary per phone segment required")
        object.__setattr__(self, "phones", tuple(int(p) for p in self.phones))
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))


def estimate_priors(labelings, num_classes: int) -> np.ndarray:
    """Add-one-smoothed class frequencies over a collection of frame labelings.

    Args:
        labelings: iterables of frame labels (FrameLabeling instances or
            plain arrays).
        num_classes: total classes; classes never observed still get mass.

    Returns:
        Probability vector of length num_classes, strictly positive.
    """
    if num_classes < 1:
        raise StructureError("num_classes must be at least 1")
    counts = np.zeros(num_classes, dtype=np.int64)
    total = 0
    for labeling in labelings:
        labels = np.asarray(getattr(labeling, "labels", labeling), dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise StructureError(f"labels must lie in [0, {num_classes})")
        counts += np.bincount(labels, minlength=num_classes)
        total += labels.size
    return (counts + 1.0) / (total + num_classes)


def scale_likelihoods(posteriors: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Per-frame log posteriors minus log priors (emission scores for decoding)."""
    posteriors = np.asarray(posteriors, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    if posteriors.ndim != 2:
        raise StructureError("posteriors must be a (frames, classes) array")
    if priors.shape != (posteriors.shape[1],):
        raise StructureError("one prior per posterior column required")
    if (priors <= 0).any():
        raise StructureError("priors must be strictly positive")
    # Exact zeros can appear after extreme softmax underflow; keep logs finite
    # enough for the decoder by flooring at the smallest positive double.
    floored = np.clip(posteriors, np.finfo(np.float64).tiny, None)
    return np.log(floored) - np.log(priors)


def viterbi_decode(frame_scores: np.ndarray, topology: HmmTopology) -> PhoneSequence:
    """Best legal segmentation of the frame scores under the topology.

    Args:
        frame_scores: (frames, num_phones) log scores; all states of a phone
            share its column.
        topology: phone-chain structure (sets the minimum segment length).

    Returns:
        The score-maximizing PhoneSequence; among ties, the one whose state
        path is lexicographically smallest.
    """
    scores = np.asarray(frame_scores, dtype=np.float64)
    if scores.ndim != 2:
        raise StructureError("frame scores must be a (frames, phones) array")
    frames, num_phones = scores.shape
    if num_phones != topology.num_phones:
        raise StructureError(
            f"scores carry {num_phones} phones, topology expects "
            f"{topology.num_phones}"
        )
    span = topology.states_per_phone
    if frames < span:
        raise StructureError(
            f"{frames} frames cannot fit one phone of {span} states"
        )
    # best[t, p, s]: best total score of frames t.. given state s of phone p
    # at frame t, ending in some final state at the last frame.
    best = np.full((frames, num_phones, span), -np.inf)
    best[frames - 1, :, span - 1] = scores[frames - 1]
    for t in range(frames - 2, -1, -1):
        upcoming = best[t + 1]
        enter = upcoming[:, 0].max()
        for s in range(span - 1):
            best[t, :, s] = np.maximum(upcoming[:, s], upcoming[:, s + 1])
        best[t, :, span - 1] = np.maximum(upcoming[:, span - 1], enter)
        best[t] += scores[t, :, None]

    start_scores = best[0, :, 0]
    total = start_scores.max()
    if not np.isfinite(total):
        raise StructureError("no legal segmentation has finite score")
    phone = int(np.flatnonzero(start_scores == total)[0])
    state = 0
    phones = [phone]
    boundaries = [0]
    for t in range(frames - 1):
        upcoming = best[t + 1]
        if state < span - 1:
            # Staying keeps the same (phone, state); advancing increases the
            # state. Staying is lexicographically smaller, so it wins ties.
            if upcoming[phone, state] >= upcoming[phone, state + 1]:
                pass
            else:
                state += 1
            continue
        # Final state: either keep the phone or enter a fresh one. Candidates
        # ordered by (phone, state) pick the lexicographically smallest path;
        # at equal (phone, state) the non-boundary reading is kept.
        candidates = []
        for q in range(num_phones):
            candidates.append((q, 0, upcoming[q, 0], True))
            if q == phone:
                if span == 1:
                    # Re-entering state 0 of the same phone is the same path
                    # node as staying; merge rather than open a segment.
                    candidates.pop()
                candidates.append((q, span - 1, upcoming[q, span - 1], False))
        target = max(value for _, _, value, _ in candidates)
        for q, s, value, is_entry in candidates:
            if value == target:
                if is_entry:
                    phones.append(q)
                    boundaries.append(t + 1)
                phone, state = q, s if not (is_entry and span > 1) else 0
                break
    return PhoneSequence(phones=tuple(phones), boundaries=tuple(boundaries))


def segmentation_score(frame_scores: np.ndarray, sequence: PhoneSequence) -> float:
    """Total score of a segmentation under the shared-emission model."""
    scores = np.asarray(frame_scores, dtype=np.float64)
    frames = scores.shape[0]
    starts = list(sequence.boundaries) + [frames]
    total = 0.0
    for phone, begin, end in zip(sequence.phones, starts[:-1], starts[1:]):
        total += scores[begin:end, phone].sum()
    return float(total)
