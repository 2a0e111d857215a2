"""Scoring: frame accuracy and edit-distance phone error rate."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import StructureError


class EditCounts(NamedTuple):
    """Error rate with its substitution, deletion, and insertion counts."""

    per: float
    substitutions: int
    deletions: int
    insertions: int


def frame_accuracy(predicted, reference) -> float:
    """Fraction of frames whose predicted class matches the reference."""
    predicted = np.asarray(predicted)
    reference = np.asarray(reference)
    if predicted.shape != reference.shape or predicted.ndim != 1:
        raise StructureError(
            f"predicted and reference lengths differ: "
            f"{predicted.shape} vs {reference.shape}"
        )
    if predicted.size == 0:
        raise StructureError("cannot score an empty labeling")
    return float((predicted == reference).mean())


def _phones(sequence):
    return list(getattr(sequence, "phones", sequence))


def edit_counts(hypothesis, reference) -> tuple[int, int, int]:
    """Minimum-edit alignment counts (substitutions, deletions, insertions).

    Among equal-cost alignments, substitutions are preferred over
    insertion-deletion pairs.
    """
    hyp = _phones(hypothesis)
    ref = _phones(reference)
    # row[j] = (cost, subs, dels, inss) aligning hyp[:i] with ref[:j]
    row = [(j, 0, j, 0) for j in range(len(ref) + 1)]
    for i in range(1, len(hyp) + 1):
        prev = row
        row = [(i, 0, 0, i)]
        for j in range(1, len(ref) + 1):
            match = hyp[i - 1] == ref[j - 1]
            diag = prev[j - 1]
            candidates = (
                (diag[0] + (0 if match else 1), diag[1] + (0 if match else 1),
                 diag[2], diag[3]),
                (row[j - 1][0] + 1, row[j - 1][1], row[j - 1][2] + 1,
                 row[j - 1][3]),
                (prev[j][0] + 1, prev[j][1], prev[j][2], prev[j][3] + 1),
            )
            row.append(min(candidates, key=lambda c: c[0]))
    _, subs, dels, inss = row[len(ref)]
    return subs, dels, inss


def phone_error_rate(hypothesis, reference) -> EditCounts:
    """Edit errors of the hypothesis against the reference, over |reference|.

    The rate can exceed 1 when the hypothesis carries many insertions.
    """
    ref = _phones(reference)
    if not ref:
        raise StructureError("reference phone sequence must be non-empty")
    subs, dels, inss = edit_counts(hypothesis, ref)
    return EditCounts((subs + dels + inss) / len(ref), subs, dels, inss)


def corpus_phone_error_rate(pairs) -> EditCounts:
    """Aggregate PER over (hypothesis, reference) pairs: total errors over
    total reference length."""
    total_ref = 0
    subs = dels = inss = 0
    for hypothesis, reference in pairs:
        ref = _phones(reference)
        if not ref:
            raise StructureError("reference phone sequence must be non-empty")
        s, d, i = edit_counts(hypothesis, ref)
        subs, dels, inss = subs + s, dels + d, inss + i
        total_ref += len(ref)
    if total_ref == 0:
        raise StructureError("corpus scoring needs at least one utterance")
    return EditCounts((subs + dels + inss) / total_ref, subs, dels, inss)


@dataclass(frozen=True)
class ScoreReport:
    """Evaluation summary for one trained system."""

    frame_accuracy: float
    per: float
    substitutions: int
    deletions: int
    insertions: int
    conv_params: int
    classifier_params: int
