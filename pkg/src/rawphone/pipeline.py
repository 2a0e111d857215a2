"""Glue between datasets and the trainer, decoder, and scorer."""
import os

import numpy as np

from .cepstra import CepstralConfig, cepstral_features
from .corpus import SplitManifest, load_dataset, load_manifest
from .decoder import estimate_priors
from .errors import StructureError
from .framing import frame_stream, normalize_rows
from .network import NetworkConfig, Parameters
from .training import posterior_rows

RAW = "raw"
CEPSTRAL = "cepstral"
FEATURE_MODES = (RAW, CEPSTRAL)

DATASET_FILENAME = "dataset.bin"
MANIFEST_FILENAME = "splits.json"


def check_feature_mode(mode: str, config: NetworkConfig) -> None:
    if mode not in FEATURE_MODES:
        raise StructureError(f"feature mode must be one of {FEATURE_MODES}")
    if mode == CEPSTRAL and config.stages:
        raise StructureError(
            "cepstral features feed a classifier-only network; remove the "
            "filter stages"
        )


def load_corpus_dir(data_dir):
    """Load dataset.bin and splits.json from a directory.

    Returns:
        (utterances_by_id, num_classes, manifest).
    """
    utterances, num_classes = load_dataset(os.path.join(data_dir, DATASET_FILENAME))
    manifest = load_manifest(os.path.join(data_dir, MANIFEST_FILENAME))
    by_id = {utt.utt_id: utt for utt in utterances}
    for utt_id in manifest.train + manifest.valid + manifest.test:
        if utt_id not in by_id:
            raise StructureError(f"manifest references unknown utterance {utt_id}")
    return by_id, num_classes, manifest


def split_utterances(by_id, manifest: SplitManifest, split: str):
    return [by_id[utt_id] for utt_id in manifest.split(split)]


def raw_window_inputs(utterance, w_in_ms: float) -> np.ndarray:
    """Normalized raw windows of one utterance as a (frames, w_in) matrix."""
    windows = frame_stream(utterance.stream, utterance.labeling, w_in_ms)
    return normalize_rows(np.stack([w.samples for w in windows]))


def utterance_inputs(utterance, mode: str, w_in_ms: float,
                     cepstral_config: CepstralConfig):
    """Per-frame network inputs for one utterance, as (frames, channels) arrays."""
    if mode == RAW:
        mat = raw_window_inputs(utterance, w_in_ms)
        return [row[:, None] for row in mat]
    feats = cepstral_features(utterance.stream, cepstral_config)
    return [row[None, :] for row in feats]


def build_examples(utterances, mode: str, w_in_ms: float,
                   cepstral_config: CepstralConfig):
    """Flatten utterances into (input, label) training examples."""
    examples = []
    for utt in utterances:
        inputs = utterance_inputs(utt, mode, w_in_ms, cepstral_config)
        labels = utt.labeling.labels
        if len(inputs) != labels.size:
            raise StructureError(
                f"{utt.utt_id}: {len(inputs)} feature frames for "
                f"{labels.size} labels"
            )
        examples.extend(
            (inputs[t], int(labels[t])) for t in range(labels.size)
        )
    return examples


def utterance_posteriors(
    config: NetworkConfig,
    params: Parameters,
    utterance,
    mode: str,
    cepstral_config: CepstralConfig,
) -> np.ndarray:
    """(frames, classes) softmax posteriors for one utterance."""
    inputs = utterance_inputs(utterance, mode, config.w_in_ms, cepstral_config)
    return posterior_rows(config, params, inputs)


def training_priors(by_id, manifest: SplitManifest, num_classes: int) -> np.ndarray:
    """Class priors counted on the training split."""
    labelings = [by_id[utt_id].labeling for utt_id in manifest.train]
    return estimate_priors(labelings, num_classes)
