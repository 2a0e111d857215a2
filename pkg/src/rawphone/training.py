"""Stochastic gradient ascent on frame log-likelihood, and grid search.

Training follows the plain recipe: batch size 1, a fixed learning rate, no
momentum or schedule. After each epoch the frame accuracy on a validation
set decides early stopping, and the parameters from the best validation
epoch are returned.
"""
from dataclasses import dataclass

import numpy as np

from .errors import StructureError, TrainingDivergedError
from .network import (
    NetworkConfig,
    Parameters,
    forward_with_cache,
    format_config,
    init_parameters,
    network_backward,
    network_forward,
    output_shape,
    param_count,
    with_seed,
)
from .layers import nll_value_and_grad, softmax
from .seeds import derived_seed, named_rng


@dataclass(frozen=True)
class EpochStats:
    """One training-log line: epoch number, mean log-likelihood, accuracy."""

    epoch: int
    train_loglik: float
    valid_accuracy: float


def sgd_step(config: NetworkConfig, params: Parameters, x, label: int) -> float:
    """One ascent step on a single example; returns its log-likelihood."""
    scores, cache = forward_with_cache(config, params, x)
    value, grad_scores = nll_value_and_grad(scores, label)
    grads = network_backward(config, params, cache, grad_scores)
    lr = config.learning_rate
    for array, grad in zip(params.arrays(), grads.arrays()):
        array += lr * grad
    return value


def predict_labels(config: NetworkConfig, params: Parameters, examples) -> np.ndarray:
    """Argmax class per example."""
    return np.array(
        [int(np.argmax(network_forward(config, params, x))) for x, _ in examples],
        dtype=np.int64,
    )


def accuracy_on(config: NetworkConfig, params: Parameters, examples) -> float:
    predicted = predict_labels(config, params, examples)
    reference = np.array([label for _, label in examples], dtype=np.int64)
    return float((predicted == reference).mean())


def posterior_rows(config: NetworkConfig, params: Parameters, inputs) -> np.ndarray:
    """Softmax posteriors for a sequence of inputs, one row per input."""
    return np.stack(
        [softmax(network_forward(config, params, x)) for x in inputs]
    )


def sgd_train(config: NetworkConfig, train, valid):
    """Train by single-example gradient ascent with early stopping.

    Args:
        train: sequence of ((frames, channels) array, label) pairs.
        valid: same structure; scored after every epoch.

    Returns:
        (params, log) where params come from the best validation epoch and
        log holds one EpochStats per completed epoch.
    """
    if not len(train) or not len(valid):
        raise StructureError("training and validation sets must be non-empty")
    x0 = train[0][0]
    params = init_parameters(
        config, input_frames=x0.shape[0], input_channels=x0.shape[1]
    )
    shuffle_rng = named_rng(config.seed, "shuffle")
    log = []
    best_params = params.copy()
    best_accuracy = -1.0
    epochs_since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        total = 0.0
        for index in order:
            x, label = train[index]
            value = sgd_step(config, params, x, label)
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, int(index))
            total += value
        valid_accuracy = accuracy_on(config, params, valid)
        log.append(EpochStats(epoch, total / len(train), valid_accuracy))
        if valid_accuracy > best_accuracy:
            best_accuracy = valid_accuracy
            best_params = params.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break
    return best_params, log


def format_training_log(log) -> str:
    lines = ["epoch\ttrain_loglik\tvalid_accuracy"]
    for entry in log:
        lines.append(
            f"{entry.epoch}\t{entry.train_loglik!r}\t{entry.valid_accuracy!r}"
        )
    return "\n".join(lines) + "\n"


def write_training_log(path, log) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_training_log(log))


@dataclass(frozen=True)
class GridResult:
    """Outcome of one grid candidate."""

    config: NetworkConfig
    valid_accuracy: float
    conv_weights: int
    classifier_weights: int

    @property
    def total_weights(self) -> int:
        return self.conv_weights + self.classifier_weights


def grid_search(candidates, train, valid):
    """Train every candidate and pick the best by validation accuracy.

    Ties fall to the candidate with fewer weights, then to the
    lexicographically smaller canonical config text. Each candidate trains
    with a seed derived from its own, so candidates are independent.

    Returns:
        (best_config, results) with one GridResult per candidate, in
        candidate order.
    """
    candidates = list(candidates)
    if not candidates:
        raise StructureError("grid search needs at least one candidate")
    x0 = train[0][0]
    results = []
    for i, candidate in enumerate(candidates):
        runnable = with_seed(candidate, derived_seed(candidate.seed, f"grid-{i}"))
        params, log = sgd_train(runnable, train, valid)
        best_accuracy = max(entry.valid_accuracy for entry in log)
        trace = output_shape(
            candidate, input_frames=x0.shape[0], input_channels=x0.shape[1]
        )
        counts = param_count(candidate, input_dim=trace.classifier_input_dim)
        results.append(
            GridResult(
                config=candidate,
                valid_accuracy=best_accuracy,
                conv_weights=counts.conv_weights,
                classifier_weights=counts.classifier_weights,
            )
        )
    def rank(result: GridResult):
        return (-result.valid_accuracy, result.total_weights,
                format_config(result.config))
    best = min(results, key=rank)
    return best.config, results
