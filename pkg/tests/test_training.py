"""Gradient-ascent training loop, early stopping, and grid search."""
import numpy as np
import pytest

from rawphone.errors import StructureError, TrainingDivergedError
from rawphone.network import (
    ClassifierSpec,
    NetworkConfig,
    forward_with_cache,
    init_parameters,
    network_backward,
    network_forward,
    stage,
    with_seed,
)
from rawphone.training import (
    EpochStats,
    accuracy_on,
    format_training_log,
    grid_search,
    posterior_rows,
    sgd_step,
    sgd_train,
)


def linear_config(lr=0.05, seed=0, max_epochs=20, patience=3, classes=3):
    return NetworkConfig(
        w_in_ms=105,
        stages=(),
        classifier=ClassifierSpec(kind="slp", num_classes=classes),
        learning_rate=lr,
        seed=seed,
        max_epochs=max_epochs,
        patience=patience,
    )


def separable_examples(count, classes=3, dim=6, noise=0.05, seed=0):
    """Class k concentrates its energy on coordinate k."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(count):
        label = i % classes
        x = rng.normal(scale=noise, size=(1, dim))
        x[0, label] += 1.0
        examples.append((x, label))
    return examples


def conv_config(lr=0.01, seed=0, max_epochs=8, patience=2):
    return NetworkConfig(
        w_in_ms=30,
        stages=(stage(kW=30, dW=10, d_out=6, pool_kW=3),),
        classifier=ClassifierSpec(kind="slp", num_classes=2),
        learning_rate=lr,
        seed=seed,
        max_epochs=max_epochs,
        patience=patience,
    )


def tone_windows(count, seed=0):
    """480-sample windows of a low or high tone, labeled by tone."""
    rng = np.random.default_rng(seed)
    t = np.arange(480) / 16000.0
    examples = []
    for i in range(count):
        label = i % 2
        freq = 500.0 if label == 0 else 2000.0
        wave = np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        wave += rng.normal(scale=0.1, size=480)
        examples.append((wave[:, None], label))
    return examples


class TestSgdStep:
    def test_applies_learning_rate_times_gradient(self):
        config = linear_config(lr=0.5)
        examples = separable_examples(1)
        x, label = examples[0]
        params = init_parameters(config, input_frames=1, input_channels=6)
        before = [a.copy() for a in params.arrays()]

        scores, cache = forward_with_cache(config, params, x)
        from rawphone.layers import nll_value_and_grad

        _, grad_scores = nll_value_and_grad(scores, label)
        grads = network_backward(config, params, cache, grad_scores)

        sgd_step(config, params, x, label)
        for prev, grad, after in zip(before, grads.arrays(), params.arrays()):
            np.testing.assert_allclose(after, prev + 0.5 * grad, atol=1e-12)

    def test_zero_learning_rate_freezes_parameters(self):
        config = linear_config(lr=0.0, max_epochs=3)
        examples = separable_examples(9)
        params, _ = sgd_train(config, examples, examples)
        fresh = init_parameters(config, input_frames=1, input_channels=6)
        for a, b in zip(params.arrays(), fresh.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_single_example_loglik_climbs(self):
        # The linear head's log-likelihood is concave, so small ascent steps
        # on one example must improve it every time.
        config = linear_config(lr=0.1)
        x, label = separable_examples(1)[0]
        params = init_parameters(config, input_frames=1, input_channels=6)
        values = [sgd_step(config, params, x, label) for _ in range(30)]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestSgdTrain:
    def test_learns_separable_problem(self):
        config = linear_config(lr=0.5, max_epochs=40, patience=10)
        train = separable_examples(30, seed=1)
        valid = separable_examples(12, seed=2)
        params, log = sgd_train(config, train, valid)
        assert accuracy_on(config, params, train) == 1.0
        assert accuracy_on(config, params, valid) == 1.0

    def test_learns_tone_discrimination_through_conv(self):
        config = conv_config(lr=0.02, max_epochs=10, patience=5)
        train = tone_windows(40, seed=3)
        valid = tone_windows(10, seed=4)
        params, log = sgd_train(config, train, valid)
        assert accuracy_on(config, params, valid) >= 0.9

    def test_deterministic_for_seed(self):
        config = linear_config(lr=0.3, max_epochs=5)
        train = separable_examples(12, seed=5)
        valid = separable_examples(6, seed=6)
        first_params, first_log = sgd_train(config, train, valid)
        second_params, second_log = sgd_train(config, train, valid)
        assert first_log == second_log
        for a, b in zip(first_params.arrays(), second_params.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_seed_changes_trajectory(self):
        train = separable_examples(12, seed=5)
        valid = separable_examples(6, seed=6)
        _, log_a = sgd_train(linear_config(lr=0.3, seed=0), train, valid)
        _, log_b = sgd_train(linear_config(lr=0.3, seed=1), train, valid)
        assert [e.train_loglik for e in log_a] != [e.train_loglik for e in log_b]

    def test_early_stopping_respects_patience(self):
        # Frozen parameters never improve, so training stops after the
        # first epoch plus `patience` non-improvements.
        config = linear_config(lr=0.0, max_epochs=50, patience=4)
        examples = separable_examples(9)
        _, log = sgd_train(config, examples, examples)
        assert len(log) == 1 + 4

    def test_returns_best_epoch_parameters(self):
        config = linear_config(lr=0.5, max_epochs=30, patience=29)
        train = separable_examples(30, seed=1)
        valid = separable_examples(12, seed=2)
        params, log = sgd_train(config, train, valid)
        best = max(entry.valid_accuracy for entry in log)
        assert accuracy_on(config, params, valid) == best

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_reported(self):
        config = linear_config(lr=1e308, max_epochs=5)
        examples = separable_examples(9, noise=0.5)
        with pytest.raises(TrainingDivergedError) as info:
            sgd_train(config, examples, examples)
        assert info.value.epoch >= 1
        assert 0 <= info.value.example_index < 9

    def test_empty_sets_rejected(self):
        config = linear_config()
        with pytest.raises(StructureError):
            sgd_train(config, [], separable_examples(3))

    def test_posterior_rows_are_distributions(self):
        config = linear_config()
        params = init_parameters(config, input_frames=1, input_channels=6)
        inputs = [x for x, _ in separable_examples(5)]
        rows = posterior_rows(config, params, inputs)
        assert rows.shape == (5, 3)
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)


class TestTrainingLog:
    def test_tsv_layout(self):
        log = [EpochStats(1, -1.5, 0.25), EpochStats(2, -1.0, 0.5)]
        text = format_training_log(log)
        lines = text.strip().split("\n")
        assert lines[0] == "epoch\ttrain_loglik\tvalid_accuracy"
        assert lines[1].split("\t") == ["1", "-1.5", "0.25"]

    def test_floats_round_trip_exactly(self):
        log = [EpochStats(1, -1.2345678901234567, 0.3333333333333333)]
        row = format_training_log(log).strip().split("\n")[1].split("\t")
        assert float(row[1]) == -1.2345678901234567
        assert float(row[2]) == 0.3333333333333333


class TestGridSearch:
    def test_picks_learnable_candidate(self):
        train = separable_examples(24, seed=7)
        valid = separable_examples(9, seed=8)
        frozen = linear_config(lr=0.0, max_epochs=6)
        learner = linear_config(lr=0.5, max_epochs=6)
        best, results = grid_search([frozen, learner], train, valid)
        assert best.learning_rate == 0.5
        assert len(results) == 2
        assert results[0].valid_accuracy <= results[1].valid_accuracy or (
            results[0].config == frozen
        )

    def test_tie_prefers_fewer_weights(self):
        # Both candidates solve the problem; the smaller hidden layer wins.
        train = separable_examples(24, seed=7)
        valid = separable_examples(9, seed=8)
        big = NetworkConfig(
            w_in_ms=105, stages=(),
            classifier=ClassifierSpec(kind="mlp", hidden_units=16,
                                      num_classes=3),
            learning_rate=0.5, seed=0, max_epochs=25, patience=24,
        )
        small = NetworkConfig(
            w_in_ms=105, stages=(),
            classifier=ClassifierSpec(kind="mlp", hidden_units=8,
                                      num_classes=3),
            learning_rate=0.5, seed=0, max_epochs=25, patience=24,
        )
        best, results = grid_search([big, small], train, valid)
        accuracies = {r.config.classifier.hidden_units: r.valid_accuracy
                      for r in results}
        if accuracies[16] == accuracies[8]:
            assert best.classifier.hidden_units == 8

    def test_results_report_weight_counts(self):
        train = separable_examples(12, seed=7)
        valid = separable_examples(6, seed=8)
        config = linear_config(lr=0.5, max_epochs=2)
        _, results = grid_search([config], train, valid)
        assert results[0].conv_weights == 0
        assert results[0].classifier_weights == 6 * 3

    def test_deterministic(self):
        train = separable_examples(12, seed=7)
        valid = separable_examples(6, seed=8)
        candidates = [linear_config(lr=0.5, max_epochs=3),
                      linear_config(lr=0.1, max_epochs=3)]
        first = grid_search(list(candidates), train, valid)
        second = grid_search(list(candidates), train, valid)
        assert first[0] == second[0]
        assert [r.valid_accuracy for r in first[1]] == [
            r.valid_accuracy for r in second[1]
        ]
