import numpy as np
import pytest

from rawphone import pipeline
from rawphone.cepstra import CepstralConfig
from rawphone.corpus import generate_corpus, make_phone_models
from rawphone.errors import StructureError
from rawphone.network import ClassifierSpec, NetworkConfig, stage


@pytest.fixture(scope="module")
def corpus():
    models = make_phone_models(3, noise_level=0.2)
    return generate_corpus(models, 8, (10, 14), seed=13)


def test_raw_inputs_are_window_normalized(corpus):
    utterances, _ = corpus
    inputs = pipeline.utterance_inputs(utterances[0], pipeline.RAW, 30,
                                       CepstralConfig())
    assert len(inputs) == len(utterances[0].labeling)
    for x in inputs:
        assert x.shape == (480, 1)
        assert abs(x.mean()) < 1e-10
        assert abs(x.std() - 1.0) < 1e-8


def test_cepstral_inputs_are_single_rows(corpus):
    utterances, _ = corpus
    inputs = pipeline.utterance_inputs(utterances[0], pipeline.CEPSTRAL, 30,
                                       CepstralConfig())
    assert len(inputs) == len(utterances[0].labeling)
    assert all(x.shape == (1, 351) for x in inputs)


def test_build_examples_pairs_windows_with_labels(corpus):
    utterances, _ = corpus
    examples = pipeline.build_examples(utterances[:2], pipeline.RAW, 30,
                                       CepstralConfig())
    want = sum(len(u.labeling) for u in utterances[:2])
    assert len(examples) == want
    labels = np.array([label for _, label in examples])
    reference = np.concatenate([u.labeling.labels for u in utterances[:2]])
    np.testing.assert_array_equal(labels, reference)


def test_check_feature_mode_rules():
    staged = NetworkConfig(
        w_in_ms=30,
        stages=(stage(kW=30, dW=10, d_out=4, pool_kW=3),),
        classifier=ClassifierSpec(kind="slp", num_classes=3),
    )
    flat = NetworkConfig(
        w_in_ms=105, stages=(),
        classifier=ClassifierSpec(kind="slp", num_classes=3),
    )
    pipeline.check_feature_mode(pipeline.RAW, staged)
    pipeline.check_feature_mode(pipeline.RAW, flat)
    pipeline.check_feature_mode(pipeline.CEPSTRAL, flat)
    with pytest.raises(StructureError):
        pipeline.check_feature_mode(pipeline.CEPSTRAL, staged)
    with pytest.raises(StructureError):
        pipeline.check_feature_mode("spectrogram", flat)


def test_training_priors_cover_training_split_only(corpus):
    utterances, manifest = corpus
    by_id = {u.utt_id: u for u in utterances}
    priors = pipeline.training_priors(by_id, manifest, 3)
    assert priors.shape == (3,)
    assert priors.sum() == pytest.approx(1.0)
    from rawphone.decoder import estimate_priors

    train_only = [by_id[i].labeling for i in manifest.train]
    np.testing.assert_allclose(priors, estimate_priors(train_only, 3))
