"""Phone classification from raw waveforms.

The package trains small convolutional networks directly on speech samples,
compares them against a cepstral baseline, and decodes framewise posteriors
into phone sequences with a duration-constrained HMM.
"""
from .cepstra import CepstralConfig, cepstral_features
from .corpus import (
    SyntheticPhoneModel,
    Utterance,
    generate_corpus,
    labels_to_segments,
    load_dataset,
    load_manifest,
    make_phone_models,
    save_dataset,
    save_manifest,
)
from .decoder import (
    HmmTopology,
    PhoneSequence,
    estimate_priors,
    scale_likelihoods,
    viterbi_decode,
)
from .errors import DataFormatError, StructureError, TrainingDivergedError
from .framing import FrameLabeling, SampleStream, frame_stream, normalize_window
from .metrics import (
    EditCounts,
    ScoreReport,
    corpus_phone_error_rate,
    edit_counts,
    frame_accuracy,
    phone_error_rate,
)
from .network import (
    ClassifierSpec,
    ConvStageSpec,
    NetworkConfig,
    Parameters,
    find_stride_assignments,
    init_parameters,
    load_config,
    network_forward,
    output_shape,
    param_count,
    parse_config,
    save_config,
    stage,
)
from .seeds import derived_seed, named_rng
from .tensorio import load_checkpoint, load_tensor, save_checkpoint, save_tensor
from .training import EpochStats, GridResult, grid_search, sgd_train

__version__ = "0.1.0"

__all__ = [
    "CepstralConfig",
    "ClassifierSpec",
    "ConvStageSpec",
    "DataFormatError",
    "EditCounts",
    "EpochStats",
    "FrameLabeling",
    "GridResult",
    "HmmTopology",
    "NetworkConfig",
    "Parameters",
    "PhoneSequence",
    "SampleStream",
    "ScoreReport",
    "StructureError",
    "SyntheticPhoneModel",
    "TrainingDivergedError",
    "Utterance",
    "cepstral_features",
    "corpus_phone_error_rate",
    "derived_seed",
    "edit_counts",
    "estimate_priors",
    "find_stride_assignments",
    "frame_accuracy",
    "frame_stream",
    "generate_corpus",
    "grid_search",
    "init_parameters",
    "labels_to_segments",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "load_manifest",
    "load_tensor",
    "make_phone_models",
    "named_rng",
    "network_forward",
    "normalize_window",
    "output_shape",
    "param_count",
    "parse_config",
    "phone_error_rate",
    "save_checkpoint",
    "save_config",
    "save_dataset",
    "save_manifest",
    "save_tensor",
    "scale_likelihoods",
    "sgd_train",
    "stage",
    "viterbi_decode",
    "__version__",
]
