"""Command-line front end.

Subcommands: gen-data, extract-features, train, decode, evaluate,
grid-search, count-params, shape. Exit codes: 0 on success, 1 on a runtime
failure (with a diagnostic on stderr), 2 on a usage error.
"""
import argparse
import itertools
import os
import sys

import numpy as np

from . import pipeline
from .cepstra import CepstralConfig
from .corpus import (
    generate_corpus,
    labels_to_segments,
    make_phone_models,
    save_dataset,
    save_manifest,
)
from .decoder import HmmTopology, PhoneSequence, scale_likelihoods, viterbi_decode
from .errors import DataFormatError, StructureError, TrainingDivergedError
from .metrics import ScoreReport, corpus_phone_error_rate, frame_accuracy
from .network import (
    config_from_mapping,
    config_to_mapping,
    load_config,
    output_shape,
    param_count,
    save_config,
    with_seed,
)
from .tensorio import load_checkpoint, load_tensor, save_checkpoint, save_tensor
from .training import grid_search, sgd_train, write_training_log

DECODED_FILENAME = "decoded.txt"
PRIORS_FILENAME = "priors.txt"
CHECKPOINT_FILENAME = "model.ckpt"


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)


def _load_experiment_config(args):
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = with_seed(config, args.seed)
    return config


def _classifier_input_dim(config, mode: str) -> int:
    if mode == pipeline.CEPSTRAL:
        return CepstralConfig().stacked_dim()
    return output_shape(config).classifier_input_dim


def cmd_gen_data(args) -> int:
    low, high = _parse_frames_range(args.frames)
    models = make_phone_models(args.classes, noise_level=args.noise)
    utterances, manifest = generate_corpus(
        models, args.utts, (low, high), seed=args.seed
    )
    _ensure_dir(args.out)
    save_dataset(os.path.join(args.out, pipeline.DATASET_FILENAME),
                 utterances, num_classes=len(models))
    save_manifest(os.path.join(args.out, pipeline.MANIFEST_FILENAME), manifest)
    _say(args, f"wrote {len(utterances)} utterances "
               f"({len(manifest.train)} train, {len(manifest.valid)} valid, "
               f"{len(manifest.test)} test) to {args.out}")
    return 0


def _parse_frames_range(text: str):
    low, sep, high = text.partition(":")
    if not sep:
        raise StructureError(f"frames range must look like LOW:HIGH, got {text!r}")
    try:
        return int(low), int(high)
    except ValueError as err:
        raise StructureError(f"bad frames range {text!r}") from err


def cmd_extract_features(args) -> int:
    by_id, _, manifest = pipeline.load_corpus_dir(args.data)
    config = CepstralConfig()
    _ensure_dir(args.out)
    count = 0
    for utt_id in manifest.train + manifest.valid + manifest.test:
        feats = pipeline.utterance_inputs(
            by_id[utt_id], pipeline.CEPSTRAL, 0.0, config
        )
        save_tensor(os.path.join(args.out, f"{utt_id}.t2"), np.vstack(feats))
        count += 1
    _say(args, f"wrote {count} feature files ({config.stacked_dim()} dims) "
               f"to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _load_experiment_config(args)
    pipeline.check_feature_mode(args.features, config)
    by_id, num_classes, manifest = pipeline.load_corpus_dir(args.data)
    if config.classifier.num_classes != num_classes:
        raise StructureError(
            f"config expects {config.classifier.num_classes} classes but the "
            f"dataset has {num_classes}"
        )
    cepstral = CepstralConfig()
    train = pipeline.build_examples(
        pipeline.split_utterances(by_id, manifest, "train"),
        args.features, config.w_in_ms, cepstral,
    )
    valid = pipeline.build_examples(
        pipeline.split_utterances(by_id, manifest, "valid"),
        args.features, config.w_in_ms, cepstral,
    )
    params, log = sgd_train(config, train, valid)
    _ensure_dir(args.out)
    save_checkpoint(os.path.join(args.out, CHECKPOINT_FILENAME), config, params)
    save_config(config, os.path.join(args.out, "config.cfg"))
    write_training_log(os.path.join(args.out, "train_log.tsv"), log)
    from .reporting import save_training_curves

    save_training_curves(log, os.path.join(args.out, "train_curve.png"))
    best = max(entry.valid_accuracy for entry in log)
    _say(args, f"trained {len(log)} epochs; best validation frame accuracy "
               f"{best:.4f}; artifacts in {args.out}")
    return 0


def cmd_decode(args) -> int:
    config = load_config(args.config)
    pipeline.check_feature_mode(args.features, config)
    by_id, num_classes, manifest = pipeline.load_corpus_dir(args.data)
    params = load_checkpoint(args.model, config)
    priors = pipeline.training_priors(by_id, manifest, num_classes)
    topology = HmmTopology(num_phones=num_classes)
    cepstral = CepstralConfig()
    _ensure_dir(args.out)
    posterior_dir = os.path.join(args.out, "posteriors")
    _ensure_dir(posterior_dir)
    lines = []
    for utt_id in manifest.split(args.split):
        posteriors = pipeline.utterance_posteriors(
            config, params, by_id[utt_id], args.features, cepstral
        )
        save_tensor(os.path.join(posterior_dir, f"{utt_id}.t2"), posteriors)
        decoded = viterbi_decode(scale_likelihoods(posteriors, priors), topology)
        phones = " ".join(str(p) for p in decoded.phones)
        bounds = " ".join(str(b) for b in decoded.boundaries)
        lines.append(f"{utt_id} {phones} | {bounds}")
    with open(os.path.join(args.out, DECODED_FILENAME), "w",
              encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    with open(os.path.join(args.out, PRIORS_FILENAME), "w",
              encoding="utf-8") as handle:
        for value in priors:
            handle.write(f"{value!r}\n")
    _say(args, f"decoded {len(lines)} utterances from the {args.split} split "
               f"into {args.out}")
    return 0


def parse_decoded_line(line: str):
    head, sep, tail = line.partition("|")
    tokens = head.split()
    if not sep or not tokens:
        raise DataFormatError(f"malformed decoded line: {line!r}")
    utt_id = tokens[0]
    phones = tuple(int(t) for t in tokens[1:])
    boundaries = tuple(int(t) for t in tail.split())
    return utt_id, PhoneSequence(phones=phones, boundaries=boundaries)


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    by_id, num_classes, manifest = pipeline.load_corpus_dir(args.data)
    decoded = {}
    with open(args.decoded, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                utt_id, sequence = parse_decoded_line(line)
                decoded[utt_id] = sequence
    split_ids = manifest.split(args.split)
    predicted_all = []
    reference_all = []
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    pairs = []
    for utt_id in split_ids:
        if utt_id not in decoded:
            raise StructureError(f"decoded output is missing utterance {utt_id}")
        posteriors = load_tensor(os.path.join(args.posteriors, f"{utt_id}.t2"))
        predicted = posteriors.argmax(axis=1)
        reference = by_id[utt_id].labeling.labels
        if predicted.size != reference.size:
            raise StructureError(
                f"{utt_id}: {predicted.size} posterior frames for "
                f"{reference.size} labels"
            )
        predicted_all.append(predicted)
        reference_all.append(reference)
        np.add.at(confusion, (reference, predicted), 1)
        pairs.append((decoded[utt_id], by_id[utt_id].reference))
    accuracy = frame_accuracy(np.concatenate(predicted_all),
                              np.concatenate(reference_all))
    rate = corpus_phone_error_rate(pairs)
    counts = param_count(
        config, input_dim=_classifier_input_dim(config, args.features)
    )
    score = ScoreReport(
        frame_accuracy=accuracy,
        per=rate.per,
        substitutions=rate.substitutions,
        deletions=rate.deletions,
        insertions=rate.insertions,
        conv_params=counts.conv_weights,
        classifier_params=counts.classifier_weights,
    )
    from .reporting import (
        report_rows,
        save_confusion,
        save_score_summary,
        write_report,
    )

    rows = report_rows(args.features, config, counts, score)
    _ensure_dir(args.out)
    write_report(
        os.path.join(args.out, "report.txt"),
        os.path.join(args.out, "report.tsv"),
        rows,
    )
    save_confusion(confusion, os.path.join(args.out, "confusion.png"))
    save_score_summary(rows, os.path.join(args.out, "report.png"))
    _say(args, f"{args.split} split: frame accuracy {accuracy:.4f}, "
               f"PER {rate.per:.4f}; report in {args.out}")
    return 0


def _parse_grid_file(path):
    axes = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, values = line.partition("=")
            if not sep:
                raise StructureError(
                    f"grid line {lineno} is not 'key = v1,v2,...': {raw!r}"
                )
            choices = [v.strip() for v in values.split(",") if v.strip()]
            if not choices:
                raise StructureError(f"grid line {lineno} lists no values")
            axes.append((key.strip(), choices))
    if not axes:
        raise StructureError("grid file defines no axes")
    return axes


def expand_grid(base_config, axes):
    """Cartesian product of grid axes applied over the base config."""
    base = config_to_mapping(base_config)
    candidates = []
    for combo in itertools.product(*(choices for _, choices in axes)):
        mapping = dict(base)
        for (key, _), value in zip(axes, combo):
            mapping[key] = value
        candidates.append(config_from_mapping(mapping))
    return candidates


def cmd_grid_search(args) -> int:
    base = _load_experiment_config(args)
    pipeline.check_feature_mode(args.features, base)
    candidates = expand_grid(base, _parse_grid_file(args.grid))
    w_ins = {candidate.w_in_ms for candidate in candidates}
    if args.features == pipeline.RAW and len(w_ins) != 1:
        raise StructureError(
            "grid axes must keep w_in_ms fixed so candidates share one "
            "window set"
        )
    by_id, num_classes, manifest = pipeline.load_corpus_dir(args.data)
    cepstral = CepstralConfig()
    train = pipeline.build_examples(
        pipeline.split_utterances(by_id, manifest, "train"),
        args.features, base.w_in_ms, cepstral,
    )
    valid = pipeline.build_examples(
        pipeline.split_utterances(by_id, manifest, "valid"),
        args.features, base.w_in_ms, cepstral,
    )
    best, results = grid_search(candidates, train, valid)
    _ensure_dir(args.out)
    save_config(best, os.path.join(args.out, "best.cfg"))
    lines = ["candidate\tvalid_accuracy\tconv_params\tclassifier_params"
             "\ttotal_params\tstages\tclassifier"]
    for i, result in enumerate(results):
        cfg = result.config
        stages = ";".join(
            f"kW{s.kW}dW{s.dW}d{s.d_out}p{s.pool_kW}s{s.pool_stride}"
            for s in cfg.stages
        ) or "-"
        lines.append(
            f"{i}\t{result.valid_accuracy!r}\t{result.conv_weights}"
            f"\t{result.classifier_weights}\t{result.total_weights}"
            f"\t{stages}\t{cfg.classifier.kind}"
        )
    with open(os.path.join(args.out, "grid_report.tsv"), "w",
              encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    from .reporting import save_grid_scatter

    save_grid_scatter(results, os.path.join(args.out, "grid_results.png"))
    best_result = max(results, key=lambda r: r.valid_accuracy)
    _say(args, f"searched {len(results)} candidates; best validation frame "
               f"accuracy {best_result.valid_accuracy:.4f}; report in {args.out}")
    return 0


def cmd_count_params(args) -> int:
    config = load_config(args.config)
    input_dim = args.input_dim
    counts = param_count(config, input_dim=input_dim)
    print(f"conv params (weights only): {counts.conv_weights}")
    print(f"conv params (weights + biases): {counts.conv_with_biases}")
    print(f"classifier params (weights only): {counts.classifier_weights}")
    print(f"classifier params (weights + biases): {counts.classifier_with_biases}")
    print(f"total params (weights only): {counts.total_weights}")
    print(f"total params (weights + biases): {counts.total_with_biases}")
    return 0


def cmd_shape(args) -> int:
    config = load_config(args.config)
    trace = output_shape(config, rate=args.rate)
    print(f"input: {trace.input_frames} frames x {trace.input_channels} channels")
    for i, (spec, shape) in enumerate(zip(config.stages, trace.stages), start=1):
        print(
            f"stage {i}: conv kW={spec.kW} dW={spec.dW} -> "
            f"{shape.conv_frames} frames x {shape.channels} channels; "
            f"pool kW={spec.pool_kW} stride={spec.pool_stride} -> "
            f"{shape.pool_frames} frames"
        )
    print(f"classifier input: {trace.classifier_input_dim}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rawphone",
        description="Phone classification from raw waveforms, with a "
                    "cepstral baseline and HMM decoding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False, data=False, out=False, seed=False,
               features=False):
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")
        if config:
            p.add_argument("--config", required=True,
                           help="network config file")
        if data:
            p.add_argument("--data", required=True,
                           help="directory holding dataset.bin and splits.json")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the base random seed")
        if features:
            p.add_argument("--features", choices=pipeline.FEATURE_MODES,
                           default=pipeline.RAW, help="network input features")

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    common(p, out=True)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--utts", type=int, default=100)
    p.add_argument("--frames", default="40:80",
                   help="utterance length range in frames, LOW:HIGH")
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("extract-features",
                       help="write stacked cepstral features per utterance")
    common(p, data=True, out=True)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("train", help="train a network on a corpus")
    common(p, config=True, data=True, out=True, seed=True, features=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode",
                       help="write posteriors and decoded phone sequences")
    common(p, config=True, data=True, out=True, features=True)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--split", choices=("train", "valid", "test"),
                   default="test")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="score decoded output and write reports")
    common(p, config=True, data=True, out=True, features=True)
    p.add_argument("--decoded", required=True, help="decoded.txt from decode")
    p.add_argument("--posteriors", required=True,
                   help="posterior directory from decode")
    p.add_argument("--split", choices=("train", "valid", "test"),
                   default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search", help="train every config in a grid")
    common(p, config=True, data=True, out=True, seed=True, features=True)
    p.add_argument("--grid", required=True,
                   help="file of 'key = v1,v2,...' axes over the base config")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("count-params", help="print parameter counts")
    common(p, config=True)
    p.add_argument("--input-dim", type=int, default=None,
                   help="classifier input size for classifier-only configs")
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("shape", help="print the stage-by-stage shape trace")
    common(p, config=True)
    p.add_argument("--rate", type=int, default=16000)
    p.set_defaults(func=cmd_shape)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StructureError, DataFormatError, TrainingDivergedError,
            FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
