"""Synthetic labeled speech: tone-complex phone classes with a binary dataset.

Each class is a recipe of sinusoidal partials plus Gaussian noise. An
utterance is a random sequence of phone segments (no immediate repeats, so
run-length collapsing the frame labels recovers the reference segmentation),
rendered at 16 kHz with 10 ms frames. Generation is deterministic per seed,
with one derived seed per utterance.
"""
import json
import struct
from dataclasses import dataclass

import numpy as np

from .decoder import PhoneSequence
from .errors import DataFormatError, StructureError
from .framing import FrameLabeling, SampleStream
from .seeds import named_rng

DATASET_MAGIC = b"RPDS"
DATASET_VERSION = 1

FRAME_MS = 10
MIN_SEGMENT_FRAMES = 3


@dataclass(frozen=True)
class SyntheticPhoneModel:
    """Spectral recipe of one class: partials, noise, and segment durations."""

    partials: tuple            # ((freq_hz, amplitude), ...)
    noise_level: float
    min_frames: int
    max_frames: int

    def __post_init__(self):
        object.__setattr__(
            self,
            "partials",
            tuple((float(f), float(a)) for f, a in self.partials),
        )
        if not self.partials:
            raise StructureError("each phone model needs at least one partial")
        if self.noise_level < 0:
            raise StructureError("noise level must be non-negative")
        if self.min_frames < MIN_SEGMENT_FRAMES:
            raise StructureError(
                f"segment durations below {MIN_SEGMENT_FRAMES} frames are not "
                f"decodable"
            )
        if self.max_frames < self.min_frames:
            raise StructureError("max_frames must be at least min_frames")


@dataclass(frozen=True)
class Utterance:
    """A waveform with its frame labels and reference segmentation."""

    utt_id: str
    stream: SampleStream
    labeling: FrameLabeling
    reference: PhoneSequence


@dataclass(frozen=True)
class SplitManifest:
    """Utterance ids per split; train and valid are never empty."""

    train: tuple
    valid: tuple
    test: tuple

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "valid", tuple(self.valid))
        object.__setattr__(self, "test", tuple(self.test))
        if not self.train or not self.valid:
            raise StructureError("train and valid splits must be non-empty")
        everything = self.train + self.valid + self.test
        if len(set(everything)) != len(everything):
            raise StructureError("splits must be disjoint")

    def split(self, name: str) -> tuple:
        if name not in ("train", "valid", "test"):
            raise StructureError(f"unknown split: {name!r}")
        return getattr(self, name)


def make_phone_models(
    num_classes: int,
    noise_level: float = 0.3,
    rate: int = 16000,
    min_frames: int = 5,
    max_frames: int = 12,
) -> list:
    """Evenly spaced tone complexes: fundamental plus a half-amplitude octave."""
    if num_classes < 1:
        raise StructureError("need at least one class")
    lowest, highest = 400.0, 3600.0
    if num_classes == 1:
        fundamentals = [lowest]
    else:
        step = (highest - lowest) / (num_classes - 1)
        fundamentals = [lowest + k * step for k in range(num_classes)]
    models = []
    for f0 in fundamentals:
        partials = [(f0, 1.0)]
        if 2 * f0 < rate / 2:
            partials.append((2 * f0, 0.5))
        models.append(
            SyntheticPhoneModel(
                partials=tuple(partials),
                noise_level=noise_level,
                min_frames=min_frames,
                max_frames=max_frames,
            )
        )
    return models


def _sample_segments(models, target_frames: int, rng) -> list:
    """Segment list [(class, frames), ...] totalling exactly target_frames."""
    global_min = min(m.min_frames for m in models)
    if target_frames < global_min:
        raise StructureError(
            f"an utterance of {target_frames} frames cannot fit any segment"
        )
    segments = []
    previous = None
    total = 0
    while total < target_frames:
        remaining = target_frames - total
        choices = [
            k for k, m in enumerate(models)
            if k != previous and m.min_frames <= remaining
        ]
        if not choices:
            # Nothing fits: absorb the tail into the current segment.
            phone, frames = segments[-1]
            segments[-1] = (phone, frames + remaining)
            break
        k = choices[int(rng.integers(len(choices)))]
        model = models[k]
        frames = int(rng.integers(model.min_frames, model.max_frames + 1))
        frames = min(frames, remaining)
        if remaining - frames < global_min:
            frames = remaining
        segments.append((k, frames))
        previous = k
        total += frames
    return segments


def _render(models, segments, rate: int, rng) -> np.ndarray:
    spf = rate * FRAME_MS // 1000
    total_frames = sum(frames for _, frames in segments)
    wave = np.zeros(total_frames * spf, dtype=np.float64)
    start = 0
    for phone, frames in segments:
        stop = start + frames * spf
        n = np.arange(start, stop, dtype=np.float64)
        model = models[phone]
        tone = np.zeros(stop - start)
        for freq, amp in model.partials:
            if freq >= rate / 2:
                raise StructureError(
                    f"partial at {freq} Hz is not representable at {rate} Hz"
                )
            tone += amp * np.sin(2.0 * np.pi * freq * n / rate)
        if model.noise_level > 0:
            tone += model.noise_level * rng.standard_normal(stop - start)
        wave[start:stop] = tone
        start = stop
    return wave.astype(np.float32)


def generate_corpus(
    models,
    num_utterances: int,
    frames_range: tuple,
    seed: int,
    rate: int = 16000,
):
    """Generate utterances and an 80/10/10 utterance-level split.

    Args:
        models: one SyntheticPhoneModel per class.
        num_utterances: at least 2 (train and valid must be non-empty).
        frames_range: inclusive (low, high) utterance length in frames.
        seed: base seed; every utterance derives its own stream from it.

    Returns:
        (utterances, manifest) with utterances in id order.
    """
    models = list(models)
    if not models:
        raise StructureError("need at least one phone model")
    low, high = frames_range
    if low > high or low < min(m.min_frames for m in models):
        raise StructureError(
            f"frames range {frames_range} cannot fit the segment durations"
        )
    if num_utterances < 2:
        raise StructureError("need at least 2 utterances to build splits")
    spf = rate * FRAME_MS // 1000
    num_classes = len(models)
    utterances = []
    for i in range(num_utterances):
        rng = named_rng(seed, f"utt-{i}")
        target = int(rng.integers(low, high + 1))
        segments = _sample_segments(models, target, rng)
        wave = _render(models, segments, rate, rng)
        labels = np.concatenate(
            [np.full(frames, phone, dtype=np.int64) for phone, frames in segments]
        )
        boundaries = np.cumsum([0] + [frames for _, frames in segments[:-1]])
        utt_id = f"utt{i:05d}"
        utterances.append(
            Utterance(
                utt_id=utt_id,
                stream=SampleStream(samples=wave, rate=rate),
                labeling=FrameLabeling(labels=labels, num_classes=num_classes),
                reference=PhoneSequence(
                    phones=tuple(phone for phone, _ in segments),
                    boundaries=tuple(int(b) for b in boundaries),
                ),
            )
        )
        assert wave.size == labels.size * spf
    split_rng = named_rng(seed, "split")
    order = split_rng.permutation(num_utterances)
    ids = [utterances[j].utt_id for j in order]
    n_valid = max(1, num_utterances // 10)
    n_test = num_utterances // 10
    n_train = num_utterances - n_valid - n_test
    if n_train < 1:
        raise StructureError("too few utterances for a non-empty training split")
    manifest = SplitManifest(
        train=tuple(sorted(ids[:n_train])),
        valid=tuple(sorted(ids[n_train : n_train + n_valid])),
        test=tuple(sorted(ids[n_train + n_valid :])),
    )
    return utterances, manifest


def labels_to_segments(labels) -> PhoneSequence:
    """Run-length collapse of frame labels into a PhoneSequence."""
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    if labels.size == 0:
        raise StructureError("cannot collapse an empty labeling")
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], change])
    return PhoneSequence(
        phones=tuple(int(labels[s]) for s in starts),
        boundaries=tuple(int(s) for s in starts),
    )


# ---------------------------------------------------------------------------
# Dataset file: DATASET_MAGIC, u16 version, u32 num_classes, u32 count, then
# per utterance: u32 id length + utf-8 id, u32 rate, u32 sample count,
# f32 samples, u32 frame count, u16 labels, u32 segment count, then
# (u16 phone, u32 start frame) per segment. Everything little-endian.


def save_dataset(path, utterances, num_classes: int) -> None:
    with open(path, "wb") as handle:
        handle.write(DATASET_MAGIC)
        handle.write(struct.pack("<HII", DATASET_VERSION, num_classes,
                                 len(utterances)))
        for utt in utterances:
            ident = utt.utt_id.encode("utf-8")
            handle.write(struct.pack("<I", len(ident)))
            handle.write(ident)
            samples = np.asarray(utt.stream.samples, dtype="<f4")
            handle.write(struct.pack("<II", utt.stream.rate, samples.size))
            handle.write(samples.tobytes())
            labels = np.asarray(utt.labeling.labels, dtype="<u2")
            handle.write(struct.pack("<I", labels.size))
            handle.write(labels.tobytes())
            handle.write(struct.pack("<I", len(utt.reference.phones)))
            for phone, boundary in zip(utt.reference.phones,
                                       utt.reference.boundaries):
                handle.write(struct.pack("<HI", phone, boundary))


def _read_exact(handle, count: int, what: str) -> bytes:
    offset = handle.tell()
    data = handle.read(count)
    if len(data) != count:
        raise DataFormatError(
            f"truncated dataset: expected {count} bytes for {what}",
            offset=offset,
        )
    return data


def load_dataset(path):
    """Load a dataset file.

    Returns:
        (utterances, num_classes).

    Raises:
        DataFormatError: on a bad magic, an unsupported version, truncation,
            or trailing bytes.
    """
    with open(path, "rb") as handle:
        magic = _read_exact(handle, 4, "magic")
        if magic != DATASET_MAGIC:
            raise DataFormatError(f"not a dataset file (magic {magic!r})", offset=0)
        version, num_classes, count = struct.unpack(
            "<HII", _read_exact(handle, 10, "header")
        )
        if version != DATASET_VERSION:
            raise DataFormatError(
                f"dataset version {version} is not supported "
                f"(expected {DATASET_VERSION})"
            )
        utterances = []
        for _ in range(count):
            (id_len,) = struct.unpack("<I", _read_exact(handle, 4, "id length"))
            utt_id = _read_exact(handle, id_len, "utterance id").decode("utf-8")
            rate, num_samples = struct.unpack(
                "<II", _read_exact(handle, 8, "stream header")
            )
            samples = np.frombuffer(
                _read_exact(handle, 4 * num_samples, "samples"), dtype="<f4"
            ).copy()
            (num_frames,) = struct.unpack(
                "<I", _read_exact(handle, 4, "frame count")
            )
            labels = np.frombuffer(
                _read_exact(handle, 2 * num_frames, "labels"), dtype="<u2"
            ).astype(np.int64)
            (num_segments,) = struct.unpack(
                "<I", _read_exact(handle, 4, "segment count")
            )
            phones = []
            boundaries = []
            for _ in range(num_segments):
                phone, boundary = struct.unpack(
                    "<HI", _read_exact(handle, 6, "segment")
                )
                phones.append(phone)
                boundaries.append(boundary)
            utterances.append(
                Utterance(
                    utt_id=utt_id,
                    stream=SampleStream(samples=samples, rate=rate),
                    labeling=FrameLabeling(labels=labels, num_classes=num_classes),
                    reference=PhoneSequence(
                        phones=tuple(phones), boundaries=tuple(boundaries)
                    ),
                )
            )
        if handle.read(1):
            raise DataFormatError(
                "trailing bytes after the last utterance", offset=handle.tell() - 1
            )
    return utterances, num_classes


def save_manifest(path, manifest: SplitManifest) -> None:
    payload = {
        "train": list(manifest.train),
        "valid": list(manifest.valid),
        "test": list(manifest.test),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_manifest(path) -> SplitManifest:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise DataFormatError(f"malformed split manifest: {err}") from err
    try:
        return SplitManifest(
            train=payload["train"], valid=payload["valid"], test=payload["test"]
        )
    except (KeyError, TypeError) as err:
        raise DataFormatError(f"malformed split manifest: {err}") from err
