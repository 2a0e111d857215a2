"""Windowing of labeled sample streams into per-frame raw input examples.

A stream of speech samples is cut into one window per analysis frame. Frames
advance by `shift_ms` (10 ms canonically) and each window of `w_in_ms` is
centered on its frame, so the window count always equals the label count.
Windows that reach past either end of the stream are filled by replicating
the edge sample.
"""
from dataclasses import dataclass

import numpy as np

from .errors import StructureError

DEFAULT_RATE = 16000
DEFAULT_SHIFT_MS = 10.0

# Windows with population standard deviation below this are zeroed instead
# of divided.
DEGENERATE_STD = 1e-8


@dataclass(frozen=True)
class SampleStream:
    """A mono waveform with its sampling rate in Hz."""

    samples: np.ndarray
    rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise StructureError("sample stream must be a non-empty 1-D array")
        if self.rate <= 0:
            raise StructureError(f"sampling rate must be positive, got {self.rate}")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class FrameLabeling:
    """One class label per frame, each in [0, num_classes)."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise StructureError("frame labels must be a 1-D array")
        if self.num_classes < 1:
            raise StructureError("num_classes must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise StructureError(
                f"frame labels must lie in [0, {self.num_classes})"
            )
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.labels.size)


@dataclass(frozen=True)
class RawWindow:
    """A window of raw samples, its frame label, and the center sample index."""

    samples: np.ndarray
    label: int
    center_time: int


def duration_to_samples(duration_ms: float, rate: int) -> int:
    """Convert a duration in milliseconds to a whole number of samples.

    Raises:
        StructureError: if the duration is not an integer sample count.
    """
    exact = duration_ms * rate / 1000.0
    rounded = round(exact)
    if abs(exact - rounded) > 1e-9 or rounded < 1:
        raise StructureError(
            f"{duration_ms} ms is not a positive whole number of samples "
            f"at {rate} Hz"
        )
    return int(rounded)


def frame_count(num_samples: int, rate: int, shift_ms: float = DEFAULT_SHIFT_MS) -> int:
    """Number of whole frames in a stream of `num_samples` samples."""
    shift = duration_to_samples(shift_ms, rate)
    return num_samples // shift


def centered_frames(samples: np.ndarray, frame_len: int, shift: int) -> np.ndarray:
    """Cut a waveform into frames of `frame_len` centered on the shift grid.

    Frame t is centered on sample t*shift + shift//2. Content outside the
    stream is filled by edge-sample replication.

    Args:
        samples: 1-D waveform.
        frame_len: samples per output frame.
        shift: samples between frame centers.

    Returns:
        Array of shape (num_frames, frame_len), float64.
    """
    samples = np.asarray(samples, dtype=np.float64)
    count = samples.size // shift
    if count < 1:
        raise StructureError(
            f"stream of {samples.size} samples is shorter than one frame "
            f"({shift} samples)"
        )
    offset = (shift - frame_len) // 2
    pad_left = max(0, -offset)
    last_end = (count - 1) * shift + offset + frame_len
    pad_right = max(0, last_end - samples.size)
    padded = np.pad(samples, (pad_left, pad_right), mode="edge")
    base = padded[pad_left + offset:]
    stride = base.strides[0]
    view = np.lib.stride_tricks.as_strided(
        base, shape=(count, frame_len), strides=(stride * shift, stride)
    )
    return view.copy()


def frame_stream(
    stream: SampleStream,
    labeling: FrameLabeling,
    w_in_ms: float,
    shift_ms: float = DEFAULT_SHIFT_MS,
) -> list[RawWindow]:
    """Cut a labeled stream into one raw window per frame.

    Args:
        stream: the waveform to window.
        labeling: one label per frame; its length must equal the stream's
            frame count.
        w_in_ms: window duration. Must be at least `shift_ms` and a whole
            number of samples at the stream's rate.
        shift_ms: frame shift, 10 ms canonically.

    Returns:
        A list of RawWindow, one per frame, in time order. Windows are not
        normalized; see `normalize_window`.
    """
    if w_in_ms < shift_ms:
        raise StructureError(
            f"window of {w_in_ms} ms is shorter than the frame shift "
            f"({shift_ms} ms)"
        )
    win = duration_to_samples(w_in_ms, stream.rate)
    shift = duration_to_samples(shift_ms, stream.rate)
    count = stream.samples.size // shift
    if count < 1:
        raise StructureError("stream is shorter than one frame")
    if len(labeling) != count:
        raise StructureError(
            f"labeling has {len(labeling)} frames but the stream has {count}"
        )
    frames = centered_frames(stream.samples, win, shift)
    half_shift = shift // 2
    return [
        RawWindow(
            samples=frames[t],
            label=int(labeling.labels[t]),
            center_time=t * shift + half_shift,
        )
        for t in range(count)
    ]


def normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Normalize each row to zero mean and unit population variance.

    Rows whose population standard deviation falls below DEGENERATE_STD are
    set to all zeros.
    """
    mat = np.asarray(mat, dtype=np.float64)
    mean = mat.mean(axis=-1, keepdims=True)
    std = mat.std(axis=-1, keepdims=True)
    degenerate = std < DEGENERATE_STD
    safe = np.where(degenerate, 1.0, std)
    out = (mat - mean) / safe
    if degenerate.any():
        out = np.where(degenerate, 0.0, out)
    return out


def normalize_window(window: RawWindow) -> RawWindow:
    """Return the window with samples normalized to zero mean, unit variance."""
    return RawWindow(
        samples=normalize_rows(window.samples),
        label=window.label,
        center_time=window.center_time,
    )
