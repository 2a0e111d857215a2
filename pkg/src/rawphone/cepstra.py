"""Cepstral baseline features: mel filterbank cepstra, deltas, frame stacking.

The pipeline is Hamming window -> power spectrum -> triangular mel
filterbank -> log (floored) -> orthonormal DCT-II, followed by delta and
delta-delta appending and fixed-context frame stacking. Analysis frames are
centered on the same 10 ms grid as the raw windowing code so that feature
frames align one-to-one with frame labels.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import StructureError
from .framing import SampleStream, centered_frames, duration_to_samples

# Floor applied to filterbank energies before the log.
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class CepstralConfig:
    """Settings for the cepstral feature pipeline.

    Attributes:
        window_ms: analysis window duration, 25 ms canonically.
        shift_ms: frame shift, 10 ms canonically.
        num_coeffs: cepstral coefficients kept per frame.
        num_mel_filters: triangular filters in the mel filterbank.
        fft_size: FFT length; must be at least the window length in samples.
        delta_context: half-width of the delta regression window.
        stack_context: frames stacked around each frame (odd).
    """

    window_ms: float = 25.0
    shift_ms: float = 10.0
    num_coeffs: int = 13
    num_mel_filters: int = 26
    fft_size: int = 512
    delta_context: int = 2
    stack_context: int = 9

    def __post_init__(self):
        if self.num_coeffs < 1 or self.num_coeffs > self.num_mel_filters:
            raise StructureError(
                "num_coeffs must lie in [1, num_mel_filters]"
            )
        if self.delta_context < 1:
            raise StructureError("delta_context must be at least 1")
        if self.stack_context < 1 or self.stack_context % 2 == 0:
            raise StructureError("stack_context must be odd and positive")
        if self.window_ms < self.shift_ms:
            raise StructureError("analysis window must cover at least one shift")

    def stacked_dim(self) -> int:
        return 3 * self.num_coeffs * self.stack_context


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, fft_size: int, rate: int) -> np.ndarray:
    """Triangular unit-peak mel filterbank over the rfft bins.

    Returns:
        Array of shape (num_filters, fft_size // 2 + 1).
    """
    if num_filters < 1:
        raise StructureError("need at least one mel filter")
    edges = mel_to_hz(
        np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2.0), num_filters + 2)
    )
    bin_freqs = np.arange(fft_size // 2 + 1) * rate / fft_size
    bank = np.zeros((num_filters, bin_freqs.size))
    for m in range(num_filters):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def compute_static_cepstra(stream: SampleStream, config: CepstralConfig) -> np.ndarray:
    """Static cepstra for every 10 ms frame of the stream.

    Args:
        stream: waveform to analyze. Must be at least one analysis window
            long.
        config: pipeline settings.

    Returns:
        Array of shape (num_frames, num_coeffs) where num_frames is the
        stream's frame count at `config.shift_ms`.
    """
    win = duration_to_samples(config.window_ms, stream.rate)
    shift = duration_to_samples(config.shift_ms, stream.rate)
    if config.fft_size < win:
        raise StructureError(
            f"fft_size {config.fft_size} is smaller than the analysis window "
            f"({win} samples)"
        )
    if stream.samples.size < win:
        raise StructureError(
            f"stream of {stream.samples.size} samples is shorter than one "
            f"analysis window ({win} samples)"
        )
    frames = centered_frames(stream.samples, win, shift)
    frames = frames * np.hamming(win)
    spectrum = np.fft.rfft(frames, n=config.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    bank = mel_filterbank(config.num_mel_filters, config.fft_size, stream.rate)
    energies = power @ bank.T
    log_energies = np.log(np.maximum(energies, LOG_FLOOR))
    cepstra = scipy.fft.dct(log_energies, type=2, norm="ortho", axis=1)
    return cepstra[:, : config.num_coeffs]


def delta_sequence(feats: np.ndarray, context: int) -> np.ndarray:
    """Regression deltas over +-context frames with edge replication."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise StructureError("feature sequence must be a non-empty 2-D array")
    padded = np.pad(feats, ((context, context), (0, 0)), mode="edge")
    num = np.zeros_like(feats)
    for d in range(1, context + 1):
        num += d * (padded[context + d : context + d + feats.shape[0]]
                    - padded[context - d : context - d + feats.shape[0]])
    denom = 2.0 * sum(d * d for d in range(1, context + 1))
    return num / denom


def append_deltas(static: np.ndarray, config: CepstralConfig) -> np.ndarray:
    """Append deltas and delta-deltas; output dim is three times the input."""
    deltas = delta_sequence(static, config.delta_context)
    ddeltas = delta_sequence(deltas, config.delta_context)
    return np.concatenate([static, deltas, ddeltas], axis=1)


def stack_context(feats: np.ndarray, context: int) -> np.ndarray:
    """Stack `context` consecutive frames around each frame (edge replicated).

    Args:
        feats: (num_frames, dim) feature sequence.
        context: odd number of frames to concatenate per output frame.

    Returns:
        Array of shape (num_frames, dim * context).
    """
    if context < 1 or context % 2 == 0:
        raise StructureError(f"stacking context must be odd, got {context}")
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise StructureError("feature sequence must be a non-empty 2-D array")
    half = context // 2
    padded = np.pad(feats, ((half, half), (0, 0)), mode="edge")
    count = feats.shape[0]
    return np.concatenate(
        [padded[k : k + count] for k in range(context)], axis=1
    )


def cepstral_features(stream: SampleStream, config: CepstralConfig) -> np.ndarray:
    """Full baseline pipeline: static cepstra, deltas, context stacking."""
    static = compute_static_cepstra(stream, config)
    full = append_deltas(static, config)
    return stack_context(full, config.stack_context)
