"""Network configuration, shape arithmetic, parameters, and full forward/backward.

A network is a chain of filter stages (convolution, temporal max pooling,
tanh) applied to a (frames, channels) input, flattened frame-major into a
single vector, and fed to a linear (SLP) or one-hidden-layer tanh (MLP)
classifier. Classifier-only networks (zero stages) cover the feature
baselines and the raw-window linear classifier.
"""
import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StructureError
from .framing import DEFAULT_RATE, duration_to_samples
from .layers import (
    conv_backward,
    conv_forward,
    linear_backward,
    linear_forward,
    maxpool_backward,
    maxpool_forward,
    tanh_backward,
    tanh_forward,
)
from .seeds import named_rng

MAX_STAGES = 5

CLASSIFIER_KINDS = ("slp", "mlp")

DEFAULT_HIDDEN_UNITS = 500
DEFAULT_LEARNING_RATE = 1e-4


@dataclass(frozen=True)
class ConvStageSpec:
    """One filter stage: convolution geometry plus its pooling."""

    kW: int
    dW: int
    d_out: int
    pool_kW: int
    pool_stride: int

    def __post_init__(self):
        for name in ("kW", "dW", "d_out", "pool_kW", "pool_stride"):
            if getattr(self, name) < 1:
                raise StructureError(f"stage field {name} must be positive")


def stage(kW, dW, d_out, pool_kW, pool_stride=None) -> ConvStageSpec:
    """Build a stage spec; pooling is non-overlapping unless a stride is given."""
    if pool_stride is None:
        pool_stride = pool_kW
    return ConvStageSpec(kW=kW, dW=dW, d_out=d_out,
                         pool_kW=pool_kW, pool_stride=pool_stride)


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier head: 'slp' (linear) or 'mlp' (one tanh hidden layer)."""

    kind: str
    num_classes: int
    hidden_units: int | None = None

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise StructureError(f"classifier kind must be one of {CLASSIFIER_KINDS}")
        if self.num_classes < 2:
            raise StructureError("classifier needs at least 2 classes")
        if self.kind == "mlp":
            if self.hidden_units is None or self.hidden_units < 1:
                raise StructureError("mlp classifier requires positive hidden_units")
        elif self.hidden_units is not None:
            raise StructureError("slp classifier takes no hidden_units")


@dataclass(frozen=True)
class NetworkConfig:
    """Complete experiment configuration for one network."""

    w_in_ms: float
    stages: tuple
    classifier: ClassifierSpec
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0
    max_epochs: int = 30
    patience: int = 5

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if len(self.stages) > MAX_STAGES:
            raise StructureError(f"at most {MAX_STAGES} filter stages are supported")
        for s in self.stages:
            if not isinstance(s, ConvStageSpec):
                raise StructureError("stages must be ConvStageSpec instances")
        if self.w_in_ms <= 0:
            raise StructureError("w_in_ms must be positive")
        if self.learning_rate < 0:
            raise StructureError("learning_rate must be non-negative")
        if self.max_epochs < 1:
            raise StructureError("max_epochs must be at least 1")
        if self.patience < 1:
            raise StructureError("patience must be at least 1")


@dataclass(frozen=True)
class StageShape:
    conv_frames: int
    pool_frames: int
    channels: int


@dataclass(frozen=True)
class ShapeTrace:
    """Frame counts through every stage, down to the classifier input size."""

    input_frames: int
    input_channels: int
    stages: tuple
    classifier_input_dim: int


def window_samples(config: NetworkConfig, rate: int = DEFAULT_RATE) -> int:
    return duration_to_samples(config.w_in_ms, rate)


def output_shape(
    config: NetworkConfig,
    input_frames: int | None = None,
    input_channels: int = 1,
    rate: int = DEFAULT_RATE,
) -> ShapeTrace:
    """Walk the stage arithmetic and report every intermediate frame count.

    Args:
        config: the network.
        input_frames: frames entering stage 1. Defaults to the raw window
            length implied by config.w_in_ms at `rate`.
        input_channels: channels entering stage 1 (1 for raw waveforms).

    Raises:
        StructureError: naming the first stage whose output would be empty.
    """
    if input_frames is None:
        input_frames = window_samples(config, rate)
    frames, channels = int(input_frames), int(input_channels)
    if frames < 1 or channels < 1:
        raise StructureError("network input must have positive frames and channels")
    shapes = []
    for i, s in enumerate(config.stages, start=1):
        if frames < s.kW:
            raise StructureError(
                f"stage {i}: convolution kernel ({s.kW}) exceeds its "
                f"{frames}-frame input"
            )
        conv_frames = (frames - s.kW) // s.dW + 1
        if conv_frames < s.pool_kW:
            raise StructureError(
                f"stage {i}: pool width ({s.pool_kW}) exceeds the "
                f"{conv_frames}-frame convolution output"
            )
        pool_frames = (conv_frames - s.pool_kW) // s.pool_stride + 1
        shapes.append(StageShape(conv_frames, pool_frames, s.d_out))
        frames, channels = pool_frames, s.d_out
    return ShapeTrace(
        input_frames=int(input_frames),
        input_channels=int(input_channels),
        stages=tuple(shapes),
        classifier_input_dim=frames * channels,
    )


@dataclass(frozen=True)
class ParamCount:
    """Parameter totals in both conventions; weights-only is the one reported."""

    conv_weights: int
    conv_with_biases: int
    classifier_weights: int
    classifier_with_biases: int

    @property
    def total_weights(self) -> int:
        return self.conv_weights + self.classifier_weights

    @property
    def total_with_biases(self) -> int:
        return self.conv_with_biases + self.classifier_with_biases


def param_count(
    config: NetworkConfig,
    input_dim: int | None = None,
    rate: int = DEFAULT_RATE,
) -> ParamCount:
    """Count parameters. `input_dim` overrides the classifier input size
    (needed for classifier-only networks on precomputed features)."""
    conv_w = 0
    conv_b = 0
    d_in = 1
    for s in config.stages:
        conv_w += s.d_out * d_in * s.kW
        conv_b += s.d_out
        d_in = s.d_out
    if input_dim is None:
        input_dim = output_shape(config, rate=rate).classifier_input_dim
    cls = config.classifier
    if cls.kind == "slp":
        cls_w = cls.num_classes * input_dim
        cls_b = cls.num_classes
    else:
        cls_w = cls.hidden_units * input_dim + cls.num_classes * cls.hidden_units
        cls_b = cls.hidden_units + cls.num_classes
    return ParamCount(conv_w, conv_w + conv_b, cls_w, cls_w + cls_b)


@dataclass
class Parameters:
    """Trainable arrays: one (weights, bias) pair per stage, then the head."""

    stage_weights: list = field(default_factory=list)
    classifier: list = field(default_factory=list)

    def arrays(self):
        """All arrays in a stable order (for updates and serialization)."""
        for w, b in self.stage_weights:
            yield w
            yield b
        for w, b in self.classifier:
            yield w
            yield b

    def copy(self) -> "Parameters":
        return Parameters(
            stage_weights=[(w.copy(), b.copy()) for w, b in self.stage_weights],
            classifier=[(w.copy(), b.copy()) for w, b in self.classifier],
        )


def init_parameters(
    config: NetworkConfig,
    input_frames: int | None = None,
    input_channels: int = 1,
    rate: int = DEFAULT_RATE,
    rng: np.random.Generator | None = None,
) -> Parameters:
    """Draw parameters uniformly in +-1/sqrt(fan-in), seeded from the config."""
    if rng is None:
        rng = named_rng(config.seed, "init")
    trace = output_shape(config, input_frames, input_channels, rate)

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = Parameters()
    d_in = trace.input_channels
    for s in config.stages:
        fan = d_in * s.kW
        params.stage_weights.append(
            (uniform(fan, (s.d_out, fan)), uniform(fan, (s.d_out,)))
        )
        d_in = s.d_out
    dim = trace.classifier_input_dim
    cls = config.classifier
    if cls.kind == "slp":
        params.classifier.append(
            (uniform(dim, (cls.num_classes, dim)), uniform(dim, (cls.num_classes,)))
        )
    else:
        h = cls.hidden_units
        params.classifier.append((uniform(dim, (h, dim)), uniform(dim, (h,))))
        params.classifier.append(
            (uniform(h, (cls.num_classes, h)), uniform(h, (cls.num_classes,)))
        )
    return params


def forward_with_cache(config: NetworkConfig, params: Parameters, x: np.ndarray):
    """Scores for one (frames, channels) input, plus the cache for backward."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise StructureError("network input must be a (frames, channels) array")
    if len(params.stage_weights) != len(config.stages):
        raise StructureError("parameters do not match the configured stage count")
    h = x
    stage_caches = []
    for i, (s, (weights, bias)) in enumerate(
        zip(config.stages, params.stage_weights), start=1
    ):
        expected = (s.d_out, h.shape[1] * s.kW)
        if weights.shape != expected:
            raise StructureError(
                f"stage {i}: weight shape {weights.shape} does not match "
                f"expected {expected}"
            )
        try:
            conv = conv_forward(h, weights, bias, s.kW, s.dW)
            pooled, argmax = maxpool_forward(conv, s.pool_kW, s.pool_stride)
        except StructureError as err:
            raise StructureError(f"stage {i}: {err}") from err
        activated = tanh_forward(pooled)
        stage_caches.append((h, conv.shape, argmax, activated))
        h = activated
    flat = h.reshape(-1)
    cls = config.classifier
    cls_cache = {"input": flat, "final_shape": h.shape}
    if cls.kind == "slp":
        (w, b), = params.classifier
        scores = linear_forward(flat, w, b)
    else:
        (w1, b1), (w2, b2) = params.classifier
        hidden = tanh_forward(linear_forward(flat, w1, b1))
        cls_cache["hidden"] = hidden
        scores = linear_forward(hidden, w2, b2)
    if scores.size != cls.num_classes:
        raise StructureError("classifier output does not match num_classes")
    return scores, (stage_caches, cls_cache)


def network_forward(config: NetworkConfig, params: Parameters, x: np.ndarray) -> np.ndarray:
    """Class scores (pre-softmax) for one input window or feature block."""
    scores, _ = forward_with_cache(config, params, x)
    return scores


def network_backward(
    config: NetworkConfig,
    params: Parameters,
    cache,
    grad_scores: np.ndarray,
) -> Parameters:
    """Gradients for every parameter (and none for the input), ascent convention."""
    stage_caches, cls_cache = cache
    cls = config.classifier
    flat = cls_cache["input"]
    grads = Parameters(stage_weights=[None] * len(stage_caches), classifier=[])
    if cls.kind == "slp":
        (w, _), = params.classifier
        grad_flat, grad_w, grad_b = linear_backward(flat, w, grad_scores)
        grads.classifier = [(grad_w, grad_b)]
    else:
        (w1, _), (w2, _) = params.classifier
        hidden = cls_cache["hidden"]
        grad_hidden, grad_w2, grad_b2 = linear_backward(hidden, w2, grad_scores)
        grad_pre = tanh_backward(hidden, grad_hidden)
        grad_flat, grad_w1, grad_b1 = linear_backward(flat, w1, grad_pre)
        grads.classifier = [(grad_w1, grad_b1), (grad_w2, grad_b2)]
    grad_h = grad_flat.reshape(cls_cache["final_shape"])
    for i in range(len(stage_caches) - 1, -1, -1):
        s = config.stages[i]
        weights, _ = params.stage_weights[i]
        x_in, conv_shape, argmax, activated = stage_caches[i]
        grad_pooled = tanh_backward(activated, grad_h)
        grad_conv = maxpool_backward(argmax, grad_pooled, conv_shape)
        grad_h, grad_w, grad_b = conv_backward(x_in, weights, s.kW, s.dW, grad_conv)
        grads.stage_weights[i] = (grad_w, grad_b)
    return grads


# ---------------------------------------------------------------------------
# Config file format: one "key = value" pair per line, '#' comments allowed.

_SCALAR_KEYS = {
    "w_in_ms": float,
    "learning_rate": float,
    "seed": int,
    "max_epochs": int,
    "patience": int,
}
_STAGE_FIELDS = ("kW", "dW", "d_out", "pool_kW", "pool_stride")


def _format_number(value) -> str:
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return repr(value)


def format_config(config: NetworkConfig) -> str:
    """Canonical text form of a config; hashing and checkpoints use this."""
    lines = [f"w_in_ms = {_format_number(config.w_in_ms)}"]
    for i, s in enumerate(config.stages, start=1):
        for name in _STAGE_FIELDS:
            lines.append(f"stage{i}.{name} = {getattr(s, name)}")
    cls = config.classifier
    lines.append(f"classifier.kind = {cls.kind}")
    if cls.kind == "mlp":
        lines.append(f"classifier.hidden_units = {cls.hidden_units}")
    lines.append(f"classifier.num_classes = {cls.num_classes}")
    lines.append(f"learning_rate = {repr(config.learning_rate)}")
    lines.append(f"seed = {config.seed}")
    lines.append(f"max_epochs = {config.max_epochs}")
    lines.append(f"patience = {config.patience}")
    return "\n".join(lines) + "\n"


def config_to_mapping(config: NetworkConfig) -> dict:
    """Flat key-value view of the config, matching the file format keys."""
    out = {}
    for line in format_config(config).splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def config_from_mapping(mapping: dict) -> NetworkConfig:
    """Build a config from flat string keys; unknown keys are rejected."""
    remaining = dict(mapping)

    def take(key, kind, default=None):
        if key in remaining:
            raw = remaining.pop(key)
            try:
                return kind(raw)
            except (TypeError, ValueError) as err:
                raise StructureError(f"bad value for {key}: {raw!r}") from err
        if default is None:
            raise StructureError(f"missing required config key: {key}")
        return default

    w_in_ms = take("w_in_ms", float)
    stages = []
    i = 1
    while f"stage{i}.kW" in remaining:
        fields = {
            name: take(f"stage{i}.{name}", int) for name in _STAGE_FIELDS
        }
        stages.append(ConvStageSpec(**fields))
        i += 1
    kind = take("classifier.kind", str)
    hidden = None
    if "classifier.hidden_units" in remaining:
        hidden = take("classifier.hidden_units", int)
    num_classes = take("classifier.num_classes", int)
    config = NetworkConfig(
        w_in_ms=w_in_ms,
        stages=tuple(stages),
        classifier=ClassifierSpec(kind=kind, num_classes=num_classes,
                                  hidden_units=hidden),
        learning_rate=take("learning_rate", float, DEFAULT_LEARNING_RATE),
        seed=take("seed", int, 0),
        max_epochs=take("max_epochs", int, 30),
        patience=take("patience", int, 5),
    )
    if remaining:
        raise StructureError(
            f"unknown config keys: {', '.join(sorted(remaining))}"
        )
    return config


def parse_config(text: str) -> NetworkConfig:
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise StructureError(f"config line {lineno} is not 'key = value': {raw!r}")
        mapping[key.strip()] = value.strip()
    return config_from_mapping(mapping)


def load_config(path) -> NetworkConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def save_config(config: NetworkConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_config(config))


def config_hash(config: NetworkConfig) -> bytes:
    """SHA-256 of the canonical config text; stored in checkpoints."""
    return hashlib.sha256(format_config(config).encode("utf-8")).digest()


def with_seed(config: NetworkConfig, seed: int) -> NetworkConfig:
    return replace(config, seed=int(seed))


def find_stride_assignments(
    w_in_ms: float,
    kWs,
    pool_kWs,
    target_frames: int,
    rate: int = DEFAULT_RATE,
    max_dW_first: int = 128,
    max_dW_rest: int = 16,
    extra_pool_stride: int = 8,
    max_results: int = 10,
):
    """Search conv hops and pool strides reaching `target_frames` at the output.

    Kernel widths and pool widths are fixed; the free integers are each
    stage's dW and pool_stride. Strides from 1 to pool_kW + extra_pool_stride
    are explored, non-overlapping pooling (stride == pool width) first.

    Returns:
        Up to `max_results` assignments as (dWs, pool_strides) tuple pairs.
    """
    kWs = list(kWs)
    pool_kWs = list(pool_kWs)
    if len(kWs) != len(pool_kWs) or not kWs:
        raise StructureError("need one pool width per kernel width")
    win = duration_to_samples(w_in_ms, rate)
    results = []
    dead = set()
    num_stages = len(kWs)

    def stride_order(pool_kW):
        rest = [s for s in range(1, pool_kW + extra_pool_stride + 1) if s != pool_kW]
        return [pool_kW] + rest

    def descend(stage_idx, frames, dWs, strides):
        if len(results) >= max_results:
            return
        if stage_idx == num_stages:
            if frames == target_frames:
                results.append((tuple(dWs), tuple(strides)))
            return
        if (stage_idx, frames) in dead:
            return
        produced = len(results)
        kW, pool_kW = kWs[stage_idx], pool_kWs[stage_idx]
        max_dW = max_dW_first if stage_idx == 0 else max_dW_rest
        if frames >= kW:
            for dW in range(1, max_dW + 1):
                conv_frames = (frames - kW) // dW + 1
                if conv_frames < pool_kW or conv_frames < target_frames:
                    break
                for stride in stride_order(pool_kW):
                    pool_frames = (conv_frames - pool_kW) // stride + 1
                    if pool_frames < target_frames:
                        continue
                    descend(stage_idx + 1, pool_frames, dWs + [dW],
                            strides + [stride])
                    if len(results) >= max_results:
                        return
        if len(results) == produced:
            dead.add((stage_idx, frames))

    descend(0, win, [], [])
    return results
