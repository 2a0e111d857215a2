"""Network building blocks on (frames, channels) arrays, with backward passes.

Forward functions take time along axis 0 and channels along axis 1. Backward
functions return gradients in ascent convention: callers add them, scaled by
the learning rate, to maximize the objective.
"""
import numpy as np

from .errors import StructureError


def _as_frames(x, name="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise StructureError(f"{name} must be a non-empty (frames, channels) array")
    return np.ascontiguousarray(x)


def unfold_frames(x: np.ndarray, kW: int, dW: int) -> np.ndarray:
    """Stack each run of kW consecutive frames into one row, hopping dW frames.

    Output row t is the concatenation of input rows t*dW .. t*dW+kW-1,
    frame-major. Shape: ((T - kW)//dW + 1, kW * channels).
    """
    x = _as_frames(x)
    T, d = x.shape
    if kW < 1 or dW < 1:
        raise StructureError(f"kernel width and hop must be positive, got kW={kW} dW={dW}")
    if T < kW:
        raise StructureError(f"input has {T} frames, fewer than kernel width {kW}")
    count = (T - kW) // dW + 1
    s0, s1 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x, shape=(count, kW, d), strides=(s0 * dW, s0, s1)
    )
    return view.reshape(count, kW * d)


def conv_forward(x, weights, bias, kW: int, dW: int) -> np.ndarray:
    """Temporal convolution: out[t] = weights @ concat(x[t*dW : t*dW+kW]) + bias."""
    x = _as_frames(x)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2:
        raise StructureError("convolution weights must be 2-D")
    d_out = weights.shape[0]
    if bias.shape != (d_out,):
        raise StructureError(
            f"bias shape {bias.shape} does not match {d_out} output channels"
        )
    unfolded = unfold_frames(x, kW, dW)
    if weights.shape[1] != unfolded.shape[1]:
        raise StructureError(
            f"weights expect {weights.shape[1]} inputs per frame but the "
            f"window provides {unfolded.shape[1]} (kW={kW} x {x.shape[1]} channels)"
        )
    return unfolded @ weights.T + bias


def conv_backward(x, weights, kW: int, dW: int, grad_out):
    """Gradients of a scalar objective through conv_forward.

    Returns:
        (grad_x, grad_weights, grad_bias).
    """
    x = _as_frames(x)
    weights = np.asarray(weights, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    unfolded = unfold_frames(x, kW, dW)
    count = unfolded.shape[0]
    if grad_out.shape != (count, weights.shape[0]):
        raise StructureError(
            f"upstream gradient shape {grad_out.shape} does not match the "
            f"convolution output ({count}, {weights.shape[0]})"
        )
    grad_bias = grad_out.sum(axis=0)
    grad_weights = grad_out.T @ unfolded
    grad_unfolded = (grad_out @ weights).reshape(count, kW, x.shape[1])
    grad_x = np.zeros_like(x)
    starts = dW * np.arange(count)
    for j in range(kW):
        # Rows starts+j are distinct for fixed j, so fancy-index += is safe.
        grad_x[starts + j] += grad_unfolded[:, j, :]
    return grad_x, grad_weights, grad_bias


def maxpool_forward(x, kW: int, stride: int):
    """Per-channel temporal max over windows of kW frames, hopping `stride`.

    Ties go to the smallest frame index.

    Returns:
        (pooled, argmax) where argmax holds absolute input frame indices,
        shape equal to pooled.
    """
    x = _as_frames(x)
    T, d = x.shape
    if kW < 1 or stride < 1:
        raise StructureError(f"pool width and stride must be positive, got {kW}, {stride}")
    if T < kW:
        raise StructureError(f"input has {T} frames, fewer than pool width {kW}")
    count = (T - kW) // stride + 1
    s0, s1 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x, shape=(count, kW, d), strides=(s0 * stride, s0, s1)
    )
    local = view.argmax(axis=1)
    pooled = np.take_along_axis(view, local[:, None, :], axis=1)[:, 0, :]
    argmax = local + stride * np.arange(count)[:, None]
    return pooled, argmax


def maxpool_backward(argmax, grad_out, input_shape):
    """Route gradients to the recorded argmax frames, accumulating on overlap."""
    argmax = np.asarray(argmax)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if argmax.shape != grad_out.shape:
        raise StructureError("argmax and upstream gradient shapes must match")
    grad_x = np.zeros(input_shape, dtype=np.float64)
    cols = np.broadcast_to(np.arange(input_shape[1]), argmax.shape)
    np.add.at(grad_x, (argmax, cols), grad_out)
    return grad_x


def tanh_forward(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def tanh_backward(output, grad_out):
    """Backward through tanh given the forward output."""
    return np.asarray(grad_out) * (1.0 - np.asarray(output) ** 2)


def linear_forward(x, weights, bias):
    """Affine map of a vector: weights @ x + bias."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 1:
        raise StructureError("linear layer input must be a vector")
    if weights.ndim != 2 or weights.shape[1] != x.size:
        raise StructureError(
            f"weight shape {weights.shape} does not accept input of size {x.size}"
        )
    if bias.shape != (weights.shape[0],):
        raise StructureError("bias length must equal the output size")
    return weights @ x + bias


def linear_backward(x, weights, grad_out):
    """Gradients through linear_forward: (grad_x, grad_weights, grad_bias)."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (weights.shape[0],):
        raise StructureError("upstream gradient length must equal the output size")
    return weights.T @ grad_out, np.outer(grad_out, x), grad_out.copy()


def logsumexp(scores) -> float:
    """log(sum(exp(scores))), stable for entries of any magnitude."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise StructureError("logsumexp of an empty score vector")
    m = scores.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(scores - m).sum()))


def softmax(scores) -> np.ndarray:
    """Normalized exponentials of the scores, computed with a max shift."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise StructureError("softmax of an empty score vector")
    shifted = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def nll_value_and_grad(scores, label: int):
    """Log-likelihood of `label` under the scores and its ascent gradient.

    Returns:
        (value, grad) with value = scores[label] - logsumexp(scores) and
        grad = onehot(label) - softmax(scores).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise StructureError("scores must be a non-empty vector")
    if not 0 <= label < scores.size:
        raise StructureError(
            f"label {label} outside [0, {scores.size})"
        )
    value = float(scores[label] - logsumexp(scores))
    grad = -softmax(scores)
    grad[label] += 1.0
    return value, grad
