"""Binary containers: the (frames, dim) tensor file and parameter checkpoints.

All integers are little-endian. The tensor container is a uint32 frame
count, a uint32 dim, then float64 values row-major. A checkpoint is the
SHA-256 of the canonical config text, a uint32 array count, then each array
as uint32 ndim, uint32 dims, float64 values row-major.
"""
import struct

import numpy as np

from .errors import DataFormatError, StructureError
from .network import NetworkConfig, Parameters, config_hash


def _read_exact(handle, count: int, what: str) -> bytes:
    offset = handle.tell()
    data = handle.read(count)
    if len(data) != count:
        raise DataFormatError(
            f"truncated file: expected {count} bytes for {what}", offset=offset
        )
    return data


def save_tensor(path, values: np.ndarray) -> None:
    """Write a (frames, dim) float array to the tensor container."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise StructureError("tensor container holds 2-D arrays only")
    with open(path, "wb") as handle:
        handle.write(struct.pack("<II", values.shape[0], values.shape[1]))
        handle.write(values.astype("<f8").tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as handle:
        frames, dim = struct.unpack("<II", _read_exact(handle, 8, "tensor header"))
        payload = _read_exact(handle, frames * dim * 8, "tensor values")
        trailing = handle.read(1)
        if trailing:
            raise DataFormatError(
                "trailing bytes after tensor values", offset=handle.tell() - 1
            )
    return np.frombuffer(payload, dtype="<f8").reshape(frames, dim).copy()


def _write_array(handle, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    handle.write(struct.pack("<I", arr.ndim))
    handle.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    handle.write(arr.astype("<f8").tobytes(order="C"))


def _read_array(handle) -> np.ndarray:
    (ndim,) = struct.unpack("<I", _read_exact(handle, 4, "array rank"))
    if ndim < 1 or ndim > 2:
        raise DataFormatError(f"array rank {ndim} unsupported", offset=handle.tell() - 4)
    dims = struct.unpack(f"<{ndim}I", _read_exact(handle, 4 * ndim, "array shape"))
    count = int(np.prod(dims))
    payload = _read_exact(handle, count * 8, "array values")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def save_checkpoint(path, config: NetworkConfig, params: Parameters) -> None:
    """Persist parameters together with the hash of their config."""
    arrays = list(params.arrays())
    with open(path, "wb") as handle:
        handle.write(config_hash(config))
        handle.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            _write_array(handle, arr)


def load_checkpoint(path, config: NetworkConfig) -> Parameters:
    """Load parameters, verifying they belong to `config`.

    Raises:
        DataFormatError: on truncation, trailing bytes, or a config hash
            mismatch.
    """
    with open(path, "rb") as handle:
        stored = _read_exact(handle, 32, "config hash")
        if stored != config_hash(config):
            raise DataFormatError(
                "checkpoint was trained with a different configuration"
            )
        (count,) = struct.unpack("<I", _read_exact(handle, 4, "array count"))
        arrays = [_read_array(handle) for _ in range(count)]
        if handle.read(1):
            raise DataFormatError("trailing bytes after parameter arrays")
    num_stages = len(config.stages)
    expected = 2 * num_stages + (2 if config.classifier.kind == "slp" else 4)
    if count != expected:
        raise DataFormatError(
            f"checkpoint holds {count} arrays, config implies {expected}"
        )
    params = Parameters()
    for i in range(num_stages):
        params.stage_weights.append((arrays[2 * i], arrays[2 * i + 1]))
    rest = arrays[2 * num_stages:]
    for i in range(0, len(rest), 2):
        params.classifier.append((rest[i], rest[i + 1]))
    return params
