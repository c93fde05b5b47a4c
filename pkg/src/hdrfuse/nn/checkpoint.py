"""Binary checkpoint format for the weight-map network.

Layout (little-endian):

    magic   4 bytes  b"HDRW"
    version u16      currently 1
    width   f64      channel width multiplier
    steps   u64      training updates seen (0 = batch-norm stats unset)
    layers  u16 count, then per layer: kind u8, in_ch u32, out_ch u32
    tensors u32 count, then per tensor: ndim u8, dims u32 each, f32 data

Tensors appear in declaration order; their names are implied by the layer
list.  Values are stored as 32-bit floats, so a float32 model round-trips
bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"HDRW"
VERSION = 1

# layer kind codes
CONV, BATCHNORM, RELU, MAXPOOL, UPSAMPLE, SOFTMAX = range(6)


class CheckpointError(Exception):
    """Checkpoint file is malformed or has an unsupported version."""


def save_checkpoint(path, width_multiplier: float, train_steps: int,
                    layer_specs, tensors) -> None:
    """Write architecture plus tensors; ``layer_specs`` is [(kind, in, out)]."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += struct.pack("<d", float(width_multiplier))
    out += struct.pack("<Q", int(train_steps))
    out += struct.pack("<H", len(layer_specs))
    for kind, in_ch, out_ch in layer_specs:
        out += struct.pack("<BII", kind, in_ch, out_ch)
    arrays = [np.ascontiguousarray(t.data if hasattr(t, "data") else t)
              for t in tensors]
    out += struct.pack("<I", len(arrays))
    for a in arrays:
        out += struct.pack("<B", a.ndim)
        out += struct.pack(f"<{a.ndim}I", *a.shape)
        out += a.astype("<f4", copy=False).tobytes()
    # temp-and-rename so an interrupted save never leaves a partial file
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(out))
    tmp.replace(path)


def load_checkpoint(path):
    """Read back (width_multiplier, train_steps, layer_specs, float32 arrays)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise CheckpointError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    (version,) = take("<H")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (width,) = take("<d")
    (steps,) = take("<Q")
    (n_layers,) = take("<H")
    layer_specs = [take("<BII") for _ in range(n_layers)]
    (n_tensors,) = take("<I")
    arrays = []
    for _ in range(n_tensors):
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        nbytes = count * 4
        if pos + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated tensor data")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        arrays.append(arr.reshape(shape).astype(np.float32))
    if pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes after tensor data")
    return width, steps, layer_specs, arrays
