"""Binary network checkpoints.

Layout (all integers and floats little-endian)::

    magic        4 bytes   b"SNNC"
    version      u8        1
    config_len   u32       length of the UTF-8 JSON config echo
    config       bytes
    layer_count  u32
    per layer:
        rows     u32       fan_out
        cols     u32       fan_in
        nnz      u64
        offsets  i64[rows + 1]
        indices  i32[nnz]
        values   f64[nnz]
        bias     f64[rows]

Momentum buffers are not stored; a loaded network starts with zero velocity.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from sparsenet.linalg import CsrMatrix
from sparsenet.network import Network, NetworkConfig, SparseLayer
from sparsenet.topology import BipartiteTopology

MAGIC = b"SNNC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(net: Network) -> bytes:
    buf = io.BytesIO()
    config = json.dumps(net.config.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<BI", VERSION, len(config)))
    buf.write(config)
    buf.write(struct.pack("<I", len(net.layers)))
    for layer in net.layers:
        w = layer.weights
        buf.write(struct.pack("<IIQ", w.rows, w.cols, w.nnz))
        buf.write(w.row_offsets.astype("<i8").tobytes())
        buf.write(w.col_indices.astype("<i4").tobytes())
        buf.write(w.values.astype("<f8").tobytes())
        buf.write(layer.bias.astype("<f8").tobytes())
    return buf.getvalue()


def _read(buf: io.BytesIO, size: int) -> bytes:
    data = buf.read(size)
    if len(data) != size:
        raise CheckpointError("truncated checkpoint")
    return data


def _array(buf, dtype, count):
    itemsize = np.dtype(dtype).itemsize
    return np.frombuffer(_read(buf, itemsize * count), dtype=dtype).copy()


def loads(data: bytes) -> Network:
    buf = io.BytesIO(data)
    if _read(buf, 4) != MAGIC:
        raise CheckpointError("not a sparse network checkpoint (bad magic)")
    version, config_len = struct.unpack("<BI", _read(buf, 5))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = NetworkConfig.from_dict(json.loads(_read(buf, config_len).decode("utf-8")))
    (count,) = struct.unpack("<I", _read(buf, 4))
    if count != len(config.layer_sizes) - 1:
        raise CheckpointError("layer count disagrees with the stored config")
    layers = []
    for l in range(count):
        rows, cols, nnz = struct.unpack("<IIQ", _read(buf, 16))
        if (cols, rows) != config.layer_sizes[l : l + 2]:
            raise CheckpointError(f"layer {l} shape disagrees with the stored config")
        offsets = _array(buf, "<i8", rows + 1).astype(np.int64)
        indices = _array(buf, "<i4", nnz).astype(np.int64)
        values = _array(buf, "<f8", nnz).astype(np.float64)
        bias = _array(buf, "<f8", rows).astype(np.float64)
        weights = CsrMatrix(rows, cols, offsets, indices, values)
        spec = config.topologies[l]
        forward_view = BipartiteTopology(
            rows, cols, tuple(np.split(indices, offsets[1:-1])), spec.kind.value, spec.k, spec.seed
        )
        layers.append(SparseLayer(weights, bias, forward_view.transpose()))
    if buf.read(1):
        raise CheckpointError("trailing bytes after the last layer")
    return Network(config, layers)


def save(net: Network, path) -> None:
    Path(path).write_bytes(dumps(net))


def load(path) -> Network:
    return loads(Path(path).read_bytes())
