"""Bit-exact message serialization.

Little-endian, versioned 32-byte header, then per compressible layer the
K-1 nonzero centroids at B bits and the assignment indices packed at
ceil(log2 K) bits each (padded to a byte boundary per layer), then the
uncompressed tensors at B bits. A second "raw" format carries a dense
value vector for compression-disabled methods.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .codec import (
    VALUE_DTYPES,
    AssignmentMap,
    CentroidPayload,
    CentroidTable,
    CorruptPayloadError,
)
from .params import LayerLayout, ParamVector

MAGIC_CENTROID = b"PCM1"
MAGIC_RAW = b"PCR1"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHIQd")
HEADER_BYTES = _HEADER.size  # 32


def index_bits(k: int) -> int:
    return int(np.ceil(np.log2(k)))


def pack_bits(values: np.ndarray, width: int) -> bytes:
    """Pack unsigned integers at ``width`` bits each, LSB-first."""
    values = np.asarray(values, dtype=np.uint64)
    bits = ((values[:, None] >> np.arange(width, dtype=np.uint64)) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_bits(data: bytes, width: int, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if len(bits) < count * width:
        raise CorruptPayloadError("truncated bit-packed block")
    bits = bits[: count * width].reshape(count, width).astype(np.uint64)
    return bits @ (np.uint64(1) << np.arange(width, dtype=np.uint64))


def _packed_nbytes(count: int, width: int) -> int:
    return (count * width + 7) // 8


@dataclass
class WireMessage:
    payload: CentroidPayload | ParamVector
    mass: float
    sender: int
    gen_event: int


def serialize(
    payload: CentroidPayload,
    mass: float,
    sender: int,
    gen_event: int,
    layout: LayerLayout,
    value_bits: int = 32,
) -> bytes:
    dtype = VALUE_DTYPES[value_bits]
    k = payload.k
    ibits = index_bits(k)
    parts = [
        _HEADER.pack(
            MAGIC_CENTROID, VERSION, value_bits, k,
            len(layout.layers), sender, gen_event, mass,
        )
    ]
    for name in layout.compressible_names():
        table = payload.tables.tables[name].astype(dtype)
        parts.append(table[1:].tobytes())
        parts.append(pack_bits(payload.assignments.assignments[name], ibits))
    for name in layout.uncompressed_names():
        parts.append(np.asarray(payload.uncompressed[name], dtype=dtype).tobytes())
    return b"".join(parts)


def deserialize(data: bytes, layout: LayerLayout) -> WireMessage:
    magic, version, value_bits, k, n_layers, sender, gen_event, mass = _HEADER.unpack_from(data)
    if magic != MAGIC_CENTROID or version != VERSION:
        raise CorruptPayloadError("bad magic/version in centroid message")
    if n_layers != len(layout.layers):
        raise CorruptPayloadError("layer count mismatch")
    dtype = VALUE_DTYPES[value_bits]
    itemsize = np.dtype(dtype).itemsize
    ibits = index_bits(k)
    offset = HEADER_BYTES
    tables: dict[str, np.ndarray] = {}
    assigns: dict[str, np.ndarray] = {}
    for name in layout.compressible_names():
        length = layout.layer_length(name)
        nz = np.frombuffer(data, dtype=dtype, count=k - 1, offset=offset)
        offset += (k - 1) * itemsize
        tables[name] = np.concatenate([[0.0], nz]).astype(np.float32)
        nbytes = _packed_nbytes(length, ibits)
        assigns[name] = unpack_bits(data[offset : offset + nbytes], ibits, length).astype(np.int64)
        offset += nbytes
        if assigns[name].max(initial=0) >= k:
            raise CorruptPayloadError(f"assignment index out of range on layer {name!r}")
    uncompressed: dict[str, np.ndarray] = {}
    for name in layout.uncompressed_names():
        length = layout.layer_length(name)
        uncompressed[name] = np.frombuffer(data, dtype=dtype, count=length, offset=offset).copy()
        offset += length * itemsize
    if offset != len(data):
        raise CorruptPayloadError("trailing bytes in centroid message")
    payload = CentroidPayload(CentroidTable(tables), AssignmentMap(assigns), uncompressed, k)
    return WireMessage(payload, mass, sender, gen_event)


def serialize_raw(
    w: ParamVector,
    mass: float,
    sender: int,
    gen_event: int,
    value_bits: int = 32,
) -> bytes:
    dtype = VALUE_DTYPES[value_bits]
    header = _HEADER.pack(
        MAGIC_RAW, VERSION, value_bits, 0,
        len(w.layout.layers), sender, gen_event, mass,
    )
    return header + w.values.astype(dtype).tobytes()


def deserialize_raw(data: bytes, layout: LayerLayout) -> WireMessage:
    magic, version, value_bits, _, n_layers, sender, gen_event, mass = _HEADER.unpack_from(data)
    if magic != MAGIC_RAW or version != VERSION:
        raise CorruptPayloadError("bad magic/version in raw message")
    if n_layers != len(layout.layers):
        raise CorruptPayloadError("layer count mismatch")
    dtype = VALUE_DTYPES[value_bits]
    values = np.frombuffer(data, dtype=dtype, count=layout.total_length, offset=HEADER_BYTES)
    vec = ParamVector(layout, values.astype(np.float64))
    return WireMessage(vec, mass, sender, gen_event)
