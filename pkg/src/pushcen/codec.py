"""Weight Clustering Pruning codec.

Per compressible layer: zero-anchored k-means over the flat weights,
canonical (sorted) centroid order, and a pruning mask marking the entries
whose quantized value is nonzero. Non-compressible layers are carried
verbatim (at transmit precision) in the payload's ``uncompressed`` part.
Encoding replaces the caller's weights with their quantized
reconstruction, so the model a client holds is exactly what its peers
will decode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import lloyd_zero_anchored
from .params import LayerLayout, ParamVector, PruneMask

VALUE_DTYPES = {16: np.float16, 32: np.float32, 64: np.float64}


class CorruptPayloadError(ValueError):
    """Raised when a payload is inconsistent with the target layout."""


@dataclass
class CentroidTable:
    """Per compressible layer: K centroid values, slot 0 exactly zero."""

    tables: dict[str, np.ndarray]  # name -> float32 array of length K

    def __post_init__(self):
        self.tables = {
            name: np.asarray(v, dtype=np.float32) for name, v in self.tables.items()
        }
        for name, v in self.tables.items():
            if v[0] != 0.0:
                raise ValueError(f"layer {name!r}: centroid 0 must be exactly zero")

    @property
    def k(self) -> int:
        return len(next(iter(self.tables.values())))

    @classmethod
    def zeros(cls, layout: LayerLayout, k: int) -> "CentroidTable":
        return cls({name: np.zeros(k, dtype=np.float32) for name in layout.compressible_names()})

    def is_empty(self, name: str) -> bool:
        """An all-zero table carries no warm-start information (the initial
        dictionary state before any aggregation)."""
        return not np.any(self.tables[name][1:])

    def copy(self) -> "CentroidTable":
        return CentroidTable({name: v.copy() for name, v in self.tables.items()})


@dataclass
class AssignmentMap:
    assignments: dict[str, np.ndarray]  # name -> int64 indices in [0, K)


@dataclass
class CentroidPayload:
    """The decodable message body: (V, A, U) for one model snapshot."""

    tables: CentroidTable
    assignments: AssignmentMap
    uncompressed: dict[str, np.ndarray]  # name -> values at transmit precision
    k: int


@dataclass
class EncodeStats:
    """Per-layer quantization diagnostics collected during encoding."""

    distortions: dict[str, list[float]] = field(default_factory=dict)
    linf_error: float = 0.0  # max |decoded - pre-quantization| over compressible layers
    l2_error: float = 0.0


def _layer_rng(seed: int, layer_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, layer_index]))


def wcp_encode(
    w: ParamVector,
    k: int,
    init: CentroidTable | None = None,
    t_max: int = 20,
    seed: int = 0,
    value_bits: int = 32,
    overwrite: bool = True,
) -> tuple[CentroidPayload, PruneMask, EncodeStats]:
    """Cluster compressible layers and (by default) quantize ``w`` in place.

    A warm start is taken from ``init`` per layer when that table is
    non-empty; otherwise K-1 seed centroids are sampled from the layer
    (deterministically from (seed, layer index)). ``overwrite=False`` keeps
    the caller's weights untouched, for ablating the pre-training quantize.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if value_bits not in (16, 32):
        # centroid tables are float32 in memory; wider transmit precision
        # would not survive the table representation
        raise ValueError("wcp value_bits must be 16 or 32")
    dtype = VALUE_DTYPES[value_bits]
    slices = w.layout.slices()
    tables: dict[str, np.ndarray] = {}
    assigns: dict[str, np.ndarray] = {}
    mask_bits = np.ones(w.layout.total_length, dtype=bool)
    stats = EncodeStats()

    for idx, (name, _, compressible) in enumerate(w.layout.layers):
        if not compressible:
            continue
        theta = w.values[slices[name]]
        if init is not None and not init.is_empty(name):
            res = lloyd_zero_anchored(
                theta, k, init=init.tables[name].astype(np.float64), t_max=t_max
            )
        else:
            res = lloyd_zero_anchored(
                theta, k, rng=_layer_rng(seed, idx), t_max=t_max
            )
        table = res.centroids.astype(dtype)
        decoded = table[res.assign].astype(np.float64)
        err = np.abs(decoded - theta)
        stats.distortions[name] = res.distortions
        stats.linf_error = max(stats.linf_error, float(err.max(initial=0.0)))
        stats.l2_error = float(np.hypot(stats.l2_error, np.linalg.norm(decoded - theta)))
        tables[name] = table.astype(np.float32)
        assigns[name] = res.assign
        mask_bits[slices[name]] = decoded != 0.0
        if overwrite:
            w.values[slices[name]] = decoded

    uncompressed = {
        name: w.values[slices[name]].astype(dtype)
        for name in w.layout.uncompressed_names()
    }
    payload = CentroidPayload(CentroidTable(tables), AssignmentMap(assigns), uncompressed, k)
    return payload, PruneMask(w.layout, mask_bits), stats


def wcp_decode(payload: CentroidPayload, layout: LayerLayout) -> ParamVector:
    """Rebuild a ParamVector: table lookup per compressible layer, verbatim rest."""
    out = np.zeros(layout.total_length)
    slices = layout.slices()
    for name in layout.compressible_names():
        if name not in payload.tables.tables:
            raise CorruptPayloadError(f"payload missing table for layer {name!r}")
        table = payload.tables.tables[name]
        assign = payload.assignments.assignments[name]
        if len(assign) != layout.layer_length(name):
            raise CorruptPayloadError(f"assignment length mismatch on layer {name!r}")
        if assign.min(initial=0) < 0 or assign.max(initial=0) >= len(table):
            raise CorruptPayloadError(f"assignment index out of range on layer {name!r}")
        out[slices[name]] = table[assign].astype(np.float64)
    for name in layout.uncompressed_names():
        if name not in payload.uncompressed:
            raise CorruptPayloadError(f"payload missing uncompressed layer {name!r}")
        vals = np.asarray(payload.uncompressed[name], dtype=np.float64)
        if len(vals) != layout.layer_length(name):
            raise CorruptPayloadError(f"uncompressed length mismatch on layer {name!r}")
        out[slices[name]] = vals
    return ParamVector(layout, out)


def comm_cost_bits(layout: LayerLayout, k: int, value_bits: int = 32) -> tuple[int, int, float]:
    """(full, wcp, ratio) transmitted bits for one model snapshot.

    full sends every entry at ``value_bits``; wcp sends K-1 nonzero
    centroids plus ceil(log2 K)-bit indices per compressible layer and the
    rest verbatim.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    index_bits = int(np.ceil(np.log2(k)))
    full = layout.total_length * value_bits
    wcp = 0
    for name, length, compressible in layout.layers:
        if compressible:
            wcp += (k - 1) * value_bits + length * index_bits
        else:
            wcp += length * value_bits
    return full, wcp, wcp / full
