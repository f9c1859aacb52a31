"""Flat parameter vectors with a named-layer layout.

Every model-shaped quantity in the system (local models, anchors, decoded
messages) is a :class:`ParamVector`: a flat float64 array plus a
:class:`LayerLayout` describing named segments. Layers flagged
``compressible`` participate in centroid encoding; the rest (biases and
other 1-D tensors) travel uncompressed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LayoutMismatchError(ValueError):
    """Raised when two vectors with different layouts meet in a binary op."""


@dataclass(frozen=True)
class LayerLayout:
    """Ordered (name, length, compressible) triples describing a flat vector."""

    layers: tuple[tuple[str, int, bool], ...]

    def __post_init__(self):
        names = [name for name, _, _ in self.layers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names in {names}")
        for name, length, _ in self.layers:
            if length < 1:
                raise ValueError(f"layer {name!r} has non-positive length {length}")

    @property
    def total_length(self) -> int:
        return sum(length for _, length, _ in self.layers)

    def slices(self) -> dict[str, slice]:
        out = {}
        offset = 0
        for name, length, _ in self.layers:
            out[name] = slice(offset, offset + length)
            offset += length
        return out

    def compressible_names(self) -> list[str]:
        return [name for name, _, comp in self.layers if comp]

    def uncompressed_names(self) -> list[str]:
        return [name for name, _, comp in self.layers if not comp]

    def layer_length(self, name: str) -> int:
        for lname, length, _ in self.layers:
            if lname == name:
                return length
        raise KeyError(name)


def _check_layouts(a, b):
    if a.layout != b.layout:
        raise LayoutMismatchError(f"layout mismatch: {a.layout} vs {b.layout}")


@dataclass
class ParamVector:
    """A float64 vector bound to a layout. Entries must stay finite."""

    layout: LayerLayout
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.layout.total_length,):
            raise LayoutMismatchError(
                f"value length {self.values.shape} does not match layout "
                f"total {self.layout.total_length}"
            )
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite entries in ParamVector")

    @classmethod
    def zeros(cls, layout: LayerLayout) -> "ParamVector":
        return cls(layout, np.zeros(layout.total_length))

    def copy(self) -> "ParamVector":
        return ParamVector(self.layout, self.values.copy())

    def layer(self, name: str) -> np.ndarray:
        return self.values[self.layout.slices()[name]]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamVector)
            and self.layout == other.layout
            and np.array_equal(self.values, other.values)
        )


@dataclass
class PruneMask:
    """Boolean keep-mask over a layout; applying it twice equals once."""

    layout: LayerLayout
    bits: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bits is None:
            self.bits = np.ones(self.layout.total_length, dtype=bool)
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.layout.total_length,):
            raise LayoutMismatchError("mask length does not match layout")

    @classmethod
    def all_true(cls, layout: LayerLayout) -> "PruneMask":
        return cls(layout, np.ones(layout.total_length, dtype=bool))


def axpy(a: float, x: ParamVector, y: ParamVector) -> ParamVector:
    """Return a*x + y without touching the inputs."""
    _check_layouts(x, y)
    return ParamVector(x.layout, a * x.values + y.values)


def apply_mask(w: ParamVector, m: PruneMask) -> ParamVector:
    _check_layouts(w, m)
    return ParamVector(w.layout, np.where(m.bits, w.values, 0.0))


def apply_mask_inplace(w: ParamVector, m: PruneMask) -> None:
    _check_layouts(w, m)
    w.values[~m.bits] = 0.0


def l2_dist_sq(x: ParamVector, y: ParamVector) -> float:
    _check_layouts(x, y)
    d = x.values - y.values
    return float(d @ d)
