"""Push-sum state and the buffer aggregation / mass-splitting rules.

Aggregation forms the mass-weighted convex combination of the local model
and the decoded neighbor models, applies the same weights slot-by-slot to
the centroid dictionary, and absorbs the incoming mass shares. Splitting
divides the local mass into d+ + 1 equal shares (one kept, one per
out-neighbor), conserving mass exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffer import ProtocolViolation
from .codec import CentroidTable
from .params import ParamVector, PruneMask


@dataclass
class DecodedMessage:
    """A buffered message after payload decoding, ready to aggregate."""

    w_hat: ParamVector
    table: CentroidTable | None  # None for raw (compression-disabled) messages
    sigma: float
    sender: int
    gen_event: int


@dataclass
class PushSumState:
    mass: float
    w: ParamVector
    table: CentroidTable
    mask: PruneMask

    def __post_init__(self):
        if self.mass <= 0:
            raise ProtocolViolation(f"push-sum mass must stay positive, got {self.mass}")


def aggregate(state: PushSumState, messages: list[DecodedMessage]) -> None:
    """Mass-weighted mixing of the buffered messages into ``state``, in place."""
    if not messages:
        return
    for m in messages:
        if m.sigma <= 0:
            raise ProtocolViolation(f"nonpositive incoming mass share from {m.sender}")
    total = state.mass + sum(m.sigma for m in messages)
    mixed = (state.mass / total) * state.w.values
    for m in messages:
        mixed += (m.sigma / total) * m.w_hat.values
    state.w = ParamVector(state.w.layout, mixed)

    # dictionary mixing: slot k of the local table with slot k of each
    # (already canonicalized) incoming table; slot 0 stays exactly 0
    for name, local in state.table.tables.items():
        acc = (state.mass / total) * local.astype(np.float64)
        for m in messages:
            if m.table is not None:
                acc += (m.sigma / total) * m.table.tables[name].astype(np.float64)
        acc[0] = 0.0
        state.table.tables[name] = acc.astype(np.float32)
    state.mass = total


def split_mass(state: PushSumState, out_degree: int) -> float:
    """Divide the mass into out_degree+1 equal shares; returns the share.

    The state keeps one share; the caller attaches one to each outgoing
    message. d+ * share + retained == the original mass (exactly in exact
    arithmetic).
    """
    if out_degree < 0:
        raise ValueError("out_degree must be >= 0")
    share = state.mass / (out_degree + 1)
    state.mass = share
    return share
