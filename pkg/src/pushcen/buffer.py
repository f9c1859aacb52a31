"""Sender-deduplicated, capacity-bounded FIFO of incoming messages.

Insertion removes any older entry from the same sender, appends at the
tail, then drops oldest entries while over capacity. Every removal is
reported back so the caller can account for the destroyed mass share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class ProtocolViolation(ValueError):
    """A message broke a protocol precondition (e.g. nonpositive mass share)."""


@dataclass
class BufferEntry:
    payload: Any  # CentroidPayload or ParamVector (raw mode)
    sigma: float
    sender: int
    gen_event: int
    arrival_event: int
    msg_id: int  # ledger key for the in-flight share


@dataclass
class MessageBuffer:
    capacity: int = 0  # 0 = unbounded
    dedup: bool = True
    entries: list[BufferEntry] = field(default_factory=list)

    def insert(self, entry: BufferEntry) -> list[BufferEntry]:
        """Add an entry; returns the entries evicted by dedup or overflow."""
        if entry.sigma <= 0:
            raise ProtocolViolation(
                f"nonpositive mass share {entry.sigma} from sender {entry.sender}"
            )
        evicted = []
        if self.dedup:
            kept = []
            for e in self.entries:
                (evicted if e.sender == entry.sender else kept).append(e)
            self.entries = kept
        self.entries.append(entry)
        if self.capacity > 0:
            while len(self.entries) > self.capacity:
                evicted.append(self.entries.pop(0))
        return evicted

    def drain(self) -> list[BufferEntry]:
        out = self.entries
        self.entries = []
        return out

    def __len__(self) -> int:
        return len(self.entries)
