"""Simulated two-party communication with a data-free coordinator.

Every value that crosses the :class:`Channel` is quantized to ``L``
fractional bits and logged in the :class:`Transcript`.  A scalar costs
``2L + 1`` bits (sign, L integer bits, L fractional bits).
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from commflow.numerics import quantize


class Party(str, enum.Enum):
    ALICE = "alice"
    BOB = "bob"
    COORDINATOR = "coordinator"

    def __str__(self):
        return self.value


PARTIES = (Party.ALICE, Party.BOB, Party.COORDINATOR)


@dataclass
class RowPartition:
    """Owner (Alice or Bob) of every row."""

    owners: np.ndarray

    def __post_init__(self):
        self.owners = np.asarray([Party(o) for o in self.owners], dtype=object)
        if any(o is Party.COORDINATOR for o in self.owners):
            raise ValueError("rows may only be held by Alice or Bob")

    @classmethod
    def all_alice(cls, m):
        return cls([Party.ALICE] * m)

    @classmethod
    def alternating(cls, m):
        return cls([Party.ALICE if i % 2 == 0 else Party.BOB for i in range(m)])

    def __len__(self):
        return len(self.owners)

    def mask(self, party) -> np.ndarray:
        party = Party(party)
        return np.array([o is party for o in self.owners], dtype=bool)

    def rows(self, party) -> np.ndarray:
        return np.flatnonzero(self.mask(party))

    def concat(self, other: "RowPartition") -> "RowPartition":
        return RowPartition(list(self.owners) + list(other.owners))

    def take(self, idx) -> "RowPartition":
        return RowPartition(self.owners[np.asarray(idx, dtype=int)])


@dataclass(frozen=True)
class Event:
    phase: str
    sender: str
    receiver: str
    elements: int
    bits: int
    kind: str = "vector"


@dataclass
class Transcript:
    events: list = field(default_factory=list)

    def append(self, event: Event):
        self.events.append(event)

    @property
    def total_bits(self) -> int:
        return sum(e.bits for e in self.events)

    def by_phase(self) -> dict:
        totals: dict = {}
        for e in self.events:
            totals[e.phase] = totals.get(e.phase, 0) + e.bits
        return totals

    def summary(self) -> dict:
        phases = self.by_phase()
        return {
            "total_bits": self.total_bits,
            "events": len(self.events),
            "phases": {k: phases[k] for k in sorted(phases)},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["phase", "sender", "receiver", "elements", "bits"])
        for e in self.events:
            writer.writerow([e.phase, e.sender, e.receiver, e.elements, e.bits])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


class Channel:
    """One protocol session: quantizing links plus shared randomness.

    With ``alice_is_coordinator`` Alice plays the coordinator, so traffic
    between the two is still logged but costs nothing.  ``charge_mode``
    ``"actual"`` drops the formula charges of out-of-scope subprotocols.
    """

    def __init__(self, frac_bits: int = 16, seed: int = 0, *, alice_is_coordinator: bool = False, charge_mode: str = "formula"):
        if frac_bits < 1:
            raise ValueError("frac_bits must be >= 1")
        if charge_mode not in ("formula", "actual"):
            raise ValueError("charge_mode must be 'formula' or 'actual'")
        self.frac_bits = int(frac_bits)
        self.seed = int(seed)
        self.alice_is_coordinator = alice_is_coordinator
        self.charge_mode = charge_mode
        self.transcript = Transcript()
        self.hooks = []
        self._streams: dict = {}

    @property
    def scalar_bits(self) -> int:
        return 2 * self.frac_bits + 1

    def _free(self, sender, receiver) -> bool:
        pair = {Party(sender), Party(receiver)}
        return self.alice_is_coordinator and pair == {Party.ALICE, Party.COORDINATOR}

    def _log(self, phase, sender, receiver, elements, bits, kind, original=None, delivered=None):
        sender, receiver = Party(sender), Party(receiver)
        if sender is receiver:
            raise ValueError("sender and receiver must differ")
        if self._free(sender, receiver):
            bits = 0
        event = Event(phase, sender.value, receiver.value, int(elements), int(bits), kind)
        self.transcript.append(event)
        for hook in self.hooks:
            hook(event, original, delivered)
        return event

    def send(self, sender, receiver, phase: str, payload) -> np.ndarray:
        payload = np.asarray(payload, dtype=float).ravel()
        if Party(sender) is Party(receiver):
            raise ValueError("sender and receiver must differ")
        delivered = quantize(payload, self.frac_bits).values
        self._log(phase, sender, receiver, payload.size, payload.size * self.scalar_bits, "vector", payload, delivered)
        return delivered

    def send_rows(self, sender, receiver, phase: str, rows) -> np.ndarray:
        """Ship sparse rows: each nonzero costs an index plus a scalar."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if Party(sender) is Party(receiver):
            raise ValueError("sender and receiver must differ")
        n = rows.shape[1]
        idx_bits = max(1, math.ceil(math.log2(n))) if n > 1 else 1
        nz = rows != 0
        delivered = np.zeros_like(rows)
        delivered[nz] = quantize(rows[nz], self.frac_bits).values
        count = int(nz.sum())
        self._log(phase, sender, receiver, count, count * (idx_bits + self.scalar_bits), "rows", rows, delivered)
        return delivered

    def send_indices(self, sender, receiver, phase: str, indices, universe: int) -> np.ndarray:
        indices = np.asarray(indices, dtype=int).ravel()
        bits = max(1, math.ceil(math.log2(universe))) if universe > 1 else 1
        self._log(phase, sender, receiver, indices.size, indices.size * bits, "indices", indices, indices)
        return indices.copy()

    def charge(self, phase: str, bits: int, sender=Party.ALICE, receiver=Party.COORDINATOR):
        if self.charge_mode == "actual":
            return None
        return self._log(phase, sender, receiver, 0, max(int(bits), 0), "formula")

    def stream(self, phase: str) -> np.random.Generator:
        """Generator shared by every party for ``phase``; costs no bits."""
        if phase not in self._streams:
            key = int.from_bytes(hashlib.sha256(phase.encode()).digest()[:8], "little")
            self._streams[phase] = np.random.default_rng(np.random.SeedSequence([self.seed, key]))
        return self._streams[phase]


def send(channel: Channel, sender, receiver, phase: str, payload) -> np.ndarray:
    return channel.send(sender, receiver, phase, payload)


def shared_random(channel: Channel, phase: str, shape) -> np.ndarray:
    return channel.stream(phase).random(shape)


def charge_protocol_cost(channel: Channel, phase: str, formula_bits: int, sender=Party.ALICE):
    """Account for a subprotocol that is computed locally but not simulated."""
    return channel.charge(phase, formula_bits, sender=sender)
