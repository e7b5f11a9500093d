"""Event streams over a finite alphabet, on an integer tick grid.

A stream is the realization of the binary indicator process X_j(t): event-type
``j`` either fires at tick ``t`` or it does not, so duplicate (type, tick)
pairs are collapsed on construction.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class StreamError(ValueError):
    """Base class for malformed event input."""


class EventParseError(StreamError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownLabelError(EventParseError):
    pass


@dataclass(frozen=True)
class Alphabet:
    """Ordered, duplicate-free list of event-type labels.

    The order is the canonical order used everywhere else (episode
    canonicalization, tie-breaking, output ordering).
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError("alphabet labels must be unique")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def discover(cls, labels: Iterable[str]) -> "Alphabet":
        return cls(tuple(sorted(set(labels))))

    @cached_property
    def _lookup(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._lookup[label]
        except KeyError:
            raise UnknownLabelError(f"unknown label {label!r}") from None

    def __contains__(self, label: object) -> bool:
        return label in self._lookup

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> str:
        return self.labels[i]

    def __iter__(self):
        return iter(self.labels)


class OccurrenceIndex:
    """Per-type sorted tick arrays plus a dense presence matrix.

    ``present[j, t]`` is True iff type ``j`` fires at tick ``t``. The matrix has
    ``T + 1`` columns (column 0 is always empty) so ticks index it directly.
    """

    def __init__(self, types: np.ndarray, ticks: np.ndarray, size: int, horizon: int) -> None:
        self.horizon = horizon
        present = np.zeros((size, horizon + 1), dtype=bool)
        present[types, ticks] = True
        present.setflags(write=False)
        self.present = present
        order = np.lexsort((ticks, types))
        sorted_types = types[order]
        sorted_ticks = ticks[order]
        bounds = np.searchsorted(sorted_types, np.arange(size + 1))
        self._ticks = []
        for j in range(size):
            arr = sorted_ticks[bounds[j]:bounds[j + 1]].copy()
            arr.setflags(write=False)
            self._ticks.append(arr)

    def ticks(self, j: int) -> np.ndarray:
        return self._ticks[j]

    def __contains__(self, item: tuple[int, int]) -> bool:
        j, t = item
        if not 0 <= j < self.present.shape[0] or not 1 <= t <= self.horizon:
            return False
        return bool(self.present[j, t])

    def as_lists(self) -> list[list[int]]:
        return [a.tolist() for a in self._ticks]


@dataclass(frozen=True, eq=False)
class EventStream:
    """Immutable, time-ordered set of (type_id, tick) events.

    ``T`` is the tick of the last event unless an explicit ``horizon`` was
    given (a silent tail still counts towards the number of windows).
    """

    alphabet: Alphabet
    types: np.ndarray
    ticks: np.ndarray
    T: int = 0

    @classmethod
    def from_events(
        cls,
        events: Iterable[tuple[int, int]],
        alphabet: Alphabet,
        horizon: int | None = None,
    ) -> "EventStream":
        pairs = sorted({(int(t), int(j)) for j, t in events})
        types = np.fromiter((j for _, j in pairs), dtype=np.int64, count=len(pairs))
        ticks = np.fromiter((t for t, _ in pairs), dtype=np.int64, count=len(pairs))
        return cls._build(alphabet, types, ticks, horizon)

    @classmethod
    def from_arrays(
        cls,
        types: np.ndarray,
        ticks: np.ndarray,
        alphabet: Alphabet,
        horizon: int | None = None,
    ) -> "EventStream":
        types = np.asarray(types, dtype=np.int64)
        ticks = np.asarray(ticks, dtype=np.int64)
        if types.shape != ticks.shape:
            raise ValueError("types and ticks must have the same length")
        if len(ticks):
            key = ticks * (len(alphabet) + 1) + types
            key, first = np.unique(key, return_index=True)
            types, ticks = types[first], ticks[first]
        return cls._build(alphabet, types, ticks, horizon)

    @classmethod
    def _build(cls, alphabet, types, ticks, horizon) -> "EventStream":
        if len(ticks):
            if ticks.min() < 1:
                raise StreamError("ticks must be positive integers")
            if types.min() < 0 or types.max() >= len(alphabet):
                raise StreamError("type id outside the alphabet")
        last = int(ticks[-1]) if len(ticks) else 0
        if horizon is None:
            T = last
        else:
            if horizon < last:
                raise StreamError(f"horizon {horizon} is before the last event tick {last}")
            T = int(horizon)
        types.setflags(write=False)
        ticks.setflags(write=False)
        return cls(alphabet=alphabet, types=types, ticks=ticks, T=T)

    def __len__(self) -> int:
        return len(self.ticks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.T == other.T
            and np.array_equal(self.types, other.types)
            and np.array_equal(self.ticks, other.ticks)
        )

    @property
    def M(self) -> int:
        return len(self.alphabet)

    @property
    def events(self) -> list[tuple[int, int]]:
        return list(zip(self.types.tolist(), self.ticks.tolist()))

    @cached_property
    def index(self) -> OccurrenceIndex:
        return OccurrenceIndex(self.types, self.ticks, self.M, self.T)

    def indicator(self, j: int, t: int) -> int:
        if not 1 <= t <= self.T:
            raise IndexError(f"tick {t} outside 1..{self.T}")
        if not 0 <= j < self.M:
            raise IndexError(f"type id {j} outside the alphabet")
        return int(self.index.present[j, t])

    def relabel(self, types: np.ndarray) -> "EventStream":
        """Same ticks, new type ids (used by surrogates)."""
        return EventStream.from_arrays(types, self.ticks, self.alphabet, horizon=self.T)


def occurrence_index(stream: EventStream) -> OccurrenceIndex:
    return stream.index


def indicator(stream: EventStream, j: int, t: int) -> int:
    return stream.indicator(j, t)


def discretize(times: Sequence[float], bin_width: float) -> list[int]:
    """Map times in seconds onto 1-based ticks: ``floor(time / bin_width) + 1``."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    out = []
    for x in times:
        x = float(x)
        if x < 0 or math.isnan(x):
            raise ValueError(f"negative or invalid time {x!r}")
        q = x / bin_width
        r = round(q)
        # guard against 0.003 / 0.001 == 2.9999999999999996
        if abs(q - r) < 1e-9 * max(1.0, abs(q)):
            q = r
        out.append(int(math.floor(q)) + 1)
    return out


def parse_events(
    text: str | io.TextIOBase,
    alphabet_mode: str = "discover",
    alphabet: Alphabet | Sequence[str] | None = None,
    bin_width: float | None = None,
    horizon: int | None = None,
) -> EventStream:
    """Parse ``time,label`` CSV.

    Times are integer ticks unless ``bin_width`` (seconds) is given, in which
    case they are seconds and go through :func:`discretize`.
    """
    if alphabet_mode not in ("discover", "fixed"):
        raise ValueError(f"alphabet_mode must be 'discover' or 'fixed', got {alphabet_mode!r}")
    if alphabet_mode == "fixed":
        if alphabet is None:
            raise ValueError("fixed alphabet mode needs an alphabet")
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(tuple(alphabet))
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    rows: list[tuple[float, str, int]] = []
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in line.split(",")]
            if cols != ["time", "label"]:
                raise EventParseError("expected header 'time,label'", lineno)
            header_seen = True
            continue
        parts = next(csv.reader([line]))
        if len(parts) != 2:
            raise EventParseError(f"expected 2 fields, got {len(parts)}", lineno)
        tstr, label = parts[0].strip(), parts[1].strip()
        if not label:
            raise EventParseError("empty label", lineno)
        try:
            tval = float(tstr)
        except ValueError:
            raise EventParseError(f"bad time {tstr!r}", lineno) from None
        if tval < 0 or math.isnan(tval) or math.isinf(tval):
            raise EventParseError(f"time must be non-negative, got {tstr!r}", lineno)
        if bin_width is None:
            if tval != int(tval) or tval < 1:
                raise EventParseError(f"tick must be a positive integer, got {tstr!r}", lineno)
        rows.append((tval, label, lineno))

    if alphabet_mode == "discover":
        alphabet = Alphabet.discover(r[1] for r in rows)
    assert isinstance(alphabet, Alphabet)

    types = []
    for _, label, lineno in rows:
        try:
            types.append(alphabet.index(label))
        except UnknownLabelError:
            raise UnknownLabelError(f"label {label!r} not in alphabet", lineno) from None
    if bin_width is None:
        ticks = [int(r[0]) for r in rows]
    else:
        ticks = discretize([r[0] for r in rows], bin_width)
    return EventStream.from_arrays(
        np.array(types, dtype=np.int64), np.array(ticks, dtype=np.int64), alphabet, horizon
    )


def format_events(stream: EventStream) -> str:
    """Serialize as ``time,label`` with integer ticks, sorted by (tick, type)."""
    labels = stream.alphabet.labels
    buf = ["time,label"]
    buf.extend(f"{t},{labels[j]}" for j, t in zip(stream.types.tolist(), stream.ticks.tolist()))
    return "\n".join(buf) + "\n"
