"""Fixed-delay episodes: distinct-occurrence counting and pattern-growth mining."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from itertools import accumulate
from typing import Iterable, Iterator

import numpy as np

from .events import Alphabet, EventStream

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Episode:
    """Serial episode with exact inter-event delays, earliest type first."""

    types: tuple[int, ...]
    delays: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "types", tuple(int(x) for x in self.types))
        object.__setattr__(self, "delays", tuple(int(x) for x in self.delays))
        if len(self.delays) != max(len(self.types) - 1, 0):
            raise ValueError("an l-node episode needs l-1 delays")
        if any(d < 0 for d in self.delays):
            raise ValueError("delays must be non-negative")

    def __len__(self) -> int:
        return len(self.types)

    @property
    def span(self) -> int:
        return sum(self.delays)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Tick offset of each node from the first one."""
        return (0, *accumulate(self.delays)) if self.types else ()

    def prepend(self, type_id: int, delay: int) -> "Episode":
        return Episode((type_id, *self.types), (delay, *self.delays))

    def sort_key(self) -> tuple:
        return (len(self.types), self.types, self.delays)

    def format(self, alphabet: Alphabet | None = None) -> str:
        name = (lambda j: alphabet[j]) if alphabet is not None else str
        parts = [name(self.types[0])] if self.types else []
        for d, j in zip(self.delays, self.types[1:]):
            parts.append(f"-{d}->")
            parts.append(name(j))
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str, alphabet: Alphabet) -> "Episode":
        tokens = text.split()
        if not tokens or len(tokens) % 2 == 0:
            raise ValueError(f"malformed episode {text!r}")
        types = [alphabet.index(tokens[0])]
        delays = []
        for arrow, lab in zip(tokens[1::2], tokens[2::2]):
            if not (arrow.startswith("-") and arrow.endswith("->")):
                raise ValueError(f"malformed delay arrow {arrow!r}")
            delays.append(int(arrow[1:-2]))
            types.append(alphabet.index(lab))
        return cls(tuple(types), tuple(delays))


EMPTY = Episode(())


def span(episode: Episode) -> int:
    return episode.span


def conflict_gaps(episode: Episode) -> frozenset[int] | None:
    """Start-tick differences at which two occurrences would share an event.

    Returns None when the episode can never occur (two nodes would need the
    same event).
    """
    gaps = set()
    offs = episode.offsets
    for i in range(len(offs)):
        for j in range(i + 1, len(offs)):
            if episode.types[i] == episode.types[j]:
                g = offs[j] - offs[i]
                if g == 0:
                    return None
                gaps.add(g)
    return frozenset(gaps)


def max_disjoint(starts: np.ndarray | list[int], gaps: frozenset[int]) -> int:
    """Size of a largest set of start ticks with no pairwise difference in ``gaps``.

    Two occurrences of a fixed-delay episode share an event exactly when their
    start ticks differ by one of the conflict gaps, so this is the number of
    distinct occurrences. Exact DP over a sliding bitmask of recent choices.
    """
    n = len(starts)
    if not gaps or n <= 1:
        return n
    horizon = max(gaps)
    full = (1 << (horizon + 1)) - 1
    gapmask = 0
    for g in gaps:
        gapmask |= 1 << g
    states = {0: 0}
    prev = None
    for s in (starts.tolist() if isinstance(starts, np.ndarray) else starts):
        shift = horizon + 1 if prev is None else s - prev
        prev = s
        if shift > horizon:
            best = max(states.values())
            states = {0: best, 1: best + 1}
            continue
        nxt: dict[int, int] = {}
        for mask, cnt in states.items():
            m = (mask << shift) & full
            if nxt.get(m, -1) < cnt:
                nxt[m] = cnt
            if not m & gapmask:
                m1 = m | 1
                if nxt.get(m1, -1) < cnt + 1:
                    nxt[m1] = cnt + 1
        states = nxt
    return max(states.values())


def occurrence_starts(stream: EventStream, episode: Episode, W: int, lag: int = 0) -> np.ndarray:
    """Start ticks of every occurrence ending in (W - lag, T - lag].

    With ``lag = 0`` these are the occurrences that terminate strictly after ``W``.
    """
    if not len(episode):
        raise ValueError("empty episode has no occurrences")
    idx = stream.index
    offs = episode.offsets
    span_ = offs[-1]
    starts = idx.ticks(episode.types[0])
    ends = starts + span_
    starts = starts[(ends > W - lag) & (ends <= stream.T - lag)]
    present = idx.present
    for j, o in zip(episode.types[1:], offs[1:]):
        if not len(starts):
            break
        starts = starts[present[j, starts + o]]
    return starts


def count_distinct(stream: EventStream, episode: Episode, W: int) -> int:
    """Distinct-occurrence frequency f_s(alpha, D, W)."""
    if episode.span > W:
        raise ValueError(f"episode span {episode.span} exceeds window {W}")
    if not len(episode):
        return max(stream.T - W, 0)
    gaps = conflict_gaps(episode)
    if gaps is None:
        return 0
    starts = occurrence_starts(stream, episode, W)
    return max_disjoint(starts, gaps)


def count_aligned(stream: EventStream, episode: Episode, W: int, lag: int = 0) -> int:
    """Number of reference ticks t in (W, T] with an occurrence ending at t - lag.

    Every occurrence counts, overlapping or not: this is the all-ones count of
    the indicator set the episode stands for, read off the T - W windows.
    """
    if not 0 <= lag <= W - episode.span:
        raise ValueError(f"lag {lag} with span {episode.span} does not fit window {W}")
    if not len(episode):
        return max(stream.T - W, 0)
    if conflict_gaps(episode) is None:
        return 0
    return len(occurrence_starts(stream, episode, W, lag))


@dataclass
class FrequencyTable:
    """Mined frequent episodes with their distinct-occurrence counts."""

    W: int
    T: int
    theta: float
    k: int
    entries: dict[Episode, int] = field(default_factory=dict)

    @property
    def windows(self) -> int:
        return self.T - self.W

    @property
    def min_count(self) -> float:
        return self.theta * self.windows

    def level(self, size: int) -> list[Episode]:
        return sorted((e for e in self.entries if len(e) == size), key=Episode.sort_key)

    def sorted_items(self) -> list[tuple[Episode, int]]:
        return sorted(self.entries.items(), key=lambda kv: kv[0].sort_key())

    def __contains__(self, episode: Episode) -> bool:
        return episode in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def relfreq(self, episode: Episode) -> float:
        return self.entries[episode] / self.windows if self.windows > 0 else 0.0


def _grow(
    stream: EventStream,
    alpha: Episode,
    starts: np.ndarray,
    W: int,
    k: int,
    min_count: float,
    out: dict[Episode, int],
) -> None:
    present = stream.index.present
    first = alpha.types[0]
    for delta in range(W - alpha.span + 1):
        cand = starts - delta
        cand = cand[cand >= 1]
        if len(cand) <= min_count:
            # counts only shrink as delta grows
            break
        hits = present[:, cand]
        raw = hits.sum(axis=1)
        for a in np.flatnonzero(raw > min_count).tolist():
            # zero-delay prefixes are kept in ascending alphabet order
            if delta == 0 and a >= first:
                continue
            beta = alpha.prepend(a, delta)
            d_beta = cand[hits[a]]
            gaps = conflict_gaps(beta)
            if gaps is None:
                continue
            count = max_disjoint(d_beta, gaps)
            if count > min_count:
                out[beta] = count
                if len(beta) < k + 1:
                    _grow(stream, beta, d_beta, W, k, min_count, out)


def _mine_roots(stream: EventStream, roots: list[int], W: int, k: int, min_count: float) -> dict:
    out: dict[Episode, int] = {}
    for j in roots:
        starts = stream.index.ticks(j)
        starts = starts[starts > W]
        if len(starts) > min_count:
            alpha = Episode((j,))
            out[alpha] = len(starts)
            if k >= 1:
                _grow(stream, alpha, starts, W, k, min_count, out)
    return out


_WORKER: dict = {}


def _worker_init(stream: EventStream) -> None:
    _WORKER["stream"] = stream


def _worker_mine(roots: list[int], W: int, k: int, min_count: float) -> dict:
    return _mine_roots(_WORKER["stream"], roots, W, k, min_count)


def mine_frequent(
    stream: EventStream,
    W: int,
    theta: float,
    k: int,
    jobs: int = 1,
) -> FrequencyTable:
    """All fixed-delay episodes of size 1..k+1, span <= W, count > theta*(T-W).

    Growth is leftward: an episode is extended by prepending a type at every
    admissible delay and counted on the projected start-tick list of the
    episode it extends. Independent root subtrees may be mined in parallel;
    the result does not depend on ``jobs``.
    """
    if W < 1:
        raise ValueError("window must be >= 1")
    if theta < 0:
        raise ValueError("threshold must be >= 0")
    if k < 1:
        raise ValueError("max parents k must be >= 1")
    table = FrequencyTable(W=W, T=stream.T, theta=theta, k=k)
    if stream.T <= W:
        return table
    min_count = table.min_count
    roots = list(range(stream.M))
    stream.index  # build once before forking
    if jobs <= 1 or len(roots) < 2:
        table.entries = _mine_roots(stream, roots, W, k, min_count)
    else:
        chunks = [roots[i::jobs] for i in range(jobs)]
        merged: dict[Episode, int] = {}
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(stream,)) as ex:
            for part in ex.map(partial(_worker_mine, W=W, k=k, min_count=min_count), chunks):
                merged.update(part)
        table.entries = merged
    table.entries = dict(sorted(table.entries.items(), key=lambda kv: kv[0].sort_key()))
    log.debug("mined %d frequent episodes (W=%d theta=%g k=%d)", len(table), W, theta, k)
    return table


class EpisodeCounter:
    """Memoized episode counts, seeded from a mined table.

    Counts needed for inclusion-exclusion that the mined table cannot supply
    (infrequent sub-episodes, shifted alignments, self-overlapping episodes)
    are counted on demand.
    """

    def __init__(self, stream: EventStream, W: int, table: FrequencyTable | None = None) -> None:
        self.stream = stream
        self.W = W
        self.cache: dict[Episode, int] = dict(table.entries) if table is not None else {}
        self.aligned: dict[tuple[Episode, int], int] = {}
        self.scans = 0

    @property
    def T(self) -> int:
        return self.stream.T

    def count(self, episode: Episode) -> int:
        hit = self.cache.get(episode)
        if hit is not None:
            return hit
        self.scans += 1
        value = count_distinct(self.stream, episode, self.W)
        self.cache[episode] = value
        return value

    def aligned_count(self, episode: Episode, lag: int = 0) -> int:
        """Memoized :func:`count_aligned`.

        An episode that cannot overlap itself has no shared events between
        occurrences, so at lag 0 its distinct count is already the answer.
        """
        if lag == 0 and conflict_gaps(episode) == frozenset():
            return self.count(episode)
        key = (episode, lag)
        hit = self.aligned.get(key)
        if hit is not None:
            return hit
        self.scans += 1
        value = count_aligned(self.stream, episode, self.W, lag)
        self.aligned[key] = value
        return value


def count_on_demand(stream: EventStream, episode: Episode, W: int, cache: EpisodeCounter) -> int:
    if cache.stream is not stream or cache.W != W:
        raise ValueError("counter was built for a different stream or window")
    return cache.count(episode)


def iter_dump(table: FrequencyTable, alphabet: Alphabet) -> Iterator[str]:
    for ep, count in table.sorted_items():
        yield f"{ep.format(alphabet)}\t{count}\t{count / table.windows:.10g}"


def format_dump(table: FrequencyTable, alphabet: Alphabet) -> str:
    return "".join(line + "\n" for line in iter_dump(table, alphabet))


def parse_dump(text: str, alphabet: Alphabet) -> list[tuple[Episode, int, float]]:
    out = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        ep, count, rel = line.split("\t")
        out.append((Episode.parse(ep, alphabet), int(count), float(rel)))
    return out


def enumerate_episodes(M: int, size: int, W: int) -> Iterable[Episode]:
    """Every episode of ``size`` nodes over ``M`` types with span <= W (brute force)."""
    from itertools import product

    for types in product(range(M), repeat=size):
        for delays in product(range(W + 1), repeat=size - 1):
            if sum(delays) <= W:
                yield Episode(types, delays)
