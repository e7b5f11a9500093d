"""DBN marginals from episode frequencies, and mutual information in bits.

An indicator set {X_j1(t - d1), ..., X_jl(t - dl)} maps to the fixed-delay
episode obtained by sorting its members earliest-first. The probability of
the all-ones assignment is the number of reference ticks t in (W, T] at
which the episode occurs, divided by (T - W); every other assignment follows
by inclusion-exclusion over supersets.

The count is aligned to the reference tick: an occurrence ends at t minus
the smallest lag in the set. For an episode with no repeated event-type at
a conflicting gap and zero smallest lag this is the mined distinct count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .episodes import EMPTY, Episode, EpisodeCounter

Member = tuple[int, int]  # (type_id, ticks before the reference tick)

ROUNDING = 1e-12


def canonical(members: Iterable[Member]) -> tuple[Member, ...]:
    """Earliest first (largest lag), zero-gap ties in alphabet order."""
    out = tuple(sorted({(int(j), int(d)) for j, d in members}, key=lambda m: (-m[1], m[0])))
    if any(d < 0 for _, d in out):
        raise ValueError("lags must be non-negative")
    return out


@dataclass(frozen=True)
class IndicatorSet:
    """A set of event-indicators given as (type, lag) pairs, canonically ordered."""

    members: tuple[Member, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", canonical(self.members))

    @classmethod
    def for_child(cls, child: int, parents: Iterable[Member]) -> "IndicatorSet":
        return cls(((child, 0), *parents))

    def __len__(self) -> int:
        return len(self.members)

    def subset(self, mask: int) -> tuple[Member, ...]:
        return tuple(m for i, m in enumerate(self.members) if mask >> i & 1)


def episode_of(members: Sequence[Member] | IndicatorSet) -> Episode:
    """Fixed-delay episode associated with a set of indicators."""
    if isinstance(members, IndicatorSet):
        members = members.members
    else:
        members = canonical(members)
    if not members:
        return EMPTY
    types = tuple(j for j, _ in members)
    lags = [d for _, d in members]
    delays = tuple(a - b for a, b in zip(lags, lags[1:]))
    return Episode(types, delays)


def all_ones_probability(members: Sequence[Member], counter: EpisodeCounter, T: int, W: int) -> float:
    if T <= W:
        raise ValueError(f"need T > W, got T={T}, W={W}")
    if not members:
        return 1.0
    members = canonical(members)
    return counter.aligned_count(episode_of(members), members[-1][1]) / (T - W)


@dataclass
class JointDistribution:
    """Probabilities of all 2^l binary assignments of an indicator set.

    ``probs[mask]`` is the probability of the assignment where member ``i`` is
    1 iff bit ``i`` of ``mask`` is set. ``raw`` keeps the inclusion-exclusion
    values before clamping.
    """

    members: tuple[Member, ...]
    probs: np.ndarray
    raw: np.ndarray
    clamped: bool

    @property
    def raw_total(self) -> float:
        return float(self.raw.sum())

    def marginal(self, keep: Sequence[int]) -> np.ndarray:
        """Marginal over the member positions ``keep`` (indexed the same way)."""
        out = np.zeros(1 << len(keep))
        for mask, p in enumerate(self.probs):
            sub = 0
            for b, i in enumerate(keep):
                if mask >> i & 1:
                    sub |= 1 << b
            out[sub] += p
        return out

    def to_csv(self, alphabet=None) -> str:
        names = [f"{alphabet[j] if alphabet is not None else j}@-{d}" for j, d in self.members]
        lines = ["assignment,probability", "# members: " + " ".join(names)]
        width = len(self.members)
        for mask, p in enumerate(self.probs):
            bits = "".join("1" if mask >> i & 1 else "0" for i in range(width))
            lines.append(f"{bits},{p:.12g}")
        return "\n".join(lines) + "\n"


def superset_mobius(g: np.ndarray, width: int) -> np.ndarray:
    """P[U] = sum over Y >= U of (-1)^|Y\\U| g[Y], in O(width * 2^width)."""
    p = np.array(g, dtype=float)
    for i in range(width):
        bit = 1 << i
        for mask in range(len(p)):
            if not mask & bit:
                p[mask] -= p[mask | bit]
    return p


def joint_distribution(
    members: IndicatorSet | Sequence[Member],
    counter: EpisodeCounter,
    T: int,
    W: int,
    max_size: int | None = None,
) -> JointDistribution:
    if T <= W:
        raise ValueError(f"need T > W, got T={T}, W={W}")
    if not isinstance(members, IndicatorSet):
        members = IndicatorSet(tuple(members))
    width = len(members)
    if max_size is not None and width > max_size:
        raise ValueError(f"indicator set of size {width} exceeds limit {max_size}")
    windows = T - W
    g = np.empty(1 << width)
    g[0] = 1.0
    for mask in range(1, 1 << width):
        sub = members.subset(mask)
        g[mask] = counter.aligned_count(episode_of(sub), sub[-1][1]) / windows
    raw = superset_mobius(g, width)
    probs = raw.copy()
    # negatives beyond rounding mean the counts are not one consistent histogram
    clamped = bool((probs < -ROUNDING).any())
    if (probs < 0).any():
        probs[probs < 0] = 0.0
        total = probs.sum()
        probs /= total
    return JointDistribution(members.members, probs, raw, clamped)


def _xlogx_terms(joint: np.ndarray, px: np.ndarray, py: np.ndarray) -> float:
    mi = 0.0
    for x in range(joint.shape[0]):
        for y in range(joint.shape[1]):
            p = joint[x, y]
            if p > 0 and px[x] > 0 and py[y] > 0:
                mi += p * math.log2(p / (px[x] * py[y]))
    return mi


@dataclass(frozen=True)
class MutualInformation:
    bits: float
    degenerate: bool = False
    clamped: bool = False

    def __float__(self) -> float:
        return self.bits


def mi_from_table(table: np.ndarray) -> float:
    """MI (bits) of a 2-D joint probability table, 0 log 0 taken as 0."""
    table = np.asarray(table, dtype=float)
    px = table.sum(axis=1)
    py = table.sum(axis=0)
    return max(_xlogx_terms(table, px, py), 0.0)


def child_parent_table(joint: JointDistribution, child_pos: int) -> np.ndarray:
    """Rearrange a joint over (child, parents) as a 2 x 2^m table."""
    width = len(joint.members)
    others = [i for i in range(width) if i != child_pos]
    table = np.zeros((2, 1 << len(others)))
    for mask, p in enumerate(joint.probs):
        x = mask >> child_pos & 1
        y = 0
        for b, i in enumerate(others):
            if mask >> i & 1:
                y |= 1 << b
        table[x, y] += p
    return table


def mutual_information(
    child: int,
    parents: Sequence[Member],
    counter: EpisodeCounter,
    T: int,
    W: int,
) -> MutualInformation:
    """I[X_child(t) ; parents] with every factor taken from one joint table."""
    parents = list(parents)
    if not parents:
        return MutualInformation(0.0, degenerate=True)
    for j, d in parents:
        if not 1 <= d <= W:
            raise ValueError(f"parent delay {d} outside [1, {W}]")
    iset = IndicatorSet.for_child(child, parents)
    joint = joint_distribution(iset, counter, T, W)
    child_pos = iset.members.index((child, 0))
    table = child_parent_table(joint, child_pos)
    px1 = table[1].sum()
    if px1 <= 0.0 or px1 >= 1.0:
        return MutualInformation(0.0, degenerate=True, clamped=joint.clamped)
    return MutualInformation(mi_from_table(table), clamped=joint.clamped)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))
