"""Inhomogeneous-Poisson spiking network with delayed higher-order excitation.

Per tick t and neuron i::

    I_i(t)      = sum over terms of weight * prod_{sources} Y_j(t - delay_j)
    lambda_i(t) = lambda / (1 + exp(-I_i(t) + offset))
    p_i(t)      = min(1, lambda_i(t) * dt)

``lambda`` is the rate ceiling. The resting rate (I = 0) is
``lambda / (1 + exp(offset))``; :func:`offset_for_resting_rate` inverts that.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import Alphabet, EventStream

log = logging.getLogger(__name__)

CHUNK_TICKS = 8192
DEFAULT_TICK_S = 0.001
DEFAULT_RESTING_HZ = 20.0
DEFAULT_CEILING_HZ = 1000.0


def offset_for_resting_rate(resting_hz: float, ceiling_hz: float) -> float:
    if not 0 < resting_hz < ceiling_hz:
        raise ValueError("need 0 < resting rate < ceiling rate")
    return math.log(ceiling_hz / resting_hz - 1.0)


DEFAULT_OFFSET = offset_for_resting_rate(DEFAULT_RESTING_HZ, DEFAULT_CEILING_HZ)


@dataclass(frozen=True)
class Term:
    target: int
    sources: tuple[tuple[int, int], ...]  # (source node, delay in ticks)
    weight: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple((int(j), int(d)) for j, d in self.sources))
        if not self.sources:
            raise ValueError("a term needs at least one source")
        if any(d < 1 for _, d in self.sources):
            raise ValueError("source delays must be >= 1 tick")
        if not math.isfinite(self.weight):
            raise ValueError("weight must be finite")


@dataclass
class NetworkSpec:
    num_nodes: int
    base_rate_hz: float = DEFAULT_CEILING_HZ
    sigmoid_offset: float = DEFAULT_OFFSET
    tick_s: float = DEFAULT_TICK_S
    terms: list[Term] = field(default_factory=list)
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.num_nodes < 1:
            raise ValueError("need at least one node")
        if not self.tick_s > 0:
            raise ValueError("tick must be positive")
        if self.labels is None:
            width = len(str(self.num_nodes - 1))
            self.labels = tuple(f"N{i:0{width}d}" for i in range(self.num_nodes))
        self.labels = tuple(self.labels)
        if len(self.labels) != self.num_nodes:
            raise ValueError("one label per node")
        for t in self.terms:
            if not 0 <= t.target < self.num_nodes or any(not 0 <= j < self.num_nodes for j, _ in t.sources):
                raise ValueError(f"term {t} references an unknown node")

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.discover(self.labels)

    @property
    def resting_probability(self) -> float:
        return firing_probability(self, 0.0)

    def to_json_obj(self) -> dict:
        return {
            "nodes": self.num_nodes,
            "labels": list(self.labels),
            "base_rate_hz": self.base_rate_hz,
            "sigmoid_offset": self.sigmoid_offset,
            "tick_s": self.tick_s,
            "terms": [
                {
                    "target": t.target,
                    "sources": [{"node": j, "delay_ticks": d} for j, d in t.sources],
                    "weight": t.weight,
                }
                for t in self.terms
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "NetworkSpec":
        terms = [
            Term(int(t["target"]), tuple((s["node"], s["delay_ticks"]) for s in t["sources"]), float(t["weight"]))
            for t in obj.get("terms", [])
        ]
        labels = obj.get("labels")
        return cls(
            num_nodes=int(obj["nodes"]),
            base_rate_hz=float(obj.get("base_rate_hz", DEFAULT_CEILING_HZ)),
            sigmoid_offset=float(obj.get("sigmoid_offset", DEFAULT_OFFSET)),
            tick_s=float(obj.get("tick_s", DEFAULT_TICK_S)),
            terms=terms,
            labels=tuple(labels) if labels else None,
        )


@dataclass
class GroundTruth:
    labels: tuple[str, ...]
    edges: set[tuple[str, str, int]]  # (source, target, delay)
    orders: dict[str, int] = field(default_factory=dict)  # target -> largest term arity

    @classmethod
    def from_spec(cls, spec: NetworkSpec) -> "GroundTruth":
        names = spec.labels
        edges = set()
        orders: dict[str, int] = {}
        for t in spec.terms:
            for j, d in t.sources:
                edges.add((names[j], names[t.target], d))
            tgt = names[t.target]
            orders[tgt] = max(orders.get(tgt, 0), len(t.sources))
        return cls(tuple(sorted(names)), edges, orders)

    def sorted_edges(self) -> list[tuple[str, str, int]]:
        return sorted(self.edges, key=lambda e: (e[1], e[0], e[2]))

    def to_json_obj(self) -> dict:
        return {
            "nodes": list(self.labels),
            "edges": [{"from": a, "to": b, "delay": d} for a, b, d in self.sorted_edges()],
            "orders": dict(sorted(self.orders.items())),
        }

    def to_json(self, extra: dict | None = None) -> str:
        obj = self.to_json_obj()
        if extra:
            obj.update(extra)
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GroundTruth":
        edges = {(e["from"], e["to"], int(e["delay"])) for e in obj["edges"]}
        return cls(tuple(obj["nodes"]), edges, {k: int(v) for k, v in obj.get("orders", {}).items()})


def firing_probability(spec: NetworkSpec, drive: float) -> float:
    """Per-tick firing probability for input ``drive``, clamped to [0, 1]."""
    x = -drive + spec.sigmoid_offset
    # numerically safe logistic
    if x >= 0:
        z = math.exp(-x)
        rate = spec.base_rate_hz * z / (1.0 + z)
    else:
        rate = spec.base_rate_hz / (1.0 + math.exp(x))
    return min(1.0, rate * spec.tick_s)


def calibrate_weight(spec: NetworkSpec, target: float, term: Term | None = None) -> float:
    """Weight that makes a fully armed term fire its target with probability ``target``.

    Other terms on the same target are assumed silent in that tick.
    """
    if not 0 < target < 1:
        raise ValueError("target probability must be in (0, 1)")
    ceiling = spec.base_rate_hz * spec.tick_s
    if ceiling <= target:
        raise ValueError(
            f"target {target} unreachable: rate ceiling gives at most {ceiling:.4g} per tick"
        )
    return spec.sigmoid_offset - math.log(ceiling / target - 1.0)


def simulate(spec: NetworkSpec, duration: float, seed: int) -> tuple[EventStream, GroundTruth]:
    """Run the network for ``duration`` seconds; ticks are 1-based.

    The stream's horizon is the last event tick. Randomness comes from one
    generator seeded by ``seed`` and drawn in fixed-size tick chunks.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    n_ticks = int(round(duration / spec.tick_s))
    M = spec.num_nodes
    rng = np.random.default_rng(seed)

    # node ids follow spec order; the stream alphabet is sorted by label
    alphabet = spec.alphabet
    to_alpha = np.array([alphabet.index(lab) for lab in spec.labels], dtype=np.int64)

    p0 = firing_probability(spec, 0.0)
    raw0 = spec.base_rate_hz * spec.tick_s / (1.0 + math.exp(spec.sigmoid_offset))
    if raw0 > 1.0:
        log.warning("resting firing probability %.3g exceeds 1; clamped", raw0)
    by_source: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for ti, term in enumerate(spec.terms):
        for j, d in term.sources:
            by_source[j].append((ti, d))

    fired = np.zeros((M, n_ticks + 1), dtype=bool)
    pending: dict[int, set[int]] = defaultdict(set)
    prob_cache: dict[float, float] = {}
    warned = False
    out_nodes: list[np.ndarray] = []
    out_ticks: list[np.ndarray] = []

    for c0 in range(1, n_ticks + 1, CHUNK_TICKS):
        c1 = min(c0 + CHUNK_TICKS, n_ticks + 1)
        U = rng.random((c1 - c0, M))
        base = U < p0
        for t in range(c0, c1):
            row = t - c0
            terms_due = pending.pop(t, None)
            if terms_due:
                drive: dict[int, float] = defaultdict(float)
                for ti in sorted(terms_due):
                    term = spec.terms[ti]
                    if all(fired[j, t - d] for j, d in term.sources):
                        drive[term.target] += term.weight
                for i, I in drive.items():
                    p = prob_cache.get(I)
                    if p is None:
                        x = -I + spec.sigmoid_offset
                        raw = spec.base_rate_hz * spec.tick_s / (1.0 + math.exp(min(x, 700.0)))
                        if raw > 1.0 and not warned:
                            log.warning("firing probability %.3g > 1 for drive %.3g; weights mis-tuned", raw, I)
                            warned = True
                        p = min(1.0, raw)
                        prob_cache[I] = p
                    base[row, i] = U[row, i] < p
            spiking = np.flatnonzero(base[row])
            if not len(spiking):
                continue
            fired[spiking, t] = True
            for j in spiking.tolist():
                for ti, d in by_source.get(j, ()):
                    if t + d <= n_ticks:
                        pending[t + d].add(ti)
        nodes, ticks = np.nonzero(base.T)
        out_nodes.append(to_alpha[nodes])
        out_ticks.append(ticks + c0)

    types = np.concatenate(out_nodes) if out_nodes else np.zeros(0, dtype=np.int64)
    ticks = np.concatenate(out_ticks) if out_ticks else np.zeros(0, dtype=np.int64)
    stream = EventStream.from_arrays(types, ticks, alphabet)
    return stream, GroundTruth.from_spec(spec)


def surrogate(stream: EventStream, seed: int | np.random.Generator) -> EventStream:
    """Replace every label by a uniformly random one, keeping ticks.

    Labels within one tick are drawn without replacement so that no two
    events collapse and per-tick counts are preserved exactly.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    M = stream.M
    ticks = stream.ticks
    types = np.empty(len(ticks), dtype=np.int64)
    if not len(ticks):
        return stream.relabel(types)
    bounds = np.flatnonzero(np.diff(ticks)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [len(ticks)]))
    sizes = ends - starts
    single = sizes == 1
    types[starts[single]] = rng.integers(0, M, size=int(single.sum()))
    for s, e in zip(starts[~single].tolist(), ends[~single].tolist()):
        types[s:e] = rng.choice(M, size=e - s, replace=False)
    return stream.relabel(types)


# ---------------------------------------------------------------- topologies


def _weight(spec: NetworkSpec, cond: float) -> float:
    return calibrate_weight(spec, cond)


def _blank(num_nodes: int, labels: Sequence[str] | None, resting_hz: float, ceiling_hz: float,
           tick_s: float) -> NetworkSpec:
    return NetworkSpec(
        num_nodes=num_nodes,
        base_rate_hz=ceiling_hz,
        sigmoid_offset=offset_for_resting_rate(resting_hz, ceiling_hz),
        tick_s=tick_s,
        labels=tuple(labels) if labels is not None else None,
    )


def chain(n: int = 50, delay: int | Sequence[int] = 3, cond: float = 0.8, loop: bool = False,
          segment: int | None = None, **kw) -> NetworkSpec:
    """First-order causative chain(s).

    ``segment`` splits the nodes into independent chains of that length;
    ``loop`` closes each chain back onto its first node.
    """
    if n < 2:
        raise ValueError("a chain needs at least 2 nodes")
    segment = segment or n
    if segment < 2:
        raise ValueError("chain segments need at least 2 nodes")
    spec = _blank(n, kw.get("labels"), kw.get("resting_hz", DEFAULT_RESTING_HZ),
                  kw.get("ceiling_hz", DEFAULT_CEILING_HZ), kw.get("tick_s", DEFAULT_TICK_S))
    delays = [delay] if isinstance(delay, int) else list(delay)
    if any(d < 1 for d in delays):
        raise ValueError("delays must be >= 1")
    w = _weight(spec, cond)
    e = 0
    for s0 in range(0, n, segment):
        members = list(range(s0, min(s0 + segment, n)))
        pairs = list(zip(members, members[1:]))
        if loop and len(members) > 2:
            pairs.append((members[-1], members[0]))
        for a, b in pairs:
            spec.terms.append(Term(b, ((a, delays[e % len(delays)]),), w))
            e += 1
    return spec


def higher_order_chain(cond: float = 0.8, **kw) -> NetworkSpec:
    """First-order chain A->B->C->D next to M->N, {M,N}->O, {M,N,O}->P."""
    labels = ("A", "B", "C", "D", "M", "N", "O", "P")
    spec = _blank(8, labels, kw.get("resting_hz", DEFAULT_RESTING_HZ),
                  kw.get("ceiling_hz", DEFAULT_CEILING_HZ), kw.get("tick_s", DEFAULT_TICK_S))
    A, B, C, D, M_, N, O, P = range(8)
    w = _weight(spec, cond)
    dab, dbc, dcd = kw.get("chain_delays", (3, 2, 4))
    spec.terms += [
        Term(B, ((A, dab),), w),
        Term(C, ((B, dbc),), w),
        Term(D, ((C, dcd),), w),
        Term(N, ((M_, 2),), w),
        Term(O, ((M_, 5), (N, 3)), w),
        Term(P, ((M_, 8), (N, 6), (O, 3)), w),
    ]
    return spec


def synfire(group_sizes: Sequence[int] = (1, 3, 3, 3), delay: int = 3, cond: float = 0.8, **kw) -> NetworkSpec:
    """Groups fire synchronously; each member of a group needs the whole previous group."""
    if len(group_sizes) < 2 or any(g < 1 for g in group_sizes):
        raise ValueError("need at least two non-empty groups")
    if delay < 1:
        raise ValueError("delay must be >= 1")
    n = sum(group_sizes)
    spec = _blank(n, kw.get("labels"), kw.get("resting_hz", DEFAULT_RESTING_HZ),
                  kw.get("ceiling_hz", DEFAULT_CEILING_HZ), kw.get("tick_s", DEFAULT_TICK_S))
    w = _weight(spec, cond)
    groups = []
    nxt = 0
    for g in group_sizes:
        groups.append(list(range(nxt, nxt + g)))
        nxt += g
    for prev, cur in zip(groups, groups[1:]):
        for tgt in cur:
            spec.terms.append(Term(tgt, tuple((s, delay) for s in prev), w))
    return spec


def polychronous(cond: float = 0.8, **kw) -> NetworkSpec:
    """Two time-locked groups with convergent multi-delay inputs (15 edges).

    Q: Q1 drives Q2 (+2) and Q3 (+5); Q4 needs Q2 and Q3 to arrive together;
       Q5 needs Q1 and Q4.
    R: R1 drives R2 (+2), R3 (+4), R4 (+5); R5 needs all three at +8; R6 needs
       R1 and R5; R7 follows R4.
    """
    labels = ("Q1", "Q2", "Q3", "Q4", "Q5", "R1", "R2", "R3", "R4", "R5", "R6", "R7")
    spec = _blank(len(labels), labels, kw.get("resting_hz", DEFAULT_RESTING_HZ),
                  kw.get("ceiling_hz", DEFAULT_CEILING_HZ), kw.get("tick_s", DEFAULT_TICK_S))
    Q1, Q2, Q3, Q4, Q5, R1, R2, R3, R4, R5, R6, R7 = range(len(labels))
    w = _weight(spec, cond)
    spec.terms += [
        Term(Q2, ((Q1, 2),), w),
        Term(Q3, ((Q1, 5),), w),
        Term(Q4, ((Q2, 4), (Q3, 1)), w),
        Term(Q5, ((Q1, 8), (Q4, 2)), w),
        Term(R2, ((R1, 2),), w),
        Term(R3, ((R1, 4),), w),
        Term(R4, ((R1, 5),), w),
        Term(R5, ((R2, 6), (R3, 4), (R4, 3)), w),
        Term(R6, ((R1, 9), (R5, 1)), w),
        Term(R7, ((R4, 3),), w),
    ]
    return spec


def random_network(n: int = 125, density: float = 0.4, max_parents: int = 3, cond: float = 0.8,
                   max_delay: int = 5, seed: int = 0, **kw) -> NetworkSpec:
    """Random excitatory network where ``density`` of the nodes have parents.

    Each descendant gets 1..max_parents parents through a single term. A
    one-parent term hangs off a root. Larger terms are time-locked: they
    combine a root with first-order children of that root (at delays that
    make all sources arrive together), so the parents co-fire often enough
    to be seen together.
    """
    if not 0 <= density <= 1:
        raise ValueError("density must be in [0, 1]")
    if max_parents < 1 or max_delay < 1:
        raise ValueError("max_parents and max_delay must be >= 1")
    rng = np.random.default_rng(seed)
    spec = _blank(n, kw.get("labels"), kw.get("resting_hz", DEFAULT_RESTING_HZ),
                  kw.get("ceiling_hz", DEFAULT_CEILING_HZ), kw.get("tick_s", DEFAULT_TICK_S))
    w = _weight(spec, cond)
    n_desc = int(round(density * n))
    n_roots = n - n_desc
    if n_desc and n_roots < 1:
        raise ValueError("density leaves no root nodes")
    order = rng.permutation(n).tolist()
    roots = order[:n_roots]
    descendants = order[n_roots:]
    arity = rng.integers(1, max_parents + 1, size=n_desc).tolist()
    # first-order children first, so higher-order terms can reuse them
    singles = [d for d, a in zip(descendants, arity) if a == 1]
    multis = [(d, a) for d, a in zip(descendants, arity) if a > 1]
    children: dict[int, list[tuple[int, int]]] = defaultdict(list)  # root -> [(child, delay)]
    for d in singles:
        r = roots[int(rng.integers(len(roots)))]
        delay = int(rng.integers(1, max_delay + 1))
        spec.terms.append(Term(d, ((r, delay),), w))
        children[r].append((d, delay))
    for d, a in multis:
        r = roots[int(rng.integers(len(roots)))]
        kids = children[r]
        n_kids = min(a - 1, len(kids))
        picked = [kids[i] for i in sorted(rng.choice(len(kids), size=n_kids, replace=False).tolist())] if n_kids else []
        lag = int(rng.integers(1, max_delay + 1))
        # the child fires `lag` ticks after the latest source
        latest = max([0] + [dl for _, dl in picked])
        sources = [(r, latest + lag)] + [(c, latest + lag - dl) for c, dl in picked]
        spec.terms.append(Term(d, tuple(sources), w))
    return spec


TOPOLOGIES = {
    "chain": chain,
    "higher_order_chain": higher_order_chain,
    "synfire": synfire,
    "polychronous": polychronous,
    "random": random_network,
}


def make_topology(kind: str, **params) -> NetworkSpec:
    try:
        fn = TOPOLOGIES[kind]
    except KeyError:
        raise ValueError(f"unknown topology {kind!r}; choose from {sorted(TOPOLOGIES)}") from None
    return fn(**params)

