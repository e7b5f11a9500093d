"""Parent-set search over frequent episodes (excitatory DBN structure learning)."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Iterable

from .episodes import Episode, EpisodeCounter, FrequencyTable
from .events import Alphabet, EventStream
from .marginals import Member, mutual_information

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParentSet:
    child: int
    parents: tuple[Member, ...]  # (type_id, delay >= 1), earliest first
    mi: float = 0.0
    source_level: int = 0  # size of the episode the candidate came from

    def key(self) -> tuple:
        return tuple(j for j, _ in self.parents), tuple(d for _, d in self.parents)

    def issubset(self, other: "ParentSet") -> bool:
        return set(self.parents) < set(other.parents)


def prefix_parents(episode: Episode) -> tuple[Member, ...]:
    """Parents of the episode's last node: every earlier node at its lag."""
    offs = episode.offsets
    last = offs[-1]
    return tuple((j, last - o) for j, o in zip(episode.types[:-1], offs[:-1]))


def candidates_for(child: int, table: FrequencyTable) -> list[ParentSet]:
    """One candidate per frequent episode of size >= 2 ending in ``child``.

    Episodes whose final delay is 0 are skipped: a parent must precede its
    child.
    """
    out = []
    for ep, _ in table.sorted_items():
        if len(ep) >= 2 and ep.types[-1] == child and ep.delays[-1] >= 1:
            out.append(ParentSet(child, prefix_parents(ep), source_level=len(ep)))
    return out


@dataclass
class DbnStructure:
    alphabet: Alphabet
    assignments: dict[int, ParentSet | None]
    W: int
    theta: float
    epsilon: float
    k: int
    mi_evaluations: int = 0
    assignment_touches: int = 0

    def edges(self) -> list[tuple[int, int, int, float]]:
        """(parent, child, delay, mi) sorted by child, then parent order."""
        out = []
        for child in sorted(self.assignments):
            ps = self.assignments[child]
            if ps is None:
                continue
            for j, d in ps.parents:
                out.append((j, child, d, ps.mi))
        return out

    def roots(self) -> list[int]:
        return [c for c in sorted(self.assignments) if self.assignments[c] is None]

    def edge_set(self, with_delay: bool = True) -> set[tuple]:
        if with_delay:
            return {(self.alphabet[p], self.alphabet[c], d) for p, c, d, _ in self.edges()}
        return {(self.alphabet[p], self.alphabet[c]) for p, c, _, _ in self.edges()}

    @property
    def params(self) -> dict:
        return {"W": self.W, "theta": self.theta, "epsilon": self.epsilon, "k": self.k}

    def to_json_obj(self) -> dict:
        labels = self.alphabet.labels
        return {
            "params": self.params,
            "nodes": list(labels),
            "edges": [
                {"from": labels[p], "to": labels[c], "delay": d, "mi": mi}
                for p, c, d, mi in self.edges()
            ],
        }

    def to_json(self, extra: dict | None = None) -> str:
        obj = self.to_json_obj()
        if extra:
            obj.update(extra)
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DbnStructure":
        alphabet = Alphabet(tuple(obj["nodes"]))
        p = obj.get("params", {})
        grouped: dict[int, list[tuple[int, int]]] = {}
        mis: dict[int, float] = {}
        for e in obj["edges"]:
            c = alphabet.index(e["to"])
            grouped.setdefault(c, []).append((alphabet.index(e["from"]), int(e["delay"])))
            mis[c] = float(e.get("mi", 0.0))
        assignments: dict[int, ParentSet | None] = {j: None for j in range(len(alphabet))}
        for c, parents in grouped.items():
            parents.sort(key=lambda m: (-m[1], m[0]))
            assignments[c] = ParentSet(c, tuple(parents), mis[c], len(parents) + 1)
        return cls(alphabet, assignments, int(p.get("W", 0)), float(p.get("theta", 0.0)),
                   float(p.get("epsilon", 0.0)), int(p.get("k", 0)))


def learn(
    table: FrequencyTable,
    stream: EventStream,
    W: int,
    epsilon: float,
    k: int,
    counter: EpisodeCounter | None = None,
    trace: list | None = None,
) -> DbnStructure:
    """Pick, per event-type, the highest-MI parent set among frequent-episode prefixes.

    Levels are visited from k parents down to 1. A stored set from the level
    just above is replaced by a smaller subset whose MI is within ``epsilon``,
    or by any candidate with strictly higher MI; within one level the higher
    MI wins. Candidates are visited in (types, delays) order so ties keep the
    lexicographically first one.

    ``trace``, if given, receives ``(child, level, ParentSet)`` every time a
    stored entry changes.
    """
    if table.W != W or table.k < k:
        raise ValueError("frequency table was mined with different parameters")
    if counter is None:
        counter = EpisodeCounter(stream, W, table)
    T = stream.T
    h: dict[int, tuple[ParentSet, int]] = {}
    evaluations = 0
    touches = 0
    for i in range(k, 0, -1):
        for ep in table.level(i + 1):
            if ep.delays[-1] < 1:
                continue
            child = ep.types[-1]
            parents = prefix_parents(ep)
            stored = h.get(child)
            if stored is not None and stored[1] not in (i, i + 1):
                continue
            mi = mutual_information(child, parents, counter, T, W).bits
            evaluations += 1
            touches += 1 << (len(parents) + 1)
            cand = ParentSet(child, parents, mi, i + 1)
            if stored is None:
                replace = True
            else:
                prev, level = stored
                if level == i + 1:
                    replace = (prev.mi - mi < epsilon and cand.issubset(prev)) or mi > prev.mi
                else:
                    replace = mi > prev.mi
            if replace:
                h[child] = (cand, i)
                if trace is not None:
                    trace.append((child, i, cand))
    assignments: dict[int, ParentSet | None] = {j: None for j in range(stream.M)}
    for child, (ps, _) in h.items():
        assignments[child] = ps
    log.debug("learned %d parent sets from %d MI evaluations", len(h), evaluations)
    return DbnStructure(
        stream.alphabet, assignments, W, table.theta, epsilon, k,
        mi_evaluations=evaluations, assignment_touches=touches,
    )


_DOT_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _dot_id(label: str) -> str:
    if _DOT_ID.fullmatch(label) and label.lower() not in ("node", "edge", "graph", "digraph", "subgraph", "strict"):
        return label
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(structure: DbnStructure) -> str:
    """Graphviz digraph; nodes in alphabet order, edges labelled with their delay."""
    labels = [_dot_id(lab) for lab in structure.alphabet.labels]
    lines = ["digraph dbn {"]
    for lab in labels:
        lines.append(f"  {lab};")
    for p, c, d, _ in sorted(structure.edges(), key=lambda e: (e[1], e[0], e[2])):
        lines.append(f'  {labels[p]} -> {labels[c]} [label="{d}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def learned_edges_within(structure: DbnStructure, table: FrequencyTable) -> bool:
    """Every learned parent set is the prefix of some mined episode."""
    prefixes: set[tuple[int, tuple[Member, ...]]] = set()
    for ep in table.entries:
        if len(ep) >= 2:
            prefixes.add((ep.types[-1], prefix_parents(ep)))
    return all(
        (c, ps.parents) in prefixes
        for c, ps in structure.assignments.items()
        if ps is not None
    )


def structure_from_edges(alphabet: Alphabet, edges: Iterable[tuple[str, str, int]]) -> DbnStructure:
    """Build a structure directly from labelled (parent, child, delay) triples."""
    obj = {"nodes": list(alphabet.labels),
           "edges": [{"from": a, "to": b, "delay": d, "mi": 0.0} for a, b, d in edges]}
    return DbnStructure.from_json_obj(obj)
