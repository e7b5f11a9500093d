"""Scoring learned structures against ground truth, and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .episodes import EpisodeCounter, mine_frequent
from .learner import DbnStructure, learn
from .simulator import GroundTruth, NetworkSpec, simulate

GRID_THETAS = (0.002, 0.008, 0.014, 0.026, 0.038)
GRID_EPSILONS = (0.00001, 0.0001, 0.001, 0.01)


@dataclass
class ScoreReport:
    precision: float
    recall: float
    matched: list = field(default_factory=list)
    missed: list = field(default_factory=list)
    spurious: list = field(default_factory=list)
    time_mine_s: float | None = None
    time_search_s: float | None = None

    @property
    def time_total_s(self) -> float | None:
        if self.time_mine_s is None or self.time_search_s is None:
            return None
        return self.time_mine_s + self.time_search_s

    def to_json_obj(self, timing: bool = False) -> dict:
        obj = {
            "precision": self.precision,
            "recall": self.recall,
            "matched": [list(e) for e in self.matched],
            "missed": [list(e) for e in self.missed],
            "spurious": [list(e) for e in self.spurious],
        }
        if timing:
            obj.update(time_mine_s=self.time_mine_s, time_search_s=self.time_search_s,
                       time_total_s=self.time_total_s)
        return obj


def precision_recall(learned: DbnStructure, truth: GroundTruth, delay_mode: str = "exact") -> ScoreReport:
    """Edge-level precision and recall in percent.

    In ``exact`` mode an edge matches only with the same delay; ``ignore``
    compares (source, target) pairs.
    """
    if delay_mode not in ("exact", "ignore"):
        raise ValueError("delay_mode must be 'exact' or 'ignore'")
    unknown = set(learned.alphabet.labels) - set(truth.labels)
    if unknown:
        raise ValueError(f"alphabet mismatch: learned nodes {sorted(unknown)} not in ground truth")
    if delay_mode == "exact":
        got = learned.edge_set(with_delay=True)
        want = set(truth.edges)
    else:
        got = learned.edge_set(with_delay=False)
        want = {(a, b) for a, b, _ in truth.edges}
    key = lambda e: (e[1], e[0], *e[2:])  # noqa: E731
    matched = sorted(got & want, key=key)
    missed = sorted(want - got, key=key)
    spurious = sorted(got - want, key=key)
    if got:
        precision = 100.0 * len(matched) / len(got)
    else:
        precision = 100.0 if not want else 0.0
    recall = 100.0 * len(matched) / len(want) if want else 100.0
    return ScoreReport(precision, recall, matched, missed, spurious)


def density(truth: GroundTruth) -> float:
    """Fraction of nodes that are the target of at least one edge."""
    if not truth.labels:
        return 0.0
    return len({b for _, b, _ in truth.edges}) / len(truth.labels)


def run_pipeline(stream, truth: GroundTruth, W: int, theta: float, epsilon: float, k: int,
                 delay_mode: str = "exact", jobs: int = 1) -> tuple[DbnStructure, ScoreReport]:
    t0 = time.perf_counter()
    table = mine_frequent(stream, W, theta, k, jobs=jobs)
    t1 = time.perf_counter()
    structure = learn(table, stream, W, epsilon, k)
    t2 = time.perf_counter()
    report = precision_recall(structure, truth, delay_mode)
    report.time_mine_s = t1 - t0
    report.time_search_s = t2 - t1
    return structure, report


@dataclass
class SweepCell:
    theta: float
    epsilon: float
    report: ScoreReport
    n_edges: int


@dataclass
class SweepGrid:
    thetas: tuple[float, ...]
    epsilons: tuple[float, ...]
    cells: list[SweepCell]

    def cell(self, theta: float, epsilon: float) -> SweepCell:
        for c in self.cells:
            if c.theta == theta and c.epsilon == epsilon:
                return c
        raise KeyError((theta, epsilon))

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "epsilon", "precision", "recall", "time_mine_s", "time_search_s"])
        for c in self.cells:
            r = c.report
            w.writerow([
                repr(c.theta), repr(c.epsilon), f"{r.precision:.4f}", f"{r.recall:.4f}",
                f"{r.time_mine_s:.3f}" if timing else "",
                f"{r.time_search_s:.3f}" if timing else "",
            ])
        return buf.getvalue()


def _theta_cells(spec_obj: dict, duration: float, seed: int, theta: float, epsilons: Sequence[float],
                 W: int, k: int, delay_mode: str) -> list[SweepCell]:
    spec = NetworkSpec.from_json_obj(spec_obj)
    stream, truth = simulate(spec, duration, seed)
    t0 = time.perf_counter()
    table = mine_frequent(stream, W, theta, k)
    t_mine = time.perf_counter() - t0
    counter = EpisodeCounter(stream, W, table)
    out = []
    for eps in epsilons:
        t1 = time.perf_counter()
        structure = learn(table, stream, W, eps, k, counter=counter)
        report = precision_recall(structure, truth, delay_mode)
        report.time_mine_s = t_mine
        report.time_search_s = time.perf_counter() - t1
        out.append(SweepCell(theta, eps, report, len(structure.edges())))
    return out


def sweep(
    spec: NetworkSpec,
    duration: float,
    thetas: Sequence[float] = GRID_THETAS,
    epsilons: Sequence[float] = GRID_EPSILONS,
    seed: int = 0,
    W: int = 10,
    k: int = 3,
    delay_mode: str = "exact",
    jobs: int = 1,
) -> SweepGrid:
    """One simulation (fixed seed) mined once per theta and learned once per (theta, epsilon).

    Every theta row uses the same simulated stream, so a row can be
    recomputed in isolation and matches the full grid.
    """
    if not thetas or not epsilons:
        raise ValueError("sweep grids must be non-empty")
    spec_obj = spec.to_json_obj()
    args = [(spec_obj, duration, seed, th, tuple(epsilons), W, k, delay_mode) for th in thetas]
    if jobs <= 1 or len(thetas) == 1:
        rows = [_theta_cells(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_theta_cells, *zip(*args)))
    cells = [c for row in rows for c in row]
    return SweepGrid(tuple(thetas), tuple(epsilons), cells)


def summarize(reports: Sequence[ScoreReport]) -> dict:
    p = np.array([r.precision for r in reports])
    r = np.array([r.recall for r in reports])
    return {
        "precision_min": float(p.min()), "precision_median": float(np.median(p)),
        "recall_min": float(r.min()), "recall_median": float(np.median(r)),
    }


def score_json(report: ScoreReport, extra: dict | None = None, timing: bool = False) -> str:
    obj = report.to_json_obj(timing=timing)
    if extra:
        obj.update(extra)
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
