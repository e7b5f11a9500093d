"""Command-line entry point: simulate, mine, learn, eval, surrogate, sweep, topology."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .episodes import format_dump, mine_frequent
from .evaluation import GRID_EPSILONS, GRID_THETAS, precision_recall, score_json, sweep
from .events import EventStream, StreamError, format_events, parse_events
from .learner import DbnStructure, learn, to_dot
from .simulator import TOPOLOGIES, GroundTruth, NetworkSpec, make_topology, simulate, surrogate

log = logging.getLogger("dbnepisode")

DEFAULT_W = 10
DEFAULT_THETA = 0.002
DEFAULT_EPSILON = 0.0005
DEFAULT_K = 3
DEFAULT_TICK_S = 0.001


class UsageError(Exception):
    """Bad flag values or combinations; exit status 2."""


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict
    outputs: dict
    W: int | None = None
    theta: float | None = None
    epsilon: float | None = None
    k: int | None = None
    bin_width: float | None = None
    horizon: int | None = None
    seed: int | None = None
    duration: float | None = None
    delay_mode: str | None = None

    def validate(self) -> None:
        if self.W is not None and self.W < 1:
            raise UsageError("--window must be >= 1")
        if self.theta is not None and not 0 <= self.theta < 1:
            raise UsageError("--threshold must be in [0, 1)")
        if self.epsilon is not None and self.epsilon < 0:
            raise UsageError("--epsilon must be >= 0")
        if self.k is not None and self.k < 1:
            raise UsageError("--max-parents must be >= 1")
        if self.bin_width is not None and not self.bin_width > 0:
            raise UsageError("--bin-width must be positive")
        if self.duration is not None and not self.duration > 0:
            raise UsageError("--duration must be positive")
        if self.horizon is not None and self.horizon < 0:
            raise UsageError("--horizon must be >= 0")

    def to_json_obj(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None and v != {}}


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def _load_stream(args) -> EventStream:
    alphabet = None
    mode = "discover"
    if getattr(args, "alphabet", None):
        mode = "fixed"
        alphabet = [s.strip() for s in args.alphabet.split(",") if s.strip()]
    return parse_events(_read(args.input), mode, alphabet, bin_width=args.bin_width, horizon=args.horizon)


def _add_stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, metavar="CSV",
                   help="events as CSV with header 'time,label' ('-' for stdin)")
    p.add_argument("--bin-width", type=float, default=None, metavar="SEC",
                   help="times are seconds; bin them into ticks of this width "
                        f"(simulator tick is {DEFAULT_TICK_S} s); without it times are integer ticks")
    p.add_argument("--horizon", type=int, default=None, metavar="T",
                   help="number of ticks in the recording; without it, the tick of the last event")
    p.add_argument("--alphabet", default=None, metavar="A,B,...",
                   help="fixed, ordered alphabet; labels outside it are an error; without it, the sorted labels seen")


def _add_mining_args(p: argparse.ArgumentParser, learning: bool = True) -> None:
    p.add_argument("--window", type=int, default=DEFAULT_W, metavar="W",
                   help=f"history window in ticks; parent delays lie in [1, W]")
    p.add_argument("--threshold", type=float, default=DEFAULT_THETA, metavar="THETA",
                   help="relative frequency threshold; frequent iff count > THETA*(T-W)")
    p.add_argument("--max-parents", type=int, default=DEFAULT_K, metavar="K",
                   help=f"largest parent set; episodes up to K+1 nodes are mined")
    if learning:
        p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, metavar="EPS",
                       help=f"MI tolerance (bits) for preferring a smaller parent set")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="worker processes for mining; output does not depend on N")


def _cmd_topology(args) -> int:
    params = json.loads(args.params) if args.params else {}
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    try:
        spec = make_topology(args.kind, **params)
    except TypeError as e:
        raise UsageError(str(e)) from None
    _write(args.out, spec.to_json())
    return 0


def _cmd_simulate(args) -> int:
    cfg = RunConfig("simulate", {"spec": args.spec}, {"out": args.out, "truth": args.truth},
                    seed=args.seed, duration=args.duration)
    cfg.validate()
    spec = NetworkSpec.from_json_obj(json.loads(_read(args.spec)))
    stream, truth = simulate(spec, args.duration, args.seed)
    _write(args.out, format_events(stream))
    if args.truth:
        _write(args.truth, truth.to_json({"config": cfg.to_json_obj()}))
    log.info("simulated %d events over %d ticks", len(stream), stream.T)
    return 0


def _cmd_mine(args) -> int:
    cfg = RunConfig("mine", {"in": args.input}, {"out": args.out}, W=args.window, theta=args.threshold,
                    k=args.max_parents, bin_width=args.bin_width, horizon=args.horizon)
    cfg.validate()
    stream = _load_stream(args)
    t0 = time.perf_counter()
    table = mine_frequent(stream, args.window, args.threshold, args.max_parents, jobs=args.jobs)
    log.info("mined %d frequent episodes in %.2fs", len(table), time.perf_counter() - t0)
    header = "# config: " + json.dumps(cfg.to_json_obj(), sort_keys=True) + "\n"
    _write(args.out, header + format_dump(table, stream.alphabet))
    return 0


def _cmd_learn(args) -> int:
    cfg = RunConfig("learn", {"in": args.input}, {"out": args.out, "dot": args.dot}, W=args.window,
                    theta=args.threshold, epsilon=args.epsilon, k=args.max_parents,
                    bin_width=args.bin_width, horizon=args.horizon)
    cfg.validate()
    stream = _load_stream(args)
    t0 = time.perf_counter()
    table = mine_frequent(stream, args.window, args.threshold, args.max_parents, jobs=args.jobs)
    t1 = time.perf_counter()
    structure = learn(table, stream, args.window, args.epsilon, args.max_parents)
    t2 = time.perf_counter()
    extra = {"config": cfg.to_json_obj()}
    if args.timing:
        extra["timing"] = {"time_mine_s": t1 - t0, "time_search_s": t2 - t1}
    _write(args.out, structure.to_json(extra))
    if args.dot:
        _write(args.dot, to_dot(structure))
    log.info("%d edges, %d frequent episodes", len(structure.edges()), len(table))
    return 0


def _cmd_eval(args) -> int:
    cfg = RunConfig("eval", {"learned": args.learned, "truth": args.truth}, {"out": args.out},
                    delay_mode=args.delay_mode)
    learned = DbnStructure.from_json_obj(json.loads(_read(args.learned)))
    truth = GroundTruth.from_json_obj(json.loads(_read(args.truth)))
    report = precision_recall(learned, truth, args.delay_mode)
    _write(args.out, score_json(report, {"config": cfg.to_json_obj()}))
    return 0


def _cmd_surrogate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = RunConfig("surrogate", {"in": args.input}, {"out_dir": args.out_dir}, seed=args.seed,
                    bin_width=args.bin_width, horizon=args.horizon)
    cfg.validate()
    stream = _load_stream(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.n - 1))
    # one child generator per surrogate, all derived from --seed
    children = np.random.SeedSequence(args.seed).spawn(args.n)
    for i, ss in enumerate(children):
        s = surrogate(stream, np.random.default_rng(ss))
        (out / f"surrogate_{i:0{width}d}.csv").write_text(format_events(s))
    (out / "config.json").write_text(json.dumps(cfg.to_json_obj(), indent=2, sort_keys=True) + "\n")
    return 0


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def _cmd_sweep(args) -> int:
    thetas = _floats(args.thetas)
    epsilons = _floats(args.epsilons)
    cfg = RunConfig("sweep", {"spec": args.spec}, {"out": args.out}, W=args.window, k=args.max_parents,
                    seed=args.seed, duration=args.duration, delay_mode=args.delay_mode)
    cfg.validate()
    for th in thetas:
        RunConfig("sweep", {}, {}, theta=th).validate()
    for e in epsilons:
        RunConfig("sweep", {}, {}, epsilon=e).validate()
    spec = NetworkSpec.from_json_obj(json.loads(_read(args.spec)))
    grid = sweep(spec, args.duration, thetas, epsilons, seed=args.seed, W=args.window, k=args.max_parents,
                 delay_mode=args.delay_mode, jobs=args.jobs)
    header = "# config: " + json.dumps({**cfg.to_json_obj(), "thetas": thetas, "epsilons": epsilons},
                                       sort_keys=True) + "\n"
    _write(args.out, header + grid.to_csv(timing=args.timing))
    return 0


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for optional flags whose absence is explained in the help."""

    def _get_help_string(self, action):
        if action.default is None or action.default is False or action.required:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 as well; keep the message format
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    fmt = _Formatter
    parser = _Parser(
        prog="dbnepisode",
        description="Learn excitatory dynamic Bayesian networks from event streams via frequent "
                    "fixed-delay episodes.",
        epilog=f"Defaults: W={DEFAULT_W} ticks, theta={DEFAULT_THETA}, epsilon={DEFAULT_EPSILON}, "
               f"k={DEFAULT_K}, tick={DEFAULT_TICK_S * 1000:g} ms.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("topology", help="write a ground-truth network spec", formatter_class=fmt)
    p.add_argument("kind", choices=sorted(TOPOLOGIES))
    p.add_argument("--params", default=None, help='JSON object of generator arguments, e.g. \'{"cond": 0.4}\'')
    p.add_argument("--out", default="-", help="spec JSON path")
    p.set_defaults(func=_cmd_topology)

    p = sub.add_parser("simulate", help="simulate a spiking network", formatter_class=fmt)
    p.add_argument("--spec", required=True, help="network spec JSON")
    p.add_argument("--duration", type=float, required=True, help="seconds of activity")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--out", default="-", help="events CSV (integer ticks)")
    p.add_argument("--truth", default=None, help="ground-truth JSON path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("mine", help="dump frequent fixed-delay episodes", formatter_class=fmt)
    _add_stream_args(p)
    _add_mining_args(p, learning=False)
    p.add_argument("--out", default="-", help="TSV dump path")
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("learn", help="mine and learn a DBN structure", formatter_class=fmt)
    _add_stream_args(p)
    _add_mining_args(p)
    p.add_argument("--out", default="-", help="DBN JSON path")
    p.add_argument("--dot", default=None, help="also write Graphviz DOT here")
    p.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte-identity)")
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("eval", help="score a learned structure against ground truth", formatter_class=fmt)
    p.add_argument("--learned", required=True, help="DBN JSON from 'learn'")
    p.add_argument("--truth", required=True, help="ground-truth JSON from 'simulate'")
    p.add_argument("--delay-mode", choices=("exact", "ignore"), default="exact",
                   help="whether an edge must also match its delay")
    p.add_argument("--out", default="-", help="score JSON path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("surrogate", help="write label-shuffled copies of a stream", formatter_class=fmt)
    _add_stream_args(p)
    p.add_argument("--n", type=int, default=25, help="number of surrogates")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--out-dir", required=True, help="directory for surrogate_XX.csv files")
    p.set_defaults(func=_cmd_surrogate)

    p = sub.add_parser("sweep", help="precision/recall over a theta x epsilon grid", formatter_class=fmt)
    p.add_argument("--spec", required=True, help="network spec JSON")
    p.add_argument("--duration", type=float, default=60.0, help="seconds of activity")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--thetas", default=",".join(map(str, GRID_THETAS)), help="comma-separated thresholds")
    p.add_argument("--epsilons", default=",".join(map(str, GRID_EPSILONS)), help="comma-separated epsilons")
    p.add_argument("--window", type=int, default=DEFAULT_W, help="history window in ticks")
    p.add_argument("--max-parents", type=int, default=DEFAULT_K, help="largest parent set")
    p.add_argument("--delay-mode", choices=("exact", "ignore"), default="exact", help="edge matching")
    p.add_argument("--jobs", type=int, default=1, help="worker processes, one per theta row")
    p.add_argument("--timing", action="store_true", help="fill the time columns (breaks byte-identity)")
    p.add_argument("--out", default="-", help="CSV path")
    p.set_defaults(func=_cmd_sweep)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help, or a usage error already reported by argparse
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        print(f"{parser.prog}: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 2
    except (StreamError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
