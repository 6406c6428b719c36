"""Command-line front end.

Every command writes a JSON header line naming the format version, then one
JSON record per line, flushed as produced, so an interrupted run still leaves
a readable prefix. Exit status is 0 on success, 1 when a checked bound or
invariant fails, and 2 for usage, configuration, or file errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .adversaries import AdversaryFault, ScheduleError, make_adversary, read_schedule, write_schedule
from .checks import check_trace
from .config import ADVERSARIES, MODES, PROTOCOLS, ConfigError, Experiment, NetworkConfig, load_config, validate_config
from .dual import checkpoint_bounds, classify_deliveries, dual_run
from .model import ProtocolFault, read_trace, run, schedule_of, write_trace
from .oracle import max_deliveries
from .potentials import BoundViolation
from .suites import SUITES, lower_bound, phi_run, trace_invariants

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class Report:
    """Line-delimited JSON on a stream, header first."""

    def __init__(self, stream, command: str, **meta):
        self.stream = stream
        self.failures = 0
        self.emit({"format": "aslide-report", "version": FORMAT_VERSION, "tool": __version__,
                   "command": command, **meta})

    def emit(self, record: dict) -> None:
        if record.get("pass") is False:
            self.failures += 1
        self.stream.write(json.dumps(record, separators=(",", ":"), default=str) + "\n")
        self.stream.flush()


# ---------------------------------------------------------------- configuration


def _experiment(args, require: bool = True) -> Experiment | None:
    if getattr(args, "config", None):
        exp = load_config(args.config)
    elif args.n is not None and args.C is not None:
        protocol = args.protocol or "slide"
        mode = args.mode or ("fully-async" if protocol == "slide-plus" else "semi-async")
        exp = Experiment(NetworkConfig(args.n, args.C, mode, protocol))
    elif require:
        raise UsageError("give --config or both -n and -C")
    else:
        return None
    net = exp.network
    net = replace(net, n=args.n if args.n is not None else net.n, C=args.C if args.C is not None else net.C)
    if args.protocol:
        net = replace(net, protocol=args.protocol)
    if args.mode:
        net = replace(net, mode=args.mode)
    exp = exp.with_overrides(network=net, adversary=getattr(args, "adversary", None),
                             seed=getattr(args, "seed", None), rounds=getattr(args, "rounds", None),
                             replay=getattr(args, "replay", None) if isinstance(getattr(args, "replay", None), str) else None)
    validate_config(exp.network)
    return exp


def _adversary(exp: Experiment, seed: int | None = None, replay: str | None = None):
    path = replay or exp.replay
    if path or exp.adversary == "replay":
        if not path:
            raise UsageError("replay adversary needs --replay")
        return make_adversary("replay", exp.network, schedule=read_schedule(path, exp.network.n))
    return make_adversary(exp.adversary, exp.network, exp.seed if seed is None else seed)


def _network_meta(cfg: NetworkConfig) -> dict:
    return {"n": cfg.n, "C": cfg.C, "mode": cfg.mode, "protocol": cfg.protocol}


# ---------------------------------------------------------------- commands


def cmd_run(args, out) -> int:
    exp = _experiment(args)
    cfg = exp.network
    rep = Report(out, "run", **_network_meta(cfg), adversary="replay" if exp.replay else exp.adversary,
                 seed=exp.seed, rounds=exp.rounds)
    adversary = _adversary(exp)
    trace = []
    fh = open(args.trace, "w") if args.trace else None
    try:
        def sink(rec):
            trace.append(rec)
            if fh is not None:
                fh.write(rec.to_json() + "\n")
                fh.flush()

        try:
            run(cfg, adversary, exp.rounds, sink=sink)
        except ProtocolFault as exc:
            rep.emit({"check": "fault", "x": exc.x, "message": str(exc), "pass": False})
            return EXIT_FAIL
    finally:
        if fh is not None:
            fh.close()
    if args.emit_schedule:
        write_schedule(schedule_of(trace), args.emit_schedule)
    if args.check:
        for v in check_trace(trace, cfg)[:100]:
            rep.emit(v.as_record())
    last = trace[-1] if trace else None
    rep.emit({"check": "summary", "rounds": len(trace), "Y": last.Y if last else 0,
              "Z": last.Z if last else 0, "T": last.T if last else 0,
              "heights": list(last.heights) if last else [], "pass": rep.failures == 0})
    return EXIT_OK if rep.failures == 0 else EXIT_FAIL


def cmd_lowerbound(args, out) -> int:
    cfg = NetworkConfig(args.n, args.C)
    validate_config(cfg)
    rep = Report(out, "lowerbound", **_network_meta(cfg), adversary="cyclic", cycles=args.cycles)

    def keep(trace):
        if args.trace:
            write_trace(trace, args.trace)
        if args.emit_schedule:
            write_schedule(schedule_of(trace), args.emit_schedule)

    for rec in lower_bound(cfg.n, cfg.C, args.cycles, on_trace=keep):
        rec.pop("seconds", None)
        rep.emit(rec)
    return EXIT_OK if rep.failures == 0 else EXIT_FAIL


def cmd_compare(args, out) -> int:
    exp = _experiment(args)
    cfg = exp.network
    every = args.checkpoints or exp.checkpoint_every
    n, C = cfg.n, cfg.C
    rep = Report(out, "compare", **_network_meta(cfg), rounds=exp.rounds, checkpoint_every=every,
                 k=8, g=8 * n * n * C)
    if args.replay:
        sources = [(f"replay {p}", None, p) for p in args.replay]
    else:
        sources = [(f"{exp.adversary} seed {exp.seed + r}", exp.seed + r, None) for r in range(args.runs)]
    for label, seed, path in sources:
        adversary = _adversary(exp, seed, path)
        if args.phi and cfg.mode == "semi-async":
            rep.emit(phi_run(cfg, adversary, exp.rounds, label))
            continue
        dual = dual_run(cfg, adversary, exp.rounds, every)
        cls = classify_deliveries(dual)
        bounds = checkpoint_bounds(dual, sorted(dual.optimum), cls)
        for b in bounds:
            rec = b.as_record()
            rec.update(run=label, ratio=(b.optimum / b.online) if b.online else None,
                       bound=8 * n * b.online + 8 * n * n * C)
            rep.emit(rec)
        stale_ok = cfg.mode != "semi-async" or not cls.stale
        rep.emit({"check": "run", "run": label, "rounds": dual.horizon, "online": dual.trace[-1].Z,
                  "optimum": dual.plan.value, "co_moved": len(cls.co_moved), "fresh": len(cls.fresh),
                  "stale": len(cls.stale), "witness_shortfall": cls.shortfall,
                  "pass": stale_ok and all(b.ok for b in bounds)})
    rep.emit({"check": "summary", "runs": len(sources), "failures": rep.failures, "pass": rep.failures == 0})
    return EXIT_OK if rep.failures == 0 else EXIT_FAIL


def _parse_checkpoints(text: str | None, horizon: int, every: int | None) -> list[int]:
    if text:
        try:
            xs = sorted({int(part) for part in text.split(",") if part.strip()})
        except ValueError:
            raise UsageError(f"bad checkpoint list {text!r}") from None
        if any(x < 0 for x in xs):
            raise UsageError("checkpoints must be non-negative")
        return xs
    step = every or horizon or 1
    return sorted(set(range(step, horizon + 1, step)) | {horizon})


def cmd_oracle(args, out) -> int:
    if args.n is None or args.C is None:
        exp = _experiment(args)
        cfg = exp.network
    else:
        cfg = NetworkConfig(args.n, args.C)
    schedule = read_schedule(args.replay, cfg.n)
    xs = _parse_checkpoints(args.at, len(schedule), args.every)
    if any(x > len(schedule) for x in xs):
        raise UsageError(f"checkpoint beyond the schedule's {len(schedule)} rounds")
    values = max_deliveries(schedule, xs, cfg)
    out.write(f"# aslide-oracle v{FORMAT_VERSION} n={cfg.n} C={cfg.C} rounds={len(schedule)}\n")
    for x in xs:
        out.write(f"{x} {values[x]}\n")
    out.flush()
    return EXIT_OK


def cmd_verify(args, out) -> int:
    suite = args.suite
    rep = Report(out, "verify", suite=suite)
    if args.trace:
        if suite not in ("slide-invariants", "slide-plus-invariants"):
            raise UsageError("--trace applies to the invariant suites only")
        exp = _experiment(args, require=False)
        if exp is None:
            protocol = "slide" if suite == "slide-invariants" else "slide-plus"
            defaults = {"slide": (8, 64, "semi-async"), "slide-plus": (4, 128, "fully-async")}[protocol]
            cfg = NetworkConfig(*defaults, protocol)
        else:
            cfg = exp.network
        records = trace_invariants(read_trace(args.trace), cfg, str(args.trace))
    else:
        kw = {}
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.count is not None and suite in ("family-lemmas", "oracle-equivalence"):
            kw["count"] = args.count
        if args.rounds is not None and suite in ("slide-invariants", "slide-plus-invariants", "potentials"):
            kw["rounds"] = args.rounds
        if suite in ("slide-invariants", "slide-plus-invariants", "potentials"):
            if args.n is not None:
                kw["n"] = args.n
            if args.C is not None:
                kw["C"] = args.C
        records = SUITES[suite](**kw)
    for rec in records:
        rep.emit(rec)
    return EXIT_OK if rep.failures == 0 else EXIT_FAIL


# ---------------------------------------------------------------- parser


def _network_flags(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", type=Path, help="key = value experiment file")
    p.add_argument("-n", type=int, help="number of nodes, sender and receiver included")
    p.add_argument("-C", type=int, help="buffer capacity of every internal node")
    p.add_argument("--protocol", choices=[p_ for p_ in PROTOCOLS if p_ != "offline-plan"])
    p.add_argument("--mode", choices=MODES)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aslide", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one protocol against one adversary")
    _network_flags(p)
    p.add_argument("--adversary", choices=ADVERSARIES)
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--replay", help="schedule file to replay")
    p.add_argument("--trace", help="write one record per round here")
    p.add_argument("--emit-schedule", help="write the realised schedule here")
    p.add_argument("--check", action="store_true", help="replay the trace through the invariant checkers")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lowerbound", help="Slide against the cyclic adversary, with potential checks")
    p.add_argument("-n", type=int, default=8)
    p.add_argument("-C", type=int, default=64)
    p.add_argument("--cycles", type=int, default=50)
    p.add_argument("--trace")
    p.add_argument("--emit-schedule")
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("compare", help="online protocol against the offline optimum on shared schedules")
    _network_flags(p)
    p.add_argument("--adversary", choices=[a for a in ADVERSARIES if a != "replay"])
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int, default=1, help="consecutive seeds to try")
    p.add_argument("--rounds", type=int)
    p.add_argument("--replay", action="append", help="schedule file; repeat for several")
    p.add_argument("--checkpoints", type=int, help="checkpoint spacing in rounds (default C)")
    p.add_argument("--phi", action="store_true", help="semi-async only: also run the potential ledger")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="offline optimum of a schedule file at checkpoints")
    _network_flags(p)
    p.add_argument("--replay", required=True, help="schedule file")
    p.add_argument("--checkpoints", dest="at", help="comma-separated rounds")
    p.add_argument("--every", type=int, help="checkpoint spacing (default: schedule length)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    _network_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, help="cases for the randomised suites")
    p.add_argument("--rounds", type=int)
    p.add_argument("--trace", help="check this trace file instead of a fresh run")
    p.set_defaults(func=cmd_verify)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("ASLIDE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        return args.func(args, out)
    except BrokenPipeError:
        # A closed reader (``| head``) is not an error; stop writing quietly.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (UsageError, ConfigError, ScheduleError) as exc:
        print(f"aslide: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"aslide: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolFault, BoundViolation, AdversaryFault) as exc:
        print(f"aslide: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
