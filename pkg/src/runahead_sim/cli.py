"""Command-line entry point: ``runahead-sim <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .analyzer import analyze, read_plan, write_plan
from .cache import CacheConfig
from .config import ConfigError, read_kv
from .executor import CSV_COLUMNS, run
from .fsm import Event, ProtocolError, RcuState, step_fsm
from .microarch import MiniTraceError, read_minitrace, transcript
from .policy import Policy, RunaheadConfig
from .workload import GenParams, TraceFormatError, generate, read_trace, write_trace


def _split_config(path: str | None) -> tuple[CacheConfig, RunaheadConfig, dict]:
    """Cache and runahead settings from one key-value file; leftovers returned."""
    if path is None:
        return CacheConfig(), RunaheadConfig(), {}
    mapping = read_kv(path)
    ckeys = {f.name for f in dataclasses.fields(CacheConfig)}
    rkeys = {f.name for f in dataclasses.fields(RunaheadConfig)}
    cache = {k: v for k, v in mapping.items() if k in ckeys}
    ra = {k: v for k, v in mapping.items() if k in rkeys}
    rest = {k: v for k, v in mapping.items() if k not in ckeys | rkeys}
    return CacheConfig(**cache), RunaheadConfig(**ra), rest


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_gen(args) -> int:
    mapping = read_kv(args.config) if args.config else {}
    if args.seed is not None:
        mapping["seed"] = args.seed
    for key, val in (("data_size_kb", args.data_size), ("max_gap_insns", args.max_gap),
                     ("n_accesses", args.n)):
        if val is not None:
            mapping[key] = val
    trace = generate(GenParams.from_dict(mapping))
    if args.out is None:
        raise ConfigError("gen needs --out")
    write_trace(trace, args.out)
    return 0


def cmd_analyze(args) -> int:
    cache, rconf, _ = _split_config(args.config)
    trace = read_trace(args.trace)
    plan = analyze(trace, cache, rconf)
    if args.out is None:
        raise ConfigError("analyze needs --out")
    write_plan(plan, args.out)
    return 0


def cmd_run(args) -> int:
    cache, rconf, _ = _split_config(args.config)
    trace = read_trace(args.trace)
    plan = read_plan(args.plan) if args.plan else None
    rep = run(trace, cache, Policy.parse(args.policy), plan=plan, rconf=rconf, driver=args.driver)
    if args.format == "csv":
        text = harness.to_csv([rep.to_row()], CSV_COLUMNS)
    elif args.format == "json":
        text = json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n"
    else:
        raise ConfigError("run supports --format csv or json")
    _write(text, args.out)
    return 0


def cmd_sweep(args) -> int:
    if args.spec:
        specs = [harness.SweepSpec.from_file(args.spec)]
    else:
        specs = harness.default_grid()
    if args.seed is not None:
        specs = [s.replace(base_seed=args.seed) for s in specs]
    if args.workloads is not None:
        specs = [s.replace(workloads_per_point=args.workloads) for s in specs]
    tables = harness.run_grid(specs, jobs=args.jobs)
    text = harness.emit(tables, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_microarch(args) -> int:
    insns = read_minitrace(args.minitrace)
    _write("\n".join(transcript(insns, args.reset_rule)) + "\n", args.out)
    return 0


def cmd_fsm(args) -> int:
    """Event script: one event name per line, ``MISS_DETECTED <trigger>`` allowed."""
    rcu = RcuState()
    lines = []
    for lineno, raw in enumerate(Path(args.script).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, *rest = line.split()
        try:
            event = Event[name.upper()]
        except KeyError:
            raise ConfigError(f"{args.script}:{lineno}: unknown event {name!r}") from None
        trigger = int(rest[0]) if rest else None
        before = rcu.state.name
        try:
            rcu = step_fsm(rcu, event, trigger)
        except ProtocolError as exc:
            lines.append(f"{lineno:>3} {before} --{event.name}--> ERROR: {exc}")
            _write("\n".join(lines) + "\n", args.out)
            return 3
        lines.append(f"{lineno:>3} {before} --{event.name}--> {rcu.state.name} retry={rcu.retry}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="runahead-sim", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, fmt=None):
        p.add_argument("--config", help="key-value config file")
        p.add_argument("--out", help="output path (default: stdout)")
        if fmt:
            p.add_argument("--format", choices=fmt, default=fmt[0])

    p = sub.add_parser("gen", help="generate a synthetic trace")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--data-size", type=int, help="D in KB")
    p.add_argument("--max-gap", type=int, help="I, max instructions per gap")
    p.add_argument("-n", type=int, help="number of accesses")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("analyze", help="trace -> adaptive plan file")
    common(p)
    p.add_argument("trace")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("run", help="trace [+ plan] -> report")
    common(p, ["json", "csv"])
    p.add_argument("trace")
    p.add_argument("--plan")
    p.add_argument("--policy", default="bs", choices=[x.value for x in Policy])
    p.add_argument("--driver", default="builtin", choices=["builtin", "shim"])
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a sweep spec (default: the full grid)")
    common(p, list(harness.FORMATS))
    p.add_argument("spec", nargs="?")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--workloads", type=int, help="override workloads per point")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("microarch", help="mini-trace -> invfile / R$ transcript")
    common(p)
    p.add_argument("minitrace")
    p.add_argument("--reset-rule", choices=["or", "and"], default="or")
    p.set_defaults(fn=cmd_microarch)

    p = sub.add_parser("fsm", help="event script -> transition transcript")
    common(p)
    p.add_argument("script")
    p.set_defaults(fn=cmd_fsm)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TraceFormatError, MiniTraceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
