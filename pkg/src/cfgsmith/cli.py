"""``cfgsmith`` command line.

Exit codes: 0 sat, 1 unsat, 2 unknown or timeout, 64 usage, 65 bad input
data, 66 missing input file, 69 solver cannot be started, 70 solver failure.
Every solving command writes ``report.json`` (and ``configuration.json`` on
sat) under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema

from cfgsmith import sexpr
from cfgsmith.frontend import (
    Btor2Error,
    RoleError,
    TraceError,
    parse_btor2,
    parse_formula,
    parse_roles,
    parse_sts,
    parse_trace,
    print_sts,
)
from cfgsmith.memtile import (
    MiniTileParams,
    ParamError,
    ScheduleError,
    build_mini_tile,
    conv3x3_windows,
    gen_conv3x3_trace,
    gen_identity_trace,
    min_latency,
    render_configuration,
    tile_problem,
)
from cfgsmith.modular import (
    DecompositionError,
    StrategyError,
    AbductStrategy,
    check_decomposition,
    load_decomposition,
    solve_modular,
)
from cfgsmith.optimize import (
    ObjectiveError,
    at_step,
    build_objectives,
    certify,
    dim_objective_count,
    dims_in_priority,
    parse_groups,
    parse_objectives,
    solve_lex,
    solve_dim_widening,
    branch_and_bound,
)
from cfgsmith.smt import (
    DEFAULT_SOLVER,
    DEFAULT_TIMEOUT_S,
    SolverCrash,
    SolverError,
    SolverSession,
    SolverTimeout,
    check_sat,
    pin,
    serialize_smt2,
)
from cfgsmith.terms import And, BvConst, Eq, SortError, timed
from cfgsmith.unroll import (
    ConfigProblem,
    ProblemError,
    build_config_formula,
    configuration_json,
    extract_configuration,
    parse_configuration,
    replay,
    step_vars,
    trace_mismatches,
)

log = logging.getLogger("cfgsmith")

EXIT_SAT, EXIT_UNSAT, EXIT_UNKNOWN = 0, 1, 2
EXIT_USAGE, EXIT_DATAERR, EXIT_NOINPUT = 64, 65, 66
EXIT_UNAVAILABLE, EXIT_SOFTWARE = 69, 70

STATUS_EXIT = {"sat": EXIT_SAT, "unsat": EXIT_UNSAT, "unknown": EXIT_UNKNOWN, "timeout": EXIT_UNKNOWN}

# input problems that map to EXIT_DATAERR
DATA_ERRORS = (
    sexpr.ParseError,
    RoleError,
    TraceError,
    Btor2Error,
    SortError,
    ProblemError,
    DecompositionError,
    StrategyError,
    ObjectiveError,
    ScheduleError,
    ParamError,
    json.JSONDecodeError,
)

REPORT_SCHEMA = {
    "type": "object",
    "required": ["command", "status", "inconclusive", "configuration", "stages", "elapsed_s", "solver"],
    "properties": {
        "command": {"type": "string"},
        "status": {"enum": ["sat", "unsat", "unknown", "timeout"]},
        "inconclusive": {"type": "boolean"},
        "configuration": {"type": ["object", "null"]},
        "stages": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "status", "elapsed_s"],
                "properties": {"elapsed_s": {"type": "number", "minimum": 0}},
            },
        },
        "elapsed_s": {"type": "number", "minimum": 0},
        "solver": {
            "type": "object",
            "required": ["command", "timeout_s", "checks"],
            "properties": {"timeout_s": {"type": "number", "exclusiveMinimum": 0}},
        },
        "objectives": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "value", "optimal"],
                "properties": {"optimal": {"type": "boolean"}, "value": {"type": "integer"}},
            },
        },
        "artifacts": {"type": "object", "additionalProperties": {"type": "string"}},
    },
    "allOf": [
        {
            "if": {"properties": {"status": {"const": "sat"}}},
            "then": {"properties": {"configuration": {"type": "object"}}},
            "else": {"properties": {"configuration": {"type": "null"}}},
        }
    ],
}


CONDITIONS_SCHEMA = {
    "type": "object",
    "required": ["command", "conditions", "elapsed_s", "solver"],
    "properties": {
        "conditions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["condition", "status"],
                "properties": {"status": {"enum": ["pass", "fail", "inconclusive"]}},
            },
        },
        "elapsed_s": {"type": "number", "minimum": 0},
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def validate_report(report: dict) -> dict:
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise
    except OSError as e:
        raise FileNotFoundError(f"{path}: {e}") from e


class Run:
    """Collects report fields and writes artifacts under the output directory."""

    def __init__(self, command: str, args):
        self.command = command
        self.out = Path(args.out)
        self.solver = args.solver
        self.timeout_s = args.timeout_s
        self.t0 = time.monotonic()
        self.stages: list[dict] = []
        self.artifacts: dict[str, str] = {}
        self.checks = 0
        self.extra: dict = {}

    def session(self) -> SolverSession:
        return SolverSession(self.solver, self.timeout_s)

    def stage(self, name, status, elapsed, **kw):
        self.stages.append({"name": name, "status": status, "elapsed_s": round(max(elapsed, 0.0), 6), **kw})

    def write(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(text)
        self.artifacts[name] = str(path)
        return path

    def finish(self, status: str, config=None, inconclusive: bool = False) -> int:
        report = {
            "command": self.command,
            "status": status,
            "inconclusive": inconclusive,
            "configuration": None,
            "stages": self.stages,
            "elapsed_s": round(time.monotonic() - self.t0, 6),
            "solver": {"command": self.solver, "timeout_s": self.timeout_s, "checks": self.checks},
        }
        if status == "sat":
            text = configuration_json(config)
            self.write("configuration.json", text)
            report["configuration"] = json.loads(text)
        report.update(self.extra)
        self.out.mkdir(parents=True, exist_ok=True)
        report["artifacts"] = dict(sorted({**self.artifacts, "report.json": str(self.out / "report.json")}.items()))
        validate_report(report)
        (self.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return STATUS_EXIT[status]


# -- problem loading ----------------------------------------------------------------


def load_system(args):
    if bool(args.model) == bool(args.btor2):
        raise UsageError("give exactly one of --model or --btor2")
    if args.btor2:
        if not args.roles:
            raise UsageError("--btor2 needs --roles")
        return parse_btor2(_read(args.btor2), parse_roles(_read(args.roles)))
    if args.roles:
        raise UsageError("--roles only applies to --btor2; native models declare roles inline")
    return parse_sts(_read(args.model))


def load_problem(args) -> ConfigProblem:
    ts = load_system(args)
    trace = parse_trace(_read(args.trace), ts)
    invs = [parse_formula(text, ts.var_map) for text in args.invariant or ()]
    return ConfigProblem(ts, args.steps, trace, invariants=invs)


def _config_lines(config) -> list[str]:
    return [f"  {v.name} = {json.dumps(config[v])}" for v in sorted(config, key=lambda v: v.name)]


def check_pinned(run: Run, cp: ConfigProblem, config) -> tuple[str, list]:
    """Solve with ``config`` pinned and replay it through the simulator."""
    phi = And(build_config_formula(cp), pin({timed(v, 0): x for v, x in config.items()}))
    query = step_vars(cp, 0) + [timed(v, i) for i in range(cp.k) for v in cp.system.inputs]
    t0 = time.monotonic()
    with run.session() as s:
        r = check_sat(s, phi, query_vars=query)
    run.checks += 1
    run.stage("check-config", r.status, time.monotonic() - t0)
    if not r.is_sat:
        return r.status, []
    bad = trace_mismatches(cp, replay(cp, r.model, config))
    run.extra["check"] = {"pinned": True, "replay_mismatches": [list(b) for b in bad]}
    return r.status, bad


# -- commands -----------------------------------------------------------------------


def cmd_solve(args) -> int:
    cp = load_problem(args)
    run = Run("solve", args)
    if args.check_config:
        config = parse_configuration(_read(args.check_config), cp.system)
        status, bad = check_pinned(run, cp, config)
        if status == "sat" and bad:
            print(f"configuration reproduces the trace: no ({len(bad)} mismatches)")
            run.finish("unsat")
            return EXIT_UNSAT
        print({"sat": "configuration reproduces the trace: yes", "unsat": "configuration does not fit"}
              .get(status, status))
        return run.finish(status, config if status == "sat" else None)

    phi = cp.formula()
    run.write("formula.smt2", serialize_smt2(phi, check=True))
    t0 = time.monotonic()
    try:
        with run.session() as s:
            r = check_sat(s, phi, query_vars=[timed(v, 0) for v in cp.v_conf])
            run.checks += 1
    except SolverTimeout:
        run.stage("solve", "timeout", time.monotonic() - t0)
        print("timeout")
        return run.finish("timeout")
    run.stage("solve", r.status, time.monotonic() - t0)
    if r.is_sat:
        config = extract_configuration(r.model, cp)
        print("configurable")
        print("\n".join(_config_lines(config)))
        return run.finish("sat", config)
    print("not configurable" if r.is_unsat else "unknown")
    return run.finish(r.status)


def _default_order(names) -> list[str] | None:
    preferred = ["agg", "tb", "sram"]
    return preferred if sorted(names) == sorted(preferred) else None


def cmd_solve_modular(args) -> int:
    d, raw = load_decomposition(args.decomposition)
    run = Run("solve-modular", args)
    base = Path(args.decomposition).parent
    if args.check_config:
        config = parse_configuration(_read(args.check_config), d.parent.system)
        status, bad = check_pinned(run, d.parent, config)
        if status == "sat" and bad:
            print(f"configuration reproduces the trace: no ({len(bad)} mismatches)")
            return run.finish("unsat")
        print("configuration reproduces the trace: yes" if status == "sat" else status)
        return run.finish(status, config if status == "sat" else None)

    strategy_name = args.strategy or raw.get("strategy", "all-free-vars")
    shared = args.shared.split(",") if args.shared else d.shared_vars
    strategy = AbductStrategy.parse(strategy_name, shared)
    if args.order:
        order = args.order.split(",")
    else:
        order = raw.get("order") or _default_order(d.parts)
    try:
        res = solve_modular(d, strategy, order, args.solver, args.timeout_s, args.parallel,
                            check_conditions=args.check_conditions, recheck=not args.no_recheck)
    except SolverTimeout as e:
        print(f"timeout: {e}")
        return run.finish("timeout")
    for st in res.stages:
        run.stage(st.name, st.status, st.elapsed, n_vars=st.n_vars, parallel=st.parallel)
        run.checks += 1
    run.extra["order"] = [n for n, _ in d.ordered(order)]
    run.extra["strategy"] = strategy.kind
    if res.conditions is not None:
        run.extra["conditions"] = [v.to_json() for v in res.conditions]
    if not res.is_sat:
        if res.status == "unsat":
            print(f"inconclusive: stage {res.failed_stage} is unsat; the composed problem may still be configurable")
        else:
            print(f"{res.status} at stage {res.failed_stage}")
        run.extra["failed_stage"] = res.failed_stage
        return run.finish(res.status, inconclusive=res.inconclusive)
    run.extra["recheck"] = res.recheck
    if res.recheck is not None:
        run.checks += 1
    print("configurable" + (f" (monolithic re-check: {res.recheck})" if res.recheck else ""))
    groups_file = raw.get("groups")
    if groups_file:
        groups = parse_groups(_read(base / groups_file), d.parent.system.var_map)
        text = render_configuration(res.configuration, groups)
        run.write("configuration.txt", text)
        print(text, end="")
    else:
        print("\n".join(_config_lines(res.configuration)))
    return run.finish("sat", res.configuration)


def cmd_check_decomposition(args) -> int:
    d, _ = load_decomposition(args.decomposition)
    t0 = time.monotonic()
    with SolverSession(args.solver, args.timeout_s) as s:
        verdicts = check_decomposition(d, s)
    for v in verdicts:
        print(f"{v.condition}: {v.status}" + (f" ({v.detail})" if v.detail else ""))
    statuses = {v.status for v in verdicts}
    report = {
        "command": "check-decomposition",
        "conditions": [v.to_json() for v in verdicts],
        "elapsed_s": round(time.monotonic() - t0, 6),
        "solver": {"command": args.solver, "timeout_s": args.timeout_s, "checks": s.n_checks},
    }
    jsonschema.validate(report, CONDITIONS_SCHEMA)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "conditions.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if "fail" in statuses:
        return EXIT_UNSAT
    return EXIT_SAT if statuses == {"pass"} else EXIT_UNKNOWN


def _objectives_for(args, cp: ConfigProblem):
    env = cp.system.var_map
    groups = None
    if args.groups:
        groups = parse_groups(_read(args.groups), env)
    if args.objectives == "moph":
        if groups is None:
            raise UsageError("--objectives moph needs --groups")
        objs = build_objectives(groups)
    else:
        objs = parse_objectives(_read(args.objectives), env)
    # configuration is constant over the unrolling, so step 0 stands for all steps
    return at_step(objs, 0), groups


def cmd_optimize(args) -> int:
    cp = load_problem(args)
    run = Run("optimize", args)
    objs, groups = _objectives_for(args, cp)
    if args.check_config:
        config = parse_configuration(_read(args.check_config), cp.system)
        status, bad = check_pinned(run, cp, config)
        print("configuration reproduces the trace: " + ("yes" if status == "sat" and not bad else "no"))
        if status == "sat" and bad:
            return run.finish("unsat")
        return run.finish(status, config if status == "sat" else None)

    phi = cp.formula()
    query = [timed(v, 0) for v in cp.v_conf]
    t0 = time.monotonic()
    with run.session() as s:
        if args.strategy == "widening":
            if groups is not None:
                dims = [timed(d, 0) for d in dims_in_priority(groups)]
                rest = objs[dim_objective_count(groups):]
            else:
                if any(o.direction != "min" for o in objs):
                    raise UsageError("widening minimises; every objective must be min")
                dims, rest = [o.term for o in objs], []
            upper = [args.maxdim] * len(dims) if groups is not None and args.maxdim is not None else None
            res = solve_dim_widening(s, phi, dims, upper, args.timeout_s, query)
            run.stage("widening", res.status, res.elapsed, rounds=res.rounds)
            if res.is_sat and rest:
                # dims are settled; the remaining objectives go through the lexicographic search
                pinned = And([phi] + [Eq(dv, BvConst(x, dv.sort.width)) for dv, x in zip(dims, res.values[1:])])
                left = max(args.timeout_s - (time.monotonic() - t0), 0.001)
                tail = solve_lex(s, pinned, rest, left, query, args.bisect)
                run.stage("lex", tail.status, tail.elapsed, rounds=tail.rounds)
                res.values += tail.values
                res.optimal += tail.optimal
                res.model = tail.model or res.model
                res.rounds += tail.rounds
            names = [o.name for o in objs] if groups is not None else res.names
        elif len(objs) == 1:
            res = branch_and_bound(s, phi, objs[0], args.timeout_s, query, args.bisect)
            run.stage("branch-and-bound", res.status, res.elapsed, rounds=res.rounds)
            names = res.names
        else:
            res = solve_lex(s, phi, objs, args.timeout_s, query, args.bisect)
            run.stage("lex", res.status, res.elapsed, rounds=res.rounds)
            names = res.names
        run.checks += res.rounds
        if not res.is_sat:
            print("not configurable" if res.status == "unsat" else res.status)
            return run.finish(res.status)
        certs = [None] * len(objs)
        if not args.no_certify:
            t1 = time.monotonic()
            n = len(res.values)
            certs = certify(s, phi, objs[:n], res.values) + [None] * (len(objs) - n)
            run.checks += n
            run.stage("certify", "done", time.monotonic() - t1)

    config = extract_configuration(res.model, cp)
    rows = []
    for name, v, opt, cert in zip(names, res.values, res.optimal, certs):
        rows.append({"name": name, "value": int(v), "optimal": bool(opt), "certificate": cert})
        flag = "optimal" if opt else "best found"
        print(f"{name} = {v} ({flag}{', certified' if cert == 'unsat' else ''})")
    run.extra["objectives"] = rows
    run.extra["strategy"] = args.strategy
    if groups is not None:
        text = render_configuration(config, groups)
        run.write("configuration.txt", text)
        print(text, end="")
    else:
        print("\n".join(_config_lines(config)))
    return run.finish("sat", config)


def _trace_for(app: str, width: int, height: int, latency: int | None, p: MiniTileParams):
    stream = list(range(1, width * height + 1))
    if app == "identity":
        outs = stream
    else:
        outs = [v for w in conv3x3_windows(width, height) for v in w]
    if latency is None:
        latency = min_latency(stream, outs, p)
    gen = gen_identity_trace if app == "identity" else gen_conv3x3_trace
    return gen(width, height, latency)


def _params(args) -> MiniTileParams:
    return MiniTileParams(word_width=args.word_width, ratio=args.ratio, sram_depth=args.sram_depth,
                          maxdim=args.maxdim, counter_width=args.counter_width)


def cmd_gen_trace(args) -> int:
    tr = _trace_for(args.app, args.width, args.height, args.latency, _params(args))
    text = tr.to_json()
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _groups_json(groups) -> str:
    rows = [{"name": g.name, "dim": g.dim.name, "ranges": [r.name for r in g.ranges],
             "strides": [s.name for s in g.strides], "offset": g.offset.name,
             "role": g.role, "direction": g.direction} for g in groups]
    return json.dumps(rows, indent=2) + "\n"


def cmd_gen_tile(args) -> int:
    p = _params(args)
    tile = build_mini_tile(p)
    tr = _trace_for(args.app, args.width, args.height, args.latency, p)
    tp = tile_problem(tile, tr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    desc = f"mini tile, {args.app} {args.width}x{args.height}"
    (out / "tile.sts").write_text(print_sts(tile.parent, desc))
    (out / "tile.trace.json").write_text(tr.to_json())
    (out / "groups.json").write_text(_groups_json(tile.groups()))
    parts = []
    for name, cp in tp.decomposition.parts.items():
        (out / f"{name}.sts").write_text(print_sts(cp.system, f"{desc}: {name} stage"))
        (out / f"{name}.trace.json").write_text(cp.property.to_json())
        (out / f"{name}.groups.json").write_text(_groups_json(tile.groups(name)))
        parts.append({"name": name, "model": f"{name}.sts", "trace": f"{name}.trace.json"})
    doc = {
        "steps": tp.plan.k,
        "parent": {"model": "tile.sts", "trace": "tile.trace.json"},
        "parts": parts,
        "shared_vars": list(tp.decomposition.shared_vars),
        "strategy": "all-free-vars",
        "order": ["agg", "tb", "sram"],
        "groups": "groups.json",
    }
    (out / "decomposition.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out}/decomposition.json (k={tp.plan.k}, latency={tp.plan.latency})")
    return 0


# -- argument parsing ---------------------------------------------------------------


def _add_solver(p):
    p.add_argument("--solver", default=DEFAULT_SOLVER, help="solver command line (SMT-LIB2 on stdin)")
    p.add_argument("--timeout-s", type=float, default=DEFAULT_TIMEOUT_S, help="per-call solver timeout")
    p.add_argument("--out", default="cfgsmith-out", help="directory for report.json and other artifacts")


def _add_problem(p):
    p.add_argument("--model", help="native transition system file")
    p.add_argument("--btor2", help="Btor2 model (needs --roles)")
    p.add_argument("--roles", help="JSON roles for Btor2 variables")
    p.add_argument("--trace", required=True, help="input/output example trace (JSON)")
    p.add_argument("--steps", type=int, required=True, help="unrolling depth k")
    p.add_argument("--invariant", action="append", help="SMT-LIB Bool term asserted at every step")
    p.add_argument("--check-config", help="pin this configuration JSON, solve and replay")


def _add_tile(p, with_out=True):
    p.add_argument("app", choices=("identity", "conv3x3"))
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--latency", type=int, help="cycles before the first output (default: smallest feasible)")
    p.add_argument("--word-width", type=int, default=8)
    p.add_argument("--ratio", type=int, default=4)
    p.add_argument("--sram-depth", type=int, default=8)
    p.add_argument("--maxdim", type=int, default=2)
    p.add_argument("--counter-width", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cfgsmith", description="Configure parameterized hardware from input/output examples.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one configuration problem")
    _add_problem(p)
    _add_solver(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("solve-modular", help="solve a decomposed problem stage by stage")
    p.add_argument("--decomposition", required=True)
    p.add_argument("--strategy", choices=("all-free-vars", "interface-only"))
    p.add_argument("--shared", help="comma list of shared variables for interface-only")
    p.add_argument("--order", help="comma list of part names (default agg,tb,sram for tiles)")
    p.add_argument("--parallel", action="store_true", help="solve independent leading parts concurrently")
    p.add_argument("--check-conditions", action="store_true", help="check decomposition conditions first")
    p.add_argument("--no-recheck", action="store_true", help="skip the monolithic re-check")
    p.add_argument("--check-config", help="pin this configuration in the composed problem and replay")
    _add_solver(p)
    p.set_defaults(func=cmd_solve_modular)

    p = sub.add_parser("check-decomposition", help="check the decomposition conditions")
    p.add_argument("--decomposition", required=True)
    _add_solver(p)
    p.set_defaults(func=cmd_check_decomposition)

    p = sub.add_parser("optimize", help="find an optimal configuration")
    _add_problem(p)
    p.add_argument("--objectives", required=True, help="objective JSON file, or 'moph'")
    p.add_argument("--groups", help="generator groups JSON (needed for moph)")
    p.add_argument("--strategy", choices=("bnb", "widening"), default="bnb")
    p.add_argument("--bisect", action="store_true", help="probe midpoints between bound and incumbent")
    p.add_argument("--maxdim", type=int, help="dimension bound used by widening")
    p.add_argument("--no-certify", action="store_true")
    _add_solver(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("gen-trace", help="emit a stencil trace")
    _add_tile(p)
    p.add_argument("-o", "--output", help="file to write (default stdout)")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("gen-tile", help="emit mini-tile models, traces and a decomposition")
    _add_tile(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tile)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"cfgsmith: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"cfgsmith: cannot read input: {e}", file=sys.stderr)
        return EXIT_NOINPUT
    except DATA_ERRORS as e:
        print(f"cfgsmith: bad input: {e}", file=sys.stderr)
        return EXIT_DATAERR
    except SolverCrash as e:
        code = EXIT_UNAVAILABLE if "cannot start" in str(e) else EXIT_SOFTWARE
        print(f"cfgsmith: solver failure: {e}", file=sys.stderr)
        return code
    except SolverError as e:
        print(f"cfgsmith: solver failure: {e}", file=sys.stderr)
        return EXIT_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
