"""Modular configuration solving with abducts.

A :class:`Decomposition` splits a parent problem into ordered parts that
share variables by name.  :func:`solve_modular` solves the parts one after
another, conjoining to each stage an abduct of what the earlier stages
found.  Two parts are the basic case; more parts are a left fold.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from cfgsmith.frontend import parse_sts, parse_trace
from cfgsmith.smt import DEFAULT_SOLVER, DEFAULT_TIMEOUT_S, SolverSession, check_sat, pin
from cfgsmith.terms import (
    And,
    Not,
    Term,
    TransitionSystem,
    conjuncts,
    evaluate,
    free_vars,
    timed,
    untimed,
)
from cfgsmith.unroll import ConfigProblem, build_config_formula, pbe_property

log = logging.getLogger(__name__)


class DecompositionError(ValueError):
    pass


class StrategyError(ValueError):
    pass


class ModelIncomplete(KeyError):
    pass


ALL_FREE_VARS = "all-free-vars"
INTERFACE_ONLY = "interface-only"


@dataclass(frozen=True)
class AbductStrategy:
    kind: str = ALL_FREE_VARS
    shared_vars: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (ALL_FREE_VARS, INTERFACE_ONLY):
            raise StrategyError(f"unknown abduct strategy {self.kind!r}")
        object.__setattr__(self, "shared_vars", tuple(self.shared_vars))

    @classmethod
    def parse(cls, name: str, shared=()) -> "AbductStrategy":
        norm = name.replace("_", "-").lower()
        aliases = {"allfreevars": ALL_FREE_VARS, "interfaceonly": INTERFACE_ONLY}
        return cls(aliases.get(norm.replace("-", ""), norm), tuple(shared))

    def covers(self, v: Term) -> bool:
        """Does the shared-variable list name ``v`` (exactly, or by its untimed base)?"""
        base, step = untimed(v.name)
        for s in self.shared_vars:
            if s == v.name or (step is not None and "@" not in s and s == base):
                return True
        return False


@dataclass
class Decomposition:
    parent: ConfigProblem
    parts: dict[str, ConfigProblem]
    shared_vars: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.parts) < 2:
            raise DecompositionError("a decomposition needs at least two parts")
        for name, cp in self.parts.items():
            if cp.k != self.parent.k:
                raise DecompositionError(f"part {name} has k={cp.k}, parent has k={self.parent.k}")
        sorts: dict[str, tuple[str, object]] = {}
        systems = [("parent", self.parent.system)] + [(n, cp.system) for n, cp in self.parts.items()]
        for owner, ts in systems:
            for v in ts.vars:
                prev = sorts.get(v.name)
                if prev is not None and prev[1] != v.sort:
                    raise DecompositionError(
                        f"variable {v.name} has sort {prev[1]} in {prev[0]} but {v.sort} in {owner}"
                    )
                sorts.setdefault(v.name, (owner, v.sort))
        part_names = [{v.name for v in cp.system.vars} for cp in self.parts.values()]
        for s in self.shared_vars:
            base = untimed(s)[0]
            if sum(base in names for names in part_names) < 2:
                raise DecompositionError(f"shared variable {s} does not occur in two parts")

    def ordered(self, order: Sequence[str] | None = None) -> list[tuple[str, ConfigProblem]]:
        if order is None:
            return list(self.parts.items())
        order = list(order)
        if sorted(order) != sorted(self.parts):
            raise DecompositionError(
                f"order {order} must name each part exactly once ({sorted(self.parts)})"
            )
        return [(n, self.parts[n]) for n in order]


# -- decomposition conditions ---------------------------------------------------


@dataclass
class Verdict:
    condition: str
    status: str  # pass | fail | inconclusive
    detail: str = ""
    countermodel: dict | None = None

    def to_json(self):
        out = {"condition": self.condition, "status": self.status, "detail": self.detail}
        if self.countermodel is not None:
            out["countermodel"] = {v.name: x for v, x in sorted(self.countermodel.items(), key=lambda p: p[0].name)}
        return out


def _validity(session, antecedent: Term, consequent: Term, label: str, what: str) -> Verdict:
    r = check_sat(session, And(antecedent, Not(consequent)))
    if r.is_unsat:
        return Verdict(label, "pass", f"{what} holds")
    if r.is_sat:
        return Verdict(label, "fail", f"{what} does not hold", r.model)
    return Verdict(label, "inconclusive", "solver answered unknown")


def check_decomposition(d: Decomposition, session: SolverSession) -> list[Verdict]:
    """Verdicts for the four conditions: T, I and P implications and config coverage."""
    parts = list(d.parts.values())
    out = [
        _validity(session, And([cp.system.trans for cp in parts]), d.parent.system.trans,
                  "i", "conjunction of part transitions implies the parent transition"),
        _validity(session, And([cp.system.init for cp in parts]), d.parent.system.init,
                  "ii", "conjunction of part inits implies the parent init"),
    ]
    props = [pbe_property(cp.property, cp.v_in, cp.v_out, cp.k) for cp in parts]
    parent_p = pbe_property(d.parent.property, d.parent.v_in, d.parent.v_out, d.parent.k)
    out.append(_validity(session, And(props), parent_p, "iii",
                         "conjunction of part examples implies the parent example"))
    covered = {v.name for cp in parts for v in cp.v_conf}
    missing = sorted(v.name for v in d.parent.v_conf if v.name not in covered)
    if missing:
        out.append(Verdict("iv", "fail", f"parent config variables in no part: {missing}"))
    else:
        out.append(Verdict("iv", "pass", "every parent config variable is configured by some part"))
    return out


# -- abducts ------------------------------------------------------------------------


def get_abduct(phi: Term, model: Mapping[Term, object], strategy: AbductStrategy) -> Term:
    """Pin free variables of ``phi`` to their model values.

    With ``all-free-vars`` the result entails ``phi``.  With ``interface-only``
    only the shared variables are pinned, which does not by itself entail it.
    """
    fv = free_vars(phi)
    if strategy.kind == INTERFACE_ONLY:
        fv = {v for v in fv if strategy.covers(v)}
    missing = sorted(v.name for v in fv if v not in model)
    if missing:
        raise ModelIncomplete(f"model lacks values for {missing[:8]}{'...' if len(missing) > 8 else ''}")
    return pin({v: model[v] for v in fv})


# -- solving ------------------------------------------------------------------------


@dataclass
class StageReport:
    name: str
    status: str
    elapsed: float
    n_vars: int = 0
    parallel: bool = False

    def to_json(self):
        return {"name": self.name, "status": self.status, "elapsed_s": round(self.elapsed, 6),
                "n_vars": self.n_vars, "parallel": self.parallel}


@dataclass
class ModularResult:
    status: str  # sat | unsat | unknown
    configuration: dict | None = None
    stages: list[StageReport] = field(default_factory=list)
    model: dict | None = None
    recheck: str | None = None
    inconclusive: bool = False
    failed_stage: str | None = None
    conditions: list[Verdict] | None = None

    @property
    def is_sat(self):
        return self.status == "sat"


def _solve_stage(name, phi, solver, timeout_s):
    t0 = time.monotonic()
    with SolverSession(solver, timeout_s) as s:
        r = check_sat(s, phi)
    return name, r, time.monotonic() - t0


def _independent_prefix(named_phis) -> int:
    """Length of the longest leading run of parts with pairwise disjoint variables."""
    seen: set = set()
    n = 0
    for _, phi in named_phis:
        fv = free_vars(phi)
        if seen & fv:
            break
        seen |= fv
        n += 1
    return n


def solve_modular(
    d: Decomposition,
    strategy: AbductStrategy | None = None,
    order: Sequence[str] | None = None,
    solver: str = DEFAULT_SOLVER,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    parallel: bool = False,
    check_conditions: bool = False,
    recheck: bool = True,
) -> ModularResult:
    strategy = strategy or AbductStrategy()
    staged = [(name, build_config_formula(cp)) for name, cp in d.ordered(order)]
    result = ModularResult("unknown")

    if check_conditions:
        with SolverSession(solver, timeout_s) as s:
            result.conditions = check_decomposition(d, s)
        failed = [v.condition for v in result.conditions if v.status == "fail"]
        if failed:
            raise DecompositionError(f"decomposition conditions fail: {failed}")

    if strategy.kind == INTERFACE_ONLY:
        seen: set = set()
        for name, phi in staged:
            fv = free_vars(phi)
            leaks = sorted(v.name for v in fv & seen if not strategy.covers(v))
            if leaks:
                raise StrategyError(
                    f"interface-only abducts need every variable shared between stages listed as "
                    f"shared; stage {name} also shares {leaks[:6]}"
                )
            seen |= fv

    model: dict = {}
    psi = And()
    first = 0
    if parallel:
        n = _independent_prefix(staged)
        if n >= 2:
            with ThreadPoolExecutor(max_workers=n) as pool:
                futs = [pool.submit(_solve_stage, name, phi, solver, timeout_s) for name, phi in staged[:n]]
                outs = [f.result() for f in futs]
            for (name, r, dt), (_, phi) in zip(outs, staged[:n]):
                result.stages.append(StageReport(name, r.status, dt, len(free_vars(phi)), True))
            for (name, r, _), (_, phi) in zip(outs, staged[:n]):
                if not r.is_sat:
                    return _fail(result, name, r.status)
                model.update(r.model)
                psi = And(psi, get_abduct(phi, r.model, strategy))
            first = n

    for name, phi in staged[first:]:
        stage_phi = And(phi, psi)
        _, r, dt = _solve_stage(name, stage_phi, solver, timeout_s)
        result.stages.append(StageReport(name, r.status, dt, len(free_vars(stage_phi))))
        if not r.is_sat:
            return _fail(result, name, r.status)
        if strategy.kind == INTERFACE_ONLY:
            _amalgamation_check(phi, model, r.model, name)
        model.update(r.model)
        psi = And(psi, get_abduct(stage_phi if strategy.kind == ALL_FREE_VARS else phi, r.model, strategy))

    result.status = "sat"
    result.model = model
    result.configuration = {}
    for v in d.parent.v_conf:
        tv = timed(v, 0)
        if tv not in model:
            raise ModelIncomplete(f"no stage determined {v.name}")
        result.configuration[v] = model[tv]
    if recheck:
        result.recheck = recheck_configuration(d.parent, result.configuration, solver, timeout_s)
    return result


def _fail(result: ModularResult, stage: str, status: str) -> ModularResult:
    result.status = status
    result.failed_stage = stage
    # an unsat stage says nothing definite about the parent problem
    result.inconclusive = status == "unsat"
    return result


def _amalgamation_check(phi, earlier: Mapping, new: Mapping, name: str):
    """Merged model must still satisfy the stage formula; shared values agree by construction."""
    merged = dict(earlier)
    merged.update(new)
    if not evaluate(phi, merged):
        raise StrategyError(f"stage {name}: merged model does not satisfy its formula")


def recheck_configuration(parent: ConfigProblem, config: Mapping[Term, object],
                          solver: str = DEFAULT_SOLVER, timeout_s: float = DEFAULT_TIMEOUT_S) -> str:
    """Pin ``config`` in the monolithic formula and solve; a sound result gives ``sat``."""
    phi = And(build_config_formula(parent), pin({timed(v, 0): x for v, x in config.items()}))
    with SolverSession(solver, timeout_s) as s:
        return check_sat(s, phi, query_vars=()).status


# -- decomposition files ------------------------------------------------------------


def _load_problem(entry: dict, base: Path, k: int | None) -> ConfigProblem:
    try:
        ts = parse_sts((base / entry["model"]).read_text())
        trace = parse_trace((base / entry["trace"]).read_text(), ts)
    except KeyError as e:
        raise DecompositionError(f"decomposition entry lacks {e}") from None
    steps = entry.get("steps", k if k is not None else trace.k)
    return ConfigProblem(ts, int(steps), trace)


def load_decomposition(path: str | Path) -> tuple[Decomposition, dict]:
    """Read a decomposition file; returns the decomposition and its raw settings.

    Paths inside the file are relative to the file.  Example::

        {"parent": {"model": "tile.sts", "trace": "tile.trace.json"},
         "parts": [{"name": "agg", "model": "agg.sts", "trace": "agg.trace.json"}, ...],
         "shared_vars": ["a2s_0"], "strategy": "all-free-vars", "order": ["agg", "tb", "sram"]}
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict) or "parent" not in raw or not raw.get("parts"):
        raise DecompositionError(f"{path}: needs a parent entry and a nonempty parts list")
    base = path.parent
    parent = _load_problem(raw["parent"], base, raw.get("steps"))
    parts = {}
    for entry in raw["parts"]:
        name = entry.get("name") or f"part{len(parts) + 1}"
        if name in parts:
            raise DecompositionError(f"duplicate part name {name}")
        parts[name] = _load_problem(entry, base, parent.k)
    d = Decomposition(parent, parts, tuple(raw.get("shared_vars", ())))
    return d, raw


def compose_systems(systems: Sequence[TransitionSystem], inputs=(), outputs=()) -> TransitionSystem:
    """Union of several systems sharing variables by name.

    Config roles are kept; ``inputs``/``outputs`` name the composite's ports and
    every other non-config variable becomes internal state.
    """
    vs = {}
    confs = set()
    for ts in systems:
        for v in ts.vars:
            vs.setdefault(v.name, v)
        confs |= {v.name for v in ts.configs}
    roles = {}
    for name in vs:
        rs = set()
        if name in confs:
            rs.add("config")
        if name in inputs:
            rs.add("input")
        if name in outputs:
            rs.add("output")
        if "input" not in rs and "config" not in rs:
            rs.add("state")
        roles[name] = frozenset(rs)
    return TransitionSystem(
        tuple(vs.values()),
        And([c for ts in systems for c in conjuncts(ts.init)]),
        And([c for ts in systems for c in conjuncts(ts.trans)]),
        roles,
    )
