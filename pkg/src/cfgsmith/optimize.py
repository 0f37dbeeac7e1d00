"""Objective-driven solving over unsigned bit-vector objectives.

Single objectives are minimised (or maximised) by branch-and-bound against
an incremental solver session: each round asserts ``t < best`` until the
solver says unsat, and that final unsat answer is the optimality
certificate.  Lexicographic problems fix each optimum with an equality
before moving on.  Dimension objectives can instead be handled by widening
a bound on their sum.
"""

from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from cfgsmith import sexpr
from cfgsmith.smt import SolverSession, SolverTimeout, pin
from cfgsmith.terms import (
    BOOL,
    And,
    BvConst,
    BvMul,
    BvUlt,
    Eq,
    Ite,
    Not,
    Term,
    bv_sum,
    evaluate,
    free_vars,
    resize,
    substitute,
    timed,
)

log = logging.getLogger(__name__)


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class Objective:
    term: Term
    direction: str = "min"
    name: str = ""

    def __post_init__(self):
        if self.direction not in ("min", "max"):
            raise ObjectiveError(f"direction must be min or max, got {self.direction!r}")
        if not self.term.sort.is_bv:
            raise ObjectiveError("objective terms must be bit-vectors")

    def better(self, v: int) -> Term:
        """Strictly better than ``v`` under the unsigned order."""
        c = BvConst(v, self.term.sort.width)
        return BvUlt(self.term, c) if self.direction == "min" else BvUlt(c, self.term)

    def equals(self, v: int) -> Term:
        return Eq(self.term, BvConst(v, self.term.sort.width))


@dataclass
class OptResult:
    status: str  # sat | unsat | unknown
    values: list = field(default_factory=list)
    optimal: list = field(default_factory=list)
    model: dict | None = None
    rounds: int = 0
    elapsed: float = 0.0
    names: list = field(default_factory=list)

    @property
    def is_sat(self):
        return self.status == "sat"


def _remaining(deadline):
    if deadline is None:
        return None
    return max(deadline - time.monotonic(), 0.001)


def _descend(session: SolverSession, obj: Objective, query, deadline, bisect: bool = False) -> tuple:
    """Optimise ``obj`` in the session's current context.

    Returns ``(status, value, model, optimal, rounds)``.  Bound constraints are
    asserted in a private frame that is popped before returning.  With
    ``bisect``, a round may first probe the midpoint between the best value
    and the proven bound; the final round is always the plain ``t < best``
    check whose unsat answer certifies the optimum.
    """
    width = obj.term.sort.width
    # proven bound: nothing strictly better than ``bound`` is feasible
    bound = 0 if obj.direction == "min" else (1 << width) - 1
    best = None
    model = None
    rounds = 0
    session.push()
    try:
        while True:
            rounds += 1
            probe = None
            if bisect and best is not None and abs(best - bound) > 1:
                probe = (bound + best) // 2 if obj.direction == "min" else (bound + best + 1) // 2
                session.push()
                # at least as good as probe
                session.assert_formula(obj.better(probe + 1 if obj.direction == "min" else probe - 1))
            try:
                r = session.check(query, timeout_s=_remaining(deadline))
            except SolverTimeout:
                log.warning("optimisation timed out after %d rounds", rounds)
                session.restart()
                if best is None:
                    return "unknown", None, None, False, rounds
                return "sat", best, model, False, rounds
            if probe is not None:
                session.pop()
                if r.is_unsat:
                    bound = probe + 1 if obj.direction == "min" else probe - 1
                    session.assert_formula(Not(obj.better(bound)))
                    continue
            if r.is_unsat:
                if best is None:
                    return "unsat", None, None, False, rounds
                return "sat", best, model, True, rounds
            if not r.is_sat:
                if best is None:
                    return "unknown", None, None, False, rounds
                return "sat", best, model, False, rounds
            model = r.model
            best = evaluate(obj.term, model)
            session.assert_formula(obj.better(best))
    finally:
        if session.alive and session.depth:
            session.pop()


def _query(phi: Term, objs: Iterable[Objective], extra=()) -> list[Term]:
    vs = set(free_vars(phi)) | set(extra)
    for o in objs:
        vs |= free_vars(o.term)
    return sorted(vs, key=lambda v: v.name)


def branch_and_bound(session: SolverSession, phi: Term, obj: Objective,
                     timeout_s: float | None = None, query_vars=None, bisect: bool = False) -> OptResult:
    t0 = time.monotonic()
    deadline = None if timeout_s is None else t0 + timeout_s
    query = _query(phi, [obj]) if query_vars is None else list(query_vars) + sorted(free_vars(obj.term), key=lambda v: v.name)
    session.push()
    try:
        session.assert_formula(phi)
        status, v, model, opt, rounds = _descend(session, obj, query, deadline, bisect)
    finally:
        if session.alive and session.depth:
            session.pop()
    out = OptResult(status, [v] if v is not None else [], [opt] if v is not None else [], model, rounds,
                    time.monotonic() - t0, [obj.name])
    return out


def solve_lex(session: SolverSession, phi: Term, objectives: Sequence[Objective],
              timeout_s: float | None = None, query_vars=None, bisect: bool = False) -> OptResult:
    """Lexicographic optimisation; each optimum is pinned with an equality."""
    if not objectives:
        raise ObjectiveError("empty objective list")
    t0 = time.monotonic()
    deadline = None if timeout_s is None else t0 + timeout_s
    query = _query(phi, objectives, query_vars or ())
    res = OptResult("unknown", names=[o.name for o in objectives])
    session.push()
    try:
        session.assert_formula(phi)
        for obj in objectives:
            status, v, model, opt, rounds = _descend(session, obj, query, deadline, bisect)
            res.rounds += rounds
            if status != "sat":
                if not res.values:
                    res.status = status
                break
            res.status = "sat"
            res.values.append(v)
            res.optimal.append(opt)
            res.model = model
            if not opt:
                break
            session.assert_formula(obj.equals(v))
    finally:
        if session.alive and session.depth:
            session.pop()
    if res.status == "sat":
        # objectives not reached keep the values of the last model, flagged non-optimal
        for obj in objectives[len(res.values):]:
            res.values.append(evaluate(obj.term, res.model))
            res.optimal.append(False)
    res.elapsed = time.monotonic() - t0
    return res


def _tuples_with_sum(n: int, total: int, upper: Sequence[int]):
    """All n-tuples with entries in [0, upper[i]] summing to ``total``, in lexicographic order."""
    if n == 0:
        if total == 0:
            yield ()
        return
    rest_max = sum(upper[1:])
    lo = max(0, total - rest_max)
    for first in range(lo, min(upper[0], total) + 1):
        for tail in _tuples_with_sum(n - 1, total - first, upper[1:]):
            yield (first,) + tail


def solve_dim_widening(session: SolverSession, phi: Term, dims: Sequence[Term],
                       upper: Sequence[int] | None = None, timeout_s: float | None = None,
                       query_vars=None) -> OptResult:
    """Smallest total over ``dims``; ties broken lexicographically in the given order.

    ``dims`` lists write-side dimensions before read-side ones.
    """
    if not dims:
        raise ObjectiveError("no dimension variables")
    dims = [d.term if isinstance(d, Objective) else d for d in dims]
    if upper is None:
        upper = [(1 << d.sort.width) - 1 for d in dims]
    t0 = time.monotonic()
    deadline = None if timeout_s is None else t0 + timeout_s
    query = _query(phi, [], list(query_vars or ()) + [v for d in dims for v in free_vars(d)])
    res = OptResult("unsat", names=["sum(dim)"] + [f"dim{i}" for i in range(len(dims))])
    session.push()
    try:
        session.assert_formula(phi)
        r = session.check(query, timeout_s=_remaining(deadline))
        res.rounds += 1
        if not r.is_sat:
            res.status = r.status
            return res
        for bound in range(sum(upper) + 1):
            for tup in _tuples_with_sum(len(dims), bound, upper):
                res.rounds += 1
                cons = And([Eq(d, BvConst(x, d.sort.width)) for d, x in zip(dims, tup)])
                session.push()
                try:
                    session.assert_formula(cons)
                    try:
                        r = session.check(query, timeout_s=_remaining(deadline))
                    except SolverTimeout:
                        session.restart()
                        res.status = "unknown"
                        return res
                finally:
                    if session.alive and session.depth:
                        session.pop()
                if r.is_sat:
                    res.status = "sat"
                    res.values = [bound] + list(tup)
                    res.optimal = [True] * len(res.values)
                    res.model = r.model
                    return res
                if not r.is_unsat:
                    res.status = "unknown"
                    return res
    finally:
        if session.alive and session.depth:
            session.pop()
        res.elapsed = time.monotonic() - t0
    return res


def certify(session: SolverSession, phi: Term, objectives: Sequence[Objective], values: Sequence[int]) -> list[str]:
    """Re-check optimality: phi, earlier optima pinned, and a strictly better value must be unsat."""
    out = []
    pinned = []
    for obj, v in zip(objectives, values):
        session.push()
        try:
            session.assert_formula(And([phi] + pinned + [obj.better(v)]))
            out.append(session.check(()).status)
        finally:
            session.pop()
        pinned.append(obj.equals(v))
    return out


# -- MOP_H objectives for affine generators -------------------------------------------


@dataclass
class GeneratorGroup:
    """Configuration variables of one affine generator."""

    name: str
    dim: Term
    ranges: list[Term]
    strides: list[Term]
    offset: Term
    role: str = "addressor"  # addressor | accessor
    direction: str = "write"  # write | read

    def __post_init__(self):
        if self.role not in ("addressor", "accessor"):
            raise ObjectiveError(f"group {self.name}: role must be addressor or accessor")
        if self.direction not in ("write", "read"):
            raise ObjectiveError(f"group {self.name}: direction must be write or read")
        if len(self.ranges) != len(self.strides) or not self.ranges:
            raise ObjectiveError(f"group {self.name}: ranges and strides must have equal nonzero length")

    def variables(self) -> list[Term]:
        return [self.dim, *self.ranges, *self.strides, self.offset]

    def at_step(self, i: int) -> "GeneratorGroup":
        m = {v: timed(v, i) for t in self.variables() for v in free_vars(t)}
        sub = lambda t: substitute(t, m)
        return GeneratorGroup(self.name, sub(self.dim), [sub(r) for r in self.ranges],
                              [sub(s) for s in self.strides], sub(self.offset), self.role, self.direction)


def active_range_product(g: GeneratorGroup) -> Term:
    """Product of the ranges of active loops (index < dim); inactive loops count as 1."""
    w = max(r.sort.width for r in g.ranges)
    width = w * len(g.ranges)
    dw = g.dim.sort.width
    prod = None
    for j, r in enumerate(g.ranges):
        if j >= (1 << dw):
            guard = None
        else:
            guard = BvUlt(BvConst(j, dw), g.dim)
        factor = resize(r, width)
        one = BvConst(1, width)
        factor = Ite(guard, factor, one) if guard is not None else one
        prod = factor if prod is None else BvMul(prod, factor)
    return prod


def build_objectives(groups: Sequence[GeneratorGroup]) -> list[Objective]:
    """Sum of dims, write dims, read dims, summed active range products,
    summed strides, summed addressor offsets, all minimised in that order."""
    if not groups:
        raise ObjectiveError("no generator groups")
    out = [Objective(bv_sum([g.dim for g in groups]), "min", "sum(dim)")]
    for direction in ("write", "read"):
        out += [Objective(g.dim, "min", f"dim[{g.name}]") for g in groups if g.direction == direction]
    out.append(Objective(bv_sum([active_range_product(g) for g in groups]), "min", "sum(prod(ranges))"))
    out.append(Objective(bv_sum([s for g in groups for s in g.strides]), "min", "sum(strides)"))
    addr = [g.offset for g in groups if g.role == "addressor"]
    if addr:
        out.append(Objective(bv_sum(addr), "min", "sum(addressor offsets)"))
    return out


def dim_objective_count(groups: Sequence[GeneratorGroup]) -> int:
    """How many leading objectives of :func:`build_objectives` are dimension objectives."""
    return 1 + len(groups)


def dims_in_priority(groups: Sequence[GeneratorGroup]) -> list[Term]:
    return [g.dim for d in ("write", "read") for g in groups if g.direction == d]


def parse_groups(text: str, env: Mapping[str, Term]) -> list[GeneratorGroup]:
    """Groups file: a JSON list of {name, dim, ranges, strides, offset, role, direction} naming variables."""
    raw = json.loads(text)
    if not isinstance(raw, list) or not raw:
        raise ObjectiveError("groups file must be a nonempty JSON list")
    out = []
    for i, g in enumerate(raw):
        try:
            get = lambda n: env[n]
            out.append(GeneratorGroup(
                g.get("name", f"g{i}"), get(g["dim"]), [get(r) for r in g["ranges"]],
                [get(s) for s in g["strides"]], get(g["offset"]),
                g.get("role", "addressor"), g.get("direction", "write"),
            ))
        except KeyError as e:
            raise ObjectiveError(f"group {i}: unknown or missing field/variable {e}") from None
    return out


def parse_objectives(text: str, env: Mapping[str, Term]) -> list[Objective]:
    """Objective file: a JSON list of {term: SMT-LIB text, direction: min|max}."""
    from cfgsmith.frontend import parse_term

    raw = json.loads(text)
    if not isinstance(raw, list) or not raw:
        raise ObjectiveError("objective file must be a nonempty JSON list")
    out = []
    for i, o in enumerate(raw):
        if not isinstance(o, dict) or "term" not in o:
            raise ObjectiveError(f"objective {i} lacks a term")
        t = parse_term(sexpr.parse_one(o["term"]), env)
        out.append(Objective(t, o.get("direction", "min"), o.get("name", o["term"])))
    return out


def at_step(objs: Sequence[Objective], i: int = 0) -> list[Objective]:
    out = []
    for o in objs:
        m = {v: timed(v, i) for v in free_vars(o.term)}
        out.append(Objective(substitute(o.term, m), o.direction, o.name))
    return out


def brute_force_lex(phi: Term, objectives: Sequence[Objective], variables: Sequence[Term] | None = None):
    """Exhaustive lexicographic optimum over every assignment of ``variables``.

    Only for small search spaces; returns ``(values, assignment)`` or ``None``.
    """
    vs = sorted(variables if variables is not None else free_vars(phi), key=lambda v: v.name)
    domains = [(False, True) if v.sort == BOOL else range(1 << v.sort.width) for v in vs]
    best = None
    best_a = None
    for combo in itertools.product(*domains):
        a = dict(zip(vs, combo))
        if not evaluate(phi, a):
            continue
        key = []
        for o in objectives:
            x = evaluate(o.term, a)
            key.append(x if o.direction == "min" else -x)
        if best is None or key < best:
            best, best_a = key, a
    if best is None:
        return None
    return [abs(x) if o.direction == "max" else x for x, o in zip(best, objectives)], best_a
