"""Sorted terms over Bool and fixed-width bit-vectors, transition systems,
and a concrete simulator.

Terms are hash-consed: building the same node twice returns the same
object, so identity comparison is structural equality and shared subterms
are shared in memory.  Variables are just ``var`` nodes.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass, field
from typing import Iterable, Mapping

TIME_SEP = "@"
PRIME = "'"

ROLES = frozenset({"input", "output", "config", "state"})


class SortError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Sort:
    kind: str
    width: int | None = None

    def __post_init__(self):
        if self.kind == "Bool":
            if self.width is not None:
                raise SortError("Bool sort has no width")
        elif self.kind == "BitVec":
            if not isinstance(self.width, int) or self.width < 1:
                raise SortError(f"bit-vector width must be >= 1, got {self.width!r}")
        else:
            raise SortError(f"unknown sort kind {self.kind!r}")

    @property
    def is_bool(self) -> bool:
        return self.kind == "Bool"

    @property
    def is_bv(self) -> bool:
        return self.kind == "BitVec"

    def __str__(self):
        return "Bool" if self.is_bool else f"(_ BitVec {self.width})"


BOOL = Sort("Bool")


def BV(width: int) -> Sort:
    return Sort("BitVec", width)


class Term:
    """An interned expression node.  Do not instantiate directly."""

    __slots__ = ("op", "args", "sort", "payload", "__weakref__")

    op: str
    args: tuple
    sort: Sort
    payload: object

    def __repr__(self):
        from cfgsmith.smt import term_to_smt2

        text = term_to_smt2(self, lets=False)
        if len(text) > 120:
            text = text[:117] + "..."
        return f"<{text}>"

    def __reduce__(self):
        return (_rebuild, (self.op, self.args, self.sort, self.payload))

    # Variables carry their name in the payload.
    @property
    def name(self) -> str:
        if self.op != "var":
            raise AttributeError("only variables have names")
        return self.payload

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def value(self):
        if self.op != "const":
            raise AttributeError("only constants have values")
        return self.payload


_table: "weakref.WeakValueDictionary[tuple, Term]" = weakref.WeakValueDictionary()
_lock = threading.Lock()


def _mk(op: str, args: tuple, sort: Sort, payload=None) -> Term:
    key = (op, payload, sort, args)
    with _lock:
        t = _table.get(key)
        if t is None:
            t = object.__new__(Term)
            t.op, t.args, t.sort, t.payload = op, args, sort, payload
            _table[key] = t
        return t


def _rebuild(op, args, sort, payload):
    return _mk(op, args, sort, payload)


# -- constructors -----------------------------------------------------------


def Const(value, sort: Sort) -> Term:
    if sort.is_bool:
        if not isinstance(value, bool):
            raise SortError(f"Bool constant must be True/False, got {value!r}")
    else:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SortError(f"bit-vector constant must be an int, got {value!r}")
        if not 0 <= value < (1 << sort.width):
            raise SortError(f"constant {value} does not fit in {sort.width} bits")
    return _mk("const", (), sort, value)


def BvConst(value: int, width: int) -> Term:
    return Const(value, BV(width))


TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)


def Var(name: str, sort: Sort) -> Term:
    if not isinstance(name, str) or not name:
        raise SortError(f"bad variable name {name!r}")
    return _mk("var", (), sort, name)


def _need_bool(t: Term, what: str):
    if not t.sort.is_bool:
        raise SortError(f"{what} expects Bool, got {t.sort}")


def _need_bv_pair(a: Term, b: Term, what: str):
    if not (a.sort.is_bv and b.sort.is_bv):
        raise SortError(f"{what} expects bit-vectors, got {a.sort} and {b.sort}")
    if a.sort.width != b.sort.width:
        raise SortError(f"{what} width mismatch: {a.sort.width} vs {b.sort.width}")


def Ite(c: Term, a: Term, b: Term) -> Term:
    _need_bool(c, "ite condition")
    if a.sort != b.sort:
        raise SortError(f"ite branches differ: {a.sort} vs {b.sort}")
    return _mk("ite", (c, a, b), a.sort)


def And(*args: Term) -> Term:
    if len(args) == 1 and not isinstance(args[0], Term):
        args = tuple(args[0])
    for a in args:
        _need_bool(a, "and")
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return _mk("and", tuple(args), BOOL)


def Or(*args: Term) -> Term:
    if len(args) == 1 and not isinstance(args[0], Term):
        args = tuple(args[0])
    for a in args:
        _need_bool(a, "or")
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return _mk("or", tuple(args), BOOL)


def Not(a: Term) -> Term:
    _need_bool(a, "not")
    return _mk("not", (a,), BOOL)


def Implies(a: Term, b: Term) -> Term:
    _need_bool(a, "=>")
    _need_bool(b, "=>")
    return _mk("=>", (a, b), BOOL)


def Eq(a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        raise SortError(f"= operands differ: {a.sort} vs {b.sort}")
    return _mk("=", (a, b), BOOL)


def _bv_binop(op):
    def build(a: Term, b: Term) -> Term:
        _need_bv_pair(a, b, op)
        return _mk(op, (a, b), a.sort)

    build.__name__ = op
    return build


def _bv_cmp(op):
    def build(a: Term, b: Term) -> Term:
        _need_bv_pair(a, b, op)
        return _mk(op, (a, b), BOOL)

    build.__name__ = op
    return build


BvAdd = _bv_binop("bvadd")
BvSub = _bv_binop("bvsub")
BvMul = _bv_binop("bvmul")
BvUlt = _bv_cmp("bvult")
BvUle = _bv_cmp("bvule")


def Concat(a: Term, b: Term) -> Term:
    if not (a.sort.is_bv and b.sort.is_bv):
        raise SortError("concat expects bit-vectors")
    return _mk("concat", (a, b), BV(a.sort.width + b.sort.width))


def Extract(t: Term, hi: int, lo: int) -> Term:
    if not t.sort.is_bv:
        raise SortError("extract expects a bit-vector")
    if not (t.sort.width > hi >= lo >= 0):
        raise SortError(f"extract [{hi}:{lo}] out of range for width {t.sort.width}")
    return _mk("extract", (t,), BV(hi - lo + 1), (hi, lo))


# -- derived helpers ----------------------------------------------------------


def zext(t: Term, extra: int) -> Term:
    if extra == 0:
        return t
    return Concat(BvConst(0, extra), t)


def resize(t: Term, width: int) -> Term:
    """Zero-extend or truncate ``t`` to ``width`` bits."""
    w = t.sort.width
    if width == w:
        return t
    if width > w:
        return zext(t, width - w)
    return Extract(t, width - 1, 0)


def bv_sum(terms: Iterable[Term], width: int | None = None) -> Term:
    """Sum of bit-vectors, zero-extended so the result cannot wrap."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty sum")
    if width is None:
        width = max(t.sort.width for t in terms) + max(0, (len(terms) - 1).bit_length())
    acc = resize(terms[0], width)
    for t in terms[1:]:
        acc = BvAdd(acc, resize(t, width))
    return acc


def conjuncts(t: Term) -> list[Term]:
    """Top-level conjuncts of ``t`` (flattening nested ands)."""
    out = []
    stack = [t]
    while stack:
        x = stack.pop()
        if x.op == "and":
            stack.extend(reversed(x.args))
        elif x is TRUE:
            continue
        else:
            out.append(x)
    return out


def iter_dag(t: Term):
    """Yield every distinct node of ``t`` in post-order."""
    seen = set()
    stack = [(t, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))


def free_vars(t: Term) -> set[Term]:
    return {n for n in iter_dag(t) if n.op == "var"}


def is_well_sorted(t: Term) -> bool:
    """Re-run every constructor check over ``t``."""
    rebuilt = {}
    try:
        for n in iter_dag(t):
            args = tuple(rebuilt[id(a)] for a in n.args)
            rebuilt[id(n)] = _rebuild_checked(n, args)
    except SortError:
        return False
    return rebuilt[id(t)] is t


def _rebuild_checked(n: Term, args: tuple) -> Term:
    op = n.op
    if op == "var":
        return Var(n.payload, n.sort)
    if op == "const":
        return Const(n.payload, n.sort)
    if op == "extract":
        return Extract(args[0], *n.payload)
    return _BUILDERS[op](*args)


_BUILDERS = {
    "ite": Ite,
    "and": And,
    "or": Or,
    "not": Not,
    "=>": Implies,
    "=": Eq,
    "bvadd": BvAdd,
    "bvsub": BvSub,
    "bvmul": BvMul,
    "bvult": BvUlt,
    "bvule": BvUle,
    "concat": Concat,
}


def substitute(t: Term, m: Mapping[Term, Term]) -> Term:
    """Simultaneous substitution of variables by terms."""
    for v, r in m.items():
        if not v.is_var:
            raise SortError(f"substitution key {v!r} is not a variable")
        if v.sort != r.sort:
            raise SortError(f"substituting {v.name}: sort {v.sort} replaced by {r.sort}")
    if not m:
        return t
    done: dict[int, Term] = {}
    for n in iter_dag(t):
        if n.op == "var":
            done[id(n)] = m.get(n, n)
        elif not n.args:
            done[id(n)] = n
        else:
            args = tuple(done[id(a)] for a in n.args)
            if all(x is y for x, y in zip(args, n.args)):
                done[id(n)] = n
            elif n.op == "extract":
                done[id(n)] = Extract(args[0], *n.payload)
            else:
                done[id(n)] = _BUILDERS[n.op](*args)
    return done[id(t)]


# -- timing and priming ---------------------------------------------------------


def check_base_name(name: str):
    if TIME_SEP in name or PRIME in name:
        raise SortError(f"variable name {name!r} may not contain '@' or \"'\"")


def timed(v: Term, i: int) -> Term:
    if i < 0:
        raise ValueError("step index must be >= 0")
    return Var(f"{v.name}{TIME_SEP}{i}", v.sort)


def untimed(name: str) -> tuple[str, int | None]:
    """Split ``"x@3"`` into ``("x", 3)``; untimed names give ``(name, None)``."""
    base, sep, step = name.rpartition(TIME_SEP)
    if sep and step.isdigit() and base:
        return base, int(step)
    return name, None


def prime(v: Term) -> Term:
    return Var(v.name + PRIME, v.sort)


def unprime(v: Term) -> Term | None:
    if v.is_var and v.name.endswith(PRIME):
        return Var(v.name[: -len(PRIME)], v.sort)
    return None


# -- concrete evaluation --------------------------------------------------------


def _mask(w):
    return (1 << w) - 1


def _apply(n: Term, vals: list):
    op = n.op
    if op == "ite":
        return vals[1] if vals[0] else vals[2]
    if op == "and":
        return all(vals)
    if op == "or":
        return any(vals)
    if op == "not":
        return not vals[0]
    if op == "=>":
        return (not vals[0]) or vals[1]
    if op == "=":
        return vals[0] == vals[1]
    if op == "bvadd":
        return (vals[0] + vals[1]) & _mask(n.sort.width)
    if op == "bvsub":
        return (vals[0] - vals[1]) & _mask(n.sort.width)
    if op == "bvmul":
        return (vals[0] * vals[1]) & _mask(n.sort.width)
    if op == "bvult":
        return vals[0] < vals[1]
    if op == "bvule":
        return vals[0] <= vals[1]
    if op == "concat":
        return (vals[0] << n.args[1].sort.width) | vals[1]
    if op == "extract":
        hi, lo = n.payload
        return (vals[0] >> lo) & _mask(hi - lo + 1)
    raise EvaluationError(f"cannot evaluate operator {op}")


def evaluate_many(terms: Iterable[Term], a: Mapping[Term, object]) -> list:
    """Evaluate several terms under one assignment, sharing work across them."""
    cache: dict[int, object] = {}
    out = []
    for t in terms:
        for n in iter_dag(t):
            if id(n) in cache:
                continue
            if n.op == "var":
                try:
                    cache[id(n)] = a[n]
                except KeyError:
                    raise EvaluationError(f"unbound variable {n.name}") from None
            elif n.op == "const":
                cache[id(n)] = n.payload
            else:
                cache[id(n)] = _apply(n, [cache[id(x)] for x in n.args])
        out.append(cache[id(t)])
    return out


def evaluate(t: Term, a: Mapping[Term, object]):
    return evaluate_many([t], a)[0]


def coerce_value(v, sort: Sort):
    """Normalise a user-supplied value for ``sort`` (raises on misfit)."""
    if sort.is_bool:
        if isinstance(v, bool):
            return v
        if v in (0, 1):
            return bool(v)
        raise SortError(f"value {v!r} is not Boolean")
    if isinstance(v, bool) or not isinstance(v, int):
        raise SortError(f"value {v!r} is not an integer")
    if not 0 <= v < (1 << sort.width):
        raise SortError(f"value {v} does not fit in {sort.width} bits")
    return v


def value_const(v, sort: Sort) -> Term:
    return Const(coerce_value(v, sort), sort)


# -- transition systems ---------------------------------------------------------


@dataclass(frozen=True)
class TransitionSystem:
    vars: tuple[Term, ...]
    init: Term
    trans: Term
    roles: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        names = {}
        for v in self.vars:
            if not v.is_var:
                raise SortError(f"{v!r} is not a variable")
            check_base_name(v.name)
            if v.name in names:
                raise SortError(f"duplicate variable {v.name}")
            names[v.name] = v
        object.__setattr__(self, "vars", tuple(sorted(self.vars, key=lambda v: v.name)))
        roles = {}
        for name, rs in self.roles.items():
            if name not in names:
                raise SortError(f"role given for undeclared variable {name!r}")
            rs = frozenset(rs)
            bad = rs - ROLES
            if bad:
                raise SortError(f"unknown roles {sorted(bad)} for {name}")
            roles[name] = rs
        object.__setattr__(self, "roles", roles)
        if not self.init.sort.is_bool or not self.trans.sort.is_bool:
            raise SortError("init and trans must be Bool")
        vset = set(self.vars)
        primed = {prime(v) for v in self.vars}
        for fv in free_vars(self.init):
            if fv not in vset:
                raise SortError(f"init mentions undeclared variable {fv.name}")
        for fv in free_vars(self.trans):
            if fv not in vset and fv not in primed:
                raise SortError(f"trans mentions undeclared variable {fv.name}")
        ins = set(self.inputs)
        for fv in free_vars(self.init):
            if fv in ins:
                raise SortError(
                    f"input variable {fv.name} appears in init; inputs may not be "
                    "constrained by the initial-state formula"
                )
        for fv in free_vars(self.trans):
            base = unprime(fv)
            if base is not None and base in ins and fv not in vset:
                raise SortError(f"primed input {fv.name} appears in trans")
        if not self.configs:
            raise SortError("a configurable system needs at least one config variable")

    def var(self, name: str) -> Term:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def var_map(self) -> dict[str, Term]:
        return {v.name: v for v in self.vars}

    def with_role(self, role: str) -> tuple[Term, ...]:
        return tuple(v for v in self.vars if role in self.roles.get(v.name, ()))

    @property
    def inputs(self):
        return self.with_role("input")

    @property
    def outputs(self):
        return self.with_role("output")

    @property
    def configs(self):
        return self.with_role("config")

    def prime(self, v: Term) -> Term:
        return prime(v)


def next_functions(ts: TransitionSystem) -> dict[Term, Term]:
    """Read ``v' = f(V)`` equations out of a functional transition relation."""
    vset = set(ts.vars)
    primed = {prime(v): v for v in ts.vars}
    nexts: dict[Term, Term] = {}
    for c in conjuncts(ts.trans):
        if c.op != "=":
            raise SimulationError(f"transition conjunct is not an equation: {c!r}")
        lhs, rhs = c.args
        if lhs not in primed and rhs in primed:
            lhs, rhs = rhs, lhs
        if lhs not in primed:
            raise SimulationError(f"equation has no primed left side: {c!r}")
        if any(fv not in vset for fv in free_vars(rhs)):
            raise SimulationError(f"right side of {lhs.name} mentions primed variables")
        v = primed[lhs]
        if v in nexts:
            raise SimulationError(f"{lhs.name} is defined twice")
        nexts[v] = rhs
    ins, confs = set(ts.inputs), set(ts.configs)
    for v in ts.vars:
        if v not in nexts and v not in ins and v not in confs:
            raise SimulationError(f"state variable {v.name} has no next-state equation")
    return nexts


def simulate(
    ts: TransitionSystem,
    init_state: Mapping[Term, object],
    inputs: list[Mapping[Term, object]],
    config: Mapping[Term, object],
) -> list[dict[Term, object]]:
    """Replay ``ts`` concretely; returns states ``s_0 .. s_k`` with ``k = len(inputs)``.

    Config values are held fixed.  Inputs of the final state are left unset.
    """
    nexts = next_functions(ts)
    ins, confs = set(ts.inputs), set(ts.configs)
    state = {}
    for v, x in config.items():
        state[v] = coerce_value(x, v.sort)
    for v, x in init_state.items():
        if v in confs:
            continue
        state[v] = coerce_value(x, v.sort)
    if inputs:
        for v, x in inputs[0].items():
            state[v] = coerce_value(x, v.sort)
    missing = [v.name for v in ts.vars if v not in state and not (v in ins and not inputs)]
    if missing:
        raise SimulationError(f"initial state lacks values for {missing}")
    if not evaluate(ts.init, state):
        raise SimulationError("initial state violates init")

    order = [v for v in ts.vars if v in nexts]
    rhs = [nexts[v] for v in order]
    trace = [dict(state)]
    for i in range(len(inputs)):
        vals = evaluate_many(rhs, state)
        nxt = {v: state[v] for v in confs}
        nxt.update(zip(order, vals))
        if i + 1 < len(inputs):
            for v, x in inputs[i + 1].items():
                nxt[v] = coerce_value(x, v.sort)
        env = dict(state)
        env.update({prime(v): x for v, x in nxt.items()})
        if not evaluate(ts.trans, env):
            raise SimulationError(f"transition {i} -> {i + 1} violates trans")
        state = nxt
        trace.append(dict(state))
    return trace


def init_assignment(ts: TransitionSystem) -> dict[Term, object]:
    """Values fixed by ``v = const`` conjuncts of init (non-config variables)."""
    out = {}
    confs = set(ts.configs)
    for c in conjuncts(ts.init):
        if c.op == "=":
            a, b = c.args
            if b.is_var and a.is_const:
                a, b = b, a
            if a.is_var and b.is_const and a not in confs:
                out[a] = b.payload
    return out
