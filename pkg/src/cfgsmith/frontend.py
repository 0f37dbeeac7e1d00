"""Readers and writers for system models, role maps and example traces.

Native STS documents look like::

    ; simple ALU
    sorts
      word (_ BitVec 8)
    vars
      x   : word : state output
      a   : word : input
      cfg : Bool : config
    init (= x #x00)
    trans (= x' (ite cfg (bvadd x a) (bvsub x a)))

Formulas are SMT-LIB terms; a trailing apostrophe names the next-state copy
of a declared variable.  ``init``/``trans`` may repeat and may span lines;
all their terms are conjoined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from cfgsmith import sexpr
from cfgsmith.sexpr import Literal, ParseError, Symbol
from cfgsmith.smt import term_to_smt2
from cfgsmith.terms import (
    BOOL,
    BV,
    FALSE,
    PRIME,
    TRUE,
    And,
    BvAdd,
    BvConst,
    BvMul,
    BvSub,
    BvUle,
    BvUlt,
    Concat,
    Eq,
    Extract,
    Implies,
    Ite,
    Not,
    Or,
    Sort,
    SortError,
    Term,
    TransitionSystem,
    Var,
    coerce_value,
    conjuncts,
    untimed,
)


class RoleError(ValueError):
    pass


class TraceError(ValueError):
    pass


class Btor2Error(ValueError):
    pass


SECTIONS = ("sorts", "vars", "init", "trans")


# -- SMT-LIB terms ------------------------------------------------------------


def parse_sort(node, sort_table: Mapping[str, Sort] | None = None) -> Sort:
    if isinstance(node, Symbol):
        if node.name == "Bool":
            return BOOL
        if sort_table and node.name in sort_table:
            return sort_table[node.name]
        raise ParseError(f"unknown sort {node.name}", node.line, node.col)
    if isinstance(node, list) and len(node) == 3 and str(node[0]) == "_" and str(node[1]) == "BitVec":
        try:
            return BV(int(str(node[2])))
        except (ValueError, SortError) as e:
            raise ParseError(f"bad bit-vector sort: {e}", node.line, node.col) from None
    where = getattr(node, "line", None), getattr(node, "col", None)
    raise ParseError(f"cannot parse sort {node!r}", *where)


def _pos(node):
    return getattr(node, "line", None), getattr(node, "col", None)


def parse_term(node, env: Mapping[str, Term]) -> Term:
    """Build a term from an s-expression; ``env`` maps symbol names to variables."""
    try:
        return _term(node, dict(env))
    except SortError as e:
        raise ParseError(f"sort error: {e}", *_pos(node)) from None


def _literal(node: Literal) -> Term:
    s = node.text
    if s.startswith("#b"):
        return BvConst(int(s[2:], 2), len(s) - 2)
    if s.startswith("#x"):
        return BvConst(int(s[2:], 16), 4 * (len(s) - 2))
    raise ParseError(f"bare numeral {s} has no sort; use #b, #x or (_ bvN w)", node.line, node.col)


_BINOPS = {
    "bvadd": BvAdd,
    "bvsub": BvSub,
    "bvmul": BvMul,
    "bvult": BvUlt,
    "bvule": BvUle,
    "bvugt": lambda a, b: BvUlt(b, a),
    "bvuge": lambda a, b: BvUle(b, a),
    "concat": Concat,
}


def _term(node, env) -> Term:
    if isinstance(node, Symbol):
        if not node.quoted and node.name in ("true", "false"):
            return TRUE if node.name == "true" else FALSE
        if node.name in env:
            return env[node.name]
        raise ParseError(f"unknown symbol {node.name}", node.line, node.col)
    if isinstance(node, Literal):
        return _literal(node)
    if not isinstance(node, list) or not node:
        raise ParseError(f"cannot parse term {node!r}", *_pos(node))
    head = node[0]
    if isinstance(head, list):
        # indexed operators: ((_ extract hi lo) t), ((_ zero_extend n) t)
        if len(head) >= 2 and str(head[0]) == "_":
            name = str(head[1])
            idx = [int(str(x)) for x in head[2:]]
            args = [_term(a, env) for a in node[1:]]
            if name == "extract" and len(idx) == 2 and len(args) == 1:
                return Extract(args[0], idx[0], idx[1])
            if name == "zero_extend" and len(idx) == 1 and len(args) == 1:
                return Concat(BvConst(0, idx[0]), args[0]) if idx[0] else args[0]
        raise ParseError("unsupported indexed operator", *_pos(node))
    op = str(head)
    if op == "_" and len(node) == 3 and str(node[1]).startswith("bv"):
        return BvConst(int(str(node[1])[2:]), int(str(node[2])))
    if op == "let":
        if len(node) != 3 or not isinstance(node[1], list):
            raise ParseError("malformed let", *_pos(node))
        inner = dict(env)
        for b in node[1]:
            if not isinstance(b, list) or len(b) != 2 or not isinstance(b[0], Symbol):
                raise ParseError("malformed let binding", *_pos(b))
            inner[b[0].name] = _term(b[1], env)
        return _term(node[2], inner)
    args = [_term(a, env) for a in node[1:]]
    if op == "and":
        return And(args)
    if op == "or":
        return Or(args)
    if op == "not" and len(args) == 1:
        return Not(args[0])
    if op == "=>" and len(args) >= 2:
        out = args[-1]
        for a in reversed(args[:-1]):
            out = Implies(a, out)
        return out
    if op == "=" and len(args) >= 2:
        return And([Eq(args[i], args[i + 1]) for i in range(len(args) - 1)])
    if op == "distinct" and len(args) == 2:
        return Not(Eq(args[0], args[1]))
    if op == "xor" and len(args) == 2:
        return Not(Eq(args[0], args[1]))
    if op == "ite" and len(args) == 3:
        return Ite(*args)
    if op in _BINOPS and len(args) == 2:
        return _BINOPS[op](*args)
    if op in ("bvadd", "bvmul", "concat") and len(args) > 2:
        out = args[0]
        for a in args[1:]:
            out = _BINOPS[op](out, a)
        return out
    raise ParseError(f"unsupported operator {op}/{len(args)}", *_pos(node))


def parse_formula(text: str, env: Mapping[str, Term], line0: int = 1) -> Term:
    items = sexpr.parse_all(text, line0)
    terms = [parse_term(it, env) for it in items]
    for it, t in zip(items, terms):
        if not t.sort.is_bool:
            raise ParseError("formula is not Boolean", *_pos(it))
    return And(terms)


# -- native STS documents -------------------------------------------------------


def _split_sections(text: str):
    """Yield (keyword, body, body_first_line) for each section."""
    current = None
    body: list[str] = []
    start = 1
    for no, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split(";", 1)[0].rstrip()
        word = stripped.split(None, 1)[0] if stripped.strip() else ""
        if stripped and not raw[0].isspace() and word in SECTIONS:
            if current is not None:
                yield current, body, start
            current = word
            body = [" " * len(word) + stripped[len(word):]]
            start = no
        elif current is None:
            if stripped.strip():
                raise ParseError(f"expected a section keyword {SECTIONS}", no, 1)
        else:
            body.append(raw)
    if current is not None:
        yield current, body, start


def parse_sts(text: str) -> TransitionSystem:
    sort_table: dict[str, Sort] = {}
    decls: list[tuple[str, Sort, frozenset, int]] = []
    init_parts: list[tuple[str, int]] = []
    trans_parts: list[tuple[str, int]] = []
    for kw, body, line0 in _split_sections(text):
        if kw == "sorts":
            for off, raw in enumerate(body):
                line = raw.split(";", 1)[0].strip()
                if not line:
                    continue
                name, _, rest = line.partition(" ")
                sort_table[name] = parse_sort(sexpr.parse_one(rest, line0 + off), sort_table)
        elif kw == "vars":
            for off, raw in enumerate(body):
                line = raw.split(";", 1)[0].strip()
                if not line:
                    continue
                fields = [f.strip() for f in line.split(":")]
                if len(fields) not in (2, 3) or not fields[0]:
                    raise ParseError("variable line must be 'name : sort : roles'", line0 + off, 1)
                sort = parse_sort(sexpr.parse_one(fields[1], line0 + off), sort_table)
                roles = frozenset(fields[2].split()) if len(fields) == 3 else frozenset({"state"})
                decls.append((fields[0], sort, roles, line0 + off))
        elif kw == "init":
            init_parts.append(("\n".join(body), line0))
        else:
            trans_parts.append(("\n".join(body), line0))

    env: dict[str, Term] = {}
    roles: dict[str, frozenset] = {}
    for name, sort, rs, line in decls:
        if name in env:
            raise ParseError(f"duplicate variable {name}", line, 1)
        if "@" in name or PRIME in name:
            raise ParseError(f"variable name {name!r} may not contain '@' or \"'\"", line, 1)
        bad = rs - {"input", "output", "config", "state"}
        if bad:
            raise RoleError(f"line {line}: unknown roles {sorted(bad)} for {name}")
        env[name] = Var(name, sort)
        roles[name] = rs
    if not any("config" in rs for rs in roles.values()):
        raise RoleError("no configuration variable declared (V_conf must be nonempty)")

    init = And([parse_formula(t, env, l) for t, l in init_parts])
    tenv = dict(env)
    tenv.update({n + PRIME: Var(n + PRIME, v.sort) for n, v in env.items()})
    trans = And([parse_formula(t, tenv, l) for t, l in trans_parts])
    try:
        return TransitionSystem(tuple(env.values()), init, trans, roles)
    except SortError as e:
        msg = str(e)
        if "input variable" in msg:
            raise RoleError(msg) from None
        raise


def print_sts(ts: TransitionSystem, comment: str | None = None) -> str:
    out = []
    if comment:
        out += [f"; {line}" for line in comment.splitlines()]
    widths = sorted({v.sort.width for v in ts.vars if v.sort.is_bv})
    if widths:
        out.append("sorts")
        out += [f"  bv{w} (_ BitVec {w})" for w in widths]
    out.append("vars")
    for v in ts.vars:
        sname = "Bool" if v.sort.is_bool else f"bv{v.sort.width}"
        roles = " ".join(sorted(ts.roles.get(v.name, ()))) or "state"
        out.append(f"  {v.name} : {sname} : {roles}")
    for c in conjuncts(ts.init):
        out.append(f"init {term_to_smt2(c)}")
    for c in conjuncts(ts.trans):
        out.append(f"trans {term_to_smt2(c)}")
    return "\n".join(out) + "\n"


def parse_roles(text: str) -> dict[str, frozenset]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise RoleError(f"role map is not JSON: {e}") from None
    if not isinstance(raw, dict):
        raise RoleError("role map must be an object {name: [roles]}")
    out = {}
    for name, rs in raw.items():
        if isinstance(rs, str):
            rs = [rs]
        rs = frozenset(rs)
        bad = rs - {"input", "output", "config", "state"}
        if bad:
            raise RoleError(f"unknown roles {sorted(bad)} for {name}")
        out[name] = rs
    if not any("config" in rs for rs in out.values()):
        raise RoleError("role map names no configuration variable")
    return out


# -- traces -----------------------------------------------------------------------


@dataclass
class Trace:
    """Per-step example values; ``None`` marks a don't-care entry."""

    inputs: list[dict[str, object]] = field(default_factory=list)
    outputs: list[dict[str, object]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.inputs)

    def __post_init__(self):
        if len(self.outputs) != len(self.inputs) + 1:
            raise TraceError(
                f"trace has {len(self.inputs)} input steps but {len(self.outputs)} output "
                f"steps; expected {len(self.inputs) + 1}"
            )

    def names(self) -> tuple[set[str], set[str]]:
        ins = {n for step in self.inputs for n in step}
        outs = {n for step in self.outputs for n in step}
        return ins, outs

    def to_json(self) -> str:
        def norm(steps):
            return [{n: step[n] for n in sorted(step)} for step in steps]

        return json.dumps({"inputs": norm(self.inputs), "outputs": norm(self.outputs)}, indent=1) + "\n"


def _steps(raw, what):
    if isinstance(raw, list):
        return raw
    if isinstance(raw, dict):
        try:
            idx = sorted(int(i) for i in raw)
        except ValueError:
            raise TraceError(f"{what} step keys must be integers") from None
        for expect, got in enumerate(idx):
            if expect != got:
                raise TraceError(f"{what}: step index gap, step {expect} missing")
        return [raw[str(i)] if str(i) in raw else raw[i] for i in idx]
    raise TraceError(f"{what} must be a list or an object keyed by step")


def parse_trace(text: str, system: TransitionSystem | None = None) -> Trace:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise TraceError(f"trace is not JSON: {e}") from None
    if not isinstance(raw, dict) or "inputs" not in raw or "outputs" not in raw:
        raise TraceError("trace must be an object with 'inputs' and 'outputs'")
    ins = [dict(s) for s in _steps(raw["inputs"], "inputs")]
    outs = [dict(s) for s in _steps(raw["outputs"], "outputs")]
    tr = Trace(ins, outs)
    if system is not None:
        validate_trace(tr, system)
    return tr


def validate_trace(tr: Trace, system: TransitionSystem) -> Trace:
    """Check names, roles and value ranges against ``system``; normalises Bool values."""
    vm = system.var_map
    for kind, steps, role in (("input", tr.inputs, "input"), ("output", tr.outputs, "output")):
        for i, step in enumerate(steps):
            for name, val in step.items():
                if name not in vm:
                    raise TraceError(f"{kind} step {i}: unknown variable {name}")
                if role not in system.roles.get(name, ()):
                    raise TraceError(f"{kind} step {i}: {name} does not have role {role}")
                if val is None:
                    continue
                try:
                    step[name] = coerce_value(val, vm[name].sort)
                except SortError as e:
                    raise TraceError(f"{kind} step {i}: {name}: {e}") from None
    return tr


# -- Btor2 --------------------------------------------------------------------------


BTOR2_KEYWORDS = {
    "sort", "input", "state", "output", "const", "constd", "consth", "zero", "one",
    "init", "next", "add", "sub", "mul", "eq", "ne", "ite", "and", "or", "not",
    "implies", "ult", "ulte", "concat", "slice", "uext",
}


def _as_bool(t: Term) -> Term:
    if t.sort.is_bool:
        return t
    if t.sort.width != 1:
        raise Btor2Error(f"expected a 1-bit value, got width {t.sort.width}")
    return Eq(t, BvConst(1, 1))


def _as_bv(t: Term) -> Term:
    if t.sort.is_bv:
        return t
    return Ite(t, BvConst(1, 1), BvConst(0, 1))


def _bitwise(op, a: Term, b: Term | None = None) -> Term:
    if a.sort.is_bool or a.sort.width == 1 and (b is None or b.sort.is_bool or b.sort.width == 1):
        x = _as_bool(a)
        if op == "not":
            return Not(x)
        y = _as_bool(b)
        return {"and": And, "or": Or, "implies": Implies}[op](x, y)
    # wide operands: bit-blast through extract/concat
    if b is not None and b.sort != a.sort:
        raise Btor2Error(f"{op}: width mismatch")
    bits = []
    for i in reversed(range(a.sort.width)):
        x = Eq(Extract(a, i, i), BvConst(1, 1))
        if op == "not":
            r = Not(x)
        else:
            y = Eq(Extract(b, i, i), BvConst(1, 1))
            r = {"and": And, "or": Or, "implies": Implies}[op](x, y)
        bits.append(Ite(r, BvConst(1, 1), BvConst(0, 1)))
    out = bits[0]
    for bit in bits[1:]:
        out = Concat(out, bit)
    return out


def parse_btor2(text: str, roles: Mapping[str, frozenset]) -> TransitionSystem:
    """Read the supported Btor2 subset; ``roles`` supplies input/output/config roles."""
    sorts: dict[int, int] = {}
    nodes: dict[int, Term] = {}
    states: dict[int, Term] = {}
    var_order: list[Term] = []
    declared_outputs: list[tuple[str, int]] = []
    init_c: list[Term] = []
    next_c: list[Term] = []

    def node(ref: str, lineno: int) -> Term:
        try:
            i = int(ref)
        except ValueError:
            raise Btor2Error(f"line {lineno}: bad node reference {ref!r}") from None
        neg = i < 0
        t = nodes.get(abs(i))
        if t is None:
            raise Btor2Error(f"line {lineno}: dangling node id {abs(i)}")
        return _bitwise("not", t) if neg else t

    def sort_of(ref: str, lineno: int) -> int:
        sid = int(ref)
        if sid not in sorts:
            raise Btor2Error(f"line {lineno}: unknown sort id {sid}")
        return sorts[sid]

    def fit(t: Term, width: int, lineno: int) -> Term:
        w = 1 if t.sort.is_bool else t.sort.width
        if w != width:
            raise Btor2Error(f"line {lineno}: width mismatch, expected {width}, got {w}")
        return t

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            nid = int(tok[0])
        except ValueError:
            raise Btor2Error(f"line {lineno}: expected a node id") from None
        if len(tok) < 2:
            raise Btor2Error(f"line {lineno}: missing keyword")
        kw, args = tok[1], tok[2:]
        if kw not in BTOR2_KEYWORDS:
            raise Btor2Error(f"line {lineno}: unsupported keyword {kw!r}")
        try:
            if kw == "sort":
                if args[0] != "bitvec":
                    raise Btor2Error(f"line {lineno}: only bitvec sorts are supported")
                sorts[nid] = int(args[1])
                continue
            if kw in ("input", "state"):
                w = sort_of(args[0], lineno)
                name = args[1] if len(args) > 1 else f"{kw}{nid}"
                v = Var(name, BV(w))
                nodes[nid] = v
                var_order.append(v)
                if kw == "state":
                    states[nid] = v
                continue
            if kw == "output":
                t = node(args[0], lineno)
                if not t.is_var:
                    raise Btor2Error(f"line {lineno}: outputs must name an input or state")
                declared_outputs.append((t.name, lineno))
                continue
            if kw in ("init", "next"):
                w = sort_of(args[0], lineno)
                sid = int(args[1])
                if sid not in states:
                    raise Btor2Error(f"line {lineno}: {kw} refers to undeclared state id {sid}")
                s = states[sid]
                val = _as_bv(fit(node(args[2], lineno), w, lineno))
                if val.sort != s.sort:
                    raise Btor2Error(f"line {lineno}: width mismatch in {kw}")
                if kw == "init":
                    init_c.append(Eq(s, val))
                else:
                    next_c.append(Eq(Var(s.name + PRIME, s.sort), val))
                continue
            w = sort_of(args[0], lineno)
            if kw == "const":
                nodes[nid] = BvConst(int(args[1], 2), w)
            elif kw == "constd":
                nodes[nid] = BvConst(int(args[1]) % (1 << w), w)
            elif kw == "consth":
                nodes[nid] = BvConst(int(args[1], 16), w)
            elif kw == "zero":
                nodes[nid] = BvConst(0, w)
            elif kw == "one":
                nodes[nid] = BvConst(1, w)
            elif kw in ("add", "sub", "mul"):
                a, b = (_as_bv(node(x, lineno)) for x in args[1:3])
                nodes[nid] = {"add": BvAdd, "sub": BvSub, "mul": BvMul}[kw](a, b)
            elif kw in ("eq", "ne"):
                a, b = (_as_bv(node(x, lineno)) for x in args[1:3])
                r = Eq(a, b)
                nodes[nid] = r if kw == "eq" else Not(r)
            elif kw in ("ult", "ulte"):
                a, b = (_as_bv(node(x, lineno)) for x in args[1:3])
                nodes[nid] = (BvUlt if kw == "ult" else BvUle)(a, b)
            elif kw == "ite":
                c = _as_bool(node(args[1], lineno))
                a, b = (node(x, lineno) for x in args[2:4])
                if a.sort != b.sort:
                    a, b = _as_bv(a), _as_bv(b)
                nodes[nid] = Ite(c, a, b)
            elif kw in ("and", "or", "implies"):
                a, b = (node(x, lineno) for x in args[1:3])
                nodes[nid] = _bitwise(kw, a, b)
            elif kw == "not":
                nodes[nid] = _bitwise("not", node(args[1], lineno))
            elif kw == "concat":
                a, b = (_as_bv(node(x, lineno)) for x in args[1:3])
                nodes[nid] = Concat(a, b)
            elif kw == "slice":
                a = _as_bv(node(args[1], lineno))
                nodes[nid] = Extract(a, int(args[2]), int(args[3]))
            elif kw == "uext":
                a = _as_bv(node(args[1], lineno))
                n = int(args[2])
                nodes[nid] = Concat(BvConst(0, n), a) if n else a
            t = nodes[nid]
            got = 1 if t.sort.is_bool else t.sort.width
            if got != w:
                raise Btor2Error(f"line {lineno}: width mismatch, sort says {w}, result has {got}")
        except (IndexError, ValueError) as e:
            if isinstance(e, Btor2Error):
                raise
            raise Btor2Error(f"line {lineno}: malformed {kw} line: {e}") from None

    names = {v.name for v in var_order}
    for name in roles:
        if name not in names:
            raise RoleError(f"role map names unknown variable {name}")
    full_roles = {}
    for v in var_order:
        default = {"input"} if v not in states.values() else {"state"}
        full_roles[v.name] = frozenset(roles.get(v.name, default))
    for name, lineno in declared_outputs:
        if "output" not in full_roles[name]:
            raise RoleError(f"line {lineno}: output {name} has no 'output' role in the role map")
    if not any("config" in rs for rs in full_roles.values()):
        raise RoleError("role map names no configuration variable")
    return TransitionSystem(tuple(var_order), And(init_c), And(next_c), full_roles)
