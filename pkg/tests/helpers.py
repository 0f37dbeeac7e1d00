"""Shared fixtures: the ALU example, random well-sorted terms and random
functional transition systems."""

from __future__ import annotations

import random
import shutil
from pathlib import Path

import pytest

from cfgsmith.frontend import Trace, parse_sts
from cfgsmith.terms import (
    BOOL,
    BV,
    And,
    BvAdd,
    BvConst,
    BvMul,
    BvSub,
    BvUle,
    BvUlt,
    Concat,
    Const,
    Eq,
    Extract,
    Ite,
    Not,
    Or,
    TransitionSystem,
    Var,
    init_assignment,
    prime,
    simulate,
)

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "demos" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"

needs_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 binary not on PATH")

ALU_TEXT = (DATA / "alu.sts").read_text()


def alu() -> TransitionSystem:
    return parse_sts(ALU_TEXT)


def alu_trace(last: int) -> Trace:
    """a = 1 twice; x = 0, 1, ``last``."""
    return Trace([{"a": 1}, {"a": 1}], [{"x": 0}, {"x": 1}, {"x": last}])


P1 = alu_trace(2)
P2 = alu_trace(0)


# -- random terms --------------------------------------------------------------------


def random_bv(rng: random.Random, width: int, pool: list, depth: int):
    """A random bit-vector term of ``width`` over the variables in ``pool``."""
    same = [v for v in pool if v.sort.is_bv and v.sort.width == width]
    if depth <= 0 or rng.random() < 0.25:
        if same and rng.random() < 0.7:
            return rng.choice(same)
        return BvConst(rng.randrange(1 << width), width)
    k = rng.randrange(7)
    if k == 0:
        return BvAdd(random_bv(rng, width, pool, depth - 1), random_bv(rng, width, pool, depth - 1))
    if k == 1:
        return BvSub(random_bv(rng, width, pool, depth - 1), random_bv(rng, width, pool, depth - 1))
    if k == 2:
        return BvMul(random_bv(rng, width, pool, depth - 1), random_bv(rng, width, pool, depth - 1))
    if k == 3:
        return Ite(random_bool(rng, pool, depth - 1),
                   random_bv(rng, width, pool, depth - 1), random_bv(rng, width, pool, depth - 1))
    if k == 4 and width >= 2:
        lo = rng.randrange(1, width)
        return Concat(random_bv(rng, width - lo, pool, depth - 1), random_bv(rng, lo, pool, depth - 1))
    if k == 5:
        wider = [v for v in pool if v.sort.is_bv and v.sort.width > width]
        if wider:
            v = rng.choice(wider)
            lo = rng.randrange(v.sort.width - width + 1)
            return Extract(v, lo + width - 1, lo)
    return random_bv(rng, width, pool, depth - 1)


def random_bool(rng: random.Random, pool: list, depth: int):
    bools = [v for v in pool if v.sort.is_bool]
    if depth <= 0 or rng.random() < 0.2:
        if bools and rng.random() < 0.6:
            return rng.choice(bools)
        bvs = [v for v in pool if v.sort.is_bv]
        if bvs:
            v = rng.choice(bvs)
            return Eq(v, BvConst(rng.randrange(1 << v.sort.width), v.sort.width))
        return Const(rng.random() < 0.5, BOOL)
    k = rng.randrange(6)
    if k == 0:
        return And(random_bool(rng, pool, depth - 1), random_bool(rng, pool, depth - 1))
    if k == 1:
        return Or(random_bool(rng, pool, depth - 1), random_bool(rng, pool, depth - 1))
    if k == 2:
        return Not(random_bool(rng, pool, depth - 1))
    w = rng.choice([v.sort.width for v in pool if v.sort.is_bv] or [4])
    a, b = random_bv(rng, w, pool, depth - 1), random_bv(rng, w, pool, depth - 1)
    return (Eq, BvUlt, BvUle)[k - 3](a, b)


def random_vars(rng: random.Random, n: int, max_width: int = 8, prefix: str = "v",
                bools: bool = True) -> list:
    out = []
    for i in range(n):
        if bools and rng.random() < 0.2:
            out.append(Var(f"{prefix}{i}", BOOL))
        else:
            out.append(Var(f"{prefix}{i}", BV(rng.randint(1, max_width))))
    return out


def random_value(rng: random.Random, v):
    return rng.random() < 0.5 if v.sort.is_bool else rng.randrange(1 << v.sort.width)


def random_term(rng: random.Random, sort, pool, depth: int = 3):
    return random_bool(rng, pool, depth) if sort.is_bool else random_bv(rng, sort.width, pool, depth)


# -- random functional systems ---------------------------------------------------------


def random_system(rng: random.Random, max_state: int = 6, max_width: int = 8,
                  depth: int = 3, bools: bool = True) -> TransitionSystem:
    """Functional STS: every state variable has one ``v' = f(V)`` equation.

    Some state variables are outputs; there is at least one config variable.
    """
    confs = random_vars(rng, rng.randint(1, 2), max_width, "c", bools)
    ins = random_vars(rng, rng.randint(0, 2), max_width, "i", bools)
    states = random_vars(rng, rng.randint(1, max_state), max_width, "s", bools)
    pool = confs + ins + states
    init = And([Eq(s, Const(random_value(rng, s), s.sort)) for s in states])
    trans = And([Eq(prime(s), random_term(rng, s.sort, pool, depth)) for s in states])
    roles = {v.name: {"config"} for v in confs}
    roles.update({v.name: {"input"} for v in ins})
    n_out = rng.randint(1, len(states))
    for j, s in enumerate(states):
        roles[s.name] = {"output"} if j < n_out else {"state"}
    return TransitionSystem(tuple(pool), init, trans, roles)


def random_run(rng: random.Random, ts: TransitionSystem, k: int):
    """Simulate with random config and inputs; returns (config, trace, states)."""
    config = {v: random_value(rng, v) for v in ts.configs}
    inputs = [{v: random_value(rng, v) for v in ts.inputs} for _ in range(k)]
    states = simulate(ts, init_assignment(ts), inputs, config)
    tr = Trace(
        [{v.name: step[v] for v in ts.inputs} for step in inputs],
        [{v.name: states[i][v] for v in ts.outputs} for i in range(k + 1)],
    )
    return config, tr, states


# -- Btor2 emission (test oracle only) -----------------------------------------------------

_BTOR_OPS = {"bvadd": "add", "bvsub": "sub", "bvmul": "mul", "=": "eq", "bvult": "ult",
             "bvule": "ulte", "and": "and", "or": "or", "not": "not", "ite": "ite", "concat": "concat"}


def to_btor2(ts: TransitionSystem) -> str:
    """Btor2 text for a bit-vector-only functional system (configs become next-less states)."""
    from cfgsmith.terms import conjuncts, iter_dag, unprime

    lines = []
    ids: dict = {}
    sorts: dict = {}

    def new(text):
        nid = len(lines) + 1
        lines.append(f"{nid} {text}")
        return nid

    def sort(w):
        if w not in sorts:
            sorts[w] = new(f"sort bitvec {w}")
        return sorts[w]

    def width(t):
        return 1 if t.sort.is_bool else t.sort.width

    def emit(t):
        for n in iter_dag(t):
            if n in ids:
                continue
            s = sort(width(n))
            if n.is_const:
                ids[n] = new(f"constd {s} {int(n.value)}")
            elif n.op == "extract":
                hi, lo = n.payload
                ids[n] = new(f"slice {s} {ids[n.args[0]]} {hi} {lo}")
            elif n.op in ("and", "or") and len(n.args) > 2:
                acc = ids[n.args[0]]
                for a in n.args[1:]:
                    acc = new(f"{n.op} {s} {acc} {ids[a]}")
                ids[n] = acc
            else:
                ids[n] = new(f"{_BTOR_OPS[n.op]} {s} " + " ".join(str(ids[a]) for a in n.args))
        return ids[t]

    for v in ts.vars:
        kind = "input" if v in ts.inputs else "state"
        ids[v] = new(f"{kind} {sort(v.sort.width)} {v.name}")
    for v in ts.outputs:
        new(f"output {ids[v]}")
    for c in conjuncts(ts.init):
        lhs, rhs = c.args
        new(f"init {sort(lhs.sort.width)} {ids[lhs]} {emit(rhs)}")
    for c in conjuncts(ts.trans):
        lhs, rhs = c.args
        v = unprime(lhs)
        new(f"next {sort(v.sort.width)} {ids[v]} {emit(rhs)}")
    return "\n".join(lines) + "\n"


# -- chained adders: y' = a + c1 feeding z' = y + c2 -------------------------------------------

ADDER1 = """\
vars
  a : (_ BitVec 8) : input
  y : (_ BitVec 8) : output
  c1 : (_ BitVec 8) : config
init (= y #x00)
trans (= y' (bvadd a c1))
"""

ADDER2 = """\
vars
  y : (_ BitVec 8) : input
  z : (_ BitVec 8) : output
  c2 : (_ BitVec 8) : config
init (= z #x00)
trans (= z' (bvadd y c2))
"""


def chained_adders(z_outputs=(None, None, 7)):
    """Decomposition of the two-adder chain; ``z_outputs`` constrains z at steps 0..2."""
    from cfgsmith.modular import Decomposition, compose_systems
    from cfgsmith.unroll import ConfigProblem

    s1, s2 = parse_sts(ADDER1), parse_sts(ADDER2)
    parent = compose_systems([s1, s2], inputs={"a"}, outputs={"y", "z"})
    a_in = [{"a": 1}, {"a": 1}]
    ys = [{"y": None}, {"y": 3}, {"y": None}]
    zs = [{"z": z} for z in z_outputs]
    p = Trace(a_in, [dict(y, **z) for y, z in zip(ys, zs)])
    t1 = Trace(a_in, ys)
    t2 = Trace([{"y": None}, {"y": None}], zs)
    parts = {"first": ConfigProblem(s1, 2, t1), "second": ConfigProblem(s2, 2, t2)}
    return Decomposition(ConfigProblem(parent, 2, p), parts, ("y",))


# -- acceptance verdicts ---------------------------------------------------------------------

VERDICTS: list[str] = []


def verdict(n: int, title: str, ok: bool, detail: str = "") -> None:
    """Record and print one PASS/FAIL line for acceptance criterion ``n``."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}" + (f" [{detail}]" if detail else "")
    VERDICTS.append(line)
    print(line)
    assert ok, line
