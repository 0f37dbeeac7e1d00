"""A small three-stage memory tile built from affine sequence generators.

Data enters one word per cycle, is packed ``ratio`` words at a time in the
aggregator (AGG), stored as wide lines in a register-file SRAM, unpacked in
the transpose buffer (TB) and streamed out one word per cycle.  Every
movement is scheduled by a pair of generators: an *accessor* whose values
are cycle numbers (the move happens when the value equals the running
cycle counter) and an *addressor* whose values are addresses.  Both step
once per move.

Timing protocol (one input and one output port):

* ``data_in`` at cycle c is written into the AGG slot addressed at c.
* A transfer AGG->SRAM at cycle c loads bus ``a2s`` (visible at c+1); the
  SRAM stores the bus one cycle later, at the delayed fire.
* A fetch SRAM->TB at cycle c loads bus ``s2t`` (visible at c+1); the TB
  stores it one cycle later.
* An output read at cycle c loads ``data_out`` (visible at step c+1).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from cfgsmith.frontend import Trace
from cfgsmith.modular import Decomposition, compose_systems
from cfgsmith.optimize import GeneratorGroup
from cfgsmith.terms import (
    BOOL,
    BV,
    FALSE,
    TRUE,
    And,
    BvAdd,
    BvConst,
    BvUle,
    BvUlt,
    Eq,
    Extract,
    Ite,
    Term,
    TransitionSystem,
    Var,
    prime,
)
from cfgsmith.unroll import ConfigProblem


class ScheduleError(ValueError):
    pass


class ParamError(ValueError):
    pass


# -- the affine oracle ------------------------------------------------------------


@dataclass(frozen=True)
class AffineConfig:
    dim: int
    ranges: tuple = ()
    strides: tuple = ()
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(self.ranges))
        object.__setattr__(self, "strides", tuple(self.strides))
        if self.dim < 0 or self.dim > len(self.ranges) or len(self.ranges) != len(self.strides):
            raise ParamError(f"dim {self.dim} out of bounds for {len(self.ranges)} loops")

    def active(self) -> "AffineConfig":
        """The same generator with unused loop fields dropped."""
        return AffineConfig(self.dim, self.ranges[: self.dim], self.strides[: self.dim], self.offset)


def affine_sequence(cfg: AffineConfig, width: int | None = None) -> list[int]:
    """Values of the loop nest, ``c[0]`` innermost; dim 0 gives ``[offset]``."""
    for j in range(cfg.dim):
        if cfg.ranges[j] < 1:
            raise ParamError(f"range {j} is zero")
    out = []
    # itertools.product varies its last factor fastest, so feed loops outermost first
    loops = [range(cfg.ranges[j]) for j in reversed(range(cfg.dim))]
    for cs in itertools.product(*loops):
        c = cs[::-1]
        v = sum(c[j] * cfg.strides[j] for j in range(cfg.dim)) + cfg.offset
        out.append(v % (1 << width) if width else v)
    return out


def fire_times(cfg: AffineConfig, horizon: int, width: int | None = None) -> list[int]:
    """Cycles < ``horizon`` at which an accessor with this config fires.

    The accessor fires when its current value equals the cycle counter and only
    then advances, so it fires on the longest increasing run of values that are
    still ahead of the clock.
    """
    seq = affine_sequence(cfg, width)
    out = []
    t = 0
    for v in seq:
        if v < t or v >= horizon:
            break
        out.append(v)
        t = v + 1
    return out


def event_values(cfg: AffineConfig, n: int, width: int | None = None) -> list[int]:
    """First ``n`` values of an addressor (the sequence restarts after its last value)."""
    seq = affine_sequence(cfg, width)
    return [seq[i % len(seq)] for i in range(n)]


# -- generator fragments -------------------------------------------------------------


@dataclass(frozen=True)
class MiniTileParams:
    word_width: int = 8
    ratio: int = 4
    sram_depth: int = 8
    maxdim: int = 2
    counter_width: int = 16

    def __post_init__(self):
        for name in ("word_width", "ratio", "sram_depth", "maxdim", "counter_width"):
            if getattr(self, name) < 1:
                raise ParamError(f"{name} must be positive")
        for name in ("ratio", "sram_depth"):
            v = getattr(self, name)
            if v & (v - 1):
                raise ParamError(f"{name} must be a power of two, got {v}")
        if self.sram_depth > 32:
            raise ParamError("sram_depth is capped at 32 lines")
        if max(2 * self.ratio, self.sram_depth) > (1 << self.counter_width):
            raise ParamError("counter_width too small to address the buffers")

    @property
    def dim_width(self) -> int:
        return self.maxdim.bit_length()


@dataclass(frozen=True)
class GeneratorBinding:
    name: str
    role: str  # addressor | accessor
    direction: str  # write | read
    stage: str  # agg | sram | tb
    shared: bool = False


def config_vars(name: str, p: MiniTileParams) -> dict:
    cw = p.counter_width
    return {
        "dim": Var(f"{name}.dim", BV(p.dim_width)),
        "ranges": [Var(f"{name}.range{j}", BV(cw)) for j in range(p.maxdim)],
        "strides": [Var(f"{name}.stride{j}", BV(cw)) for j in range(p.maxdim)],
        "offset": Var(f"{name}.offset", BV(cw)),
    }


@dataclass
class GeneratorFragment:
    """Variables and constraints of one generator instance inside a stage."""

    name: str
    config: dict
    vars: list
    init: list
    trans: list
    value: Term
    roles: dict = field(default_factory=dict)

    @property
    def config_list(self) -> list[Term]:
        c = self.config
        return [c["dim"], *c["ranges"], *c["strides"], c["offset"]]

    def group(self, role: str, direction: str) -> GeneratorGroup:
        c = self.config
        return GeneratorGroup(self.name, c["dim"], list(c["ranges"]), list(c["strides"]), c["offset"], role, direction)


def build_affine_generator_sts(name: str, p: MiniTileParams, step: Term = TRUE,
                               prefix: str | None = None) -> GeneratorFragment:
    """Counters with a carry chain, advanced whenever ``step`` holds.

    Partial products ``c[j]*stride[j]`` are kept in registers so the value is
    a plain sum.  Loops at index >= dim never move; after the last value the
    nest starts over.
    """
    cw = p.counter_width
    cfg = config_vars(name, p)
    prefix = prefix or name
    dim = cfg["dim"]
    cs = [Var(f"{prefix}.c{j}", BV(cw)) for j in range(p.maxdim)]
    ps = [Var(f"{prefix}.p{j}", BV(cw)) for j in range(p.maxdim)]
    val = Var(f"{prefix}.val", BV(cw))
    zero, one = BvConst(0, cw), BvConst(1, cw)
    dw = p.dim_width

    init = [BvUle(dim, BvConst(p.maxdim, dw))]
    init += [BvUle(one, r) for r in cfg["ranges"]]
    init += [Eq(c, zero) for c in cs] + [Eq(q, zero) for q in ps] + [Eq(val, cfg["offset"])]

    trans = []
    carry = step
    next_ps = []
    for j in range(p.maxdim):
        active = BvUlt(BvConst(j, dw), dim)
        carry = And(carry, active)
        inc = BvAdd(cs[j], one)
        wrap = BvUle(cfg["ranges"][j], inc)
        c_next = Ite(carry, Ite(wrap, zero, inc), cs[j])
        p_next = Ite(carry, Ite(wrap, zero, BvAdd(ps[j], cfg["strides"][j])), ps[j])
        trans.append(Eq(prime(cs[j]), c_next))
        trans.append(Eq(prime(ps[j]), p_next))
        next_ps.append(p_next)
        carry = And(carry, wrap)
    total = cfg["offset"]
    for q in next_ps:
        total = BvAdd(total, q)
    trans.append(Eq(prime(val), total))

    vs = [*cs, *ps, val]
    roles = {v.name: frozenset({"state"}) for v in vs}
    return GeneratorFragment(name, cfg, vs, init, trans, val, roles)


def affine_generator_system(cfg_name: str, p: MiniTileParams) -> TransitionSystem:
    """A free-running generator (steps every cycle) with its value as output."""
    frag = build_affine_generator_sts(cfg_name, p)
    roles = dict(frag.roles)
    roles[frag.value.name] = frozenset({"state", "output"})
    for v in frag.config_list:
        roles[v.name] = frozenset({"config"})
    return TransitionSystem(tuple(frag.vars + frag.config_list), And(frag.init), And(frag.trans), roles)


def simulate_generator(cfg: AffineConfig, p: MiniTileParams, steps: int) -> list[int]:
    """Replay :func:`affine_generator_system` concretely; returns the value at each step."""
    from cfgsmith.terms import simulate

    ts = affine_generator_system("g", p)
    c = config_vars("g", p)
    conf = {c["dim"]: cfg.dim, c["offset"]: cfg.offset}
    for j in range(p.maxdim):
        conf[c["ranges"][j]] = cfg.ranges[j] if j < len(cfg.ranges) else 1
        conf[c["strides"][j]] = cfg.strides[j] if j < len(cfg.strides) else 0
    init = {v: 0 for v in ts.vars if v.name.startswith("g.c") or v.name.startswith("g.p")}
    init[ts.var("g.val")] = cfg.offset
    states = simulate(ts, init, [{}] * steps, conf)
    val = ts.var("g.val")
    return [s[val] for s in states]


# -- the mini tile -------------------------------------------------------------------------


BINDINGS = (
    GeneratorBinding("agg_in_sched", "accessor", "write", "agg"),
    GeneratorBinding("agg_in_addr", "addressor", "write", "agg"),
    GeneratorBinding("agg2sram", "accessor", "read", "agg", shared=True),
    GeneratorBinding("agg_out_addr", "addressor", "read", "agg"),
    GeneratorBinding("agg2sram", "accessor", "write", "sram", shared=True),
    GeneratorBinding("sram_in_addr", "addressor", "write", "sram"),
    GeneratorBinding("sram2tb", "accessor", "read", "sram", shared=True),
    GeneratorBinding("sram_out_addr", "addressor", "read", "sram"),
    GeneratorBinding("sram2tb", "accessor", "write", "tb", shared=True),
    GeneratorBinding("tb_in_addr", "addressor", "write", "tb"),
    GeneratorBinding("tb_out_sched", "accessor", "read", "tb"),
    GeneratorBinding("tb_out_addr", "addressor", "read", "tb"),
)

# (accessor, addressor) pairs that move the same data, per stage
PAIRS = {
    "agg": (("agg_in_sched", "agg_in_addr"), ("agg2sram", "agg_out_addr")),
    "sram": (("agg2sram", "sram_in_addr"), ("sram2tb", "sram_out_addr")),
    "tb": (("sram2tb", "tb_in_addr"), ("tb_out_sched", "tb_out_addr")),
}

STAGES = ("agg", "sram", "tb")


def _log2(n: int) -> int:
    return max(1, (n - 1).bit_length())


def _mux(sel: Term, items: Sequence[Term]) -> Term:
    out = items[-1]
    for i in reversed(range(len(items) - 1)):
        out = Ite(Eq(sel, BvConst(i, sel.sort.width)), items[i], out)
    return out


def _low_bits(t: Term, n: int) -> Term:
    return Extract(t, n - 1, 0)


def _pairing(a: GeneratorFragment, b: GeneratorFragment) -> list[Term]:
    out = [Eq(a.config["dim"], b.config["dim"])]
    out += [Eq(x, y) for x, y in zip(a.config["ranges"], b.config["ranges"])]
    return out


@dataclass
class Stage:
    name: str
    system: TransitionSystem
    inputs: tuple
    outputs: tuple
    generators: dict
    bindings: tuple

    def groups(self) -> list[GeneratorGroup]:
        return [self.generators[b.name].group(b.role, b.direction) for b in self.bindings]


class _Builder:
    def __init__(self, stage: str):
        self.stage = stage
        self.vars: dict[str, Term] = {}
        self.roles: dict[str, set] = {}
        self.init: list[Term] = []
        self.trans: list[Term] = []
        self.gens: dict[str, GeneratorFragment] = {}

    def var(self, name, sort, *roles):
        v = Var(name, sort)
        self.vars[name] = v
        self.roles.setdefault(name, set()).update(roles or ("state",))
        return v

    def cycle(self, cw):
        c = self.var(f"{self.stage}.cycle", BV(cw))
        self.init.append(Eq(c, BvConst(0, cw)))
        self.trans.append(Eq(prime(c), BvAdd(c, BvConst(1, cw))))
        return c

    def gen(self, name, p, step):
        frag = build_affine_generator_sts(name, p, step, prefix=f"{self.stage}.{name}")
        self.gens[name] = frag
        for v in frag.vars:
            self.var(v.name, v.sort)
        for v in frag.config_list:
            self.var(v.name, v.sort, "config")
        self.init += frag.init
        self.trans += frag.trans
        return frag

    def delayed(self, name, signal):
        d = self.var(f"{self.stage}.{name}.fire_d", BOOL)
        self.init.append(Eq(d, FALSE))
        self.trans.append(Eq(prime(d), signal))
        return d

    def reg(self, name, width):
        r = self.var(name, BV(width))
        self.init.append(Eq(r, BvConst(0, width)))
        return r

    def system(self):
        roles = {n: frozenset(rs) for n, rs in self.roles.items()}
        return TransitionSystem(tuple(self.vars.values()), And(self.init), And(self.trans), roles)


def _accessor(b: _Builder, name: str, p: MiniTileParams, cycle: Term) -> tuple[GeneratorFragment, Term]:
    """An accessor generator that steps on its own fire signal."""
    # the fire signal depends on the value variable, whose name is fixed up front
    val = Var(f"{b.stage}.{name}.val", BV(p.counter_width))
    fire = Eq(val, cycle)
    return b.gen(name, p, fire), fire


def _agg_stage(p: MiniTileParams) -> Stage:
    b = _Builder("agg")
    ww, r, cw = p.word_width, p.ratio, p.counter_width
    cycle = b.cycle(cw)
    data_in = b.var("data_in", BV(ww), "input")
    words = [[b.reg(f"agg.w{s}_{i}", ww) for i in range(r)] for s in range(2)]
    bus = [b.var(f"a2s_{i}", BV(ww), "state", "output") for i in range(r)]
    b.init += [Eq(x, BvConst(0, ww)) for x in bus]

    _, fire_in = _accessor(b, "agg_in_sched", p, cycle)
    addr_in = b.gen("agg_in_addr", p, fire_in)
    _, fire_out = _accessor(b, "agg2sram", p, cycle)
    addr_out = b.gen("agg_out_addr", p, fire_out)

    a_in = _low_bits(addr_in.value, _log2(2 * r))
    for s in range(2):
        for i in range(r):
            hit = And(fire_in, Eq(a_in, BvConst(s * r + i, a_in.sort.width)))
            b.trans.append(Eq(prime(words[s][i]), Ite(hit, data_in, words[s][i])))
    sel = _low_bits(addr_out.value, 1)
    for i in range(r):
        b.trans.append(Eq(prime(bus[i]), Ite(fire_out, _mux(sel, [words[0][i], words[1][i]]), bus[i])))
    for acc, adr in PAIRS["agg"]:
        b.init += _pairing(b.gens[acc], b.gens[adr])
    binds = tuple(x for x in BINDINGS if x.stage == "agg")
    return Stage("agg", b.system(), ("data_in",), tuple(x.name for x in bus), dict(b.gens), binds)


def _sram_stage(p: MiniTileParams) -> Stage:
    b = _Builder("sram")
    ww, r, cw, depth = p.word_width, p.ratio, p.counter_width, p.sram_depth
    cycle = b.cycle(cw)
    bus_in = [b.var(f"a2s_{i}", BV(ww), "input") for i in range(r)]
    mem = [[b.reg(f"sram.m{line}_{i}", ww) for i in range(r)] for line in range(depth)]
    bus_out = [b.var(f"s2t_{i}", BV(ww), "state", "output") for i in range(r)]
    b.init += [Eq(x, BvConst(0, ww)) for x in bus_out]

    _, fire_a = _accessor(b, "agg2sram", p, cycle)
    store = b.delayed("agg2sram", fire_a)
    addr_in = b.gen("sram_in_addr", p, store)
    _, fire_b = _accessor(b, "sram2tb", p, cycle)
    addr_out = b.gen("sram_out_addr", p, fire_b)

    aw = _log2(depth)
    a_in = _low_bits(addr_in.value, aw)
    a_out = _low_bits(addr_out.value, aw)
    for line in range(depth):
        hit = And(store, Eq(a_in, BvConst(line, aw)))
        for i in range(r):
            b.trans.append(Eq(prime(mem[line][i]), Ite(hit, bus_in[i], mem[line][i])))
    for i in range(r):
        col = [mem[line][i] for line in range(depth)]
        b.trans.append(Eq(prime(bus_out[i]), Ite(fire_b, _mux(a_out, col), bus_out[i])))
    for acc, adr in PAIRS["sram"]:
        b.init += _pairing(b.gens[acc], b.gens[adr])
    binds = tuple(x for x in BINDINGS if x.stage == "sram")
    return Stage("sram", b.system(), tuple(x.name for x in bus_in), tuple(x.name for x in bus_out),
                 dict(b.gens), binds)


def _tb_stage(p: MiniTileParams) -> Stage:
    b = _Builder("tb")
    ww, r, cw = p.word_width, p.ratio, p.counter_width
    cycle = b.cycle(cw)
    bus_in = [b.var(f"s2t_{i}", BV(ww), "input") for i in range(r)]
    words = [[b.reg(f"tb.w{s}_{i}", ww) for i in range(r)] for s in range(2)]
    out = b.reg("data_out", ww)
    b.roles["data_out"].add("output")

    _, fire_c = _accessor(b, "sram2tb", p, cycle)
    store = b.delayed("sram2tb", fire_c)
    addr_in = b.gen("tb_in_addr", p, store)
    _, fire_o = _accessor(b, "tb_out_sched", p, cycle)
    addr_out = b.gen("tb_out_addr", p, fire_o)

    slot = _low_bits(addr_in.value, 1)
    for s in range(2):
        hit = And(store, Eq(slot, BvConst(s, 1)))
        for i in range(r):
            b.trans.append(Eq(prime(words[s][i]), Ite(hit, bus_in[i], words[s][i])))
    a_out = _low_bits(addr_out.value, _log2(2 * r))
    flat = [words[s][i] for s in range(2) for i in range(r)]
    b.trans.append(Eq(prime(out), Ite(fire_o, _mux(a_out, flat), out)))
    for acc, adr in PAIRS["tb"]:
        b.init += _pairing(b.gens[acc], b.gens[adr])
    binds = tuple(x for x in BINDINGS if x.stage == "tb")
    return Stage("tb", b.system(), tuple(x.name for x in bus_in), ("data_out",), dict(b.gens), binds)


@dataclass
class MiniTile:
    params: MiniTileParams
    stages: dict
    parent: TransitionSystem

    def shared_config(self) -> dict[str, list[str]]:
        """Config variable name -> stages whose config includes it (only those in two or more)."""
        seen: dict[str, list[str]] = {}
        for name, st in self.stages.items():
            for v in st.system.configs:
                seen.setdefault(v.name, []).append(name)
        return {n: s for n, s in seen.items() if len(s) > 1}

    def groups(self, stage: str | None = None) -> list[GeneratorGroup]:
        if stage is not None:
            return self.stages[stage].groups()
        out, seen = [], set()
        for st in self.stages.values():
            for g in st.groups():
                if g.name not in seen:
                    seen.add(g.name)
                    out.append(g)
        return out


def build_mini_tile(p: MiniTileParams | None = None) -> MiniTile:
    p = p or MiniTileParams()
    stages = {"agg": _agg_stage(p), "sram": _sram_stage(p), "tb": _tb_stage(p)}
    parent = compose_systems([st.system for st in stages.values()], inputs={"data_in"}, outputs={"data_out"})
    return MiniTile(p, stages, parent)


# -- stencil traces ------------------------------------------------------------------------


def _trace(stream: Sequence[int], outputs: Sequence[int], latency: int) -> Trace:
    k = latency + len(outputs) - 1
    if k < len(stream):
        k = len(stream)
    ins = [{"data_in": stream[i] if i < len(stream) else 0} for i in range(k)]
    outs = [{"data_out": None} for _ in range(k + 1)]
    for j, v in enumerate(outputs):
        outs[latency + j] = {"data_out": v}
    return Trace(ins, outs)


def gen_identity_trace(width: int, height: int, latency: int) -> Trace:
    """Inputs 1..W*H one per cycle, echoed unchanged from step ``latency`` on.

    Input steps after the stream carry 0 so the solver cannot invent data.
    """
    if width * height < 1:
        raise ParamError("image must have at least one pixel")
    if latency < 1:
        raise ParamError("latency must be >= 1")
    stream = list(range(1, width * height + 1))
    return _trace(stream, stream, latency)


def conv3x3_windows(width: int, height: int) -> list[list[int]]:
    if width < 3 or height < 3:
        raise ParamError("image must be at least 3x3")
    pix = lambda r, c: r * width + c + 1
    return [
        [pix(r + dr, c + dc) for dr in range(3) for dc in range(3)]
        for r in range(height - 2)
        for c in range(width - 2)
    ]


def gen_conv3x3_trace(width: int, height: int, latency: int) -> Trace:
    """Row-major pixels in; every 3x3 window's nine pixels out, windows in row-major order."""
    if latency < 1:
        raise ParamError("latency must be >= 1")
    stream = list(range(1, width * height + 1))
    outs = [v for w in conv3x3_windows(width, height) for v in w]
    return _trace(stream, outs, latency)


def trace_stream(trace: Trace) -> tuple[list[int], list[int], int]:
    """(input stream, expected outputs, latency) from a tile trace."""
    stream = [s.get("data_in") for s in trace.inputs]
    while stream and stream[-1] == 0:
        stream.pop()
    outs = [(i, s.get("data_out")) for i, s in enumerate(trace.outputs) if s.get("data_out") is not None]
    if not outs:
        raise ScheduleError("trace constrains no outputs")
    latency = outs[0][0]
    steps = [i for i, _ in outs]
    if steps != list(range(latency, latency + len(steps))):
        raise ScheduleError("constrained outputs must occupy consecutive steps")
    return stream, [v for _, v in outs], latency


# -- schedule planning ---------------------------------------------------------------------


@dataclass
class TilePlan:
    """When each line moves, and the resulting bus contents at every step."""

    k: int
    stream: list
    outputs: list
    latency: int
    transfers: list  # cycle per AGG line
    fetches: list  # (cycle, sram line, tb slot) per output run
    reads: list  # (cycle, tb address) per output
    a2s: list  # per step: tuple of words
    s2t: list


def plan_schedule(stream: Sequence[int], outputs: Sequence[int], latency: int,
                  p: MiniTileParams) -> TilePlan:
    """Fix the data movement for a stream/outputs pair under the tile's timing protocol."""
    r = p.ratio
    n = len(stream)
    if n % r:
        raise ScheduleError(f"stream length {n} is not a multiple of the pack ratio {r}")
    if len(set(stream)) != n:
        raise ScheduleError("input values must be distinct")
    where = {v: i for i, v in enumerate(stream)}
    lines = [tuple(stream[i * r:(i + 1) * r]) for i in range(n // r)]
    transfers = [r * (i + 1) for i in range(len(lines))]
    k = max(latency + len(outputs) - 1, n)

    # group outputs into runs read from the same fetched line
    runs: list[list[int]] = []
    for j, v in enumerate(outputs):
        if v not in where:
            raise ScheduleError(f"output value {v} never enters the tile")
        line = where[v] // r
        if runs and where[outputs[runs[-1][-1]]] // r == line:
            runs[-1].append(j)
        else:
            runs.append([j])
    fetches, reads = [], []
    for ri, run in enumerate(runs):
        line = where[outputs[run[0]]] // r
        first_read = latency + run[0] - 1
        f = first_read - 2
        ready = transfers[line] + 2
        if f < ready:
            raise ScheduleError(f"output {run[0]} needs line {line} at cycle {f}, ready at {ready}; raise the latency")
        if line + p.sram_depth < len(lines) and f > transfers[line + p.sram_depth] + 1:
            raise ScheduleError(f"line {line} is overwritten in SRAM before it is fetched")
        if ri >= 2 and latency + runs[ri - 2][-1] - 1 > f + 1:
            raise ScheduleError(f"TB slot {ri % 2} is overwritten while still being read")
        fetches.append((f, line, ri % 2))
        for j in run:
            reads.append((latency + j - 1, (ri % 2) * r + where[outputs[j]] % r))
    if any(b[0] <= a[0] for a, b in zip(fetches, fetches[1:])):
        raise ScheduleError("fetches collide")

    def bus(events):
        cur = tuple([0] * r)
        out = []
        ev = dict(events)
        for s in range(k + 1):
            if s - 1 in ev:
                cur = ev[s - 1]
            out.append(cur)
        return out

    a2s = bus([(t, lines[i]) for i, t in enumerate(transfers)])
    s2t = bus([(f, lines[line]) for f, line, _ in fetches])
    return TilePlan(k, list(stream), list(outputs), latency, transfers, fetches, reads, a2s, s2t)


def min_latency(stream: Sequence[int], outputs: Sequence[int], p: MiniTileParams,
                limit: int = 1024) -> int:
    """Smallest latency the schedule planner accepts for this stream."""
    last = None
    for lat in range(1, limit + 1):
        try:
            plan_schedule(stream, outputs, lat, p)
            return lat
        except ScheduleError as e:
            last = e
    raise ScheduleError(f"no latency up to {limit} works: {last}")


def stage_traces(plan: TilePlan, p: MiniTileParams) -> dict[str, Trace]:
    r = p.ratio
    k = plan.k
    data_in = [plan.stream[i] if i < len(plan.stream) else 0 for i in range(k)]
    bus_vals = lambda name, rows, s: {f"{name}_{i}": rows[s][i] for i in range(r)}
    outs = [None] * (k + 1)
    for j, v in enumerate(plan.outputs):
        outs[plan.latency + j] = v
    return {
        "agg": Trace([{"data_in": x} for x in data_in], [bus_vals("a2s", plan.a2s, s) for s in range(k + 1)]),
        "sram": Trace([bus_vals("a2s", plan.a2s, s) for s in range(k)],
                      [bus_vals("s2t", plan.s2t, s) for s in range(k + 1)]),
        "tb": Trace([bus_vals("s2t", plan.s2t, s) for s in range(k)], [{"data_out": v} for v in outs]),
    }


@dataclass
class TileProblem:
    tile: MiniTile
    plan: TilePlan
    parent: ConfigProblem
    decomposition: Decomposition


def tile_problem(tile: MiniTile, trace: Trace) -> TileProblem:
    stream, outs, latency = trace_stream(trace)
    plan = plan_schedule(stream, outs, latency, tile.params)
    if plan.k != trace.k:
        raise ScheduleError(f"trace has k={trace.k}, schedule needs k={plan.k}")
    parent = ConfigProblem(tile.parent, plan.k, trace)
    parts = {name: ConfigProblem(tile.stages[name].system, plan.k, tr)
             for name, tr in stage_traces(plan, tile.params).items()}
    shared = sorted(set(tile.shared_config()) | {f"a2s_{i}" for i in range(tile.params.ratio)}
                    | {f"s2t_{i}" for i in range(tile.params.ratio)})
    return TileProblem(tile, plan, parent, Decomposition(parent, parts, tuple(shared)))


# -- reading configurations --------------------------------------------------------------


def group_config(group: GeneratorGroup, config: Mapping[Term, object]) -> AffineConfig:
    """The AffineConfig of ``group`` under ``config`` (keyed by untimed variables)."""
    get = lambda v: config[v]
    dim = get(group.dim)
    return AffineConfig(dim, tuple(get(x) for x in group.ranges), tuple(get(x) for x in group.strides),
                        get(group.offset))


def render_generator(name: str, role: str, direction: str, cfg: AffineConfig) -> str:
    a = cfg.active()
    head = f"{name} ({role}, {direction}): dim={a.dim}"
    if a.dim:
        head += f" ranges={list(a.ranges)} strides={list(a.strides)}"
    head += f" offset={a.offset}"
    terms = [f"{s}*c{j}" if s != 1 else f"c{j}" for j, s in enumerate(a.strides) if s]
    if a.offset or not terms:
        terms.append(str(a.offset))
    expr = " + ".join(terms)
    if a.dim == 0:
        return head + f"\n  value = {expr}"
    lines = [head]
    for depth, j in enumerate(reversed(range(a.dim))):
        lines.append("  " * (depth + 1) + f"for c{j} in [0,{a.ranges[j]}):")
    lines.append("  " * (a.dim + 1) + f"value = {expr}")
    return "\n".join(lines)


def render_configuration(config: Mapping[Term, object], groups: Sequence[GeneratorGroup]) -> str:
    """Per-generator summary and equivalent loop nest; unused loop fields are left out."""
    out = []
    for g in groups:
        out.append(render_generator(g.name, g.role, g.direction, group_config(g, config)))
    return "\n".join(out) + "\n"


_HEAD = re.compile(
    r"^(?P<name>\S+) \((?P<role>\w+), (?P<dir>\w+)\): dim=(?P<dim>\d+)"
    r"(?: ranges=\[(?P<ranges>[^\]]*)\] strides=\[(?P<strides>[^\]]*)\])? offset=(?P<offset>\d+)$"
)


def parse_rendered(text: str) -> dict[str, AffineConfig]:
    """Read back the header lines of :func:`render_configuration` output."""
    out = {}
    for line in text.splitlines():
        m = _HEAD.match(line)
        if not m:
            continue
        nums = lambda s: tuple(int(x) for x in s.split(",")) if s else ()
        out[m["name"]] = AffineConfig(int(m["dim"]), nums(m["ranges"]), nums(m["strides"]), int(m["offset"]))
    return out
