"""Unrolled configuration formulas.

``phi = unroll(S, k) & conf(V_conf, k) & P`` plus optional invariants at
every step.  Conjunct order is fixed (init, transitions by ascending step,
constancy, example equalities, invariants) so emitted scripts are stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from cfgsmith.frontend import Trace, TraceError, validate_trace
from cfgsmith.terms import (
    And,
    Eq,
    Term,
    TransitionSystem,
    free_vars,
    prime,
    simulate,
    substitute,
    timed,
    value_const,
)


class ProblemError(ValueError):
    pass


def at_step(t: Term, vs: Iterable[Term], i: int) -> Term:
    """Rename every variable of ``vs`` in ``t`` to its copy at step ``i``."""
    return substitute(t, {v: timed(v, i) for v in vs})


def trans_at(ts: TransitionSystem, i: int) -> Term:
    m = {v: timed(v, i) for v in ts.vars}
    m.update({prime(v): timed(v, i + 1) for v in ts.vars})
    return substitute(ts.trans, m)


def unroll(ts: TransitionSystem, k: int) -> Term:
    if k < 0:
        raise ValueError("k must be >= 0")
    parts = [at_step(ts.init, ts.vars, 0)]
    parts += [trans_at(ts, i) for i in range(k)]
    return And(parts)


def conf_constancy(v_conf: Iterable[Term], k: int) -> Term:
    if k < 1:
        raise ValueError("k must be >= 1")
    vs = sorted(v_conf, key=lambda v: v.name)
    return And([Eq(timed(v, i + 1), timed(v, i)) for i in range(k) for v in vs])


def pbe_property(trace: Trace, v_in: Iterable[Term], v_out: Iterable[Term], k: int) -> Term:
    """Equalities for every constrained trace entry; don't-cares add nothing."""
    if trace.k != k:
        raise TraceError(f"trace covers {trace.k} transitions but k = {k}")
    ins = {v.name: v for v in v_in}
    outs = {v.name: v for v in v_out}
    parts = []
    for steps, known, what in ((trace.inputs, ins, "input"), (trace.outputs, outs, "output")):
        for i, step in enumerate(steps):
            for name in sorted(step):
                val = step[name]
                if val is None:
                    continue
                if name not in known:
                    raise TraceError(f"{what} step {i}: {name} is not an {what} variable")
                v = known[name]
                parts.append(Eq(timed(v, i), value_const(val, v.sort)))
    return And(parts)


@dataclass
class ConfigProblem:
    system: TransitionSystem
    k: int
    property: Trace
    v_in: tuple = None
    v_out: tuple = None
    v_conf: tuple = None
    invariants: list = field(default_factory=list)

    def __post_init__(self):
        ts = self.system
        if self.v_in is None:
            self.v_in = ts.inputs
        if self.v_out is None:
            self.v_out = ts.outputs
        if self.v_conf is None:
            self.v_conf = ts.configs
        self.v_in, self.v_out, self.v_conf = (
            tuple(sorted(vs, key=lambda v: v.name)) for vs in (self.v_in, self.v_out, self.v_conf)
        )
        if self.k < 1:
            raise ProblemError("k must be >= 1")
        if not self.v_conf:
            raise ProblemError("no configuration variables")
        vset = set(ts.vars)
        for vs, what in ((self.v_in, "input"), (self.v_out, "output"), (self.v_conf, "config")):
            for v in vs:
                if v not in vset:
                    raise ProblemError(f"{what} variable {v.name} is not a system variable")
        if self.property.k != self.k:
            raise ProblemError(
                f"trace has {self.property.k} input steps and {len(self.property.outputs)} "
                f"output steps; k = {self.k} needs {self.k} and {self.k + 1}"
            )
        validate_trace(self.property, ts)
        for inv in self.invariants:
            if not inv.sort.is_bool:
                raise ProblemError("invariants must be Bool")
            stray = [v.name for v in free_vars(inv) if v not in vset]
            if stray:
                raise ProblemError(f"invariant mentions non-system variables {sorted(stray)}")

    def formula(self) -> Term:
        return build_config_formula(self)


def build_config_formula(cp: ConfigProblem, invariants: Sequence[Term] | None = None) -> Term:
    ts, k = cp.system, cp.k
    invs = list(cp.invariants) + list(invariants or [])
    parts = [at_step(ts.init, ts.vars, 0)]
    # each transition copy stays one conjunct so its shared subterms serialize once
    parts += [trans_at(ts, i) for i in range(k)]
    parts.append(conf_constancy(cp.v_conf, k))
    parts.append(pbe_property(cp.property, cp.v_in, cp.v_out, k))
    for inv in invs:
        parts += [at_step(inv, ts.vars, i) for i in range(k + 1)]
    return And(parts)


def step_vars(cp: ConfigProblem, i: int) -> list[Term]:
    return [timed(v, i) for v in cp.system.vars]


def extract_configuration(model: Mapping[Term, object], cp: ConfigProblem) -> dict[Term, object]:
    out = {}
    for v in cp.v_conf:
        tv = timed(v, 0)
        if tv not in model:
            raise KeyError(f"model has no value for {tv.name}")
        out[v] = model[tv]
    return out


def extract_state(model: Mapping[Term, object], cp: ConfigProblem, i: int) -> dict[Term, object]:
    return {v: model[timed(v, i)] for v in cp.system.vars if timed(v, i) in model}


def replay(cp: ConfigProblem, model: Mapping[Term, object], config: Mapping[Term, object] | None = None):
    """Simulate with the model's step-0 state and the trace inputs.

    Unconstrained trace inputs take the model's values.  Returns the state list.
    """
    if config is None:
        config = extract_configuration(model, cp)
    init = {v: x for v, x in extract_state(model, cp, 0).items() if v not in set(cp.system.inputs)}
    inputs = []
    for i in range(cp.k):
        step = {}
        for v in cp.system.inputs:
            given = cp.property.inputs[i].get(v.name)
            step[v] = given if given is not None else model.get(timed(v, i), 0)
        inputs.append(step)
    return simulate(cp.system, init, inputs, config)


def trace_mismatches(cp: ConfigProblem, states) -> list[tuple[int, str, object, object]]:
    """Constrained outputs that the replayed ``states`` do not reproduce."""
    bad = []
    vm = cp.system.var_map
    for i, step in enumerate(cp.property.outputs):
        for name, want in sorted(step.items()):
            if want is None:
                continue
            got = states[i][vm[name]]
            if got != want:
                bad.append((i, name, want, got))
    return bad


def configuration_json(config: Mapping[Term, object]) -> str:
    """Deterministic JSON for a configuration: sorted names, Bools as true/false."""
    return json.dumps({v.name: config[v] for v in config}, indent=2, sort_keys=True) + "\n"


def parse_configuration(text: str, system: TransitionSystem) -> dict[Term, object]:
    raw = json.loads(text)
    if isinstance(raw, dict) and "configuration" in raw and isinstance(raw["configuration"], dict):
        raw = raw["configuration"]
    vm = system.var_map
    out = {}
    for name, val in raw.items():
        if name not in vm:
            raise ProblemError(f"configuration names unknown variable {name}")
        v = vm[name]
        if "config" not in system.roles.get(name, ()):
            raise ProblemError(f"{name} is not a configuration variable")
        out[v] = value_const(val, v.sort).value
    return out
