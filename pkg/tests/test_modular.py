from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfgsmith.frontend import print_sts
from cfgsmith.modular import (
    ALL_FREE_VARS,
    INTERFACE_ONLY,
    AbductStrategy,
    Decomposition,
    DecompositionError,
    ModelIncomplete,
    StrategyError,
    check_decomposition,
    get_abduct,
    load_decomposition,
    recheck_configuration,
    solve_modular,
)
from cfgsmith.smt import SolverSession, check_sat
from cfgsmith.terms import BOOL, And, Not, Or, TransitionSystem, Var, conjuncts, evaluate, free_vars
from cfgsmith.unroll import ConfigProblem

from helpers import P1, alu, chained_adders, needs_solver, random_bool, random_vars

pytestmark = needs_solver


def names(config):
    return {v.name: x for v, x in config.items()}


# -- decomposition conditions ------------------------------------------------------------


def test_chained_adders_pass_all_conditions():
    d = chained_adders()
    with SolverSession() as s:
        verdicts = check_decomposition(d, s)
    assert [(v.condition, v.status) for v in verdicts] == [("i", "pass"), ("ii", "pass"), ("iii", "pass"),
                                                          ("iv", "pass")]


def test_weakened_part_fails_condition_i():
    d = chained_adders()
    first = d.parts["first"]
    ts = first.system
    weak = TransitionSystem(ts.vars, ts.init, And(), ts.roles)
    d.parts["first"] = ConfigProblem(weak, first.k, first.property)
    with SolverSession() as s:
        verdicts = {v.condition: v for v in check_decomposition(d, s)}
    assert verdicts["i"].status == "fail"
    assert verdicts["i"].countermodel
    assert verdicts["ii"].status == "pass"


def test_uncovered_config_fails_condition_iv():
    d = chained_adders()
    second = d.parts["second"]
    ts = second.system
    roles = dict(ts.roles)
    roles["c2"] = {"state"}
    roles["z"] = {"output", "config"}  # keep the part configurable
    moved = TransitionSystem(ts.vars, ts.init, ts.trans, roles)
    d.parts["second"] = ConfigProblem(moved, 2, second.property)
    with SolverSession() as s:
        verdicts = {v.condition: v for v in check_decomposition(d, s)}
    assert verdicts["iv"].status == "fail" and "c2" in verdicts["iv"].detail


def test_decomposition_shape_errors():
    d = chained_adders()
    with pytest.raises(DecompositionError):
        Decomposition(d.parent, {"only": d.parts["first"]})
    with pytest.raises(DecompositionError, match="two parts"):
        Decomposition(d.parent, d.parts, ("a",))
    with pytest.raises(DecompositionError):
        d.ordered(["first"])


# -- abducts -----------------------------------------------------------------------------


def test_abduct_propositional():
    x, y, z = (Var(n, BOOL) for n in "xyz")
    phi = And(x, Or(y, z))
    model = {x: True, y: False, z: True}
    psi = get_abduct(phi, model, AbductStrategy())
    assert {(c.args[0].name, c.args[1].value) for c in conjuncts(psi)} == {("x", True), ("y", False), ("z", True)}
    with SolverSession() as s:
        assert check_sat(s, And(psi, Not(phi))).is_unsat


def test_abduct_example_1():
    cp = ConfigProblem(alu(), 2, P1)
    phi = cp.formula()
    with SolverSession() as s:
        r = check_sat(s, phi)
        psi = get_abduct(phi, r.model, AbductStrategy())
        assert {c.args[0] for c in conjuncts(psi)} == free_vars(phi)
        assert check_sat(s, And(psi, Not(phi))).is_unsat


def test_abduct_interface_only():
    y1, c_sh, other = Var("y@1", BOOL), Var("c_sh", BOOL), Var("q@1", BOOL)
    phi = And(y1, c_sh, other)
    psi = get_abduct(phi, {y1: True, c_sh: False, other: True}, AbductStrategy(INTERFACE_ONLY, ("y@1", "c_sh")))
    assert {c.args[0].name for c in conjuncts(psi)} == {"y@1", "c_sh"}


def test_abduct_model_incomplete():
    x = Var("x", BOOL)
    with pytest.raises(ModelIncomplete):
        get_abduct(x, {}, AbductStrategy())


def test_strategy_names():
    assert AbductStrategy.parse("AllFreeVars").kind == ALL_FREE_VARS
    assert AbductStrategy.parse("interface_only", ["y"]).kind == INTERFACE_ONLY
    with pytest.raises(StrategyError):
        AbductStrategy.parse("everything")


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_abduct_entails_formula(rng):
    pool = random_vars(rng, 4)
    phi = random_bool(rng, pool, 4)
    with SolverSession() as s:
        r = check_sat(s, phi)
        if not r.is_sat:
            return
        psi = get_abduct(phi, r.model, AbductStrategy())
        assert check_sat(s, And(psi, Not(phi)), query_vars=()).is_unsat


# -- solving ------------------------------------------------------------------------------


@pytest.mark.parametrize("strategy,parallel", [
    (AbductStrategy(), False),
    (AbductStrategy(INTERFACE_ONLY, ("y",)), False),
    (AbductStrategy(), True),
])
def test_chained_adders_solve(strategy, parallel):
    d = chained_adders()
    res = solve_modular(d, strategy, parallel=parallel, check_conditions=True)
    assert res.status == "sat"
    assert names(res.configuration) == {"c1": 2, "c2": 4}
    assert res.recheck == "sat"
    assert [st.name for st in res.stages] == ["first", "second"]


def test_stage_two_unsat_is_inconclusive():
    d = chained_adders((None, 5, 7))
    res = solve_modular(d)
    assert res.status == "unsat"
    assert res.inconclusive and res.failed_stage == "second"
    assert res.configuration is None


def test_interface_only_requires_complete_shared_list():
    d = chained_adders()
    with pytest.raises(StrategyError):
        solve_modular(d, AbductStrategy(INTERFACE_ONLY, ()))


def test_reverse_order_still_sound():
    d = chained_adders()
    res = solve_modular(d, order=["second", "first"])
    if res.is_sat:
        assert res.recheck == "sat"
    else:
        assert res.inconclusive


def test_interface_only_amalgamation():
    d = chained_adders()
    strategy = AbductStrategy(INTERFACE_ONLY, ("y",))
    res = solve_modular(d, strategy)
    phis = [cp.formula() for cp in d.parts.values()]
    assert all(evaluate(phi, res.model) for phi in phis)


def test_recheck_rejects_wrong_configuration():
    d = chained_adders()
    c1, c2 = d.parent.system.var_map["c1"], d.parent.system.var_map["c2"]
    assert recheck_configuration(d.parent, {c1: 2, c2: 4}) == "sat"
    assert recheck_configuration(d.parent, {c1: 2, c2: 5}) == "unsat"


def test_load_decomposition(tmp_path):
    d = chained_adders()
    for name, cp in [("parent", d.parent)] + list(d.parts.items()):
        (tmp_path / f"{name}.sts").write_text(print_sts(cp.system))
        (tmp_path / f"{name}.json").write_text(cp.property.to_json())
    doc = {
        "parent": {"model": "parent.sts", "trace": "parent.json", "steps": 2},
        "parts": [{"name": n, "model": f"{n}.sts", "trace": f"{n}.json"} for n in d.parts],
        "shared_vars": ["y"],
        "strategy": "all-free-vars",
    }
    (tmp_path / "d.json").write_text(json.dumps(doc))
    loaded, raw = load_decomposition(tmp_path / "d.json")
    assert raw["strategy"] == "all-free-vars"
    assert names(solve_modular(loaded).configuration) == {"c1": 2, "c2": 4}
    (tmp_path / "bad.json").write_text(json.dumps({"parts": []}))
    with pytest.raises(DecompositionError):
        load_decomposition(tmp_path / "bad.json")
