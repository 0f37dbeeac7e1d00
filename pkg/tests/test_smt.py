from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfgsmith.smt import (
    SolverCrash,
    SolverProtocolError,
    SolverSession,
    SolverTimeout,
    check_sat,
    const_to_smt2,
    serialize_smt2,
)
from cfgsmith.terms import BOOL, BV, FALSE, TRUE, BvConst, Eq, Not, Var, evaluate, free_vars, timed
from cfgsmith.unroll import ConfigProblem

from helpers import GOLDEN, P1, P2, alu, needs_solver, random_bool, random_value, random_vars

FAKE = f"{sys.executable} {Path(__file__).with_name('fake_solver.py')}"
C = Var("c", BOOL)


def test_serialize_examples():
    text = serialize_smt2(Eq(timed(C, 1), timed(C, 0)), header=False)
    assert text == "(declare-const |c@0| Bool)\n(declare-const |c@1| Bool)\n(assert (= |c@1| |c@0|))\n"
    assert const_to_smt2(2, BV(8)) == "#x02"
    assert const_to_smt2(5, BV(3)) == "#b101"


def test_example_1_script_matches_golden():
    script = serialize_smt2(ConfigProblem(alu(), 2, P1).formula(), check=True)
    assert script == (GOLDEN / "alu_p1.smt2").read_text()
    assert serialize_smt2(ConfigProblem(alu(), 2, P1).formula(), check=True) == script


@needs_solver
def test_check_sat_examples():
    x = Var("x", BV(8))
    with SolverSession() as s:
        assert check_sat(s, TRUE).is_sat
        assert check_sat(s, Not(Eq(x, x))).is_unsat
        assert check_sat(s, ConfigProblem(alu(), 2, P2).formula()).is_unsat
        r = check_sat(s, ConfigProblem(alu(), 2, P1).formula(), [timed(alu().var_map["cfg"], 0)])
        assert r.model == {timed(alu().var_map["cfg"], 0): True}


@needs_solver
def test_push_pop():
    with SolverSession() as s:
        s.assert_formula(C)
        s.push()
        s.assert_formula(FALSE)
        assert s.check().is_unsat
        s.pop()
        assert s.check().is_sat
        for _ in range(3):
            s.push()
        s.pop()
        assert s.depth == 2
        s.pop()
        s.pop()
        with pytest.raises(SolverProtocolError):
            s.pop()


@needs_solver
def test_redeclaration_with_other_sort_is_refused():
    with SolverSession() as s:
        s.assert_formula(Var("v", BOOL))
        with pytest.raises(SolverProtocolError):
            s.assert_formula(Eq(Var("v", BV(2)), BvConst(1, 2)))


def test_solver_errors_are_distinct():
    with pytest.raises(SolverCrash, match="cannot start"):
        SolverSession("no-such-solver-binary")
    with SolverSession(f"{FAKE} crash") as s, pytest.raises(SolverCrash):
        s.check()
    with SolverSession(f"{FAKE} garbage") as s, pytest.raises(SolverProtocolError):
        s.check()
    with SolverSession(f"{FAKE} error") as s, pytest.raises(SolverProtocolError):
        s.check()
    with SolverSession(f"{FAKE} hang", timeout_s=0.5) as s, pytest.raises(SolverTimeout):
        s.check()


def test_unknown_is_surfaced():
    with SolverSession(f"{FAKE} unknown") as s:
        r = s.check()
    assert r.status == "unknown" and r.model is None


@needs_solver
@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_model_soundness(rng):
    pool = random_vars(rng, 4)
    f = random_bool(rng, pool, 4)
    with SolverSession() as s:
        r = check_sat(s, f)
    if r.is_sat:
        model = dict(r.model)
        for v in free_vars(f) - set(model):
            model[v] = random_value(rng, v)
        assert evaluate(f, model) is True
    else:
        assert r.is_unsat
