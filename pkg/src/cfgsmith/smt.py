"""SMT-LIB v2 rendering and an incremental session with an external solver.

The solver runs as a child process reading commands on stdin.  Any
QF_BV-capable solver that speaks SMT-LIB v2 interactively works; the
default is ``z3 -in -smt2``.
"""

from __future__ import annotations

import logging
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from cfgsmith import sexpr
from cfgsmith.terms import (
    Term,
    conjuncts,
    free_vars,
    iter_dag,
    untimed,
)

log = logging.getLogger(__name__)

DEFAULT_SOLVER = "z3 -in -smt2"
DEFAULT_TIMEOUT_S = 4000.0


class SolverError(RuntimeError):
    pass


class SolverCrash(SolverError):
    pass


class SolverProtocolError(SolverError):
    pass


class SolverTimeout(SolverError):
    pass


# -- rendering --------------------------------------------------------------


def const_to_smt2(value, sort) -> str:
    if sort.is_bool:
        return "true" if value else "false"
    w = sort.width
    if w % 4 == 0:
        return "#x" + format(value, f"0{w // 4}x")
    return "#b" + format(value, f"0{w}b")


def sort_to_smt2(sort) -> str:
    return str(sort)


def _head(n: Term) -> str:
    if n.op == "extract":
        hi, lo = n.payload
        return f"(_ extract {hi} {lo})"
    return n.op


def term_to_smt2(t: Term, lets: bool = True) -> str:
    """Render one term.  With ``lets``, subterms used more than once are let-bound."""
    nodes = list(iter_dag(t))
    shared: set[int] = set()
    if lets:
        refs: dict[int, int] = {}
        for n in nodes:
            for a in n.args:
                refs[id(a)] = refs.get(id(a), 0) + 1
        shared = {id(n) for n in nodes if n.args and refs.get(id(n), 0) > 1}

    text: dict[int, str] = {}
    level: dict[int, int] = {}
    bindings: list[tuple[int, str, str]] = []
    for n in nodes:
        if n.op == "var":
            text[id(n)] = sexpr.quote_symbol(n.name)
            level[id(n)] = 0
            continue
        if n.op == "const":
            text[id(n)] = const_to_smt2(n.payload, n.sort)
            level[id(n)] = 0
            continue
        body = "(" + _head(n) + " " + " ".join(text[id(a)] for a in n.args) + ")"
        lv = max(level[id(a)] for a in n.args)
        if id(n) in shared:
            name = f"_l{len(bindings)}"
            bindings.append((lv, name, body))
            text[id(n)] = name
            level[id(n)] = lv + 1
        else:
            text[id(n)] = body
            level[id(n)] = lv
    out = text[id(t)]
    if not bindings:
        return out
    groups: dict[int, list] = {}
    for lv, name, body in bindings:
        groups.setdefault(lv, []).append(f"({name} {body})")
    for lv in sorted(groups, reverse=True):
        out = f"(let ({' '.join(groups[lv])}) {out})"
    return out


def _var_key(v: Term):
    base, step = untimed(v.name)
    return (base, -1 if step is None else step, v.name)


def declarations(vs: Iterable[Term]) -> list[str]:
    return [
        f"(declare-const {sexpr.quote_symbol(v.name)} {sort_to_smt2(v.sort)})"
        for v in sorted(vs, key=_var_key)
    ]


def serialize_smt2(f: Term, header: bool = True, check: bool = False) -> str:
    """A self-contained QF_BV script asserting ``f`` (one assert per top-level conjunct)."""
    lines = []
    if header:
        lines += ["(set-option :produce-models true)", "(set-logic QF_BV)"]
    lines += declarations(free_vars(f))
    parts = conjuncts(f) or [f]
    lines += [f"(assert {term_to_smt2(c)})" for c in parts]
    if check:
        lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# -- values -------------------------------------------------------------------


def parse_value(node, sort):
    """Decode a value s-expression returned by ``get-value``."""
    if isinstance(node, sexpr.Symbol):
        if node.name in ("true", "false"):
            return node.name == "true"
        raise SolverProtocolError(f"unexpected value symbol {node.name}")
    if isinstance(node, sexpr.Literal):
        s = node.text
        if s.startswith("#b"):
            v = int(s[2:], 2)
        elif s.startswith("#x"):
            v = int(s[2:], 16)
        elif s.isdigit():
            v = int(s)
        else:
            raise SolverProtocolError(f"unexpected value literal {s}")
        return bool(v) if sort.is_bool else v
    if isinstance(node, list) and len(node) == 3 and str(node[0]) == "_":
        name = str(node[1])
        if name.startswith("bv"):
            return int(name[2:])
    raise SolverProtocolError(f"cannot decode value {node!r}")


@dataclass
class SatResult:
    status: str
    model: dict | None = None
    elapsed: float = 0.0

    def __post_init__(self):
        if self.status not in ("sat", "unsat", "unknown"):
            raise ValueError(f"bad status {self.status}")
        if (self.model is not None) != (self.status == "sat"):
            raise ValueError("model present iff status is sat")

    @property
    def is_sat(self):
        return self.status == "sat"

    @property
    def is_unsat(self):
        return self.status == "unsat"


# -- solver session -------------------------------------------------------------


@dataclass
class SolverSession:
    """One live solver process with a frame-aware symbol table.

    Use as a context manager, or call :meth:`close`.
    """

    command: str = DEFAULT_SOLVER
    timeout_s: float = DEFAULT_TIMEOUT_S
    logic: str = "QF_BV"
    transcript: list | None = None
    _frames: list = field(default_factory=lambda: [{}], init=False, repr=False)
    _proc: subprocess.Popen | None = field(default=None, init=False, repr=False)
    _lines: queue.Queue = field(default_factory=queue.Queue, init=False, repr=False)
    _busy: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)
    n_checks: int = field(default=0, init=False)

    def __post_init__(self):
        self._start()

    def _start(self):
        argv = shlex.split(self.command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise SolverCrash(f"cannot start solver {argv[0]!r}: {e}") from e
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()
        self._frames = [{}]
        self._send("(set-option :print-success false)")
        self._send("(set-option :produce-models true)")
        self._send(f"(set-logic {self.logic})")

    @staticmethod
    def _pump(proc, q):
        for line in proc.stdout:
            q.put(line)
        q.put(None)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    @property
    def depth(self) -> int:
        return len(self._frames) - 1

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._proc.stdin.write("(exit)\n")
                self._proc.stdin.flush()
                self._proc.wait(timeout=2)
        except (OSError, subprocess.TimeoutExpired, ValueError):
            self._proc.kill()
        finally:
            self._proc = None

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def _send(self, cmd: str):
        if not self.alive:
            raise SolverCrash("solver process is not running")
        if self.transcript is not None:
            self.transcript.append(cmd)
        try:
            self._proc.stdin.write(cmd + "\n")
            self._proc.stdin.flush()
        except OSError as e:
            raise SolverCrash(f"solver pipe closed: {e}") from e

    def _read_response(self, deadline: float | None) -> str:
        buf = ""
        while True:
            remaining = None if deadline is None else deadline - time.monotonic()
            if remaining is not None and remaining <= 0:
                self._kill()
                raise SolverTimeout("solver did not answer before the deadline")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                self._kill()
                raise SolverTimeout("solver did not answer before the deadline") from None
            if line is None:
                raise SolverCrash(f"solver exited unexpectedly; partial output {buf!r}")
            if not line.strip() and not buf:
                continue
            buf += line
            if sexpr.paren_balance(buf) <= 0:
                text = buf.strip()
                if text.startswith("(error"):
                    raise SolverProtocolError(text)
                return text

    # -- incremental interface --

    def declare(self, vs: Iterable[Term]):
        known = {}
        for fr in self._frames:
            known.update(fr)
        new = []
        for v in vs:
            prev = known.get(v.name)
            if prev is None:
                new.append(v)
                known[v.name] = v
            elif prev is not v:
                raise SolverProtocolError(f"symbol {v.name} redeclared with sort {v.sort}")
        for line in declarations(new):
            self._send(line)
        for v in new:
            self._frames[-1][v.name] = v

    def assert_formula(self, f: Term):
        if not f.sort.is_bool:
            raise ValueError("can only assert Bool terms")
        self.declare(free_vars(f))
        for c in conjuncts(f) or [f]:
            self._send(f"(assert {term_to_smt2(c)})")

    def push(self):
        self._send("(push 1)")
        self._frames.append({})

    def pop(self):
        if self.depth < 1:
            raise SolverProtocolError("pop at assertion-stack depth 0")
        self._send("(pop 1)")
        self._frames.pop()

    def check(self, query_vars: Iterable[Term] = (), timeout_s: float | None = None) -> SatResult:
        """``check-sat``; on sat, fetch values of ``query_vars`` via ``get-value``."""
        with self._busy:
            limit = self.timeout_s if timeout_s is None else min(timeout_s, self.timeout_s)
            t0 = time.monotonic()
            deadline = t0 + limit if limit is not None else None
            self._send("(check-sat)")
            self.n_checks += 1
            ans = self._read_response(deadline)
            elapsed = time.monotonic() - t0
            if ans == "unsat":
                return SatResult("unsat", None, elapsed)
            if ans == "unknown":
                return SatResult("unknown", None, elapsed)
            if ans != "sat":
                raise SolverProtocolError(f"unexpected check-sat answer {ans!r}")
            qs = list(dict.fromkeys(query_vars))
            self.declare(qs)
            model = self._get_values(qs, deadline) if qs else {}
            return SatResult("sat", model, time.monotonic() - t0)

    def _get_values(self, qs: list[Term], deadline) -> dict:
        by_name = {v.name: v for v in qs}
        model = {}
        chunk = 512
        for i in range(0, len(qs), chunk):
            part = qs[i : i + chunk]
            self._send("(get-value (" + " ".join(sexpr.quote_symbol(v.name) for v in part) + "))")
            resp = sexpr.parse_one(self._read_response(deadline))
            for pair in resp:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise SolverProtocolError(f"malformed get-value entry {pair!r}")
                key = pair[0]
                name = key.name if isinstance(key, sexpr.Symbol) else str(key)
                v = by_name.get(name)
                if v is None:
                    raise SolverProtocolError(f"get-value returned unknown symbol {name}")
                model[v] = parse_value(pair[1], v.sort)
        return model

    def restart(self):
        self._kill()
        self._start()


def check_sat(session: SolverSession, f: Term, query_vars: Iterable[Term] | None = None,
              timeout_s: float | None = None) -> SatResult:
    """Check ``f`` in a scratch frame; the session's assertions are left untouched."""
    if query_vars is None:
        query_vars = free_vars(f)
    session.push()
    try:
        session.assert_formula(f)
        return session.check(query_vars, timeout_s=timeout_s)
    finally:
        if session.alive:
            session.pop()


def pin(values: Mapping[Term, object]) -> Term:
    """Conjunction ``v = value`` over an assignment, in a stable order."""
    from cfgsmith.terms import And, Eq, value_const

    return And([Eq(v, value_const(values[v], v.sort)) for v in sorted(values, key=_var_key)])
