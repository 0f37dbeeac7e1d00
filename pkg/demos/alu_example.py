"""The two-trace ALU walk-through.

One Bool knob picks add or subtract.  Feeding a=1 twice, the trace
x = 0,1,2 can only come from the adder, while x = 0,1,0 fits neither
setting.  Run from the repository root:

    python3 demos/alu_example.py
"""

from __future__ import annotations

from pathlib import Path

from cfgsmith import ConfigProblem, parse_sts, parse_trace
from cfgsmith.smt import SolverSession, check_sat, serialize_smt2
from cfgsmith.unroll import configuration_json, extract_configuration

DATA = Path(__file__).parent / "data"


def main():
    ts = parse_sts((DATA / "alu.sts").read_text())
    for name in ("alu_p1.json", "alu_p2.json"):
        trace = parse_trace((DATA / name).read_text(), ts)
        cp = ConfigProblem(ts, trace.k, trace)
        print(f"== {name}")
        print(serialize_smt2(cp.formula(), check=True), end="")
        with SolverSession() as s:
            r = check_sat(s, cp.formula())
        if r.is_sat:
            print("configurable:", configuration_json(extract_configuration(r.model, cp)), end="")
        else:
            print("not configurable")


if __name__ == "__main__":
    main()
