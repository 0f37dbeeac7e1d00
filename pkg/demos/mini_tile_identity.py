"""Configure the three-stage mini tile for the identity stencil, then
squeeze the aggregator's configuration down with the MOP_H objectives.

    python3 demos/mini_tile_identity.py [--width 2 --height 2]
"""

from __future__ import annotations

import argparse
import time

from cfgsmith.memtile import (
    build_mini_tile,
    gen_identity_trace,
    min_latency,
    render_configuration,
    tile_problem,
)
from cfgsmith.modular import AbductStrategy, solve_modular
from cfgsmith.optimize import at_step, build_objectives, solve_lex
from cfgsmith.smt import SolverSession
from cfgsmith.terms import timed
from cfgsmith.unroll import extract_configuration


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=2)
    ap.add_argument("--height", type=int, default=2)
    ap.add_argument("--skip-optimize", action="store_true")
    args = ap.parse_args(argv)

    tile = build_mini_tile()
    stream = list(range(1, args.width * args.height + 1))
    lat = min_latency(stream, stream, tile.params)
    tp = tile_problem(tile, gen_identity_trace(args.width, args.height, lat))
    print(f"latency {lat}, k = {tp.plan.k}, {len(tile.parent.vars)} variables in the composed tile")

    t0 = time.monotonic()
    res = solve_modular(tp.decomposition, AbductStrategy(), ["agg", "tb", "sram"])
    print(f"modular solve: {res.status}, monolithic re-check {res.recheck} ({time.monotonic() - t0:.1f} s)")
    for st in res.stages:
        print(f"  {st.name:5s} {st.status:6s} {st.elapsed:6.2f} s")
    if not res.is_sat:
        return 1
    # any satisfying configuration will do here, so the numbers look arbitrary
    print(render_configuration(res.configuration, tile.groups()))

    if args.skip_optimize:
        return 0
    agg = tp.decomposition.parts["agg"]
    objs = at_step(build_objectives(tile.groups("agg")), 0)
    t0 = time.monotonic()
    with SolverSession() as s:
        opt = solve_lex(s, agg.formula(), objs, query_vars=[timed(v, 0) for v in agg.v_conf])
    print(f"aggregator MOP_H ({time.monotonic() - t0:.1f} s):")
    for name, v in zip(opt.names, opt.values):
        print(f"  {name} = {v}")
    print(render_configuration(extract_configuration(opt.model, agg), tile.groups("agg")))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
