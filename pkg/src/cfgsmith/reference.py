"""Plain-Python behaviour of the tile stages and an exhaustive search over
small generator configurations.

Nothing here touches terms or the solver: generators are expanded with
:func:`affine_sequence`, the stage is replayed with ordinary lists, and the
bus contents are compared with the planned schedule.  This is the
cross-check for what the solver-side optimiser reports.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from cfgsmith.memtile import AffineConfig, MiniTileParams, TilePlan, event_values, fire_times


def agg_bus(in_events, out_events, data_in: Sequence[int], k: int, p: MiniTileParams) -> list[tuple]:
    """Bus contents at steps 0..k for the aggregator.

    ``in_events``: (cycle, address) writes; ``out_events``: (cycle, line) transfers.
    A transfer reads the registers before the same cycle's write lands.
    """
    r = p.ratio
    regs = [0] * (2 * r)
    bus = tuple([0] * r)
    writes, moves = dict(in_events), dict(out_events)
    out = [bus]
    for c in range(k):
        nxt = bus
        if c in moves:
            line = moves[c] % 2
            nxt = tuple(regs[line * r:(line + 1) * r])
        if c in writes:
            regs[writes[c] % (2 * r)] = data_in[c]
        bus = nxt
        out.append(bus)
    return out


@dataclass(frozen=True)
class PairChoice:
    """One accessor/addressor pair configuration and its objective contributions."""

    dim: int
    ranges: tuple
    acc_strides: tuple
    acc_offset: int
    addr_strides: tuple
    addr_offset: int

    @property
    def range_product(self) -> int:
        out = 1
        for x in self.ranges[: self.dim]:
            out *= x
        return out


def _pair_options(horizon: int, addr_mod: int, p: MiniTileParams, max_range: int,
                  max_stride: int, max_acc_offset: int, max_addr_offset: int):
    """Distinct event lists of a pair, each with its cheapest configuration.

    Cost of a pair within one stage's objective vector is
    (dim, range product, stride sum, addressor offset), compared lexicographically.
    """
    cw = p.counter_width
    best: dict[tuple, tuple] = {}
    for dim in range(p.maxdim + 1):
        for ranges in itertools.product(range(1, max_range + 1), repeat=dim):
            pad = lambda t, fill: tuple(t) + (fill,) * (p.maxdim - dim)
            prod = 1
            for x in ranges:
                prod *= x
            fires: dict[tuple, tuple] = {}
            for strides in itertools.product(range(max_stride + 1), repeat=dim):
                for off in range(max_acc_offset + 1):
                    cfg = AffineConfig(dim, pad(ranges, 1), pad(strides, 0), off)
                    f = tuple(fire_times(cfg, horizon, cw))
                    key = (sum(strides), off)
                    if f not in fires or key < fires[f][0]:
                        fires[f] = (key, strides, off)
            lengths = {len(f) for f in fires}
            addrs: dict[int, dict[tuple, tuple]] = {n: {} for n in lengths}
            for strides in itertools.product(range(max_stride + 1), repeat=dim):
                for off in range(max_addr_offset + 1):
                    cfg = AffineConfig(dim, pad(ranges, 1), pad(strides, 0), off)
                    seq = event_values(cfg, max(lengths), cw)
                    key = (sum(strides), off)
                    for n in lengths:
                        a = tuple(x % addr_mod for x in seq[:n])
                        if a not in addrs[n] or key < addrs[n][a][0]:
                            addrs[n][a] = (key, strides, off)
            for f, (fkey, fs, fo) in fires.items():
                for a, (akey, as_, ao) in addrs[len(f)].items():
                    events = tuple(zip(f, a))
                    cost = (dim, prod, fkey[0] + akey[0], ao)
                    choice = PairChoice(dim, pad(ranges, 1), pad(fs, 0), fo, pad(as_, 0), ao)
                    if events not in best or cost < best[events][0]:
                        best[events] = (cost, choice)
    return best


def _stage_vector(write_cost, read_cost) -> tuple:
    """Objective vector in the optimiser's order for a stage with one write and one read pair."""
    dw, pw, sw, ow = write_cost
    dr, pr, sr, orr = read_cost
    return (2 * dw + 2 * dr, dw, dw, dr, dr, 2 * pw + 2 * pr, sw + sr, ow + orr)


@dataclass
class BruteForceResult:
    values: tuple
    write: PairChoice
    read: PairChoice
    candidates: tuple


def agg_brute_force(plan: TilePlan, p: MiniTileParams, max_range: int = 5, max_stride: int = 4,
                    max_acc_offset: int = 8, max_addr_offset: int = 7) -> BruteForceResult | None:
    """Lexicographic optimum of the aggregator's objectives over a bounded config box.

    Each objective is a sum of per-pair terms and the lexicographic order is
    translation invariant, so for a fixed write pair the best read pair is the
    cheapest valid one; write pairs are pruned against the cheapest read pair.
    """
    k = plan.k
    data_in = [plan.stream[i] if i < len(plan.stream) else 0 for i in range(k)]
    want = plan.a2s
    writes = _pair_options(k, 2 * p.ratio, p, max_range, max_stride, max_acc_offset, max_addr_offset)
    reads = _pair_options(k, 2, p, max_range, max_stride, max_acc_offset, max_addr_offset)
    ws = sorted(writes.items(), key=lambda kv: kv[1][0])
    rs = sorted(reads.items(), key=lambda kv: kv[1][0])
    best = None
    floor_r = rs[0][1][0] if rs else None
    for w_events, (w_cost, w_choice) in ws:
        if best is not None and _stage_vector(w_cost, floor_r) >= best[0]:
            break  # write pairs are sorted, so no later one can do better
        for r_events, (r_cost, r_choice) in rs:
            vec = _stage_vector(w_cost, r_cost)
            if best is not None and vec >= best[0]:
                break
            if agg_bus(w_events, r_events, data_in, k, p) == want:
                best = (vec, w_choice, r_choice)
                break
    if best is None:
        return None
    return BruteForceResult(best[0], best[1], best[2], (len(writes), len(reads)))
