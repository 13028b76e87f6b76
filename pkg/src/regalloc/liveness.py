"""Live ranges, access points, use distances, spill weights, pressure.

A register's live range is the convex hull, in global program-point
order, of all points where it is accessed or where its value is live
into an instruction (which extends ranges across loop back edges).
Ranges are closed intervals: a point where one value dies and another is
defined counts as overlap, so a definition conflicts with everything
live through its instruction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mir import MachineFunction, PReg, VReg


@dataclass(frozen=True)
class LivenessInfo:
    # vreg -> [first, last] program point of its live range
    ranges: dict[str, tuple[int, int]]
    # vreg -> ordered access points (defs and uses, including the def)
    uses: dict[str, tuple[int, ...]]
    # vreg -> gaps between successive access points
    distances: dict[str, tuple[int, ...]]
    # vreg -> sum of 10**loop_depth over access points
    weights: dict[str, int]
    # per-access weight, aligned with `uses`
    use_weights: dict[str, tuple[int, ...]]
    # physical register -> points where it is referenced or clobbered
    phys_points: dict[str, tuple[int, ...]]
    # maximum number of simultaneously overlapping vreg ranges
    pressure: int

    def overlap(self, a: str, b: str) -> bool:
        la, lb = self.ranges[a], self.ranges[b]
        return la[0] <= lb[1] and lb[0] <= la[1]

    def live_range(self, v: str) -> tuple[int, int]:
        return self.ranges[v]


def compute_liveness(fn: MachineFunction) -> LivenessInfo:
    access: dict[str, list[int]] = {}
    phys: dict[str, set[int]] = {}
    depth_at: dict[int, int] = {}

    first_point = None
    for ins in fn.instructions():
        if first_point is None:
            first_point = ins.point
        depth_at[ins.point] = ins.loop_depth
        for op in ins.operands():
            if isinstance(op, VReg):
                pts = access.setdefault(op.name, [])
                if not pts or pts[-1] != ins.point:
                    pts.append(ins.point)
            elif isinstance(op, PReg):
                phys.setdefault(op.id, set()).add(ins.point)
        for c in ins.clobbers:
            phys.setdefault(c.id, set()).add(ins.point)

    # parameters carry an implicit definition at the first program point
    for p in fn.params:
        if first_point is None:
            break
        if isinstance(p, VReg):
            pts = access.setdefault(p.name, [])
            if not pts or pts[0] != first_point:
                pts.insert(0, first_point)
        elif isinstance(p, PReg):
            phys.setdefault(p.id, set()).add(first_point)

    live_points = _live_in_points(fn)

    ranges: dict[str, tuple[int, int]] = {}
    uses: dict[str, tuple[int, ...]] = {}
    distances: dict[str, tuple[int, ...]] = {}
    weights: dict[str, int] = {}
    use_weights: dict[str, tuple[int, ...]] = {}
    for v, pts in access.items():
        lo, hi = pts[0], pts[-1]
        extra = live_points.get(v)
        if extra:
            lo = min(lo, min(extra))
            hi = max(hi, max(extra))
        ranges[v] = (lo, hi)
        uses[v] = tuple(pts)
        distances[v] = tuple(b - a for a, b in zip(pts, pts[1:]))
        per = tuple(10 ** depth_at[k] for k in pts)
        use_weights[v] = per
        weights[v] = sum(per)

    pressure = 0
    for p in depth_at:
        here = sum(1 for lo, hi in ranges.values() if lo <= p <= hi)
        pressure = max(pressure, here)

    return LivenessInfo(
        ranges=ranges,
        uses=uses,
        distances=distances,
        weights=weights,
        use_weights=use_weights,
        phys_points={r: tuple(sorted(pts)) for r, pts in phys.items()},
        pressure=pressure,
    )


def register_pressure(fn: MachineFunction, liveness: LivenessInfo | None = None) -> int:
    """Maximum number of overlapping live ranges across all program points."""
    if liveness is None:
        liveness = compute_liveness(fn)
    return liveness.pressure


def _live_in_points(fn: MachineFunction) -> dict[str, set[int]]:
    """Points where each vreg is live into the instruction (dataflow)."""
    blocks = {b.label: b for b in fn.blocks}
    labels = [b.label for b in fn.blocks]
    succs = fn.successors()

    gen: dict[str, set[str]] = {}
    kill: dict[str, set[str]] = {}
    for label in labels:
        g: set[str] = set()
        k: set[str] = set()
        for ins in blocks[label].instrs:
            for u in ins.vreg_uses():
                if u.name not in k:
                    g.add(u.name)
            for d in ins.vreg_defs():
                k.add(d.name)
        gen[label] = g
        kill[label] = k

    live_in: dict[str, set[str]] = {l: set() for l in labels}
    live_out: dict[str, set[str]] = {l: set() for l in labels}
    changed = True
    while changed:
        changed = False
        for label in reversed(labels):
            out = set()
            for s in succs[label]:
                out |= live_in[s]
            inn = gen[label] | (out - kill[label])
            if out != live_out[label] or inn != live_in[label]:
                live_out[label] = out
                live_in[label] = inn
                changed = True

    points: dict[str, set[int]] = {}
    for label in labels:
        live = set(live_out[label])
        for ins in reversed(blocks[label].instrs):
            live -= {d.name for d in ins.vreg_defs()}
            live |= {u.name for u in ins.vreg_uses()}
            for v in live:
                points.setdefault(v, set()).add(ins.point)
    return points
