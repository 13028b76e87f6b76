"""Interference graph construction and per-register legality.

Vertices are the function's virtual registers plus any pre-assigned
physical registers it references (explicitly or through clobbers).  An
edge joins two vertices whose live ranges overlap; only virtual-virtual
and virtual-physical edges are stored.  Physical vertices are treated as
permanently colored with themselves.

``legal_registers`` evaluates the three constraint families separately
and intersects them:

  * type:        candidates are the allocatable registers of the
                 register's type,
  * congruence:  a candidate is excluded if any interference neighbour
                 holds a register of the same congruence class,
  * interference: a candidate is excluded if any neighbour holds exactly
                 that register.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .liveness import LivenessInfo
from .machine import MachineDescription, aliases
from .mir import MachineFunction

NOT_VISITED = "not_visited"
SPILL = "spill"
COLORED = "colored"


class GraphError(Exception):
    pass


@dataclass(frozen=True)
class Vertex:
    id: str
    is_phys: bool
    type_id: str | None
    weight: int
    range: tuple[int, int] | None
    points: tuple[int, ...]


@dataclass
class InterferenceGraph:
    fn: MachineFunction
    liveness: LivenessInfo
    md: MachineDescription | None
    vertices: tuple[Vertex, ...]
    edges: frozenset[tuple[str, str]]
    adj: dict[str, tuple[str, ...]]
    annotations: dict[str, str] = field(default_factory=dict)

    def vertex(self, vid: str) -> Vertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise GraphError(f"no vertex {vid!r}")

    def vreg_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.vertices if not v.is_phys)

    def phys_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.vertices if v.is_phys)

    def neighbors(self, vid: str) -> tuple[str, ...]:
        return self.adj.get(vid, ())

    def degree(self, vid: str) -> int:
        return len(self.adj.get(vid, ()))

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges


def build_interference_graph(
    fn: MachineFunction,
    liveness: LivenessInfo,
    md: MachineDescription | None = None,
) -> InterferenceGraph:
    """Build the graph; vertices ordered by first definition point."""
    vregs = sorted(liveness.ranges, key=lambda v: (liveness.ranges[v][0], v))
    phys = sorted(liveness.phys_points, key=lambda r: (liveness.phys_points[r][0], r))

    vertices = [
        Vertex(
            id=v,
            is_phys=False,
            type_id=fn.vreg_types.get(v),
            weight=liveness.weights[v],
            range=liveness.ranges[v],
            points=liveness.uses[v],
        )
        for v in vregs
    ]
    vertices += [
        Vertex(
            id=r,
            is_phys=True,
            type_id=md.registers[r].type_id if md and r in md.registers else None,
            weight=0,
            range=None,
            points=liveness.phys_points[r],
        )
        for r in phys
    ]

    edges: set[tuple[str, str]] = set()
    for i, a in enumerate(vregs):
        lo_a, hi_a = liveness.ranges[a]
        for b in vregs[i + 1:]:
            lo_b, hi_b = liveness.ranges[b]
            if lo_a <= hi_b and lo_b <= hi_a:
                edges.add((a, b))
        for r in phys:
            if any(lo_a <= p <= hi_a for p in liveness.phys_points[r]):
                edges.add((a, r))

    adj: dict[str, list[str]] = {v.id: [] for v in vertices}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)

    annotations = {v: NOT_VISITED for v in vregs}
    annotations.update({r: COLORED for r in phys})

    return InterferenceGraph(
        fn=fn,
        liveness=liveness,
        md=md,
        vertices=tuple(vertices),
        edges=frozenset(edges),
        adj={k: tuple(sorted(vs)) for k, vs in adj.items()},
        annotations=annotations,
    )


@dataclass(frozen=True)
class ChiSets:
    chi_T: tuple[str, ...]
    chi_C: tuple[str, ...]
    chi_I: tuple[str, ...]
    chi: tuple[str, ...]


def legal_registers(
    g: InterferenceGraph,
    md: MachineDescription,
    state,
    v: str,
) -> ChiSets:
    """Candidate registers for an uncolored vreg under the current state.

    ``state`` is either a mapping vreg -> register id of committed
    assignments or an object exposing one as ``.colors``.  The returned
    sets preserve the machine's allocation-preference order and may be
    empty (which forces a spill).
    """
    colors = getattr(state, "colors", state)
    vert = g.vertex(v)
    if vert.is_phys:
        raise GraphError(f"{v!r} is a pre-assigned physical register")
    if v in colors:
        raise GraphError(f"%{v} already has a register")

    chi_t = [r.id for r in md.allocatable(vert.type_id)]

    held: set[str] = set()
    for n in g.neighbors(v):
        nv = g.vertex(n)
        if nv.is_phys:
            held.add(n)
        elif n in colors:
            held.add(colors[n])

    held_classes = {md.congruence_of[r] for r in held}
    chi_c = tuple(r for r in chi_t if md.congruence_of[r] not in held_classes)
    chi_i = tuple(r for r in chi_t if r not in held)
    chi_c_set, chi_i_set = set(chi_c), set(chi_i)
    chi = tuple(r for r in chi_t if r in chi_c_set and r in chi_i_set)
    return ChiSets(chi_T=tuple(chi_t), chi_C=chi_c, chi_I=chi_i, chi=chi)


def dump_graph(g: InterferenceGraph) -> str:
    """Structured text rendering of vertices, edges, and weights."""
    lines = [f"graph {g.fn.name}"]
    lines.append(f"vertices {len(g.vertices)}")
    for v in g.vertices:
        kind = "phys" if v.is_phys else "vreg"
        rng = f"[{v.range[0]},{v.range[1]}]" if v.range else "-"
        lines.append(
            f"  {v.id} kind={kind} type={v.type_id or '-'} weight={v.weight} "
            f"range={rng} points={','.join(map(str, v.points))}"
        )
    ordered = sorted(tuple(sorted(e)) for e in g.edges)
    lines.append(f"edges {len(ordered)}")
    for a, b in ordered:
        lines.append(f"  {a} -- {b}")
    return "\n".join(lines) + "\n"
