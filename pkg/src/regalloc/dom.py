"""Dominators, dominance frontiers, and natural-loop nesting depths.

All functions work on a plain digraph given as an entry node and a
successor map.  Nodes unreachable from the entry are ignored.
"""

from __future__ import annotations


def _reachable(entry, succs) -> list:
    seen = [entry]
    seen_set = {entry}
    i = 0
    while i < len(seen):
        for s in succs.get(seen[i], ()):
            if s not in seen_set:
                seen_set.add(s)
                seen.append(s)
        i += 1
    return seen


def _rpo(entry, succs) -> list:
    order = []
    state: dict = {}

    def visit(node):
        stack = [(node, iter(succs.get(node, ())))]
        state[node] = 1
        while stack:
            cur, it = stack[-1]
            advanced = False
            for s in it:
                if s not in state:
                    state[s] = 1
                    stack.append((s, iter(succs.get(s, ()))))
                    advanced = True
                    break
            if not advanced:
                order.append(cur)
                stack.pop()

    visit(entry)
    return list(reversed(order))


def dominators(entry, succs) -> dict:
    """Map each reachable node to the set of its dominators (iterative)."""
    nodes = _reachable(entry, succs)
    preds: dict = {n: [] for n in nodes}
    for n in nodes:
        for s in succs.get(n, ()):
            if s in preds:
                preds[s].append(n)
    order = _rpo(entry, succs)
    universe = set(nodes)
    doms = {n: set(universe) for n in nodes}
    doms[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for n in order:
            if n == entry:
                continue
            ps = preds[n]
            new = set.intersection(*(doms[p] for p in ps)) if ps else set()
            new.add(n)
            if new != doms[n]:
                doms[n] = new
                changed = True
    return doms


def strictly_dominates(doms: dict, a, b) -> bool:
    return a != b and a in doms[b]


def dominance_frontier(entry, succs) -> dict:
    """DF(B) = {X : B dominates a pred of X and does not strictly dominate X}."""
    nodes = _reachable(entry, succs)
    doms = dominators(entry, succs)
    preds: dict = {n: [] for n in nodes}
    for n in nodes:
        for s in succs.get(n, ()):
            if s in preds:
                preds[s].append(n)
    df: dict = {n: set() for n in nodes}
    for x in nodes:
        for p in preds[x]:
            for b in doms[p]:
                if not strictly_dominates(doms, b, x):
                    df[b].add(x)
    return df


def natural_loops(entry, succs) -> list[tuple[object, set]]:
    """Return (header, body) per back edge t->h with h dominating t.

    The body is every node that reaches t without passing through h,
    plus h itself.
    """
    nodes = set(_reachable(entry, succs))
    doms = dominators(entry, succs)
    preds: dict = {n: [] for n in nodes}
    for n in nodes:
        for s in succs.get(n, ()):
            if s in preds:
                preds[s].append(n)
    loops = []
    for t in nodes:
        for h in succs.get(t, ()):
            if h in nodes and h in doms[t]:
                body = {h, t}
                work = [t]
                while work:
                    n = work.pop()
                    if n == h:
                        continue
                    for p in preds[n]:
                        if p not in body:
                            body.add(p)
                            work.append(p)
                loops.append((h, body))
    return loops


def loop_depths(entry, succs) -> dict:
    """Nesting depth per node: number of distinct loops containing it.

    Loops sharing a header (multiple back edges) count once.
    """
    merged: dict = {}
    for h, body in natural_loops(entry, succs):
        merged.setdefault(h, set()).update(body)
    depths = {n: 0 for n in _reachable(entry, succs)}
    for body in merged.values():
        for n in body:
            depths[n] += 1
    return depths
