"""Flow engine: effective probabilities, critical path, security damage.

The security damage of a portfolio is the success probability of the most
probable attack: the maximum over source-to-target paths of the product of
effective edge flows.  The critical path is the path achieving it, found as
a shortest path under the weight -ln(flow) (zero-flow edges dropped), with
ties broken first by fewer edges, then by the lexicographically smallest
edge-id sequence, so the highlighted path is deterministic.

All functions are pure; inputs are immutable and may be shared freely
across threads.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from . import kernels
from .compiled import CompiledGraph, compile_graph
from .model import AttackGraph, NodeKind, Portfolio, check_portfolio


@dataclass(frozen=True)
class FlowReport:
    """Everything the analyst sees for one portfolio on one graph."""

    effective_flows: Mapping[str, float]
    critical_path: tuple[str, ...]
    damage: float
    direct_cost: float
    indirect_cost: float
    target_reached: str | None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "effective_flows": dict(self.effective_flows),
            "critical_path": list(self.critical_path),
            "damage": self.damage,
            "direct_cost": self.direct_cost,
            "indirect_cost": self.indirect_cost,
            "target_reached": self.target_reached,
        }


def apply_portfolio(g: AttackGraph, p: Portfolio) -> dict[str, float]:
    """Effective flow per edge: default flow times every active factor.

    Active control levels compose multiplicatively; a level that lists no
    factor for an edge leaves it untouched.
    """
    check_portfolio(g, p)
    cg = compile_graph(g)
    return effective_flows(cg, cg.selection_vector(p))


def effective_flows(cg: CompiledGraph, sels: np.ndarray) -> dict[str, float]:
    flows = kernels.portfolio_flows(cg.default_flow, cg.factors, sels.reshape(1, -1))[0]
    return {eid: float(f) for eid, f in zip(cg.edge_ids, flows)}


def critical_path(g: AttackGraph, flows: Mapping[str, float]) -> tuple[list[str], float]:
    """Most probable source-to-target path under the given flows.

    Returns ``(edge ids, damage)``; ``([], 0.0)`` when no target is
    reachable through positive flows.  Paths are simple by construction
    (revisiting a node can only shrink a product of factors <= 1).
    """
    missing = [e.id for e in g.edges if e.id not in flows]
    if missing:
        raise ValueError(f"flows missing for edges: {missing}")

    adjacency: dict[str, list[tuple[float, str, str]]] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        flow = flows[e.id]
        if flow > 0.0:
            adjacency[e.from_node].append((-math.log(flow), e.to_node, e.id))

    source = g.source().id
    target_ids = {n.id for n in g.nodes if n.kind is NodeKind.TARGET}

    # Dijkstra labels are (cost, hops, edge-id sequence); the tuple order is
    # exactly the tie-break order and never decreases along an edge, so the
    # first pop of a node carries its best label.
    start: tuple[float, int, tuple[str, ...]] = (0.0, 0, ())
    heap: list[tuple[float, int, tuple[str, ...], str]] = [(*start, source)]
    settled: dict[str, tuple[float, int, tuple[str, ...]]] = {}
    while heap:
        cost, hops, path, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled[node] = (cost, hops, path)
        for weight, nxt, edge_id in adjacency[node]:
            if nxt not in settled:
                heapq.heappush(heap, (cost + weight, hops + 1, path + (edge_id,), nxt))

    best: tuple[float, int, tuple[str, ...]] | None = None
    for t in sorted(target_ids):
        label = settled.get(t)
        if label is not None and (best is None or label < best):
            best = label
    if best is None or not best[2]:
        return [], 0.0
    path = list(best[2])
    damage = 1.0
    for edge_id in path:
        damage *= flows[edge_id]
    return path, damage


def flow_report(g: AttackGraph, p: Portfolio) -> FlowReport:
    """Combine effective flows, critical path, and portfolio costs."""
    check_portfolio(g, p)
    cg = compile_graph(g)
    return compiled_flow_report(cg, p)


def compiled_flow_report(cg: CompiledGraph, p: Portfolio) -> FlowReport:
    g = cg.graph
    flows = effective_flows(cg, cg.selection_vector(p))
    path, damage = critical_path(g, flows)
    direct = 0.0
    indirect = 0.0
    for group in g.controls:
        level = p.selections[group.id]
        if level > 0:
            direct += group.levels[level - 1].direct_cost
            indirect += group.levels[level - 1].indirect_cost
    target = g.edge_map()[path[-1]].to_node if path else None
    return FlowReport(
        effective_flows=flows,
        critical_path=tuple(path),
        damage=damage,
        direct_cost=direct,
        indirect_cost=indirect,
        target_reached=target,
    )
