"""Array view of an attack graph, shared by the solvers and the flow engine.

Everything the hot loops need is packed into flat numpy arrays so the same
data feeds both kernel backends.  Group order follows the document; level
index 0 is the implicit off level (factor 1 everywhere, zero cost).  The
factor tensor is padded to the largest level count with ones / zero cost;
padded indices are never selectable because ``choices`` bounds enumeration.

Bit-reproducibility contract: any code computing effective flows, damages,
or portfolio costs must multiply factors and accumulate costs in ascending
group order, exactly like the kernels, so that independently computed values
compare equal, not merely close.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AttackGraph, NodeKind, Portfolio


@dataclass(frozen=True)
class CompiledGraph:
    graph: AttackGraph
    node_ids: tuple[str, ...]
    edge_ids: tuple[str, ...]
    group_ids: tuple[str, ...]
    source_index: int
    target_indexes: np.ndarray  # (t,) int64
    edge_from: np.ndarray  # (m,) int64
    edge_to: np.ndarray  # (m,) int64
    default_flow: np.ndarray  # (m,) float64
    factors: np.ndarray  # (G, Lmax, m) float64; [g, 0] is all ones
    direct_cost: np.ndarray  # (G, Lmax) float64
    indirect_cost: np.ndarray  # (G, Lmax) float64
    choices: np.ndarray  # (G,) int64, selectable levels per group incl. off

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.edge_ids)

    @property
    def group_count(self) -> int:
        return len(self.group_ids)

    def portfolio_space(self) -> int:
        """Total number of portfolios (product of per-group choices)."""
        total = 1
        for c in self.choices:
            total *= int(c)
        return total

    def selection_vector(self, p: Portfolio) -> np.ndarray:
        return np.array([p.selections[gid] for gid in self.group_ids], dtype=np.int64)

    def portfolio_of(self, selections: np.ndarray | tuple[int, ...]) -> Portfolio:
        return Portfolio({gid: int(s) for gid, s in zip(self.group_ids, selections)})

    def group_min_factors(self) -> np.ndarray:
        """(G, m) elementwise minimum factor over each group's levels.

        Mixing the per-edge best level of a group is at least as strong as
        any single level, so flows built from these minima lower-bound every
        concrete completion (the admissible bound of the best-first solver).
        """
        return self.factors.min(axis=1)


def compile_graph(g: AttackGraph) -> CompiledGraph:
    node_ids = tuple(n.id for n in g.nodes)
    edge_ids = tuple(e.id for e in g.edges)
    group_ids = tuple(c.id for c in g.controls)
    node_index = {nid: i for i, nid in enumerate(node_ids)}
    edge_index = {eid: i for i, eid in enumerate(edge_ids)}

    source_index = next(i for i, n in enumerate(g.nodes) if n.kind is NodeKind.SOURCE)
    target_indexes = np.array(
        [i for i, n in enumerate(g.nodes) if n.kind is NodeKind.TARGET], dtype=np.int64
    )
    edge_from = np.array([node_index[e.from_node] for e in g.edges], dtype=np.int64)
    edge_to = np.array([node_index[e.to_node] for e in g.edges], dtype=np.int64)
    default_flow = np.array([e.default_flow for e in g.edges], dtype=np.float64)

    m = len(edge_ids)
    lmax = max((c.level_count for c in g.controls), default=1)
    factors = np.ones((len(group_ids), lmax, m), dtype=np.float64)
    direct_cost = np.zeros((len(group_ids), lmax), dtype=np.float64)
    indirect_cost = np.zeros((len(group_ids), lmax), dtype=np.float64)
    choices = np.ones(len(group_ids), dtype=np.int64)
    for gi, control in enumerate(g.controls):
        choices[gi] = control.level_count
        for li, level in enumerate(control.levels, start=1):
            direct_cost[gi, li] = level.direct_cost
            indirect_cost[gi, li] = level.indirect_cost
            for edge_id, factor in level.flow_reduction.items():
                factors[gi, li, edge_index[edge_id]] = factor

    return CompiledGraph(
        graph=g,
        node_ids=node_ids,
        edge_ids=edge_ids,
        group_ids=group_ids,
        source_index=source_index,
        target_indexes=target_indexes,
        edge_from=edge_from,
        edge_to=edge_to,
        default_flow=default_flow,
        factors=factors,
        direct_cost=direct_cost,
        indirect_cost=indirect_cost,
        choices=choices,
    )


def decode_selections(indexes: np.ndarray, choices: np.ndarray) -> np.ndarray:
    """Mixed-radix decode of flat portfolio indexes into level selections.

    Group 0 is the most significant digit, so ascending flat index order is
    ascending lexicographic order of selection vectors.
    """
    out = np.empty((indexes.shape[0], choices.shape[0]), dtype=np.int64)
    rest = indexes.copy()
    for g in range(choices.shape[0] - 1, -1, -1):
        out[:, g] = rest % choices[g]
        rest //= choices[g]
    return out


def selection_costs(cg: CompiledGraph, sels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct and indirect cost vectors for a (B, G) selection batch.

    Accumulates in ascending group order to stay bit-identical with the
    scalar sums in the flow engine and the incremental sums in the solver.
    """
    b = sels.shape[0]
    direct = np.zeros(b, dtype=np.float64)
    indirect = np.zeros(b, dtype=np.float64)
    for g in range(cg.group_count):
        direct += cg.direct_cost[g, sels[:, g]]
        indirect += cg.indirect_cost[g, sels[:, g]]
    return direct, indirect
