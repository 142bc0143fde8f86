"""Random model instances for oracle-equivalence and property tests."""

from __future__ import annotations

import random

from secpareto.model import (
    AttackGraph,
    ControlGroup,
    ControlLevel,
    EdgeDef,
    NodeKind,
    NodeRef,
    Portfolio,
)

FACTOR_GRID = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0]
COST_GRID = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0]


def random_instance(seed: int, monotone_levels: bool = False) -> AttackGraph:
    """A small random attack graph: <= 8 nodes, <= 12 edges, <= 5 groups.

    Cycles and parallel edges are allowed; targets may be unreachable.
    With ``monotone_levels`` every group's levels are nested (higher level
    at least as strong on every edge, at least as costly), which the lints
    and the monotonicity property expect.
    """
    rng = random.Random(seed)
    n = rng.randint(2, 8)
    target_count = rng.randint(1, min(2, n - 1))
    nodes = [NodeRef(id="n0", label="n0", kind=NodeKind.SOURCE)]
    for i in range(1, n):
        kind = NodeKind.TARGET if i >= n - target_count else NodeKind.NORMAL
        nodes.append(NodeRef(id=f"n{i}", label=f"n{i}", kind=kind))

    edges = []
    edge_count = rng.randint(1, 12)
    for k in range(edge_count):
        a = rng.randrange(n)
        b = rng.randrange(n)
        if a == b:
            b = (b + 1) % n
        # bias a few edges forward so targets are often reachable
        if rng.random() < 0.5 and a > b:
            a, b = b, a
        edges.append(
            EdgeDef(
                id=f"e{k:02d}",
                from_node=f"n{a}",
                to_node=f"n{b}",
                vulnerability=f"v{k}",
                default_flow=rng.choice([f for f in FACTOR_GRID if f > 0.0]),
            )
        )

    groups = []
    for gi in range(rng.randint(0, 5)):
        level_count = rng.randint(1, 3)
        touched = rng.sample(edges, k=min(len(edges), rng.randint(1, 3)))
        levels = []
        prev_factors = {e.id: 1.0 for e in touched}
        prev_direct = 0.0
        prev_indirect = 0.0
        for li in range(level_count):
            if monotone_levels:
                factors = {
                    eid: rng.choice([f for f in FACTOR_GRID if f <= prev_factors[eid]])
                    for eid in prev_factors
                }
                direct = prev_direct + rng.choice(COST_GRID)
                indirect = prev_indirect + rng.choice(COST_GRID)
                prev_factors = factors
                prev_direct, prev_indirect = direct, indirect
            else:
                factors = {e.id: rng.choice(FACTOR_GRID) for e in touched}
                direct = rng.choice(COST_GRID)
                indirect = rng.choice(COST_GRID)
            levels.append(
                ControlLevel(
                    name=f"level {li + 1}",
                    direct_cost=direct,
                    indirect_cost=indirect,
                    flow_reduction=factors,
                )
            )
        groups.append(
            ControlGroup(
                id=f"g{gi}",
                name=f"g{gi}",
                levels=tuple(levels),
                baseline_level=rng.randint(0, level_count),
            )
        )

    return AttackGraph(
        version=1,
        name=f"random-{seed}",
        nodes=tuple(nodes),
        edges=tuple(edges),
        controls=tuple(groups),
    )


def random_portfolio(g: AttackGraph, rng: random.Random) -> Portfolio:
    return Portfolio({c.id: rng.randint(0, len(c.levels)) for c in g.controls})
