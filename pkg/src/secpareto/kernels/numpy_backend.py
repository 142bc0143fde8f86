"""Pure-numpy kernel implementations (the portable fallback).

Operation order is part of the contract: factors multiply in ascending
group order and the relaxation reads each round from a frozen snapshot,
so results are bit-identical to the numba backend.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def portfolio_flows(default_flow: np.ndarray, factors: np.ndarray, sels: np.ndarray) -> np.ndarray:
    b = sels.shape[0]
    flows = np.broadcast_to(default_flow, (b, default_flow.shape[0])).copy()
    for g in range(factors.shape[0]):
        flows *= factors[g, sels[:, g], :]
    return flows


def batch_damage(
    flows: np.ndarray,
    edge_from: np.ndarray,
    edge_to: np.ndarray,
    n_nodes: int,
    source: int,
    targets: np.ndarray,
) -> np.ndarray:
    b, m = flows.shape
    val = np.zeros((b, n_nodes), dtype=np.float64)
    val[:, source] = 1.0
    for _ in range(n_nodes - 1):
        new = val.copy()
        for e in range(m):
            np.maximum(new[:, edge_to[e]], val[:, edge_from[e]] * flows[:, e], out=new[:, edge_to[e]])
        if np.array_equal(new, val):
            break
        val = new
    if targets.shape[0] == 0:
        return np.zeros(b, dtype=np.float64)
    return val[:, targets].max(axis=1)
