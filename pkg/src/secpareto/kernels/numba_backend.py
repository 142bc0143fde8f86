"""Numba-compiled kernels; semantics mirror numpy_backend exactly.

The loops release the GIL so the solver's thread pool scales on real cores.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True, nogil=True)
def portfolio_flows(default_flow, factors, sels):
    b = sels.shape[0]
    m = default_flow.shape[0]
    n_groups = factors.shape[0]
    flows = np.empty((b, m), dtype=np.float64)
    for i in range(b):
        for e in range(m):
            flows[i, e] = default_flow[e]
        for g in range(n_groups):
            level = sels[i, g]
            for e in range(m):
                flows[i, e] *= factors[g, level, e]
    return flows


@njit(cache=True, nogil=True)
def batch_damage(flows, edge_from, edge_to, n_nodes, source, targets):
    b, m = flows.shape
    out = np.zeros(b, dtype=np.float64)
    val = np.zeros(n_nodes, dtype=np.float64)
    new = np.zeros(n_nodes, dtype=np.float64)
    for i in range(b):
        for v in range(n_nodes):
            val[v] = 0.0
        val[source] = 1.0
        for _ in range(n_nodes - 1):
            for v in range(n_nodes):
                new[v] = val[v]
            changed = False
            for e in range(m):
                cand = val[edge_from[e]] * flows[i, e]
                if cand > new[edge_to[e]]:
                    new[edge_to[e]] = cand
                    changed = True
            for v in range(n_nodes):
                val[v] = new[v]
            if not changed:
                break
        best = 0.0
        for t in targets:
            if val[t] > best:
                best = val[t]
        out[i] = best
    return out
