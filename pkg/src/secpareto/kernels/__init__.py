"""Kernel dispatch: numba-compiled hot loops with a pure-numpy fallback.

The backend is chosen once at import time from the ``SECPARETO_KERNEL``
environment variable: ``numba`` forces the JIT backend, ``numpy`` forces the
fallback, anything else (or unset) picks numba when it imports cleanly.
Both backends produce bit-identical results; ``benchmarks/bench_kernels.py``
times them against each other and checks that equality.

Kernels:

``portfolio_flows(default_flow, factors, sels) -> (B, m)``
    Effective flow per edge for a batch of selection vectors: the default
    flow multiplied by the selected level's factor of every group, in
    ascending group order.

``batch_damage(flows, edge_from, edge_to, n_nodes, source, targets) -> (B,)``
    Security damage per portfolio: the maximum over source-to-target paths
    of the product of effective flows, computed by max-product relaxation
    (round k knows the best walk of at most k edges; flows never exceed 1,
    so n-1 rounds cover every simple path and cycles cannot help).
"""

from __future__ import annotations

import os

from . import numpy_backend

_requested = os.environ.get("SECPARETO_KERNEL", "auto").lower()

if _requested == "numpy":
    _backend = numpy_backend
else:
    try:
        from . import numba_backend as _backend  # type: ignore[no-redef]
    except ImportError:
        if _requested == "numba":
            raise
        _backend = numpy_backend

BACKEND: str = getattr(_backend, "NAME")
portfolio_flows = _backend.portfolio_flows
batch_damage = _backend.batch_damage


def warmup() -> None:
    """Trigger JIT compilation so timed paths see steady-state speed."""
    import numpy as np

    flows = portfolio_flows(
        np.array([1.0, 0.5]),
        np.array([[[1.0, 1.0], [0.5, 1.0]]]),
        np.array([[1], [0]], dtype=np.int64),
    )
    batch_damage(
        flows,
        np.array([0, 1], dtype=np.int64),
        np.array([1, 2], dtype=np.int64),
        3,
        0,
        np.array([2], dtype=np.int64),
    )
