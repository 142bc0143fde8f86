from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from secpareto import kernels
from secpareto.compiled import compile_graph, decode_selections
from secpareto.kernels import numpy_backend

from .generators import random_instance

numba_backend = pytest.importorskip("secpareto.kernels.numba_backend")


@pytest.mark.parametrize("seed", range(40))
def test_backends_bit_identical(seed):
    g = random_instance(seed)
    cg = compile_graph(g)
    space = cg.portfolio_space()
    sels = decode_selections(np.arange(0, min(space, 512), dtype=np.int64), cg.choices)

    flows_np = numpy_backend.portfolio_flows(cg.default_flow, cg.factors, sels)
    flows_nb = numba_backend.portfolio_flows(cg.default_flow, cg.factors, sels)
    assert np.array_equal(flows_np, flows_nb)

    damage_np = numpy_backend.batch_damage(
        flows_np, cg.edge_from, cg.edge_to, cg.node_count, cg.source_index, cg.target_indexes
    )
    damage_nb = numba_backend.batch_damage(
        flows_nb, cg.edge_from, cg.edge_to, cg.node_count, cg.source_index, cg.target_indexes
    )
    assert np.array_equal(damage_np, damage_nb)


def test_active_backend_is_numba_by_default():
    # the suite runs without SECPARETO_KERNEL, so the JIT backend should win
    if os.environ.get("SECPARETO_KERNEL", "auto") == "auto":
        assert kernels.BACKEND == "numba"


@pytest.mark.parametrize("requested", ["numpy", "numba"])
def test_env_flag_selects_backend(requested):
    code = "import secpareto.kernels as k; print(k.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**os.environ, "SECPARETO_KERNEL": requested},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == requested


def test_warmup_runs_clean():
    kernels.warmup()
