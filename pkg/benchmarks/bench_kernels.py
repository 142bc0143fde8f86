#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot kernels (effective-flow products and max-product damage
relaxation) over full portfolio enumerations of the bundled models, checks
that both backends return bit-identical arrays, and prints a comparison
table.  A full brute-force frontier timing per backend is included since
that is the end-to-end path the kernels exist for.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time
from importlib import resources

import numpy as np

from secpareto import load_graph
from secpareto.compiled import compile_graph, decode_selections
from secpareto.kernels import numba_backend, numpy_backend
from secpareto.solver import SolveOptions, pareto_frontier


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def bench_model(name: str, repeats: int) -> None:
    raw = resources.files("secpareto").joinpath(f"data/models/{name}.json").read_bytes()
    graph = load_graph(raw)
    cg = compile_graph(graph)
    space = cg.portfolio_space()
    sels = decode_selections(np.arange(space, dtype=np.int64), cg.choices)

    print(f"\n{name}: {cg.node_count} nodes, {cg.edge_count} edges, "
          f"{cg.group_count} groups, {space} portfolios")

    flows = {}
    damages = {}
    for label, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
        flows[label] = backend.portfolio_flows(cg.default_flow, cg.factors, sels)
        damages[label] = backend.batch_damage(
            flows[label], cg.edge_from, cg.edge_to, cg.node_count,
            cg.source_index, cg.target_indexes,
        )
    assert np.array_equal(flows["numpy"], flows["numba"]), "flow kernels disagree"
    assert np.array_equal(damages["numpy"], damages["numba"]), "damage kernels disagree"
    print("  backends agree bit-for-bit on all "
          f"{space} damages (max {damages['numpy'].max():.6f})")

    rows = []
    for label, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
        t_flows = _best_of(
            lambda b=backend: b.portfolio_flows(cg.default_flow, cg.factors, sels), repeats
        )
        t_damage = _best_of(
            lambda b=backend, f=flows[label]: b.batch_damage(
                f, cg.edge_from, cg.edge_to, cg.node_count,
                cg.source_index, cg.target_indexes,
            ),
            repeats,
        )
        rows.append((label, t_flows, t_damage))
    base_flows, base_damage = rows[0][1], rows[0][2]
    print(f"  {'backend':8} {'flows':>12} {'damage':>12} {'speedup':>9}")
    for label, t_flows, t_damage in rows:
        speedup = (base_flows + base_damage) / (t_flows + t_damage)
        print(f"  {label:8} {t_flows * 1e3:>10.2f}ms {t_damage * 1e3:>10.2f}ms {speedup:>8.1f}x")


def bench_frontier(repeats: int) -> None:
    raw = resources.files("secpareto").joinpath("data/models/ics.json").read_bytes()
    graph = load_graph(raw)
    print("\nics brute-force frontier, end to end:")
    from secpareto import kernels

    saved = (kernels.portfolio_flows, kernels.batch_damage)
    try:
        for label, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
            kernels.portfolio_flows = backend.portfolio_flows
            kernels.batch_damage = backend.batch_damage
            elapsed = _best_of(
                lambda: pareto_frontier(graph, SolveOptions(method="brute_force", workers=1)),
                repeats,
            )
            print(f"  {label:8} {elapsed * 1e3:>10.2f}ms")
    finally:
        kernels.portfolio_flows, kernels.batch_damage = saved


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    # compile outside the timings
    from secpareto import kernels

    kernels.warmup()
    numba_backend.portfolio_flows(
        np.array([1.0]), np.ones((1, 2, 1)), np.zeros((1, 1), dtype=np.int64)
    )
    numba_backend.batch_damage(
        np.ones((1, 1)), np.array([0], dtype=np.int64), np.array([1], dtype=np.int64),
        2, 0, np.array([1], dtype=np.int64),
    )

    for model in ("toy", "ics"):
        bench_model(model, args.repeats)
    bench_frontier(args.repeats)


if __name__ == "__main__":
    main()
