"""Defender-side solvers: budget-constrained min-max and Pareto frontier.

Two interchangeable methods solve the same problems:

``brute_force``
    Chunked exhaustive enumeration of the portfolio space through the
    numeric kernels.  Refuses spaces larger than a configurable cap.

``best_first``
    Branch-and-bound over group-level assignments ordered by an admissible
    lower bound: the damage when every undecided group gets, per edge, its
    most-reducing factor for free.  That mixed-level relaxation can only
    undershoot any real completion, so no optimal portfolio is ever pruned.
    Bounds are additionally shrunk by a hair (1e-12 relative) so floating
    rounding cannot flip an exact-math "never overestimates" into an
    overestimate.

Both methods report bit-identical results.  Determinism is engineered, not
accidental: every portfolio's damage and costs are computed with one fixed
operation order, candidate portfolios are compared by the total order
(damage, direct, indirect, lexicographic selection vector), work is
partitioned independently of the worker count, and merges are commutative
minima, so worker count and scheduling cannot change any output.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import kernels
from .compiled import CompiledGraph, compile_graph, decode_selections, selection_costs
from .model import AttackGraph, Portfolio

DEFAULT_BRUTE_FORCE_CAP = 1 << 22
_CHUNK = 1 << 15
_BOUND_SLACK = 1.0 - 1e-12

BRUTE_FORCE = "brute_force"
BEST_FIRST = "best_first"
METHODS = (BRUTE_FORCE, BEST_FIRST)


class SearchSpaceError(Exception):
    """Portfolio space exceeds the exhaustive-enumeration cap."""

    def __init__(self, space: int, cap: int):
        self.space = space
        self.cap = cap
        self.required_cap = space
        super().__init__(
            f"portfolio space {space} exceeds brute-force cap {cap}; requires cap >= {space}"
        )


@dataclass(frozen=True)
class SolveOptions:
    method: str = BEST_FIRST
    workers: int | str = 1
    time_limit: float | None = None
    brute_force_cap: int = DEFAULT_BRUTE_FORCE_CAP

    def worker_count(self) -> int:
        if self.workers == "auto":
            return os.cpu_count() or 1
        count = int(self.workers)
        if count < 1:
            raise ValueError("workers must be >= 1")
        return count


@dataclass(frozen=True)
class ParetoPoint:
    portfolio: Portfolio
    direct_cost: float
    indirect_cost: float
    damage: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "portfolio": {"selections": dict(self.portfolio.selections)},
            "direct_cost": self.direct_cost,
            "indirect_cost": self.indirect_cost,
            "damage": self.damage,
        }


@dataclass(frozen=True)
class OptimizeResult:
    point: ParetoPoint
    proven: bool
    elapsed_ms: int


@dataclass(frozen=True)
class FrontierResult:
    points: tuple[ParetoPoint, ...]
    proven: bool
    elapsed_ms: int


@dataclass(frozen=True)
class PortfolioDiff:
    """Control changes needed to move from an anchor portfolio to another."""

    added: tuple[tuple[str, int], ...]
    removed: tuple[tuple[str, int], ...]
    changed: tuple[tuple[str, int, int], ...]

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.changed)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "added": [list(t) for t in self.added],
            "removed": [list(t) for t in self.removed],
            "changed": [list(t) for t in self.changed],
        }


@dataclass(frozen=True)
class NeighborhoodPoint:
    index: int
    offset: int
    point: ParetoPoint
    diff: PortfolioDiff

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "offset": self.offset,
            "point": self.point.to_json_dict(),
            "diff": self.diff.to_json_dict(),
        }


# A candidate portfolio evaluation, ordered by the global tie-break.
# (damage, direct, indirect, selections) for optimize;
# (damage, indirect, selections) within one cost bucket for frontiers.
_Candidate = tuple[float, float, float, tuple[int, ...]]


def _deadline(opts: SolveOptions) -> float | None:
    return None if opts.time_limit is None else time.monotonic() + opts.time_limit


def _expired(deadline: float | None) -> bool:
    return deadline is not None and time.monotonic() > deadline


def _chunk_ranges(space: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + _CHUNK, space)) for lo in range(0, space, _CHUNK)]


def _evaluate_batch(cg: CompiledGraph, sels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    flows = kernels.portfolio_flows(cg.default_flow, cg.factors, sels)
    damage = kernels.batch_damage(
        flows, cg.edge_from, cg.edge_to, cg.node_count, cg.source_index, cg.target_indexes
    )
    direct, indirect = selection_costs(cg, sels)
    return damage, direct, indirect


def _run_tasks(tasks: Sequence[Any], workers: int) -> list[Any]:
    """Run callables, returning results in task order regardless of workers."""
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Brute force


def _chunk_cost_minima(
    cg: CompiledGraph, lo: int, hi: int
) -> list[tuple[float, float, float, tuple[int, ...]]]:
    """Best (damage, indirect, selections) candidate per distinct direct cost."""
    sels = decode_selections(np.arange(lo, hi, dtype=np.int64), cg.choices)
    damage, direct, indirect = _evaluate_batch(cg, sels)
    keys = tuple(sels[:, g] for g in range(cg.group_count - 1, -1, -1)) + (indirect, damage, direct)
    order = np.lexsort(keys)
    sorted_direct = direct[order]
    _, first = np.unique(sorted_direct, return_index=True)
    out = []
    for pos in first:
        row = order[pos]
        out.append(
            (
                float(direct[row]),
                float(damage[row]),
                float(indirect[row]),
                tuple(int(s) for s in sels[row]),
            )
        )
    return out


def _merge_cost_minima(
    into: dict[float, tuple[float, float, tuple[int, ...]]],
    entries: Iterable[tuple[float, float, float, tuple[int, ...]]],
) -> None:
    for cost, damage, indirect, sel in entries:
        candidate = (damage, indirect, sel)
        cur = into.get(cost)
        if cur is None or candidate < cur:
            into[cost] = candidate


def _brute_force_cost_minima(
    cg: CompiledGraph, opts: SolveOptions
) -> tuple[dict[float, tuple[float, float, tuple[int, ...]]], bool]:
    space = cg.portfolio_space()
    if space > opts.brute_force_cap:
        raise SearchSpaceError(space, opts.brute_force_cap)
    deadline = _deadline(opts)
    minima: dict[float, tuple[float, float, tuple[int, ...]]] = {}
    proven = True

    def task(rng: tuple[int, int]):
        if _expired(deadline):
            return None
        return _chunk_cost_minima(cg, *rng)

    results = _run_tasks(
        [lambda rng=rng: task(rng) for rng in _chunk_ranges(space)], opts.worker_count()
    )
    for res in results:
        if res is None:
            proven = False
            continue
        _merge_cost_minima(minima, res)
    return minima, proven


def _frontier_from_minima(
    cg: CompiledGraph, minima: dict[float, tuple[float, float, tuple[int, ...]]]
) -> tuple[ParetoPoint, ...]:
    points = []
    best_damage = np.inf
    for cost in sorted(minima):
        damage, indirect, sel = minima[cost]
        if damage < best_damage:
            points.append(ParetoPoint(cg.portfolio_of(sel), cost, indirect, damage))
            best_damage = damage
    return tuple(points)


def _brute_force_optimize(
    cg: CompiledGraph, budget: float, opts: SolveOptions
) -> tuple[_Candidate, bool]:
    space = cg.portfolio_space()
    if space > opts.brute_force_cap:
        raise SearchSpaceError(space, opts.brute_force_cap)
    deadline = _deadline(opts)

    def task(rng: tuple[int, int]) -> tuple[bool, _Candidate | None]:
        if _expired(deadline):
            return True, None
        lo, hi = rng
        sels = decode_selections(np.arange(lo, hi, dtype=np.int64), cg.choices)
        damage, direct, indirect = _evaluate_batch(cg, sels)
        feasible = np.flatnonzero(direct <= budget)
        if feasible.shape[0] == 0:
            return False, None
        sub = feasible[
            np.lexsort(
                tuple(sels[feasible, g] for g in range(cg.group_count - 1, -1, -1))
                + (indirect[feasible], direct[feasible], damage[feasible])
            )[0]
        ]
        return False, (
            float(damage[sub]),
            float(direct[sub]),
            float(indirect[sub]),
            tuple(int(s) for s in sels[sub]),
        )

    proven = True
    results = _run_tasks(
        [lambda rng=rng: task(rng) for rng in _chunk_ranges(space)], opts.worker_count()
    )
    best: _Candidate | None = None
    for expired, res in results:
        if expired:
            proven = False
        if res is not None and (best is None or res < best):
            best = res
    if best is None:
        # The all-off portfolio costs nothing, so it is always feasible.
        best = _evaluate_single(cg, (0,) * cg.group_count)
    return best, proven


def _evaluate_single(cg: CompiledGraph, sel: tuple[int, ...]) -> _Candidate:
    sels = np.array([sel], dtype=np.int64)
    damage, direct, indirect = _evaluate_batch(cg, sels)
    return (float(damage[0]), float(direct[0]), float(indirect[0]), sel)


# ---------------------------------------------------------------------------
# Best-first branch and bound


class _IncumbentFrontier:
    """Non-dominated (cost, damage) pairs found so far, for subtree pruning.

    ``dominates_bound`` answers: does some found portfolio strictly dominate
    every completion of a subtree whose direct cost is at least ``cost_lb``
    and whose damage is at least ``damage_lb``?  Points that merely tie both
    coordinates never justify pruning, because equal-(cost, damage)
    portfolios still compete on indirect cost and selection order.
    """

    def __init__(self) -> None:
        self.costs: list[float] = []
        self.damages: list[float] = []
        self._lock = threading.Lock()

    def dominates_bound(self, cost_lb: float, damage_lb: float) -> bool:
        with self._lock:
            i = bisect.bisect_right(self.costs, cost_lb) - 1
            if i < 0:
                return False
            c, d = self.costs[i], self.damages[i]
        return d < damage_lb or (d == damage_lb and c < cost_lb)

    def insert(self, cost: float, damage: float) -> None:
        with self._lock:
            pos = bisect.bisect_left(self.costs, cost)
            if pos > 0 and self.damages[pos - 1] <= damage:
                return
            if pos < len(self.costs) and self.costs[pos] == cost:
                if self.damages[pos] <= damage:
                    return
                del self.costs[pos], self.damages[pos]
            self.costs.insert(pos, cost)
            self.damages.insert(pos, damage)
            while pos + 1 < len(self.costs) and self.damages[pos + 1] >= damage:
                del self.costs[pos + 1], self.damages[pos + 1]


@dataclass
class _SharedBest:
    """Lock-guarded best candidate for the budgeted search."""

    value: _Candidate
    lock: threading.Lock = field(default_factory=threading.Lock)

    def offer(self, candidate: _Candidate) -> None:
        with self.lock:
            if candidate < self.value:
                self.value = candidate

    def snapshot(self) -> _Candidate:
        with self.lock:
            return self.value


def _suffix_min_flows(cg: CompiledGraph) -> np.ndarray:
    """(G+1, m): product over groups >= g of the per-edge minimum factor."""
    g_count = cg.group_count
    out = np.ones((g_count + 1, cg.edge_count), dtype=np.float64)
    mins = cg.group_min_factors()
    for g in range(g_count - 1, -1, -1):
        out[g] = mins[g] * out[g + 1]
    return out


def _damage_of_flows(cg: CompiledGraph, flows: np.ndarray) -> np.ndarray:
    return kernels.batch_damage(
        flows, cg.edge_from, cg.edge_to, cg.node_count, cg.source_index, cg.target_indexes
    )


@dataclass(frozen=True)
class _Node:
    depth: int
    sel: tuple[int, ...]
    flows: np.ndarray  # default flow times decided factors
    direct: float
    indirect: float
    bound: float  # admissible damage lower bound, slack applied


def _expand(cg: CompiledGraph, node: _Node, suffix_min: np.ndarray) -> list[_Node]:
    g = node.depth
    n_levels = int(cg.choices[g])
    child_flows = node.flows[None, :] * cg.factors[g, :n_levels, :]
    bounds = _damage_of_flows(cg, child_flows * suffix_min[g + 1][None, :]) * _BOUND_SLACK
    children = []
    for level in range(n_levels):
        children.append(
            _Node(
                depth=g + 1,
                sel=node.sel + (level,),
                flows=child_flows[level],
                direct=node.direct + float(cg.direct_cost[g, level]),
                indirect=node.indirect + float(cg.indirect_cost[g, level]),
                bound=float(bounds[level]),
            )
        )
    return children


def _complete_candidates(cg: CompiledGraph, node: _Node) -> list[_Candidate]:
    """Evaluate all completions of a depth G-1 node exactly (no slack)."""
    g = node.depth
    n_levels = int(cg.choices[g])
    child_flows = node.flows[None, :] * cg.factors[g, :n_levels, :]
    damages = _damage_of_flows(cg, child_flows)
    out = []
    for level in range(n_levels):
        out.append(
            (
                float(damages[level]),
                node.direct + float(cg.direct_cost[g, level]),
                node.indirect + float(cg.indirect_cost[g, level]),
                node.sel + (level,),
            )
        )
    return out


def _root_node(cg: CompiledGraph, suffix_min: np.ndarray) -> _Node:
    flows = cg.default_flow.copy()
    bound = float(_damage_of_flows(cg, (flows * suffix_min[0])[None, :])[0]) * _BOUND_SLACK
    return _Node(depth=0, sel=(), flows=flows, direct=0.0, indirect=0.0, bound=bound)


def _partition_roots(cg: CompiledGraph, suffix_min: np.ndarray, parts: int) -> list[_Node]:
    """Split the root into enough subtrees to feed the worker pool.

    The split depth depends only on the graph, never on the worker count,
    so partitioning cannot perturb results.
    """
    nodes = [_root_node(cg, suffix_min)]
    while len(nodes) < parts:
        expandable = [n for n in nodes if n.depth < cg.group_count - 1]
        if not expandable:
            break
        node = min(expandable, key=lambda n: n.depth)
        nodes.remove(node)
        nodes.extend(_expand(cg, node, suffix_min))
    return nodes


def _best_first_optimize_worker(
    cg: CompiledGraph,
    roots: list[_Node],
    suffix_min: np.ndarray,
    budget: float,
    best: _SharedBest,
    deadline: float | None,
) -> bool:
    heap: list[tuple[float, int, _Node]] = []
    counter = itertools.count()
    for r in roots:
        if r.direct <= budget:
            heapq.heappush(heap, (r.bound, next(counter), r))
    proven = True
    while heap:
        if _expired(deadline):
            proven = False
            break
        bound, _, node = heapq.heappop(heap)
        best_now = best.snapshot()
        if bound > best_now[0]:
            break  # heap pops are bound-sorted; nothing better remains
        bound_key = (
            bound,
            node.direct,
            node.indirect,
            node.sel + (0,) * (cg.group_count - node.depth),
        )
        if bound_key >= best_now:
            continue
        if node.depth == cg.group_count - 1:
            for cand in _complete_candidates(cg, node):
                if cand[1] <= budget:
                    best.offer(cand)
            continue
        for child in _expand(cg, node, suffix_min):
            if child.direct <= budget:
                heapq.heappush(heap, (child.bound, next(counter), child))
    return proven


def _best_first_optimize(
    cg: CompiledGraph, budget: float, opts: SolveOptions
) -> tuple[_Candidate, bool]:
    deadline = _deadline(opts)
    best = _SharedBest(_evaluate_single(cg, (0,) * cg.group_count))
    if cg.group_count == 0:
        return best.snapshot(), True
    suffix_min = _suffix_min_flows(cg)
    workers = opts.worker_count()
    roots = _partition_roots(cg, suffix_min, parts=1 if workers == 1 else workers * 4)
    if workers == 1:
        proven = _best_first_optimize_worker(cg, roots, suffix_min, budget, best, deadline)
    else:
        shares = [roots[i::workers] for i in range(workers)]
        outcomes = _run_tasks(
            [
                (lambda share=share: _best_first_optimize_worker(cg, share, suffix_min, budget, best, deadline))
                for share in shares
                if share
            ],
            workers,
        )
        proven = all(outcomes)
    return best.snapshot(), proven


def _best_first_frontier_worker(
    cg: CompiledGraph,
    roots: list[_Node],
    suffix_min: np.ndarray,
    incumbents: _IncumbentFrontier,
    deadline: float | None,
) -> tuple[dict[float, tuple[float, float, tuple[int, ...]]], bool]:
    minima: dict[float, tuple[float, float, tuple[int, ...]]] = {}
    heap: list[tuple[float, int, _Node]] = []
    counter = itertools.count()
    for r in roots:
        heapq.heappush(heap, (r.bound, next(counter), r))
    proven = True
    while heap:
        if _expired(deadline):
            proven = False
            break
        bound, _, node = heapq.heappop(heap)
        if incumbents.dominates_bound(node.direct, bound):
            continue
        if node.depth == cg.group_count - 1:
            for damage, direct, indirect, sel in _complete_candidates(cg, node):
                _merge_cost_minima(minima, [(direct, damage, indirect, sel)])
                incumbents.insert(direct, damage)
            continue
        for child in _expand(cg, node, suffix_min):
            heapq.heappush(heap, (child.bound, next(counter), child))
    return minima, proven


def _best_first_cost_minima(
    cg: CompiledGraph, opts: SolveOptions
) -> tuple[dict[float, tuple[float, float, tuple[int, ...]]], bool]:
    deadline = _deadline(opts)
    all_off = _evaluate_single(cg, (0,) * cg.group_count)
    minima: dict[float, tuple[float, float, tuple[int, ...]]] = {
        all_off[1]: (all_off[0], all_off[2], all_off[3])
    }
    if cg.group_count == 0:
        return minima, True
    suffix_min = _suffix_min_flows(cg)
    incumbents = _IncumbentFrontier()
    incumbents.insert(all_off[1], all_off[0])
    workers = opts.worker_count()
    roots = _partition_roots(cg, suffix_min, parts=1 if workers == 1 else workers * 4)
    if workers == 1:
        local, proven = _best_first_frontier_worker(cg, roots, suffix_min, incumbents, deadline)
        _merge_cost_minima(minima, ((c, d, i, s) for c, (d, i, s) in local.items()))
    else:
        shares = [roots[i::workers] for i in range(workers)]
        outcomes = _run_tasks(
            [
                (lambda share=share: _best_first_frontier_worker(cg, share, suffix_min, incumbents, deadline))
                for share in shares
                if share
            ],
            workers,
        )
        proven = all(p for _, p in outcomes)
        for local, _ in outcomes:
            _merge_cost_minima(minima, ((c, d, i, s) for c, (d, i, s) in local.items()))
    return minima, proven


# ---------------------------------------------------------------------------
# Public operations


def optimize(g: AttackGraph, budget: float, opts: SolveOptions = SolveOptions()) -> OptimizeResult:
    """Minimize damage within ``budget`` of direct cost.

    Among damage minimizers the cheapest portfolio wins, then the lowest
    indirect cost, then the lexicographically smallest selection vector,
    making the answer unique and reproducible.
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if opts.method not in METHODS:
        raise ValueError(f"unknown method {opts.method!r}")
    started = time.perf_counter()
    cg = compile_graph(g)
    if opts.method == BRUTE_FORCE:
        best, proven = _brute_force_optimize(cg, budget, opts)
    else:
        best, proven = _best_first_optimize(cg, budget, opts)
    damage, direct, indirect, sel = best
    point = ParetoPoint(cg.portfolio_of(sel), direct, indirect, damage)
    elapsed = int(round((time.perf_counter() - started) * 1000))
    return OptimizeResult(point=point, proven=proven, elapsed_ms=elapsed)


def pareto_frontier(g: AttackGraph, opts: SolveOptions = SolveOptions()) -> FrontierResult:
    """All non-dominated (direct cost, damage) portfolios of the graph.

    Sorted by ascending cost with strictly decreasing damage; the first
    point is the all-off portfolio, the last reaches the global minimum
    damage.  Points tied on (cost, damage) are represented by the portfolio
    with minimal indirect cost, then lexicographic selections.
    """
    if opts.method not in METHODS:
        raise ValueError(f"unknown method {opts.method!r}")
    started = time.perf_counter()
    cg = compile_graph(g)
    if opts.method == BRUTE_FORCE:
        minima, proven = _brute_force_cost_minima(cg, opts)
    else:
        minima, proven = _best_first_cost_minima(cg, opts)
    points = _frontier_from_minima(cg, minima)
    elapsed = int(round((time.perf_counter() - started) * 1000))
    return FrontierResult(points=points, proven=proven, elapsed_ms=elapsed)


def brute_force_frontier(g: AttackGraph, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> tuple[ParetoPoint, ...]:
    """Oracle frontier by full enumeration; refuses spaces beyond ``cap``."""
    result = pareto_frontier(g, SolveOptions(method=BRUTE_FORCE, brute_force_cap=cap))
    return result.points


def evaluate_neighborhood(
    frontier: Sequence[ParetoPoint], anchor: int, radius: int
) -> list[NeighborhoodPoint]:
    """Frontier points within ``radius`` positions of ``anchor``.

    Each entry summarizes how its portfolio differs from the anchor's:
    controls switched on, switched off, or moved to another level.  The
    window clamps at the frontier ends; no wraparound.
    """
    if not 0 <= anchor < len(frontier):
        raise IndexError(f"anchor {anchor} out of range for frontier of {len(frontier)}")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    anchor_sel = frontier[anchor].portfolio.selections
    out = []
    for i in range(max(0, anchor - radius), min(len(frontier) - 1, anchor + radius) + 1):
        sel = frontier[i].portfolio.selections
        added = []
        removed = []
        changed = []
        for group_id, base_level in anchor_sel.items():
            level = sel.get(group_id, 0)
            if level == base_level:
                continue
            if base_level == 0:
                added.append((group_id, level))
            elif level == 0:
                removed.append((group_id, base_level))
            else:
                changed.append((group_id, base_level, level))
        out.append(
            NeighborhoodPoint(
                index=i,
                offset=i - anchor,
                point=frontier[i],
                diff=PortfolioDiff(tuple(added), tuple(removed), tuple(changed)),
            )
        )
    return out
