from __future__ import annotations

import random

import numpy as np
import pytest

from secpareto import (
    Portfolio,
    SearchSpaceError,
    brute_force_frontier,
    evaluate_neighborhood,
    flow_report,
    naked_portfolio,
    optimize,
    pareto_frontier,
)
from secpareto.compiled import compile_graph
from secpareto.model import AttackGraph, ControlGroup, ControlLevel, EdgeDef, NodeKind, NodeRef
from secpareto.solver import (
    BEST_FIRST,
    BRUTE_FORCE,
    SolveOptions,
    _damage_of_flows,
    _suffix_min_flows,
)

from . import oracles
from .generators import random_instance

BOTH = [SolveOptions(method=BRUTE_FORCE), SolveOptions(method=BEST_FIRST)]


@pytest.mark.parametrize("opts", BOTH, ids=["brute_force", "best_first"])
def test_toy_budget_two_is_c2_c3(toy_graph, opts):
    result = optimize(toy_graph, 2, opts)
    assert dict(result.point.portfolio.selections) == {"c1": 0, "c2": 1, "c3": 1, "c4": 0}
    assert result.point.damage == pytest.approx(0.2, abs=1e-9)
    assert result.point.direct_cost == 2.0
    assert result.proven


@pytest.mark.parametrize("opts", BOTH, ids=["brute_force", "best_first"])
def test_budget_zero_is_all_off(toy_graph, opts):
    result = optimize(toy_graph, 0, opts)
    assert set(result.point.portfolio.selections.values()) == {0}
    assert result.point.damage == 1.0


def test_toy_budget_four_matches_enumeration(toy_graph):
    damage, direct, indirect, sel = oracles.best_in_budget(toy_graph, 4)
    for opts in BOTH:
        result = optimize(toy_graph, 4, opts)
        assert result.point.damage == pytest.approx(damage, abs=1e-9)
        assert tuple(result.point.portfolio.selections.values()) == sel


def test_negative_budget_rejected(toy_graph):
    with pytest.raises(ValueError, match="budget"):
        optimize(toy_graph, -1)


def test_unknown_method_rejected(toy_graph):
    with pytest.raises(ValueError, match="method"):
        optimize(toy_graph, 1, SolveOptions(method="simplex"))
    with pytest.raises(ValueError, match="workers"):
        optimize(toy_graph, 1, SolveOptions(workers=0))


def test_toy_frontier_shape(toy_graph):
    points = brute_force_frontier(toy_graph)
    pairs = [(p.direct_cost, p.damage) for p in points]
    assert pairs[0] == (0.0, 1.0)
    assert (2.0, pytest.approx(0.2)) in [(c, d) for c, d in pairs]
    # no single control cuts every best path, so no cost-1 point exists
    assert all(c != 1.0 for c, _ in pairs)


def test_toy_frontier_matches_naive_oracle(toy_graph):
    points = brute_force_frontier(toy_graph)
    naive = oracles.naive_frontier(toy_graph)
    assert len(points) == len(naive)
    for point, (cost, indirect, damage, sel) in zip(points, naive):
        assert point.direct_cost == cost
        assert point.indirect_cost == indirect
        assert point.damage == pytest.approx(damage, abs=1e-9)
        assert tuple(point.portfolio.selections.values()) == sel


def test_two_portfolio_universe():
    g = AttackGraph(
        version=1,
        name="one-edge",
        nodes=(
            NodeRef(id="s", label="s", kind=NodeKind.SOURCE),
            NodeRef(id="t", label="t", kind=NodeKind.TARGET),
        ),
        edges=(EdgeDef(id="e0", from_node="s", to_node="t", vulnerability="v", default_flow=0.8),),
        controls=(
            ControlGroup(
                id="only",
                name="only",
                levels=(ControlLevel(name="on", direct_cost=3, indirect_cost=1, flow_reduction={"e0": 0.5}),),
            ),
        ),
    )
    points = brute_force_frontier(g)
    assert [(p.direct_cost, p.damage) for p in points] == [(0.0, 0.8), (3.0, 0.5 * 0.8)]


def test_single_group_frontier_size():
    levels = tuple(
        ControlLevel(name=f"l{i}", direct_cost=i, indirect_cost=0, flow_reduction={"e0": 1.0 - 0.3 * i})
        for i in (1, 2, 3)
    )
    g = AttackGraph(
        version=1,
        name="one-group",
        nodes=(
            NodeRef(id="s", label="s", kind=NodeKind.SOURCE),
            NodeRef(id="t", label="t", kind=NodeKind.TARGET),
        ),
        edges=(EdgeDef(id="e0", from_node="s", to_node="t", vulnerability="v", default_flow=1.0),),
        controls=(ControlGroup(id="g", name="g", levels=levels),),
    )
    assert len(brute_force_frontier(g)) <= 4


@pytest.mark.parametrize("seed", range(60))
def test_best_first_equals_brute_force(seed):
    g = random_instance(seed)
    bf = pareto_frontier(g, SolveOptions(method=BRUTE_FORCE))
    bb = pareto_frontier(g, SolveOptions(method=BEST_FIRST))
    assert bf.points == bb.points
    assert bf.proven and bb.proven


@pytest.mark.parametrize("seed", range(40))
def test_frontier_matches_naive_oracle(seed):
    g = random_instance(seed + 300)
    points = brute_force_frontier(g)
    naive = oracles.naive_frontier(g)
    assert len(points) == len(naive)
    for point, (cost, indirect, damage, sel) in zip(points, naive):
        assert point.direct_cost == cost
        assert point.indirect_cost == indirect
        assert point.damage == pytest.approx(damage, abs=1e-9)
        assert tuple(point.portfolio.selections.values()) == sel


@pytest.mark.parametrize("seed", range(40))
def test_frontier_structure_invariants(seed):
    g = random_instance(seed + 900)
    points = brute_force_frontier(g)
    assert points, "all-off portfolio always exists"
    assert points[0].direct_cost == 0.0
    costs = [p.direct_cost for p in points]
    damages = [p.damage for p in points]
    assert costs == sorted(costs)
    assert len(set(costs)) == len(costs)
    assert all(a > b for a, b in zip(damages, damages[1:]))
    # endpoint anchoring: exact when every stored level costs something;
    # with free levels the cost-0 point may dominate the naked portfolio
    naked_damage = flow_report(g, naked_portfolio(g)).damage
    assert points[0].damage <= naked_damage + 1e-12
    if all(level.direct_cost > 0 for c in g.controls for level in c.levels):
        assert points[0].damage == pytest.approx(naked_damage, abs=1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_budget_consistency(seed):
    g = random_instance(seed + 1200)
    points = brute_force_frontier(g)
    rng = random.Random(seed)
    budgets = [0.0, points[-1].direct_cost, points[-1].direct_cost + 10.0]
    budgets += [rng.uniform(0, points[-1].direct_cost + 2) for _ in range(3)]
    for budget in budgets:
        expected = max(
            (p for p in points if p.direct_cost <= budget),
            key=lambda p: p.direct_cost,
            default=None,
        )
        if expected is None:
            continue
        for opts in BOTH:
            got = optimize(g, budget, opts).point
            assert got == expected


@pytest.mark.parametrize("seed", range(20))
def test_point_values_recomputable_via_flow_report(seed):
    g = random_instance(seed + 2400)
    for point in brute_force_frontier(g):
        report = flow_report(g, point.portfolio)
        assert point.damage == pytest.approx(report.damage, abs=1e-9)
        assert point.direct_cost == pytest.approx(report.direct_cost, abs=1e-9)
        assert point.indirect_cost == pytest.approx(report.indirect_cost, abs=1e-9)


@pytest.mark.parametrize("method", [BRUTE_FORCE, BEST_FIRST])
def test_worker_count_does_not_change_results(ics_graph, method):
    reference = pareto_frontier(ics_graph, SolveOptions(method=method, workers=1))
    for workers in (2, 8):
        got = pareto_frontier(ics_graph, SolveOptions(method=method, workers=workers))
        assert got.points == reference.points
    opt_ref = optimize(ics_graph, 200, SolveOptions(method=method, workers=1))
    for workers in (2, 8):
        got = optimize(ics_graph, 200, SolveOptions(method=method, workers=workers))
        assert got.point == opt_ref.point


def test_ics_methods_agree(ics_graph):
    bf = pareto_frontier(ics_graph, SolveOptions(method=BRUTE_FORCE))
    bb = pareto_frontier(ics_graph, SolveOptions(method=BEST_FIRST))
    assert bf.points == bb.points
    naked_damage = flow_report(ics_graph, naked_portfolio(ics_graph)).damage
    assert bf.points[0].damage == pytest.approx(naked_damage, abs=1e-9)
    # the last point reaches the global minimum damage
    all_max = Portfolio({c.id: len(c.levels) for c in ics_graph.controls})
    assert bf.points[-1].damage <= flow_report(ics_graph, all_max).damage + 1e-12


@pytest.mark.parametrize("seed", range(30))
def test_bound_is_admissible(seed):
    # white box: the relaxed bound never exceeds the true subtree optimum
    g = random_instance(seed + 4000)
    if not g.controls:
        return
    cg = compile_graph(g)
    suffix_min = _suffix_min_flows(cg)
    rng = random.Random(seed)
    depth = rng.randint(0, cg.group_count - 1)
    prefix = tuple(rng.randint(0, int(cg.choices[i]) - 1) for i in range(depth))
    flows = cg.default_flow.copy()
    for gi, level in enumerate(prefix):
        flows = flows * cg.factors[gi, level, :]
    bound = float(_damage_of_flows(cg, (flows * suffix_min[depth])[None, :])[0])

    import itertools

    best = np.inf
    for completion in itertools.product(*(range(int(c)) for c in cg.choices[depth:])):
        sel = {gid: lvl for gid, lvl in zip(cg.group_ids, prefix + completion)}
        best = min(best, flow_report(g, Portfolio(sel)).damage)
    assert bound <= best + 1e-9


def test_brute_force_cap_refusal(ics_graph):
    with pytest.raises(SearchSpaceError) as err:
        brute_force_frontier(ics_graph, cap=1000)
    assert err.value.required_cap == compile_graph(ics_graph).portfolio_space()
    assert str(err.value.required_cap) in str(err.value)


def test_time_limit_flags_unproven(ics_graph):
    opts = SolveOptions(method=BEST_FIRST, time_limit=1e-9)
    frontier = pareto_frontier(ics_graph, opts)
    assert not frontier.proven
    assert frontier.points, "partial frontier still anchored by the all-off portfolio"
    result = optimize(ics_graph, 100, opts)
    assert not result.proven
    assert result.point.direct_cost <= 100


def test_neighborhood_window(toy_graph):
    points = brute_force_frontier(toy_graph)
    assert len(points) >= 3

    middle = evaluate_neighborhood(points, anchor=1, radius=1)
    assert [e.offset for e in middle] == [-1, 0, 1]
    assert middle[1].diff.empty

    only = evaluate_neighborhood(points, anchor=1, radius=0)
    assert len(only) == 1 and only[0].diff.empty

    end = evaluate_neighborhood(points, anchor=len(points) - 1, radius=2)
    assert [e.index for e in end] == list(range(max(0, len(points) - 3), len(points)))
    assert end[-1].offset == 0

    with pytest.raises(IndexError):
        evaluate_neighborhood(points, anchor=99, radius=1)


def test_neighborhood_diff_contents(toy_graph):
    points = brute_force_frontier(toy_graph)
    # anchor on the all-off point: every later point only adds controls
    entries = evaluate_neighborhood(points, anchor=0, radius=1)
    added = dict(entries[1].diff.added)
    assert added and not entries[1].diff.removed and not entries[1].diff.changed
    assert set(added).issubset({c.id for c in toy_graph.controls})

    # anchor mid-frontier: moving to the next point changes or adds levels
    entries = evaluate_neighborhood(points, anchor=1, radius=1)
    step = entries[2].diff
    assert not step.empty
