import numpy as np
import pytest

from conftest import build, open_box, svc
from piperoute.exact import ExactConfig, solve_exact
from piperoute.heuristics import (
    H1Config,
    H2Config,
    conflict_pairs,
    covering_list,
    first_elbow_failure,
    run_h1,
    run_h2,
    spp_elbow_test,
)
from piperoute.instances import RandomInstanceSpec, generate_random
from piperoute.paths import shortest_path
from piperoute.validation import validate


def _cost(g, w, nodes):
    return sum(w[g.arc_between(a, b) // 2] for a, b in zip(nodes[:-1], nodes[1:]))


def test_spp_without_elbow_rule_is_shortest_path():
    sc = open_box((5, 4, 3), [svc(0, (0, 1, 1), (4, 3, 2))])
    g, costs = build(sc)
    w = costs.edge_costs(0)
    nodes = spp_elbow_test(g, w, sc.services[0])
    s, t = g.terminals[0]
    assert _cost(g, w, nodes) == pytest.approx(shortest_path(g, w, s, t)[0])


@pytest.mark.parametrize("seed", range(5))
def test_spp_respects_elbow_spacing(seed):
    rng = np.random.default_rng(seed)
    sc = open_box((6, 5, 4), [svc(0, (0, 1, 1), (5, 4, 3), elbow_min=1.5)])
    g, _ = build(sc)
    w = rng.uniform(0.5, 2.0, g.n_edges)
    nodes = spp_elbow_test(g, w, sc.services[0])
    assert nodes[0] == g.terminals[0][0] and nodes[-1] == g.terminals[0][1]
    assert first_elbow_failure(g, nodes, 1.5) is None
    assert len(set(nodes)) == len(nodes)


def test_covering_single_vertex():
    g, _ = build(open_box((3, 3, 3)))
    p = g.physical.node_at((1, 1, 1))
    assert covering_list(g, [3 * p], 0.5) == {3 * p, 3 * p + 1, 3 * p + 2}
    with pytest.raises(ValueError):
        covering_list(g, [3 * p], 0.0)


def _brute_cover(g, path, delta):
    xyz = g.physical.coords
    balls = set()
    for v in path:
        q = np.flatnonzero(np.linalg.norm(xyz - xyz[v // 3], axis=1) < delta)
        balls |= {3 * int(i) + a for i in q for a in range(3)}
    cover = set(path)
    while True:
        new = {v for v in balls - cover if any(int(u) in cover for u in g.neighbors(v))}
        if not new:
            return cover
        cover |= new


@pytest.mark.parametrize("delta", [0.5, 1.0, 1.5, 2.2])
def test_covering_matches_brute_force(delta):
    sc = open_box((5, 4, 3), [svc(0, (0, 1, 1), (4, 3, 2))])
    g, costs = build(sc)
    path = spp_elbow_test(g, costs.edge_costs(0), sc.services[0])
    assert covering_list(g, path, delta) == _brute_cover(g, path, delta)


def test_conflict_pairs():
    cov = {0: {1, 2}, 1: {2, 3}, 2: {4}, 3: {1}}
    assert conflict_pairs(cov) == {(0, 1), (0, 3)}


@pytest.mark.parametrize("seed", [0, 1])
def test_h2_feasible_and_deterministic(seed):
    sc = generate_random(RandomInstanceSpec(d=9, s=4, o=3, seed=seed))
    g, costs = build(sc)
    a = run_h2(g, costs, sc.services, scenario=sc)
    b = run_h2(g, costs, sc.services, scenario=sc)
    assert validate(g, sc, costs, a).passed
    assert a.objective == b.objective
    assert {k: list(v) for k, v in a.arcs.items()} == {k: list(v) for k, v in b.arcs.items()}
    ex = solve_exact(g, costs, sc.services, ExactConfig(time_limit=30))
    assert a.objective >= ex.lower_bound - 1e-6


def test_h2_config_checks():
    assert H2Config(maxit=10, schedule=(0.1, 0.2, 0.7)).iteration_types() == ["par"] + ["cluster"] * 2 + ["seq"] * 7
    with pytest.raises(ValueError):
        H2Config(maxit=0)
    with pytest.raises(ValueError):
        H2Config(gamma=1.0)
    with pytest.raises(ValueError):
        H2Config(schedule=(1, 1))


def test_h1_grows_tubes_at_a_crossing():
    # the solo paths cross, so the first restricted model is infeasible
    sc = open_box((5, 5, 3), [svc(0, (0, 2, 1), (4, 2, 1)), svc(1, (2, 0, 1), (2, 4, 1))])
    g, costs = build(sc)
    sol = run_h1(g, costs, sc.services)
    assert sol.meta["rounds"] >= 2
    assert sol.meta["restricted_vars"] < sol.meta["full_vars"]
    assert validate(g, sc, costs, sol).passed
    ex = solve_exact(g, costs, sc.services)
    assert sol.objective >= ex.objective - 1e-9


@pytest.mark.parametrize("seed", [2, 3])
def test_h1_random(seed):
    sc = generate_random(RandomInstanceSpec(d=9, s=3, o=3, seed=seed))
    g, costs = build(sc)
    sol = run_h1(g, costs, sc.services, H1Config(time_limit=30))
    assert validate(g, sc, costs, sol).passed
    ex = solve_exact(g, costs, sc.services, ExactConfig(time_limit=30))
    assert sol.objective >= ex.lower_bound - 1e-6


def test_h1_config_checks():
    with pytest.raises(ValueError):
        H1Config(delta=-1)
    with pytest.raises(ValueError):
        H1Config(increment=0)
    services = [svc(0, (0, 0, 0), (1, 0, 0), radius=0.3, safety=0.2)]
    assert H1Config().initial_delta(services) == {0: pytest.approx(0.5)}
