import numpy as np
import pytest

from piperoute.costs import EdgeCostTable
from piperoute.geometry import Cuboid
from piperoute.graph import build_routing_graph
from piperoute.instances import example1_scenario
from piperoute.scenario import Scenario, Service


def build(sc):
    g = build_routing_graph(sc)
    return g, EdgeCostTable(g, sc)


def open_box(shape, services=(), obstacles=(), spacing=1.0, cost_model="random", **kw):
    """Obstacle-free (unless given) box with ``shape`` nodes per axis."""
    hi = tuple(spacing * (n - 1) for n in shape)
    return Scenario(Cuboid((0, 0, 0), hi), list(services), spacing, obstacles=list(obstacles),
                    cost_model=cost_model, **kw)


def svc(k, a, b, radius=0.2, safety=0.1, elbow_min=0.0, alpha1=1.0, **kw):
    return Service(k, a, b, radius=radius, safety=safety, elbow_min=elbow_min,
                   alpha=(alpha1, 0, 0, 0, 0, 0, 0), **kw)


@pytest.fixture(scope="session")
def example1():
    sc = example1_scenario()
    g, costs = build(sc)
    return sc, g, costs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
