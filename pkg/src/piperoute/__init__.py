"""Pipe routing on 3D grids with clearance and elbow-spacing rules."""
from .costs import EdgeCostTable, objective
from .exact import ExactConfig, SolveResult, build_master, export_model, solve_exact
from .geometry import Cuboid, Point3, Segment3, cuboid_segment_distance, segment_distance
from .graph import RoutingGraph, build_routing_graph
from .heuristics import H1Config, H2Config, HeuristicFailure, covering_list, conflict_pairs, run_h1, run_h2, spp_elbow_test
from .instances import (
    RandomInstanceSpec,
    case_study_scenario,
    example1_scenario,
    generate_random,
    load_scenario,
    load_solution,
    save_scenario,
    save_solution,
)
from .scenario import InfeasibleScenarioError, Scenario, ScenarioError, Service
from .solution import Solution
from .validation import ValidationReport, benchmark, export_geometry, validate

__version__ = "0.1.0"
