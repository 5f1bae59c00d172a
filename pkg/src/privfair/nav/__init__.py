"""Grid-map navigation harness: maps, planning and task assignment."""

from .assign import AssignmentRecord, assign_task, routes_from_plans
from .gridmap import (
    GridEnvironment,
    PointCloud,
    build_top_view,
    build_traversability,
    gen_corridor,
    load_xyz,
    parse_xyz,
    write_xyz,
)
from .planner import (
    PathPlan,
    UnreachableDestination,
    a_star,
    candidate_paths,
    dijkstra_cost,
)

__all__ = [
    "AssignmentRecord",
    "GridEnvironment",
    "PathPlan",
    "PointCloud",
    "UnreachableDestination",
    "a_star",
    "assign_task",
    "build_top_view",
    "build_traversability",
    "candidate_paths",
    "dijkstra_cost",
    "gen_corridor",
    "load_xyz",
    "parse_xyz",
    "routes_from_plans",
    "write_xyz",
]
