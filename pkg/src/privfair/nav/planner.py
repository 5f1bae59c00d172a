"""Grid path planning: A* with an independent uniform-cost oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

from ..errors import InvalidEndpointError, NoCandidatesError, NoPathError, ValidationError
from .gridmap import GridEnvironment

SQRT2 = math.sqrt(2.0)

_FOUR_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))
_DIAG_STEPS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class PathPlan:
    """A validated grid path: adjacent, traversable cells with summed step cost."""

    cells: tuple[tuple[int, int], ...]
    cost: float
    destination: str | None = None

    def __post_init__(self):
        if not self.cells:
            raise ValidationError("a path must contain at least one cell")
        if self.cost < 0:
            raise ValidationError(f"path cost must be >= 0, got {self.cost}")


def _steps(connectivity: str):
    if connectivity == "four":
        return [(dr, dc, 1.0) for dr, dc in _FOUR_STEPS]
    if connectivity == "eight":
        return [(dr, dc, 1.0) for dr, dc in _FOUR_STEPS] + [
            (dr, dc, SQRT2) for dr, dc in _DIAG_STEPS
        ]
    raise ValidationError(f"connectivity must be 'four' or 'eight', got {connectivity!r}")


def _heuristic(connectivity: str, cell, goal) -> float:
    dr, dc = abs(cell[0] - goal[0]), abs(cell[1] - goal[1])
    if connectivity == "four":
        return float(dr + dc)
    # octile distance: diagonal moves cover the shorter axis
    return float(max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc))


def _check_endpoint(env: GridEnvironment, cell, name: str) -> None:
    if not env.is_traversable(cell):
        raise InvalidEndpointError(f"{name} cell {cell} is not traversable")


def a_star(
    env: GridEnvironment,
    start: tuple[int, int],
    goal: tuple[int, int],
    connectivity: str = "eight",
) -> PathPlan:
    """Minimum-cost path on the traversability grid.

    Unit steps, sqrt(2) diagonals under eight-connectivity; the heuristic is
    Manhattan or octile distance (admissible and consistent for the matching
    connectivity).  Equal f-scores are broken towards the lexicographically
    smaller (row, column), which makes returned paths reproducible.
    """
    start, goal = tuple(start), tuple(goal)
    _check_endpoint(env, start, "start")
    _check_endpoint(env, goal, "goal")
    steps = _steps(connectivity)
    h, w = env.shape

    g_score = {start: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int]] = {}
    open_heap = [(_heuristic(connectivity, start, goal), start[0], start[1])]
    closed: set[tuple[int, int]] = set()

    while open_heap:
        _, r, c = heappop(open_heap)
        current = (r, c)
        if current in closed:
            continue
        closed.add(current)
        if current == goal:
            cells = [current]
            while current in came_from:
                current = came_from[current]
                cells.append(current)
            cells.reverse()
            return PathPlan(tuple(cells), g_score[goal])
        base = g_score[current]
        for dr, dc, w_step in steps:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not env.traversable[nr, nc]:
                continue
            neighbour = (nr, nc)
            tentative = base + w_step
            if tentative < g_score.get(neighbour, math.inf):
                g_score[neighbour] = tentative
                came_from[neighbour] = current
                f = tentative + _heuristic(connectivity, neighbour, goal)
                heappush(open_heap, (f, nr, nc))

    raise NoPathError(f"goal {goal} is unreachable from start {start}")


def dijkstra_cost(
    env: GridEnvironment,
    start: tuple[int, int],
    goal: tuple[int, int],
    connectivity: str = "eight",
) -> float:
    """Uniform-cost-search shortest-path cost; the heuristic-free oracle."""
    start, goal = tuple(start), tuple(goal)
    _check_endpoint(env, start, "start")
    _check_endpoint(env, goal, "goal")
    steps = _steps(connectivity)
    h, w = env.shape
    dist = {start: 0.0}
    heap = [(0.0, start[0], start[1])]
    while heap:
        d, r, c = heappop(heap)
        if (r, c) == goal:
            return d
        if d > dist.get((r, c), math.inf):
            continue
        for dr, dc, w_step in steps:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not env.traversable[nr, nc]:
                continue
            nd = d + w_step
            if nd < dist.get((nr, nc), math.inf):
                dist[(nr, nc)] = nd
                heappush(heap, (nd, nr, nc))
    raise NoPathError(f"goal {goal} is unreachable from start {start}")


@dataclass(frozen=True)
class UnreachableDestination:
    destination: str
    cell: tuple[int, int]
    reason: str


def candidate_paths(
    env: GridEnvironment,
    start: tuple[int, int],
    destinations,
    connectivity: str = "eight",
) -> tuple[list[PathPlan], list[UnreachableDestination]]:
    """One plan per reachable destination, plus reports for the others.

    ``destinations`` maps identifiers to cells (or is a sequence of cells,
    which get positional identifiers).  Raises only when no destination at
    all is reachable.
    """
    if isinstance(destinations, dict):
        items = list(destinations.items())
    else:
        items = [(f"dest{i}", cell) for i, cell in enumerate(destinations)]
    if not items:
        raise ValidationError("at least one destination is required")

    plans: list[PathPlan] = []
    unreachable: list[UnreachableDestination] = []
    for name, cell in items:
        try:
            plan = a_star(env, start, tuple(cell), connectivity)
        except (NoPathError, InvalidEndpointError) as exc:
            unreachable.append(UnreachableDestination(name, tuple(cell), str(exc)))
            continue
        plans.append(PathPlan(plan.cells, plan.cost, destination=name))
    if not plans:
        raise NoCandidatesError(
            f"none of the {len(items)} destinations is reachable from {start}"
        )
    return plans, unreachable
