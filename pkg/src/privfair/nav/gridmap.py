"""Point-cloud ingestion into top-view and traversability grid maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptySceneError, ValidationError


@dataclass(frozen=True)
class PointCloud:
    """Scene points (x, y, z) in meters, optionally labelled per point."""

    points: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] == 0:
            raise ValidationError("point cloud must contain at least one point")
        if not np.isfinite(pts).all():
            raise ValidationError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None and len(self.labels) != pts.shape[0]:
            raise ValidationError(
                f"{len(self.labels)} labels for {pts.shape[0]} points"
            )


def parse_xyz(text: str) -> PointCloud:
    """Parse the plain-text scene format: one "x y z [label]" per line."""
    points, labels, any_label = [], [], False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ValidationError(
                f"line {lineno}: expected 'x y z [label]', got {raw!r}"
            )
        try:
            points.append([float(parts[0]), float(parts[1]), float(parts[2])])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric coordinate in {raw!r}") from None
        labels.append(parts[3] if len(parts) == 4 else "")
        any_label = any_label or len(parts) == 4
    if not points:
        raise ValidationError("scene file contains no points")
    return PointCloud(np.asarray(points), tuple(labels) if any_label else None)


def load_xyz(path) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_xyz(fh.read())


@dataclass(frozen=True)
class GridEnvironment:
    """Top-view height map plus optional traversability layer.

    ``top_view[r, c]`` is the maximum point height in the cell (NaN where
    empty); ``traversable`` is a boolean array of the same shape, or None
    before :func:`build_traversability` has run.
    """

    resolution: float
    origin: tuple[float, float]
    top_view: np.ndarray
    traversable: np.ndarray | None = None
    cell_labels: dict[tuple[int, int], str] | None = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValidationError(f"resolution must be > 0, got {self.resolution}")
        top = np.array(self.top_view, dtype=float)
        top.setflags(write=False)
        object.__setattr__(self, "top_view", top)
        if self.traversable is not None:
            trav = np.array(self.traversable, dtype=bool)
            if trav.shape != top.shape:
                raise ValidationError(
                    f"traversable shape {trav.shape} != top view shape {top.shape}"
                )
            if np.any(trav & np.isnan(top)):
                raise ValidationError("a cell cannot be traversable and empty")
            trav.setflags(write=False)
            object.__setattr__(self, "traversable", trav)

    @property
    def shape(self) -> tuple[int, int]:
        return self.top_view.shape

    def is_traversable(self, cell: tuple[int, int]) -> bool:
        if self.traversable is None:
            raise ValidationError("environment has no traversability layer yet")
        r, c = cell
        h, w = self.shape
        return 0 <= r < h and 0 <= c < w and bool(self.traversable[r, c])


def build_top_view(cloud: PointCloud, resolution: float, ceiling_z: float) -> GridEnvironment:
    """Bin points below the ceiling onto a grid, keeping each cell's max height.

    Rows follow y, columns follow x; the origin is the minimum kept (x, y).
    """
    if resolution <= 0:
        raise ValidationError(f"resolution must be > 0, got {resolution}")
    keep = cloud.points[:, 2] < ceiling_z
    if not keep.any():
        raise EmptySceneError(
            f"no points remain below the ceiling height {ceiling_z}"
        )
    pts = cloud.points[keep]
    labels = None if cloud.labels is None else [cloud.labels[i] for i in np.nonzero(keep)[0]]

    x0, y0 = float(pts[:, 0].min()), float(pts[:, 1].min())
    cols = np.floor((pts[:, 0] - x0) / resolution).astype(int)
    rows = np.floor((pts[:, 1] - y0) / resolution).astype(int)
    h, w = int(rows.max()) + 1, int(cols.max()) + 1

    top = np.full((h, w), -np.inf)
    np.maximum.at(top, (rows, cols), pts[:, 2])
    top[np.isneginf(top)] = np.nan  # cells no point fell into

    cell_labels: dict[tuple[int, int], str] = {}
    if labels is not None:
        for r, c, lbl in zip(rows, cols, labels):
            if lbl:
                cell_labels[(int(r), int(c))] = lbl

    return GridEnvironment(
        resolution=resolution,
        origin=(x0, y0),
        top_view=top,
        cell_labels=cell_labels or None,
    )


def build_traversability(env: GridEnvironment, h_min: float, h_max: float) -> GridEnvironment:
    """Mark cells walkable when their surface height lies in [h_min, h_max]."""
    if not h_min < h_max:
        raise ValidationError(f"need h_min < h_max, got [{h_min}, {h_max}]")
    with np.errstate(invalid="ignore"):
        trav = (env.top_view >= h_min) & (env.top_view <= h_max)
    trav &= ~np.isnan(env.top_view)
    return GridEnvironment(
        resolution=env.resolution,
        origin=env.origin,
        top_view=env.top_view,
        traversable=trav,
        cell_labels=env.cell_labels,
    )


def gen_corridor(
    size: int = 20,
    resolution: float = 0.05,
    floor_z: float = 0.02,
    wall_z: float = 2.0,
    points_per_cell: int = 2,
) -> tuple[PointCloud, np.ndarray, dict[str, tuple[int, int]]]:
    """Synthetic desk-scale scene: a looped corridor with two office cells.

    Returns the cloud, the traversability mask expected for the height range
    [0, 0.3], and named cells (start plus two offices at equal grid distance
    from it).  Ceiling points at 2.5 m are included so top-view filtering has
    something to discard.
    """
    if size < 9:
        raise ValidationError(f"corridor scene needs size >= 9, got {size}")
    mask = np.zeros((size, size), dtype=bool)
    mask[1, 1 : size - 1] = True          # north corridor
    mask[size - 2, 1 : size - 1] = True   # south corridor
    mask[1 : size - 1, 1] = True          # west corridor
    mask[1 : size - 1, size - 2] = True   # east corridor
    mid = size // 2
    mask[1 : size - 1, mid] = True        # central aisle

    start = (size - 2, mid)
    office_west = (1, mid - 3)
    office_east = (1, mid + 3)
    mask[office_west] = True
    mask[office_east] = True
    named = {"start": start, "office_west": office_west, "office_east": office_east}

    pts, labels = [], []
    half = resolution / 2.0
    for r in range(size):
        for c in range(size):
            x, y = c * resolution + half, r * resolution + half
            z = floor_z if mask[r, c] else wall_z
            for i in range(points_per_cell):
                dx = (i / max(points_per_cell - 1, 1) - 0.5) * resolution * 0.5
                pts.append([x + dx, y, z])
                labels.append(_label_for(named, (r, c)))
    # ceiling layer, removed by the top-view filter
    pts.append([half, half, 2.5])
    labels.append("")
    pts.append([size * resolution - half, size * resolution - half, 2.5])
    labels.append("")
    return PointCloud(np.asarray(pts), tuple(labels)), mask, named


def _label_for(named: dict[str, tuple[int, int]], cell: tuple[int, int]) -> str:
    for name, pos in named.items():
        if pos == cell:
            return name
    return ""


def write_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, (x, y, z) in enumerate(cloud.points):
            label = "" if cloud.labels is None else cloud.labels[i]
            if label:
                fh.write(f"{x!r} {y!r} {z!r} {label}\n")
            else:
                fh.write(f"{x!r} {y!r} {z!r}\n")
