"""Planar storage/fence geometry.

All regions are simple polygons without holes. Points on a polygon's
boundary count as contained. Distances are Euclidean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ._validation import check_point, check_positive

Point2D = Tuple[float, float]

# Relative tolerance used for boundary membership and tie detection.
_EPS = 1e-9


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p, tol):
    return (min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol)


def _segments_intersect(a, b, c, d, tol=0.0):
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > tol and o2 < -tol) or (o1 < -tol and o2 > tol)) and \
            ((o3 > tol and o4 < -tol) or (o3 < -tol and o4 > tol)):
        return True
    if abs(o1) <= tol and _on_segment(a, b, c, tol):
        return True
    if abs(o2) <= tol and _on_segment(a, b, d, tol):
        return True
    if abs(o3) <= tol and _on_segment(c, d, a, tol):
        return True
    if abs(o4) <= tol and _on_segment(c, d, b, tol):
        return True
    return False


@dataclass(frozen=True)
class Polygon:
    """Simple polygon stored counter-clockwise as an ``(n, 2)`` array."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("a polygon needs at least 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
            if v.shape[0] < 3:
                raise ValueError("a polygon needs at least 3 distinct vertices")
        area2 = _signed_area2(v)
        if abs(area2) <= _EPS * max(1.0, np.ptp(v, axis=0).max() ** 2):
            raise ValueError("polygon has zero area")
        if area2 < 0:
            v = np.vstack([v[:1], v[:0:-1]])
        if _self_intersects(v):
            raise ValueError("polygon edges self-intersect")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, x0, y0, width, height):
        return cls([[x0, y0], [x0 + width, y0], [x0 + width, y0 + height], [x0, y0 + height]])

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def edges(self):
        """Edge endpoint arrays ``(starts, ends)``, each ``(n, 2)``."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def perimeter(self):
        a, b = self.edges
        return float(np.hypot(*(b - a).T).sum())

    @property
    def area(self):
        return 0.5 * _signed_area2(self.vertices)

    @property
    def bounds(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def scale(self):
        return max(1.0, float(np.ptp(self.vertices, axis=0).max()))

    def to_list(self):
        return self.vertices.tolist()

    def __eq__(self, other):
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())


def _signed_area2(v):
    x, y = v[:, 0], v[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _self_intersects(v):
    n = v.shape[0]
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = v[j], v[(j + 1) % n]
            if _segments_intersect(a, b, c, d):
                return True
    return False


def as_polygon(region):
    return region if isinstance(region, Polygon) else Polygon(region)


def _closest_on_edges(region, pts):
    """Per point and per edge closest points; returns ``(dist (P,E), closest (P,E,2))``."""
    a, b = region.edges
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("pej,ej->pe", ap, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    dist = np.hypot(*(pts[:, None, :] - closest).transpose(2, 0, 1))
    return dist, closest


def boundary_distance(region, points):
    """Euclidean distance from each point to the polygon boundary."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dist, _ = _closest_on_edges(as_polygon(region), pts)
    return dist.min(axis=1)


def locate(region, points):
    """Classify points: ``1`` strictly inside, ``0`` on the boundary, ``-1`` outside."""
    region = as_polygon(region)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    on_boundary = boundary_distance(region, pts) <= _EPS * region.scale
    a, b = region.edges
    px, py = pts[:, 0:1], pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = np.sum(straddles & (px < x_cross), axis=1)
    inside = (crossings % 2) == 1
    out = np.where(inside, 1, -1)
    out[on_boundary] = 0
    return out


def contains(region, p):
    """True iff ``p`` lies inside ``region`` or on its boundary."""
    p = check_point(p)
    return bool(locate(region, p)[0] >= 0)


def boundary_samples(region, spacing):
    """Points along the boundary, every vertex included, arc gaps at most ``spacing``."""
    if not (isinstance(spacing, (int, float)) and spacing > 0 and math.isfinite(spacing)):
        raise ValueError("spacing must be positive")
    region = as_polygon(region)
    a, b = region.edges
    out = []
    for start, end in zip(a, b):
        length = math.hypot(*(end - start))
        # tolerance keeps an exact multiple of spacing from gaining a sample
        n_seg = max(1, math.ceil(length / spacing - 1e-9))
        t = np.arange(n_seg)[:, None] / n_seg
        out.append(start + t * (end - start))
    return np.vstack(out)


def nearest_boundary_point(region, p):
    """Closest boundary point to an exterior point; ties go to smallest ``(x, y)``."""
    region = as_polygon(region)
    p = check_point(p)
    if locate(region, p)[0] >= 0:
        raise ValueError("point must lie outside the region")
    return _nearest_on_boundary(region, p)


def _nearest_on_boundary(region, p):
    dist, closest = _closest_on_edges(region, p[None, :])
    dist, closest = dist[0], closest[0]
    dmin = dist.min()
    tied = closest[dist <= dmin + _EPS * max(dmin, 1.0) * 1e-3]
    order = np.lexsort((tied[:, 1], tied[:, 0]))
    return tied[order[0]].copy()


def check_nested(inner, outer):
    """Raise ``ValueError`` unless ``inner`` lies strictly inside ``outer``."""
    inner, outer = as_polygon(inner), as_polygon(outer)
    if np.any(locate(outer, inner.vertices) <= 0):
        raise ValueError("inner region is not strictly inside the outer region")
    ia, ib = inner.edges
    oa, ob = outer.edges
    for a, b in zip(ia, ib):
        for c, d in zip(oa, ob):
            if _segments_intersect(a, b, c, d):
                raise ValueError("region boundaries intersect")


def region_gap(storage, fence, spacing=1.0):
    """Minimum and maximum storage-to-fence gap.

    ``min_gap`` is the smallest distance between the two boundaries; it is
    exact because every vertex is sampled. ``max_gap`` is the largest
    distance from a fence sample to the storage boundary, i.e. the worst
    case ``d(s(p_e), p_e)`` over eavesdroppers on the fence.
    """
    storage, fence = as_polygon(storage), as_polygon(fence)
    check_nested(storage, fence)
    fence_pts = boundary_samples(fence, spacing)
    to_storage = boundary_distance(storage, fence_pts)
    to_fence = boundary_distance(fence, storage.vertices)
    min_gap = float(min(to_storage.min(), to_fence.min()))
    if min_gap <= 0:
        raise ValueError("regions touch")
    return min_gap, float(to_storage.max())


@dataclass(frozen=True)
class ScenarioGeometry:
    """Storage inside a fence, with an optional allowable polygon for jammers.

    Without an explicit ``allowable`` polygon the allowable region is the
    band strictly inside the fence and strictly outside the storage.
    """

    storage: Polygon
    fence: Polygon
    allowable: Optional[Polygon] = None
    grid_spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "storage", as_polygon(self.storage))
        object.__setattr__(self, "fence", as_polygon(self.fence))
        if self.allowable is not None:
            object.__setattr__(self, "allowable", as_polygon(self.allowable))
        check_positive(float(self.grid_spacing), "grid_spacing")
        object.__setattr__(self, "grid_spacing", float(self.grid_spacing))
        check_nested(self.storage, self.fence)
        if self.allowable is not None and np.any(locate(self.fence, self.allowable.vertices) < 0):
            raise ValueError("allowable region must lie inside the fence")

    @classmethod
    def from_dict(cls, data):
        allowable = data.get("allowable")
        return cls(
            storage=Polygon(data["storage"]),
            fence=Polygon(data["fence"]),
            allowable=Polygon(allowable) if allowable else None,
            grid_spacing=float(data.get("grid_spacing", 1.0)),
        )

    def to_dict(self):
        return {
            "storage": self.storage.to_list(),
            "fence": self.fence.to_list(),
            "allowable": self.allowable.to_list() if self.allowable is not None else None,
            "grid_spacing": self.grid_spacing,
        }

    def gap(self, spacing=None):
        return region_gap(self.storage, self.fence, spacing or self.grid_spacing)

    def in_allowable(self, points):
        """Vectorised allowable-region membership."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = (locate(self.fence, pts) == 1) & (locate(self.storage, pts) == -1)
        if self.allowable is not None:
            ok &= locate(self.allowable, pts) >= 0
        return ok

    def on_fence(self, points, tol=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = _EPS * self.fence.scale if tol is None else tol
        return boundary_distance(self.fence, pts) <= tol

    def storage_samples(self, spacing=None):
        return boundary_samples(self.storage, spacing or self.grid_spacing)

    def fence_samples(self, spacing=None):
        return boundary_samples(self.fence, spacing or self.grid_spacing)

    def grid_points(self, spacing=None):
        """Grid cell corners inside the allowable region."""
        h = spacing or self.grid_spacing
        x0, y0, x1, y1 = self.fence.bounds
        xs = x0 + h * np.arange(int(math.floor((x1 - x0) / h)) + 1)
        ys = y0 + h * np.arange(int(math.floor((y1 - y0) / h)) + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        return pts[self.in_allowable(pts)]

    def storage_distance(self, points):
        """Distance from points to the storage boundary."""
        return boundary_distance(self.storage, points)


def rectangle_scenario(fence_w, fence_h, storage_w, storage_h, grid_spacing=1.0):
    """Concentric rectangles with the fence's lower-left corner at the origin."""
    fence = Polygon.rectangle(0.0, 0.0, fence_w, fence_h)
    sx = (fence_w - storage_w) / 2.0
    sy = (fence_h - storage_h) / 2.0
    storage = Polygon.rectangle(sx, sy, storage_w, storage_h)
    return ScenarioGeometry(storage=storage, fence=fence, grid_spacing=grid_spacing)
