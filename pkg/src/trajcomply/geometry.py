"""Exact 2D geometry kernels over unions of closed polygons.

Signed distance to the union boundary, interior tests with even-odd
semantics, nearest-boundary queries and the spatial gradient of the
distance field. Nearest-edge ties are broken by the lowest
(polygon, edge) index, and the grid-accelerated scalar queries are
bit-identical to the full vectorized edge scan.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Minimum spacing between consecutive polygon vertices (meters).
VERTEX_TOL = 1e-9

# Cap on pairwise (point, edge) blocks evaluated at once in batch queries.
_CHUNK_ELEMS = 1 << 22


class Polygon:
    """Closed polygon; the last vertex implicitly connects to the first."""

    def __init__(self, vertices):
        v = np.array(vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidationError("vertices", f"expected an (N, 2) array, got shape {v.shape}")
        if v.shape[0] < 3:
            raise ValidationError("vertices", f"need at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertices", "coordinates must be finite")
        gaps = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(gaps <= VERTEX_TOL):
            i = int(np.argmax(gaps <= VERTEX_TOL))
            raise ValidationError(f"vertices[{i}]", "consecutive vertices coincide")
        v.setflags(write=False)
        self.vertices = v

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)


class DrivableArea:
    """Union of closed polygons with even-odd interior semantics.

    Edges of all polygons are stacked in (polygon, edge) order; that order
    is the tie-break for every nearest-edge query. Inputs are expected to
    be non-overlapping rings: the interior test stays well-defined either
    way, but the edge-minimum distance is wrong on interior edges of
    overlapping polygons, so overlap only warns.
    """

    def __init__(self, polygons):
        polys = []
        for i, p in enumerate(polygons):
            if isinstance(p, Polygon):
                polys.append(p)
            else:
                try:
                    polys.append(Polygon(p))
                except ValidationError as err:
                    raise ValidationError(f"polygons[{i}].{err.path}", err.message) from None
        if not polys:
            raise ValidationError("polygons", "drivable area needs at least one polygon")
        self.polygons = tuple(polys)

        starts = np.concatenate([p.vertices for p in polys], axis=0)
        ends = np.concatenate([np.roll(p.vertices, -1, axis=0) for p in polys], axis=0)
        starts.setflags(write=False)
        ends.setflags(write=False)
        self._starts = starts
        self._ends = ends

        lo = np.minimum(starts, ends)
        hi = np.maximum(starts, ends)
        self._edge_lo = lo
        self._edge_hi = hi
        self.bounds = (float(lo[:, 0].min()), float(lo[:, 1].min()),
                       float(hi[:, 0].max()), float(hi[:, 1].max()))

        self._warn_on_overlap(polys)
        self._grid = _EdgeGrid(self)

    @property
    def edge_count(self) -> int:
        return len(self._starts)

    @staticmethod
    def _warn_on_overlap(polys) -> None:
        boxes = [(p.vertices[:, 0].min(), p.vertices[:, 1].min(),
                  p.vertices[:, 0].max(), p.vertices[:, 1].max()) for p in polys]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                if a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]:
                    warnings.warn(
                        f"bounding boxes of polygons {i} and {j} overlap; distances "
                        "assume non-overlapping rings",
                        stacklevel=3,
                    )
                    return


@dataclass(frozen=True)
class SignedDistanceResult:
    """Signed distance to the union boundary.

    ``distance`` is negative inside the area and positive outside.
    ``gradient`` is the unit direction of increasing distance, or (0, 0)
    when the query coincides with its nearest boundary point. Scalar
    queries hold scalars / (2,) arrays; batch queries hold (N,) / (N, 2).
    """

    distance: float | np.ndarray
    nearest_point: np.ndarray
    gradient: np.ndarray


def _foot_points(points: np.ndarray, starts: np.ndarray, ends: np.ndarray):
    """Distances and foot points from (N, 2) points to (E, 2) segments.

    Single shared kernel: the grid path evaluates it on candidate subsets
    and must stay bit-identical to the full scan, so all arithmetic lives
    here.
    """
    d = ends - starts
    ll = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    w = points[:, None, :] - starts[None, :, :]
    t = (w[..., 0] * d[None, :, 0] + w[..., 1] * d[None, :, 1]) / ll[None, :]
    t = np.clip(t, 0.0, 1.0)
    foot = starts[None, :, :] + t[..., None] * d[None, :, :]
    dx = points[:, None, 0] - foot[..., 0]
    dy = points[:, None, 1] - foot[..., 1]
    dist = np.sqrt(dx * dx + dy * dy)
    return dist, foot


def _crossing_count(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Even-odd ray crossings of the +x ray from each point.

    Half-open rule: an edge counts iff exactly one endpoint lies strictly
    above the query's y, and the exact crossing x exceeds the query's x.
    """
    ay, by = starts[:, 1], ends[:, 1]
    px = points[:, 0:1]
    py = points[:, 1:2]
    straddle = (ay[None, :] > py) != (by[None, :] > py)
    # by != ay wherever straddle holds, but guard the vectorized division
    denom = np.where(straddle, by[None, :] - ay[None, :], 1.0)
    t = (py - ay[None, :]) / denom
    x_int = starts[None, :, 0] + t * (ends[None, :, 0] - starts[None, :, 0])
    return np.sum(straddle & (x_int > px), axis=1)


def edge_distances(points, area: DrivableArea) -> np.ndarray:
    """Full (N, E) point-to-edge distance matrix.

    Exposed for diagnostics (e.g. medial-axis / nearest-edge-tie detection);
    the loss path never needs it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dist, _ = _foot_points(pts, area._starts, area._ends)
    return dist


def point_in_area(p, area: DrivableArea) -> bool:
    """Even-odd interior test for a single point."""
    p = np.asarray(p, dtype=np.float64)
    return area._grid.point_inside(p)


def points_in_area(points, area: DrivableArea) -> np.ndarray:
    """Vectorized even-odd interior test, (N, 2) -> (N,) bool."""
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty(len(pts), dtype=bool)
    step = max(1, _CHUNK_ELEMS // max(area.edge_count, 1))
    for i in range(0, len(pts), step):
        chunk = pts[i:i + step]
        out[i:i + step] = _crossing_count(chunk, area._starts, area._ends) % 2 == 1
    return out


def signed_distance(p, area: DrivableArea) -> SignedDistanceResult:
    """Signed distance, nearest boundary point and gradient for one point.

    Grid-accelerated; bit-identical to the brute-force edge scan, including
    the lowest-(polygon, edge)-index tie-break.
    """
    p = np.asarray(p, dtype=np.float64)
    dist, foot = area._grid.nearest_edge(p)
    inside = area._grid.point_inside(p)
    return _assemble_scalar(p, dist, foot, inside)


def signed_distance_batch(points, area: DrivableArea) -> SignedDistanceResult:
    """Vectorized signed distances, (N, 2) -> arrays of length N."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    dist = np.empty(n)
    nearest = np.empty((n, 2))
    step = max(1, _CHUNK_ELEMS // max(area.edge_count, 1))
    for i in range(0, n, step):
        chunk = pts[i:i + step]
        d, foot = _foot_points(chunk, area._starts, area._ends)
        best = np.argmin(d, axis=1)
        rows = np.arange(len(chunk))
        dist[i:i + step] = d[rows, best]
        nearest[i:i + step] = foot[rows, best]
    inside = points_in_area(pts, area)

    # x * x rather than x ** 2: the scalar and vector pow loops are not
    # bit-identical, and the grid path must match this one exactly.
    diff = pts - nearest
    norm = np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1])
    grad = np.zeros_like(diff)
    nz = norm > 0.0
    grad[nz] = diff[nz] / norm[nz, None]
    grad[inside] = -grad[inside]
    signed = np.where(inside, -dist, dist)
    return SignedDistanceResult(distance=signed, nearest_point=nearest, gradient=grad)


def _assemble_scalar(p, dist, foot, inside) -> SignedDistanceResult:
    diff = p - foot
    norm = float(np.sqrt(diff[0] * diff[0] + diff[1] * diff[1]))
    if norm > 0.0:
        grad = diff / norm
    else:
        grad = np.zeros(2)
    if inside:
        grad = -grad
        dist = -dist
    return SignedDistanceResult(distance=float(dist), nearest_point=foot, gradient=grad)


class _EdgeGrid:
    """Uniform bounding-box grid over an area's edges.

    Cells hold the indices of every edge whose bounding box touches them.
    Queries gather a candidate superset guaranteed to contain all
    minimizers (and all ray crossings), then run the exact kernels on it,
    which keeps results bit-identical to the full scan.
    """

    def __init__(self, area: DrivableArea):
        x0, y0, x1, y1 = area.bounds
        e = area.edge_count
        n = int(np.clip(np.ceil(np.sqrt(e)), 1, 64))
        self.x0, self.y0, self.x1, self.y1 = x0, y0, x1, y1
        self.nx = self.ny = n
        self.cw = max((x1 - x0) / n, 1e-12)
        self.ch = max((y1 - y0) / n, 1e-12)
        self._starts = area._starts
        self._ends = area._ends

        cells: list[list[int]] = [[] for _ in range(n * n)]
        lo_ix = self._col(area._edge_lo[:, 0])
        hi_ix = self._col(area._edge_hi[:, 0])
        lo_iy = self._row(area._edge_lo[:, 1])
        hi_iy = self._row(area._edge_hi[:, 1])
        for idx in range(e):
            for iy in range(lo_iy[idx], hi_iy[idx] + 1):
                base = iy * n
                for ix in range(lo_ix[idx], hi_ix[idx] + 1):
                    cells[base + ix].append(idx)
        self.cells = [np.asarray(c, dtype=np.intp) for c in cells]

    def _col(self, x):
        return np.clip(np.floor((np.asarray(x) - self.x0) / self.cw).astype(int), 0, self.nx - 1)

    def _row(self, y):
        return np.clip(np.floor((np.asarray(y) - self.y0) / self.ch).astype(int), 0, self.ny - 1)

    def _gather(self, ix0, ix1, iy0, iy1) -> np.ndarray:
        found = [self.cells[iy * self.nx + ix]
                 for iy in range(iy0, iy1 + 1)
                 for ix in range(ix0, ix1 + 1)]
        if not found:
            return np.empty(0, dtype=np.intp)
        return np.unique(np.concatenate(found))

    def nearest_edge(self, p: np.ndarray):
        """Distance and foot point of the tie-broken nearest edge."""
        cx = int(self._col(p[0]))
        cy = int(self._row(p[1]))
        # Expand square rings until some candidate yields an upper bound.
        upper = np.inf
        for r in range(max(self.nx, self.ny)):
            ring = self._ring_cells(cx, cy, r)
            if ring.size:
                d, _ = _foot_points(p[None, :], self._starts[ring], self._ends[ring])
                upper = float(d.min())
                break
        # All edges within `upper` of p live in cells touching that disk.
        cand = self._gather(int(self._col(p[0] - upper)), int(self._col(p[0] + upper)),
                            int(self._row(p[1] - upper)), int(self._row(p[1] + upper)))
        d, foot = _foot_points(p[None, :], self._starts[cand], self._ends[cand])
        k = int(np.argmin(d[0]))  # candidates are index-sorted: first min = lowest edge index
        return float(d[0, k]), foot[0, k]

    def _ring_cells(self, cx, cy, r) -> np.ndarray:
        if r == 0:
            return self.cells[cy * self.nx + cx]
        out = []
        for iy in range(cy - r, cy + r + 1):
            if not 0 <= iy < self.ny:
                continue
            xs = range(cx - r, cx + r + 1) if iy in (cy - r, cy + r) else (cx - r, cx + r)
            for ix in xs:
                if 0 <= ix < self.nx:
                    out.append(self.cells[iy * self.nx + ix])
        if not out:
            return np.empty(0, dtype=np.intp)
        return np.unique(np.concatenate(out))

    def point_inside(self, p: np.ndarray) -> bool:
        px, py = float(p[0]), float(p[1])
        if py < self.y0 or py >= self.y1 or px >= self.x1:
            # No edge endpoint lies strictly above py, or every exact
            # crossing x is <= px: zero crossings either way.
            return False
        cand = self._gather(int(self._col(px)), self.nx - 1,
                            int(self._row(py)), int(self._row(py)))
        if cand.size == 0:
            return False
        count = _crossing_count(p[None, :], self._starts[cand], self._ends[cand])
        return bool(count[0] % 2 == 1)
