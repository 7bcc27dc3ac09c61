"""Closed boundary polylines and the built-in inclusion shapes."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BoundaryPolyline",
    "GeometryError",
    "circle",
    "ellipse",
    "peanut",
    "flower",
    "square",
    "parse_shape",
    "read_polyline",
    "write_polyline",
    "segments_intersect",
]


class GeometryError(ValueError):
    """Raised for malformed polylines or shape specifications."""


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
        c[..., 0] - a[..., 0]
    )


def segments_intersect(p0, p1, q0, q1, touching=True):
    """Pairwise intersection test between segment sets.

    Arrays are broadcast against each other, so ``p0[:, None]`` against
    ``q0[None, :]`` gives the full matrix.  Collinear overlaps count as
    intersections; with ``touching=False`` shared endpoints do not.
    """
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    if not touching:
        return proper
    scale = 1e-14
    return proper | (np.abs(d1) <= scale) & _on_seg(q0, q1, p0) | (np.abs(d2) <= scale) & _on_seg(
        q0, q1, p1
    ) | (np.abs(d3) <= scale) & _on_seg(p0, p1, q0) | (np.abs(d4) <= scale) & _on_seg(p0, p1, q1)


def _on_seg(a, b, c):
    return (
        (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
        & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
        & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
        & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
    )


@dataclass(frozen=True)
class BoundaryPolyline:
    """Closed polyline; the last point is joined back to the first.

    The orientation is not stored separately: it is the sign of
    :attr:`signed_area` (positive for counterclockwise).
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("polyline points must have shape (n, 2)")
        if len(pts) < 8:
            raise GeometryError(f"polyline needs at least 8 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("polyline contains non-finite coordinates")
        step = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if np.any(step == 0.0):
            raise GeometryError("consecutive polyline points coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.signed_area == 0.0:
            raise GeometryError("polyline encloses zero area")

    def __len__(self):
        return len(self.points)

    @property
    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def is_ccw(self) -> bool:
        return self.signed_area > 0

    @property
    def edges(self):
        """Segment start and end points, each of shape (n, 2)."""
        return self.points, np.roll(self.points, -1, axis=0)

    @property
    def edge_lengths(self) -> np.ndarray:
        a, b = self.edges
        return np.linalg.norm(b - a, axis=1)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def diameter(self) -> float:
        p = self.points
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def arclength(self) -> np.ndarray:
        """Cumulative arc length at each vertex, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)[:-1]])

    def reversed(self) -> BoundaryPolyline:
        return BoundaryPolyline(self.points[::-1].copy())

    def oriented(self, ccw=True) -> BoundaryPolyline:
        return self if self.is_ccw == ccw else self.reversed()

    def is_simple(self) -> bool:
        a, b = self.edges
        n = len(a)
        hit = segments_intersect(a[:, None], b[:, None], a[None, :], b[None, :])
        i, j = np.triu_indices(n, k=2)
        # first and last edges share a vertex
        keep = ~((i == 0) & (j == n - 1))
        return not np.any(hit[i[keep], j[keep]])

    def contains(self, pts) -> np.ndarray:
        """Even-odd point-in-polygon test."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a, b = self.edges
        x, y = pts[:, 0, None], pts[:, 1, None]
        cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (
                b[None, :, 1] - a[None, :, 1]
            )
        return (np.count_nonzero(cond & (x < xc), axis=1) % 2) == 1

    def distance(self, pts) -> np.ndarray:
        """Exact Euclidean distance from each point to the polyline."""
        from .metrics import point_to_polyline_distance

        return point_to_polyline_distance(np.atleast_2d(pts), self.points)

    def intersects(self, other: BoundaryPolyline) -> bool:
        a, b = self.edges
        c, d = other.edges
        return bool(np.any(segments_intersect(a[:, None], b[:, None], c[None, :], d[None, :])))

    def transformed(self, rotation=0.0, shift=(0.0, 0.0)) -> BoundaryPolyline:
        c, s = np.cos(rotation), np.sin(rotation)
        R = np.array([[c, -s], [s, c]])
        return BoundaryPolyline(self.points @ R.T + np.asarray(shift, dtype=float))


def _n_points(perimeter, h, n):
    if n is not None:
        return int(n)
    if h is None:
        raise GeometryError("give either a point count n or a spacing h")
    return max(8, int(np.ceil(perimeter / h)))


def _polar(radius_fn, n, center=(0.0, 0.0), rotation=0.0):
    theta = 2 * np.pi * np.arange(n) / n
    r = radius_fn(theta)
    pts = np.c_[r * np.cos(theta + rotation), r * np.sin(theta + rotation)]
    return BoundaryPolyline(pts + np.asarray(center, dtype=float))


def _polar_perimeter(radius_fn, m=4096):
    theta = 2 * np.pi * np.arange(m + 1) / m
    r = radius_fn(theta)
    p = np.c_[r * np.cos(theta), r * np.sin(theta)]
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def circle(cx=0.0, cy=0.0, r=1.0, *, n=None, h=None) -> BoundaryPolyline:
    """Counterclockwise circle sampled at ``n`` points (or spacing ``h``)."""
    if r <= 0:
        raise GeometryError("circle radius must be positive")
    n = _n_points(2 * np.pi * r, h, n)
    return _polar(lambda t: np.full_like(t, r), n, (cx, cy))


def ellipse(cx=0.0, cy=0.0, a=1.0, b=0.5, rotation=0.0, *, n=None, h=None):
    if a <= 0 or b <= 0:
        raise GeometryError("ellipse semi-axes must be positive")
    n = _n_points(np.pi * (3 * (a + b) - np.sqrt((3 * a + b) * (a + 3 * b))), h, n)
    t = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(rotation), np.sin(rotation)
    x, y = a * np.cos(t), b * np.sin(t)
    return BoundaryPolyline(np.c_[cx + c * x - s * y, cy + s * x + c * y])


def peanut(r0=0.6, c=0.25, cx=0.0, cy=0.0, rotation=0.0, *, n=None, h=None):
    """Two-lobed curve r(t) = r0 sqrt(cos^2 t + c sin^2 t); concave waist for c < 1/2."""
    if r0 <= 0 or c <= 0:
        raise GeometryError("peanut needs r0 > 0 and c > 0")

    def fn(t):
        return r0 * np.sqrt(np.cos(t) ** 2 + c * np.sin(t) ** 2)

    return _polar(fn, _n_points(_polar_perimeter(fn), h, n), (cx, cy), rotation)


def flower(r0=0.5, eps=0.25, m=5, cx=0.0, cy=0.0, rotation=0.0, *, n=None, h=None):
    """Star-shaped curve r(t) = r0 (1 + eps cos(m t))."""
    if r0 <= 0 or not 0 <= eps < 1:
        raise GeometryError("flower needs r0 > 0 and 0 <= eps < 1")
    m = int(m)

    def fn(t):
        return r0 * (1 + eps * np.cos(m * t))

    return _polar(fn, _n_points(_polar_perimeter(fn), h, n), (cx, cy), rotation)


def square(cx=0.0, cy=0.0, half=1.0, *, n=None, h=None):
    """Axis-aligned square with vertices at (cx +- half, cy +- half)."""
    n = _n_points(8 * half, h, n)
    per_side = max(2, int(np.ceil(n / 4)))
    s = np.linspace(-half, half, per_side + 1)[:-1]
    one = np.full(per_side, half)
    pts = np.vstack(
        [np.c_[s, -one], np.c_[one, s], np.c_[-s, one], np.c_[-one, -s]]
    )
    return BoundaryPolyline(pts + np.array([cx, cy]))


_SHAPES = {
    "circle": circle,
    "ellipse": ellipse,
    "peanut": peanut,
    "flower": flower,
    "square": square,
}


# (required, maximum) parameter counts
_ARITY = {"circle": (3, 3), "ellipse": (4, 5), "peanut": (2, 5), "flower": (3, 6), "square": (3, 3)}


def parse_shape(spec: str, h=None, n=None) -> BoundaryPolyline:
    """Build a polyline from ``name:p1,p2,...``.

    Parameter order per shape::

        circle:cx,cy,r
        ellipse:cx,cy,a,b[,rotation]
        peanut:r0,c[,cx,cy,rotation]
        flower:r0,eps,m[,cx,cy,rotation]
        square:cx,cy,half
    """
    name, _, args = spec.strip().partition(":")
    name = name.strip().lower()
    if name not in _SHAPES:
        raise GeometryError(f"unknown shape {name!r}; expected one of {sorted(_SHAPES)}")
    try:
        params = [float(a) for a in args.split(",")] if args.strip() else []
    except ValueError as exc:
        raise GeometryError(f"bad shape parameters in {spec!r}") from exc
    lo, hi = _ARITY[name]
    if not lo <= len(params) <= hi:
        raise GeometryError(f"{name} takes {lo} to {hi} parameters, got {len(params)} in {spec!r}")
    try:
        return _SHAPES[name](*params, n=n, h=h)
    except TypeError as exc:
        raise GeometryError(f"wrong number of parameters in {spec!r}") from exc


def write_polyline(poly: BoundaryPolyline, path):
    """Write ``x,y`` rows; closure back to the first point is implied."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in poly.points:
            w.writerow([f"{x:.17g}", f"{y:.17g}"])


def read_polyline(path) -> BoundaryPolyline:
    rows = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return BoundaryPolyline(rows)
