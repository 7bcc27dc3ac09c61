"""Triangulations of the doubly connected region between two closed curves.

The mesh stores its boundary as labelled edges oriented with the domain on
the left, so OUTER loops run counterclockwise and INNER loops clockwise.
Every operation returns a new :class:`Mesh`; arrays are read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .geometry import BoundaryPolyline, GeometryError

__all__ = [
    "OUTER",
    "INNER",
    "Mesh",
    "MeshError",
    "TriangulationError",
    "InvertedElementError",
    "ClearanceError",
    "GeometryConstraints",
    "Admissibility",
    "QualitySummary",
    "triangulate_annulus",
    "deform_mesh",
    "mesh_quality",
    "triangle_quality",
    "remesh",
    "transfer_field",
    "interpolate_values",
    "check_admissibility",
    "write_mesh",
    "read_mesh",
]

OUTER = 1
INNER = 2
_LABELS = {OUTER: "OUTER", INNER: "INNER"}


class MeshError(ValueError):
    """A mesh violates one of its structural invariants."""


class TriangulationError(MeshError):
    pass


class InvertedElementError(MeshError):
    """Deformation produced a triangle with non-positive signed area."""


class ClearanceError(MeshError):
    """The inner boundary came within ``delta`` of the outer boundary."""


@dataclass(frozen=True)
class GeometryConstraints:
    delta: float = 0.05
    min_quality: float = 0.2

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.min_quality <= 1:
            raise ValueError("min_quality must lie in (0, 1]")


def _signed_areas(vertices, triangles):
    p0, p1, p2 = (vertices[triangles[:, i]] for i in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangulation of Omega minus the closure of omega.

    Attributes:
        vertices: (nv, 2) coordinates.
        triangles: (nt, 3) counterclockwise vertex indices.
        boundary_edges: (nb, 2) vertex pairs with the domain on the left.
        boundary_labels: (nb,) entries in {OUTER, INNER}.
        h_target: target edge length used to build the mesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: np.ndarray
    h_target: float
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        for name, dtype in (
            ("vertices", float),
            ("triangles", np.int64),
            ("boundary_edges", np.int64),
            ("boundary_labels", np.int64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self._validate:
            self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """(nt, 3, 2) constant gradients of the three hat functions per triangle."""
        p = self.vertices[self.triangles]
        g = np.empty_like(p)
        for i in range(3):
            a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
            g[:, i, 0] = a[:, 1] - b[:, 1]
            g[:, i, 1] = b[:, 0] - a[:, 0]
        return g / (2 * self.areas)[:, None, None]

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted vertex pairs."""
        t = self.triangles
        e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def label_edges(self, label) -> np.ndarray:
        return self.boundary_edges[self.boundary_labels == label]

    def boundary_loop(self, label) -> np.ndarray:
        """Vertex indices of one boundary curve, ordered with the domain on the left."""
        return self._loops[label]

    def boundary_vertices(self, label) -> np.ndarray:
        return self._loops[label]

    @cached_property
    def _loops(self):
        loops = {}
        for label in (OUTER, INNER):
            e = self.label_edges(label)
            if len(e) == 0:
                raise MeshError(f"no {_LABELS[label]} boundary edges")
            nxt = dict(zip(e[:, 0].tolist(), e[:, 1].tolist()))
            if len(nxt) != len(e):
                raise MeshError(f"{_LABELS[label]} boundary is not a simple loop")
            start = int(e[0, 0])
            loop = [start]
            cur = nxt[start]
            while cur != start:
                loop.append(cur)
                if len(loop) > len(e):
                    break
                cur = nxt.get(cur)
                if cur is None:
                    raise MeshError(f"{_LABELS[label]} boundary is open")
            if len(loop) != len(e):
                raise MeshError(f"{_LABELS[label]} boundary is not a single closed curve")
            loops[label] = np.array(loop, dtype=np.int64)
        return loops

    def polyline(self, label) -> BoundaryPolyline:
        """Boundary curve as a polyline (OUTER counterclockwise, INNER clockwise)."""
        return BoundaryPolyline(self.vertices[self.boundary_loop(label)])

    @cached_property
    def edge_normals(self) -> dict:
        """Outward unit normal and length of each boundary edge, keyed by label."""
        out = {}
        for label in (OUTER, INNER):
            e = self.label_edges(label)
            d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
            length = np.linalg.norm(d, axis=1)
            out[label] = (np.c_[d[:, 1], -d[:, 0]] / length[:, None], length)
        return out

    def vertex_normals(self, label) -> np.ndarray:
        """Outward unit normals at the loop vertices (averaged adjacent edge normals).

        Rows follow :meth:`boundary_loop` order.
        """
        loop = self.boundary_loop(label)
        pts = self.vertices[loop]
        d = np.roll(pts, -1, axis=0) - pts
        n_edge = np.c_[d[:, 1], -d[:, 0]] / np.linalg.norm(d, axis=1)[:, None]
        n = n_edge + np.roll(n_edge, 1, axis=0)
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def locator(self) -> PointLocator:
        return PointLocator(self)

    def validate(self):
        """Raise :class:`MeshError` if any structural invariant fails."""
        nv = len(self.vertices)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3 or len(self.triangles) == 0:
            raise MeshError("triangles must be a non-empty (nt, 3) array")
        if self.triangles.min() < 0 or self.triangles.max() >= nv:
            raise MeshError("triangle index out of range")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        if np.any(self.areas <= 0):
            raise InvertedElementError(
                f"{int(np.sum(self.areas <= 0))} triangles have non-positive signed area"
            )
        t = self.triangles
        directed = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        bnd = und[counts == 1]
        given = np.sort(self.boundary_edges, axis=1)
        if len(bnd) != len(given) or not np.array_equal(
            np.unique(given, axis=0), bnd
        ):
            raise MeshError("boundary edges do not match the single-triangle edges")
        # orientation: each boundary edge must appear as a directed triangle edge
        code = directed[:, 0] * nv + directed[:, 1]
        bcode = self.boundary_edges[:, 0] * nv + self.boundary_edges[:, 1]
        if not np.all(np.isin(bcode, code)):
            raise MeshError("boundary edges are not oriented with the domain on the left")
        if not set(np.unique(self.boundary_labels).tolist()) == {OUTER, INNER}:
            raise MeshError("boundary labels must be exactly {OUTER, INNER}")
        loops = self._loops
        outer = self.vertices[loops[OUTER]]
        if _poly_area(outer) <= 0:
            raise MeshError("OUTER loop is not counterclockwise")
        inner = self.vertices[loops[INNER]]
        if not np.all(_contains(outer, inner)):
            raise MeshError("INNER vertices must lie strictly inside the OUTER curve")


def _poly_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _contains(poly, pts):
    a, b = poly, np.roll(poly, -1, axis=0)
    x, y = pts[:, 0, None], pts[:, 1, None]
    cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (
            b[None, :, 1] - a[None, :, 1]
        )
    return (np.count_nonzero(cond & (x < xc), axis=1) % 2) == 1


def _interior_point(poly: BoundaryPolyline) -> np.ndarray:
    n = len(poly)
    seg = np.c_[np.arange(n), (np.arange(n) + 1) % n]
    t = triangle.triangulate({"vertices": poly.points.copy(), "segments": seg}, "pQ")
    tri = t["vertices"][t["triangles"]]
    areas = np.abs(_signed_areas(t["vertices"], t["triangles"]))
    return tri[np.argmax(areas)].mean(axis=0)


def _mesh_from_triangles(vertices, triangles, n_outer, n_inner, h) -> Mesh:
    t = np.asarray(triangles, dtype=np.int64)
    areas = _signed_areas(vertices, t)
    flip = areas < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    directed = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    und, inv, counts = np.unique(
        np.sort(directed, axis=1), axis=0, return_inverse=True, return_counts=True
    )
    inv = inv.ravel()
    bnd = directed[counts[inv] == 1]
    on_outer = np.all(bnd < n_outer, axis=1)
    on_inner = np.all((bnd >= n_outer) & (bnd < n_outer + n_inner), axis=1)
    if not np.all(on_outer | on_inner):
        raise TriangulationError("triangulator inserted points on the boundary")
    labels = np.where(on_outer, OUTER, INNER)
    return Mesh(vertices, t, bnd, labels, float(h))


def triangulate_annulus(outer: BoundaryPolyline, inner: BoundaryPolyline, h: float) -> Mesh:
    """Quality triangulation of the region between ``outer`` and ``inner``.

    Input points become mesh vertices (outer first, then inner) and the
    boundary edges follow the polylines exactly; only interior points are
    inserted.

    Raises:
        TriangulationError: for invalid or degenerate geometry.
    """
    if not h > 0:
        raise TriangulationError("h must be positive")
    outer = outer.oriented(ccw=True)
    for name, poly in (("outer", outer), ("inner", inner)):
        if not poly.is_simple():
            raise TriangulationError(f"{name} polyline self-intersects")
    if outer.intersects(inner):
        raise TriangulationError("inner and outer polylines intersect")
    if not np.all(outer.contains(inner.points)):
        raise TriangulationError("inner polyline is not inside the outer polyline")
    if h > inner.diameter:
        raise TriangulationError(
            f"h = {h:g} exceeds the inner curve diameter {inner.diameter:g}"
        )
    gap = min(outer.distance(inner.points).min(), inner.distance(outer.points).min())
    if gap < 0.1 * h:
        raise TriangulationError(
            f"annulus is degenerate: boundary gap {gap:.3g} is below 0.1 h"
        )
    pts = np.vstack([outer.points, inner.points])
    no, ni = len(outer), len(inner)
    idx_o, idx_i = np.arange(no), np.arange(ni)
    seg = np.vstack(
        [np.c_[idx_o, (idx_o + 1) % no], no + np.c_[idx_i, (idx_i + 1) % ni]]
    )
    hole = _interior_point(inner)
    max_area = 0.5 * np.sqrt(3) / 4 * (1.5 * h) ** 2 * 1.15
    opts = f"pq28a{max_area:.15f}YQ"
    try:
        out = triangle.triangulate(
            {"vertices": pts, "segments": seg, "holes": hole[None, :]}, opts
        )
    except Exception as exc:  # the C library reports failures as generic errors
        raise TriangulationError(f"triangle failed: {exc}") from exc
    verts = np.asarray(out["vertices"], dtype=float)
    if len(verts) < len(pts) or not np.array_equal(verts[: len(pts)], pts):
        raise TriangulationError("triangulator moved input boundary points")
    try:
        return _mesh_from_triangles(verts, out["triangles"], no, ni, h)
    except TriangulationError:
        raise
    except MeshError as exc:
        raise TriangulationError(str(exc)) from exc


def check_admissibility(inner: BoundaryPolyline, outer: BoundaryPolyline, constraints=None):
    """Test that ``inner`` sits inside ``outer`` with clearance above delta.

    Returns an :class:`Admissibility` record, truthy when admissible.
    """
    if constraints is None:
        constraints = GeometryConstraints()
    delta = constraints.delta if isinstance(constraints, GeometryConstraints) else float(constraints)
    inside = bool(np.all(outer.contains(inner.points))) and not outer.intersects(inner)
    clearance = float(outer.distance(inner.points).min())
    ok = inside and clearance > delta
    if not inside:
        reason = "inner curve is not strictly inside the outer curve"
    elif not ok:
        reason = f"clearance {clearance:.6g} <= delta {delta:.6g}"
    else:
        reason = ""
    return Admissibility(ok, inside, clearance, reason)


class Admissibility(NamedTuple):
    ok: bool
    inside: bool
    clearance: float
    reason: str

    def __bool__(self):
        return self.ok


def deform_mesh(mesh: Mesh, V, t: float, constraints: GeometryConstraints | None = None) -> Mesh:
    """Move every vertex x to x + t V(x), keeping connectivity.

    Raises:
        InvertedElementError: a triangle's signed area became non-positive.
        ClearanceError: an INNER vertex came within ``constraints.delta`` of OUTER.
    """
    V = np.asarray(getattr(V, "values", V), dtype=float)
    if V.shape != mesh.vertices.shape:
        raise ValueError("displacement field does not match the mesh")
    if t == 0 or not np.any(V):
        return mesh
    outer = mesh.boundary_loop(OUTER)
    if np.any(V[outer] != 0):
        raise ValueError("displacement must vanish on OUTER vertices")
    new = mesh.vertices + t * V
    areas = _signed_areas(new, mesh.triangles)
    if not np.all(np.isfinite(new)) or np.any(areas <= 0):
        raise InvertedElementError(
            f"step t={t:g} inverts {int(np.sum(~(areas > 0)))} triangles"
        )
    if constraints is not None:
        from .metrics import point_to_polyline_distance

        d = point_to_polyline_distance(new[mesh.boundary_loop(INNER)], new[outer])
        if d.min() <= constraints.delta:
            raise ClearanceError(
                f"inner boundary within {d.min():.4g} of outer (delta={constraints.delta:g})"
            )
    moved = Mesh(new, mesh.triangles, mesh.boundary_edges, mesh.boundary_labels, mesh.h_target, _validate=False)
    if not np.all(_contains(new[outer], new[moved.boundary_loop(INNER)])):
        raise ClearanceError("inner boundary left the outer curve")
    return moved


def triangle_quality(vertices, triangles) -> np.ndarray:
    """Twice the inradius over the circumradius, per triangle (1 for equilateral)."""
    p = vertices[triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = np.abs(_signed_areas(vertices, triangles))
    s = 0.5 * (a + b + c)
    return 8 * area**2 / (s * a * b * c)


class QualitySummary(NamedTuple):
    min_quality: float
    mean_quality: float
    min_edge: float


def mesh_quality(mesh: Mesh) -> QualitySummary:
    q = triangle_quality(mesh.vertices, mesh.triangles)
    p = mesh.vertices[mesh.triangles]
    lengths = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
    return QualitySummary(float(q.min()), float(q.mean()), float(lengths.min()))


def remesh(mesh: Mesh, h: float | None = None):
    """Retriangulate inside the current boundary curves.

    Returns the new mesh and the ``(outer, inner)`` polylines used; boundary
    vertices are kept exactly.
    """
    h = mesh.h_target if h is None else h
    outer = mesh.polyline(OUTER)
    inner = mesh.polyline(INNER)
    return triangulate_annulus(outer, inner, h), (outer, inner)


class PointLocator:
    """Find containing triangles and barycentric coordinates for query points."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self._centroids = cKDTree(p.mean(axis=1))
        self._vertices = cKDTree(mesh.vertices)
        be = mesh.vertices[mesh.boundary_edges]
        self._edge_mid = cKDTree(be.mean(axis=1))
        # affine map inverse per triangle: lam[1:] = inv(B) (x - p0)
        B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self._p0 = p[:, 0]
        self._Binv = np.linalg.inv(B)

    def barycentric(self, tri, pts):
        l12 = np.einsum("nij,nj->ni", self._Binv[tri], pts - self._p0[tri])
        return np.c_[1 - l12.sum(axis=1), l12]

    def locate(self, pts, tol=1e-10):
        """Triangle index and barycentric weights; index -1 where outside."""
        pts = np.asarray(pts, dtype=float)
        n = len(pts)
        tri = np.full(n, -1, dtype=np.int64)
        lam = np.zeros((n, 3))
        todo = np.arange(n)
        nt = self.mesh.n_triangles
        for k in (8, 32, 128):
            if len(todo) == 0:
                break
            k = min(k, nt)
            _, cand = self._centroids.query(pts[todo], k=k)
            cand = cand.reshape(len(todo), k)
            q = pts[todo][:, None, :] - self._p0[cand]
            l12 = np.einsum("nkij,nkj->nki", self._Binv[cand], q)
            lk = np.concatenate([1 - l12.sum(axis=2, keepdims=True), l12], axis=2)
            ok = lk.min(axis=2) >= -tol
            hit = ok.any(axis=1)
            first = ok.argmax(axis=1)[hit]
            rows = np.flatnonzero(hit)
            tri[todo[hit]] = cand[rows, first]
            lam[todo[hit]] = lk[rows, first]
            todo = todo[~hit]
            if k == nt:
                break
        return tri, lam

    def nearest_vertex(self, pts):
        return self._vertices.query(pts)[1]

    def nearest_boundary_point(self, pts, k=8):
        """Closest boundary edge (vertex pair) and the projection parameter in [0, 1]."""
        edges = self.mesh.boundary_edges
        a = self.mesh.vertices[edges[:, 0]]
        d = self.mesh.vertices[edges[:, 1]] - a
        k = min(k, len(edges))
        _, cand = self._edge_mid.query(pts, k=k)
        cand = cand.reshape(len(pts), k)
        w = pts[:, None, :] - a[cand]
        s = np.clip(np.einsum("nkj,nkj->nk", w, d[cand]) / np.einsum("nkj,nkj->nk", d[cand], d[cand]), 0, 1)
        r = w - s[..., None] * d[cand]
        best = np.einsum("nkj,nkj->nk", r, r).argmin(axis=1)
        rows = np.arange(len(pts))
        return edges[cand[rows, best]], s[rows, best]


def interpolate_values(values, old: Mesh, pts) -> np.ndarray:
    """Evaluate a P1 nodal array of ``old`` at arbitrary points.

    Points outside ``old`` take the value at the nearest point of its
    boundary, interpolated linearly along that boundary edge.  ``values``
    may carry trailing dimensions (e.g. (nv, 2)).  Constants are reproduced
    exactly.
    """
    values = np.asarray(values, dtype=float)
    pts = np.asarray(pts, dtype=float)
    tri, lam = old.locator.locate(pts)
    inside = tri >= 0
    out = np.empty((len(pts),) + values.shape[1:])
    c = values[old.triangles[tri[inside]]]
    l = lam[inside].reshape((-1, 3) + (1,) * (values.ndim - 1))
    out[inside] = c[:, 0] + l[:, 1] * (c[:, 1] - c[:, 0]) + l[:, 2] * (c[:, 2] - c[:, 0])
    if np.any(~inside):
        e, s = old.locator.nearest_boundary_point(pts[~inside])
        a, b = values[e[:, 0]], values[e[:, 1]]
        out[~inside] = a + s.reshape((-1,) + (1,) * (values.ndim - 1)) * (b - a)
    return out


def transfer_field(field, old: Mesh, new: Mesh):
    """P1 interpolant of ``field`` (living on ``old``) at the vertices of ``new``."""
    from .fem import ScalarField, VectorField

    values = getattr(field, "values", field)
    if getattr(field, "mesh", old) is not old:
        raise ValueError("field does not live on the source mesh")
    if new is old:
        return field
    out = interpolate_values(values, old, new.vertices)
    if isinstance(field, VectorField):
        return VectorField(new, out)
    if isinstance(field, ScalarField):
        return ScalarField(new, out)
    return out


def write_mesh(mesh: Mesh, path):
    """Text format: ``nv nt nb`` header, vertices, triangles, labelled boundary edges."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for (i, j), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
            fh.write(f"{i} {j} {lab}\n")


def read_mesh(path, h_target=float("nan")) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        nv, nt, nb = (int(x) for x in fh.readline().split())
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != nv + nt + nb:
        raise MeshError(f"{path}: expected {nv + nt + nb} rows, found {len(rows)}")
    verts = np.array(rows[:nv], dtype=float)
    tris = np.array(rows[nv : nv + nt], dtype=np.int64)
    bnd = np.array(rows[nv + nt :], dtype=np.int64)
    return Mesh(verts, tris, bnd[:, :2], bnd[:, 2], h_target)
