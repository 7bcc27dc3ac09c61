"""State, adjoint and deformation problems, plus synthetic Cauchy data.

Boundary traces on OUTER are parameterized by arc length measured
counterclockwise from the crossing of the curve with the ray pointing in the
+x direction from the curve's centroid. That makes traces from meshes of
different resolution comparable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import BcSpec, ScalarField, VectorField, solve_elliptic
from .geometry import BoundaryPolyline
from .mesh import INNER, OUTER, Mesh, triangulate_annulus

__all__ = [
    "CauchyData",
    "solve_state",
    "solve_adjoint",
    "solve_deformation",
    "generate_synthetic_data",
    "arclength_parameter",
    "periodic_l2_norm",
    "write_cauchy_data",
    "read_cauchy_data",
]


def _centroid(pts):
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6 * a)


def arclength_parameter(points):
    """Arc length of each vertex of a closed curve and the total length.

    The curve is traversed counterclockwise starting from where it crosses
    the +x ray through its centroid.
    """
    pts = np.asarray(points, dtype=float)
    ccw = _signed_area(pts) > 0
    if not ccw:
        pts = pts[::-1]
    c = _centroid(pts)
    a = pts - c
    b = np.roll(a, -1, axis=0)
    seg = np.linalg.norm(b - a, axis=1)
    # edge crossing the +x ray: y changes sign from below to at-or-above
    cross = (a[:, 1] < 0) & (b[:, 1] >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = -a[:, 1] / (b[:, 1] - a[:, 1])
    xcross = a[:, 0] + lam * (b[:, 0] - a[:, 0])
    cand = np.flatnonzero(cross & (xcross > 0))
    i = cand[np.argmin(xcross[cand])] if len(cand) else 0
    lam_i = lam[i] if len(cand) else 0.0
    total = seg.sum()
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    # arc length from the crossing point on edge i to vertex j
    start = cum[i] + lam_i * seg[i]
    s = (cum[:-1] - start) % total
    if not ccw:
        s = s[::-1]
    return s, total


def _signed_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def periodic_l2_norm(s, values, perimeter) -> float:
    """L2 norm of the periodic piecewise-linear function through (s, values)."""
    order = np.argsort(s)
    s, v = np.asarray(s)[order], np.asarray(values)[order]
    ds = np.diff(np.append(s, s[0] + perimeter))
    vn = np.roll(v, -1)
    return float(np.sqrt(np.sum(ds * (v * v + v * vn + vn * vn) / 3.0)))


@dataclass(frozen=True)
class CauchyData:
    """Neumann flux g and the measured Dirichlet trace f on the outer boundary.

    ``s`` holds increasing arc-length positions in ``[0, perimeter)``.
    """

    s: np.ndarray
    f: np.ndarray
    perimeter: float
    g: float = 1.0
    noise_level: float = 0.0
    seed: int = 0
    fine_h: float = float("nan")
    f_exact: np.ndarray | None = None
    _traces: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.noise_level < 1:
            raise ValueError("noise_level must lie in [0, 1)")
        if self.g == 0 and not np.any(self.f):
            raise ValueError("Cauchy pair (f, g) must not vanish identically")
        if len(self.s) != len(self.f):
            raise ValueError("s and f must have equal length")

    def trace_on(self, mesh: Mesh) -> np.ndarray:
        """f at the OUTER loop vertices of ``mesh`` by arc-length interpolation."""
        key = id(mesh)
        hit = self._traces.get(key)
        if hit is not None and hit[0] is mesh:
            return hit[1]
        pts = mesh.vertices[mesh.boundary_loop(OUTER)]
        s_mesh, total = arclength_parameter(pts)
        s_data = s_mesh * (self.perimeter / total)
        f = np.interp(s_data, self.s, self.f, period=self.perimeter)
        if len(self._traces) > 8:
            self._traces.clear()
        self._traces[key] = (mesh, f)
        return f

    def relative_noise(self) -> float:
        if self.f_exact is None:
            raise ValueError("exact trace not available")
        num = periodic_l2_norm(self.s, self.f - self.f_exact, self.perimeter)
        return num / periodic_l2_norm(self.s, self.f_exact, self.perimeter)


def solve_state(mesh: Mesh, g=1.0) -> ScalarField:
    """Laplace problem with flux g on OUTER and u = 0 on INNER."""
    return solve_elliptic(mesh, 0.0, 0, BcSpec(dirichlet={INNER: 0.0}, neumann={OUTER: g}))


def solve_adjoint(mesh: Mesh, u, v, lam, beta, f) -> ScalarField:
    """Adjoint state p with source beta (u - v) + lam and flux u - f on OUTER.

    ``f`` is the measured trace at the OUTER loop vertices.
    """
    source = beta * (u - v) + lam
    flux = u.on(OUTER) - np.asarray(f, dtype=float)
    return solve_elliptic(mesh, 0.0, source, BcSpec(dirichlet={INNER: 0.0}, neumann={OUTER: flux}))


def solve_deformation(mesh: Mesh, density) -> VectorField:
    """H1 Riesz representative V of the boundary density.

    Solves -Laplace V + V = 0 with V = 0 on OUTER and flux -density n on
    INNER, n being the outward normal of the mesh domain.
    """
    density = np.asarray(density, dtype=float)
    normals = mesh.vertex_normals(INNER)
    comps = []
    for c in range(2):
        bc = BcSpec(dirichlet={OUTER: 0.0}, neumann={INNER: -density * normals[:, c]})
        comps.append(solve_elliptic(mesh, 1.0, 0, bc).values)
    return VectorField(mesh, np.column_stack(comps))


def generate_synthetic_data(
    true_inclusion: BoundaryPolyline,
    outer: BoundaryPolyline,
    g=1.0,
    fine_h=0.01,
    noise_level=0.0,
    seed=0,
) -> CauchyData:
    """Forward-solve on a fine mesh and record the (optionally noisy) outer trace.

    Both polylines should already be sampled at roughly ``fine_h``.  Noise
    is i.i.d. Gaussian per outer vertex, rescaled so that its L2 norm on the
    outer curve is exactly ``noise_level`` times that of the clean trace.
    """
    mesh = triangulate_annulus(outer, true_inclusion, fine_h)
    u = solve_state(mesh, g)
    loop = mesh.boundary_loop(OUTER)
    s, total = arclength_parameter(mesh.vertices[loop])
    order = np.argsort(s)
    s = s[order]
    f_exact = u.values[loop][order]
    f = f_exact.copy()
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        e = rng.standard_normal(len(s))
        scale = noise_level * periodic_l2_norm(s, f_exact, total) / periodic_l2_norm(s, e, total)
        f = f_exact + scale * e
    return CauchyData(s, f, total, float(g), float(noise_level), int(seed), float(fine_h), f_exact)


def write_cauchy_data(data: CauchyData, path):
    """Write ``s,f`` rows plus a JSON sidecar next to ``path``.

    The last row repeats the first value at s = perimeter so the period can
    be recovered.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,f\n")
        for si, fi in zip(data.s, data.f):
            fh.write(f"{si:.17g},{fi:.17g}\n")
        fh.write(f"{data.perimeter:.17g},{data.f[0]:.17g}\n")
    meta = {"g": data.g, "noise_level": data.noise_level, "seed": data.seed, "fine_h": data.fine_h}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_cauchy_data(path) -> CauchyData:
    path = Path(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return CauchyData(
        rows[:-1, 0].copy(),
        rows[:-1, 1].copy(),
        float(rows[-1, 0]),
        g=float(meta.get("g", 1.0)),
        noise_level=float(meta.get("noise_level", 0.0)),
        seed=int(meta.get("seed", 0)),
        fine_h=float(meta.get("fine_h", float("nan"))),
    )
