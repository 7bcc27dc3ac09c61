"""P1 finite elements for -div grad u + c u = s with mixed boundary conditions."""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from numbers import Real

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import INNER, OUTER, Mesh

__all__ = [
    "ScalarField",
    "VectorField",
    "BcSpec",
    "SingularSystemError",
    "stiffness_matrix",
    "mass_matrix",
    "boundary_mass_matrix",
    "solve_elliptic",
    "integrate_domain",
    "integrate_boundary",
    "boundary_normal_derivative",
    "boundary_trace",
    "h1_norm",
    "l2_error",
    "write_field_csv",
]


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per mesh vertex."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 0:
            v = np.full(self.mesh.n_vertices, float(v))
        if v.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, mesh, c):
        return cls(mesh, np.full(mesh.n_vertices, float(c)))

    @classmethod
    def from_function(cls, mesh, fn):
        return cls(mesh, fn(mesh.vertices[:, 0], mesh.vertices[:, 1]))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.mesh is not self.mesh:
                raise ValueError("fields live on different meshes")
            return other.values
        if isinstance(other, Real):
            return float(other)
        return NotImplemented

    def _binary(self, other, op):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return ScalarField(self.mesh, op(self.values, o))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return ScalarField(self.mesh, -self.values)

    def on(self, label) -> np.ndarray:
        """Values at the loop vertices of a boundary label."""
        return self.values[self.mesh.boundary_loop(label)]


@dataclass(frozen=True, eq=False)
class VectorField:
    """One 2-vector per mesh vertex."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_vertices, 2):
            raise ValueError(f"expected shape ({self.mesh.n_vertices}, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_vertices, 2)))

    def component(self, i) -> ScalarField:
        return ScalarField(self.mesh, self.values[:, i])


@dataclass(frozen=True)
class BcSpec:
    """Boundary data keyed by label.

    A value is a constant, a ScalarField, a length-nv array, or an array
    aligned with ``mesh.boundary_loop(label)``.
    """

    dirichlet: dict = field(default_factory=dict)
    neumann: dict = field(default_factory=dict)

    def __post_init__(self):
        both = set(self.dirichlet) & set(self.neumann)
        if both:
            raise ValueError(f"labels {sorted(both)} are both Dirichlet and Neumann")


_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _cache(mesh):
    return _CACHE.setdefault(mesh, {})


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    c = _cache(mesh)
    if "K" not in c:
        g = mesh.basis_gradients
        local = np.einsum("tik,tjk->tij", g, g) * mesh.areas[:, None, None]
        c["K"] = _assemble(mesh, local)
    return c["K"]


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    c = _cache(mesh)
    if "M" not in c:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        c["M"] = _assemble(mesh, mesh.areas[:, None, None] * ref[None])
    return c["M"]


def boundary_mass_matrix(mesh: Mesh, label) -> sp.csr_matrix:
    """Edge mass matrix of the P1 trace on one boundary label."""
    if label not in (OUTER, INNER):
        raise ValueError(f"unknown boundary label {label!r}")
    c = _cache(mesh)
    key = ("B", label)
    if key not in c:
        e = mesh.label_edges(label)
        _, length = mesh.edge_normals[label]
        rows = np.repeat(e, 2, axis=1).ravel()
        cols = np.tile(e, 2).ravel()
        vals = (length[:, None] / 6.0 * np.array([2.0, 1.0, 1.0, 2.0])[None]).ravel()
        n = mesh.n_vertices
        c[key] = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return c[key]


def _assemble(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, 3).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _nodal(mesh, value, label=None):
    """Expand boundary or source data to a full nodal array."""
    if isinstance(value, ScalarField):
        if value.mesh is not mesh:
            raise ValueError("boundary data lives on a different mesh")
        return value.values
    if isinstance(value, Real):
        return np.full(mesh.n_vertices, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape == (mesh.n_vertices,):
        return arr
    if label is not None:
        loop = mesh.boundary_loop(label)
        if arr.shape == (len(loop),):
            full = np.zeros(mesh.n_vertices)
            full[loop] = arr
            return full
    raise ValueError(f"cannot interpret data of shape {arr.shape}")


def _factor(mesh, mass_coeff, free):
    c = _cache(mesh)
    key = ("lu", float(mass_coeff), free.tobytes())
    if key not in c:
        A = stiffness_matrix(mesh)
        if mass_coeff:
            A = A + mass_coeff * mass_matrix(mesh)
        A = A.tocsr()
        Aff = A[free][:, free].tocsc()
        c[key] = (A, Aff, splu(Aff))
    return c[key]


def solve_elliptic(mesh: Mesh, mass_coeff: float, source, bc: BcSpec) -> ScalarField:
    """Galerkin solution of -Laplace u + mass_coeff u = source.

    Dirichlet rows are eliminated and moved to the right-hand side;
    Neumann data enter through the boundary mass matrix.

    Raises:
        SingularSystemError: pure Neumann problem without a mass term.
    """
    labels = set(bc.dirichlet) | set(bc.neumann)
    unknown = labels - {OUTER, INNER}
    if unknown:
        raise ValueError(f"unknown boundary labels {sorted(unknown)}")
    if mass_coeff == 0 and not bc.dirichlet:
        raise SingularSystemError("pure Neumann Laplacian is singular")
    n = mesh.n_vertices
    rhs = np.zeros(n)
    if source is not None and not (isinstance(source, Real) and source == 0):
        rhs += mass_matrix(mesh) @ _nodal(mesh, source)
    for label, g in bc.neumann.items():
        rhs += boundary_mass_matrix(mesh, label) @ _nodal(mesh, g, label)
    u = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    for label, d in bc.dirichlet.items():
        loop = mesh.boundary_loop(label)
        fixed[loop] = True
        u[loop] = _nodal(mesh, d, label)[loop]
    if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(u)):
        raise ValueError("non-finite problem data")
    free = np.flatnonzero(~fixed)
    A, Aff, lu = _factor(mesh, mass_coeff, free)
    b = rhs[free] - (A @ u)[free]
    x = lu.solve(b)
    res = np.linalg.norm(Aff @ x - b)
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    if res > 1e-10 * scale:
        # one step of iterative refinement
        x += lu.solve(b - Aff @ x)
        res = np.linalg.norm(Aff @ x - b)
        if res > 1e-10 * scale:
            raise SingularSystemError(f"linear solve residual {res / scale:.2e} too large")
    u[free] = x
    return ScalarField(mesh, u)


def _mesh_of(*items):
    meshes = {id(x.mesh): x.mesh for x in items if hasattr(x, "mesh")}
    if len(meshes) > 1:
        raise ValueError("fields live on different meshes")
    return next(iter(meshes.values()), None)


def _resolve_mesh(mesh, *items):
    found = _mesh_of(*(x for x in items if x is not None))
    if mesh is not None and found is not None and found is not mesh:
        raise ValueError("fields do not live on the given mesh")
    mesh = mesh or found
    if mesh is None:
        raise ValueError("mesh required when integrating constants")
    return mesh


def integrate_domain(a, b=None, mesh=None) -> float:
    """Exact integral of a (or a*b) for P1 fields or constants."""
    mesh = _resolve_mesh(mesh, a, b)
    av = _nodal(mesh, a)
    bv = np.ones(mesh.n_vertices) if b is None else _nodal(mesh, b)
    return float(av @ (mass_matrix(mesh) @ bv))


def integrate_boundary(a, b=None, label=OUTER, mesh=None) -> float:
    """Exact integral over one boundary curve of the P1 trace a (or a*b)."""
    if label not in (OUTER, INNER):
        raise ValueError(f"unknown boundary label {label!r}")
    mesh = _resolve_mesh(mesh, a, b)
    av = _nodal(mesh, a, label)
    bv = np.ones(mesh.n_vertices) if b is None else _nodal(mesh, b, label)
    return float(av @ (boundary_mass_matrix(mesh, label) @ bv))


def vertex_gradients(u: ScalarField) -> np.ndarray:
    """Area-weighted average of the elementwise P1 gradient at every vertex."""
    mesh = u.mesh
    g = np.einsum("ti,tik->tk", u.values[mesh.triangles], mesh.basis_gradients)
    w = mesh.areas
    acc = np.zeros((mesh.n_vertices, 2))
    wsum = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(acc, mesh.triangles[:, i], g * w[:, None])
        np.add.at(wsum, mesh.triangles[:, i], w)
    return acc / wsum[:, None]


def boundary_normal_derivative(u: ScalarField, label) -> np.ndarray:
    """Recovered outward normal derivative at the vertices of ``mesh.boundary_loop(label)``."""
    mesh = u.mesh
    loop = mesh.boundary_loop(label)
    grad = vertex_gradients(u)[loop]
    return np.einsum("ij,ij->i", grad, mesh.vertex_normals(label))


def boundary_trace(u: ScalarField, label) -> np.ndarray:
    return u.values[u.mesh.boundary_loop(label)]


def h1_norm(V) -> float:
    """Square root of the (stiffness + mass) form, summed over components."""
    mesh = V.mesh
    A = stiffness_matrix(mesh) + mass_matrix(mesh)
    vals = V.values.reshape(mesh.n_vertices, -1)
    return float(np.sqrt(sum(vals[:, i] @ (A @ vals[:, i]) for i in range(vals.shape[1]))))


# 7-point degree-5 rule on the reference triangle: barycentrics and weights
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_QP = np.array(
    [[1 / 3, 1 / 3, 1 / 3], [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
     [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]]
)
_QW = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def l2_error(u: ScalarField, exact) -> float:
    """L2 norm of u - exact(x, y) by 7-point quadrature on each triangle."""
    mesh = u.mesh
    p = mesh.vertices[mesh.triangles]
    xq = np.einsum("qi,tik->tqk", _QP, p)
    uq = np.einsum("qi,ti->tq", _QP, u.values[mesh.triangles])
    d = uq - exact(xq[..., 0], xq[..., 1])
    return float(np.sqrt(np.sum(mesh.areas * (d * d @ _QW))))


def write_field_csv(u: ScalarField, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex_index,x,y,value\n")
        for i, ((x, y), v) in enumerate(zip(u.mesh.vertices, u.values)):
            fh.write(f"{i},{x:.17g},{y:.17g},{v:.17g}\n")
