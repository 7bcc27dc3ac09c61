"""Cost functionals, shape gradients, line search and the Sobolev-gradient inner loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fem import ScalarField, VectorField, h1_norm, integrate_boundary, integrate_domain
from .fem import boundary_normal_derivative
from .mesh import (
    INNER,
    OUTER,
    ClearanceError,
    GeometryConstraints,
    InvertedElementError,
    Mesh,
    deform_mesh,
    interpolate_values,
)
from .problems import CauchyData, solve_adjoint, solve_deformation, solve_state

log = logging.getLogger(__name__)

__all__ = [
    "BACKTRACK",
    "SCALED",
    "LineSearchParams",
    "LineSearchError",
    "Objective",
    "ShapeState",
    "cost_ls",
    "augmented_objective",
    "shape_gradient_density",
    "directional_derivative",
    "descent_step",
    "line_search",
    "sgd_inner_loop",
]

BACKTRACK = "backtrack"
SCALED = "scaled"


class LineSearchError(RuntimeError):
    """No acceptable step was found."""


@dataclass(frozen=True)
class LineSearchParams:
    t_init: float = 1.0
    shrink: float = 0.5
    max_tries: int = 12
    mode: str = BACKTRACK
    mu: float = 0.002

    def __post_init__(self):
        if not self.t_init > 0:
            raise ValueError("t_init must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_tries < 1:
            raise ValueError("max_tries must be at least 1")
        if self.mode not in (BACKTRACK, SCALED):
            raise ValueError(f"unknown line search mode {self.mode!r}")


def cost_ls(u: ScalarField, f) -> float:
    """Least-squares misfit 1/2 int_OUTER (u - f)^2."""
    r = u.on(OUTER) - np.asarray(f, dtype=float)
    return 0.5 * integrate_boundary(r, r, OUTER, mesh=u.mesh)


def augmented_objective(u, v, lam, beta, f) -> float:
    """J + beta/2 int (u - v)^2 + int lam (u - v)."""
    d = u - v
    return cost_ls(u, f) + 0.5 * beta * integrate_domain(d, d) + integrate_domain(lam, d)


def shape_gradient_density(u, p, v, lam, beta) -> np.ndarray:
    """Boundary density of the shape derivative at the INNER loop vertices.

    Normal derivatives use the outward normal of the mesh domain, which on
    INNER points into the inclusion; pair the result with V.n for the same n.
    """
    dn_u = boundary_normal_derivative(u, INNER)
    dn_p = boundary_normal_derivative(p, INNER)
    vb, lb = v.on(INNER), lam.on(INNER)
    return dn_p * dn_u + 0.5 * beta * vb**2 - lb * vb


def directional_derivative(density, V: VectorField) -> float:
    """int_INNER density (V . n) ds with the P1 traces of density*n and V."""
    mesh = V.mesh
    loop = mesh.boundary_loop(INNER)
    n = mesh.vertex_normals(INNER)
    density = np.asarray(density, dtype=float)
    total = 0.0
    for c in range(2):
        total += integrate_boundary(density * n[:, c], V.values[loop, c], INNER, mesh=mesh)
    return total


class Objective:
    """Evaluates the state and G for fixed data and penalty parameter.

    With ``beta = 0`` and a zero multiplier this is the plain least-squares
    functional.
    """

    def __init__(self, data: CauchyData, beta: float):
        self.data = data
        self.beta = float(beta)

    def trace(self, mesh: Mesh) -> np.ndarray:
        return self.data.trace_on(mesh)

    def state(self, mesh: Mesh) -> ScalarField:
        return solve_state(mesh, self.data.g)

    def cost(self, u) -> float:
        return cost_ls(u, self.trace(u.mesh))

    def value(self, u, v, lam) -> float:
        return augmented_objective(u, v, lam, self.beta, self.trace(u.mesh))

    def adjoint(self, u, v, lam) -> ScalarField:
        return solve_adjoint(u.mesh, u, v, lam, self.beta, self.trace(u.mesh))

    def density(self, u, v, lam) -> np.ndarray:
        return shape_gradient_density(u, self.adjoint(u, v, lam), v, lam, self.beta)


class ShapeState(NamedTuple):
    mesh: Mesh
    u: ScalarField
    v: ScalarField
    lam: ScalarField


class Descent(NamedTuple):
    density: np.ndarray
    V: VectorField
    slope: float


def descent_step(state: ShapeState, objective: Objective) -> Descent:
    """Adjoint solve, gradient density, Sobolev descent field and its slope."""
    density = objective.density(state.u, state.v, state.lam)
    V = solve_deformation(state.mesh, density)
    return Descent(density, V, directional_derivative(density, V))


class StepResult(NamedTuple):
    t: float
    state: ShapeState
    G: float
    tries: int


def _move(state: ShapeState, V, t, objective, constraints):
    mesh = deform_mesh(state.mesh, V, t, constraints)
    both = interpolate_values(
        np.column_stack([state.v.values, state.lam.values]), state.mesh, mesh.vertices
    )
    v, lam = ScalarField(mesh, both[:, 0]), ScalarField(mesh, both[:, 1])
    u = objective.state(mesh)
    return ShapeState(mesh, u, v, lam)


def line_search(
    state: ShapeState,
    V: VectorField,
    objective: Objective,
    params: LineSearchParams,
    constraints: GeometryConstraints | None = None,
    G0: float | None = None,
) -> StepResult:
    """Pick a step along V.

    In backtracking mode the first step in t_init, t_init*shrink, ... that
    keeps the mesh valid and strictly lowers G is taken.  In scaled mode the
    step is mu J / |V|_H1, shrunk only if it breaks the mesh.

    Raises:
        LineSearchError: every trial step was rejected.
    """
    if not np.any(V.values):
        raise LineSearchError("zero descent field")
    if G0 is None:
        G0 = objective.value(state.u, state.v, state.lam)
    if params.mode == SCALED:
        t = params.mu * objective.cost(state.u) / h1_norm(V)
    else:
        t = params.t_init
    for i in range(params.max_tries):
        try:
            trial = _move(state, V, t, objective, constraints)
        except (InvertedElementError, ClearanceError) as exc:
            log.debug("step %.3g rejected: %s", t, exc)
            t *= params.shrink
            continue
        G = objective.value(trial.u, trial.v, trial.lam)
        if params.mode == SCALED or G < G0:
            return StepResult(t, trial, G, i + 1)
        t *= params.shrink
    raise LineSearchError(f"no acceptable step after {params.max_tries} tries")


class InnerResult(NamedTuple):
    state: ShapeState
    t: float
    slope: float
    steps: int
    failed: bool
    slopes: list


def sgd_inner_loop(
    state: ShapeState,
    objective: Objective,
    params: LineSearchParams,
    constraints: GeometryConstraints | None = None,
    inner_max: int = 1,
    epsilon: float = 1e-12,
) -> InnerResult:
    """Sobolev-gradient descent on G with v and lam held fixed.

    Stops when |dG[V]| < epsilon, the line search fails, or after
    ``inner_max`` accepted steps.  ``t`` is the last accepted step (0 if none)
    and ``slope`` the derivative measured before the last attempted step.
    """
    t_last = 0.0
    slope = np.nan
    slopes = []
    steps = 0
    failed = False
    G = objective.value(state.u, state.v, state.lam)
    while steps < inner_max:
        d = descent_step(state, objective)
        slope = d.slope
        slopes.append(slope)
        if abs(slope) < epsilon:
            break
        try:
            res = line_search(state, d.V, objective, params, constraints, G0=G)
        except LineSearchError as exc:
            log.debug("line search failed: %s", exc)
            failed = True
            break
        state, G, t_last = res.state, res.G, res.t
        steps += 1
    return InnerResult(state, t_last, slope, steps, failed, slopes)
