"""ADMM outer loop with a Sobolev-gradient shape update, and the plain
least-squares shape optimization baseline."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .fem import ScalarField, SingularSystemError, integrate_domain
from .geometry import BoundaryPolyline, circle, parse_shape
from .mesh import (
    INNER,
    GeometryConstraints,
    Mesh,
    MeshError,
    check_admissibility,
    mesh_quality,
    remesh,
    transfer_field,
    triangulate_annulus,
)
from .metrics import HistoryRecord, ReconstructionHistory, hausdorff
from .problems import CauchyData, solve_state
from .shape import LineSearchParams, Objective, ShapeState, sgd_inner_loop

log = logging.getLogger(__name__)

__all__ = [
    "ADMM",
    "SOM",
    "AdmmConfig",
    "AdmmState",
    "ConfigError",
    "RunResult",
    "project_K",
    "update_v",
    "update_multiplier",
    "paper_bounds",
    "run",
    "read_config",
    "write_config",
    "CONFIG_KEYS",
]

ADMM = "admm"
SOM = "som"

CONFIG_KEYS = (
    "method", "beta", "a", "b", "lambda0", "v0", "epsilon", "max_outer", "inner_max",
    "h", "delta", "t_init", "shrink", "max_tries", "ls_mode", "mu", "seed",
    "init_shape", "data_file", "out_dir", "save_every",
)

# consecutive failed line searches before a run is declared stagnant
MAX_LS_FAILURES = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdmmConfig:
    method: str = ADMM
    beta: float = 0.0055
    a: float = 0.0
    b: float = 2.0
    lambda0: float = 0.001
    v0: float = 1.0
    epsilon: float = 1e-12
    max_outer: int = 300
    inner_max: int = 1
    h: float = 0.04
    delta: float = 0.05
    t_init: float = 1.0
    shrink: float = 0.5
    max_tries: int = 12
    ls_mode: str = "backtrack"
    mu: float = 0.002
    seed: int = 0
    init_shape: str = "circle:0,0,0.8"
    data_file: str = ""
    out_dir: str = "."
    save_every: int = 10
    min_quality: float = 0.2
    remesh_every: int = 50

    def __post_init__(self):
        if self.method not in (ADMM, SOM):
            raise ConfigError(f"method must be {ADMM!r} or {SOM!r}, got {self.method!r}")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if not self.a <= 0 < self.b:
            raise ConfigError("bounds must satisfy a <= 0 < b")
        if self.max_outer < 0:
            raise ConfigError("max_outer must be non-negative")
        if self.inner_max < 1:
            raise ConfigError("inner_max must be at least 1")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.save_every < 1:
            raise ConfigError("save_every must be at least 1")
        try:
            self.line_search
            self.constraints
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def line_search(self) -> LineSearchParams:
        return LineSearchParams(self.t_init, self.shrink, self.max_tries, self.ls_mode, self.mu)

    @property
    def constraints(self) -> GeometryConstraints:
        return GeometryConstraints(self.delta, self.min_quality)

    def replace(self, **kw) -> AdmmConfig:
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in CONFIG_KEYS}


def _coerce(key, text):
    target = AdmmConfig.__dataclass_fields__[key].type
    try:
        if target == "int":
            return int(text)
        if target == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text


def read_config(path, **overrides) -> AdmmConfig:
    """Parse ``key = value`` lines; '#' starts a comment, unknown keys are errors."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, val.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AdmmConfig(**values)


def write_config(config: AdmmConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in config.as_dict().items():
            fh.write(f"{k} = {v}\n")


def project_K(w, a, b):
    """Pointwise clamp to [a, b]; accepts a ScalarField or an array."""
    if isinstance(w, ScalarField):
        return ScalarField(w.mesh, np.clip(w.values, a, b))
    return np.clip(w, a, b)


def update_v(u: ScalarField, lam: ScalarField, beta, a, b) -> ScalarField:
    return project_K(u + lam / beta, a, b)


def update_multiplier(lam: ScalarField, beta, u: ScalarField, v: ScalarField) -> ScalarField:
    return lam + beta * (u - v)


def paper_bounds(true_inclusion: BoundaryPolyline, outer: BoundaryPolyline, g=1.0, h=0.04):
    """Bounds (0.5 min u*, 1.5 max u*) from the state on the true geometry."""
    mesh = triangulate_annulus(outer, true_inclusion, h)
    u = solve_state(mesh, g)
    return 0.5 * float(u.values.min()), 1.5 * float(u.values.max())


@dataclass
class AdmmState:
    k: int
    mesh: Mesh
    u: ScalarField
    v: ScalarField
    lam: ScalarField
    J: float
    G: float
    primal_residual: float
    t: float = 0.0

    @property
    def inclusion(self) -> BoundaryPolyline:
        return self.mesh.polyline(INNER)


class RunResult(NamedTuple):
    history: ReconstructionHistory
    state: AdmmState

    @property
    def boundary(self) -> BoundaryPolyline:
        return self.state.inclusion


def _residual(u, v):
    d = u - v
    return float(np.sqrt(max(integrate_domain(d, d), 0.0)))


def _outer_step(state, k, config, objective, params, constraints, som):
    inner_res = sgd_inner_loop(
        ShapeState(state.mesh, state.u, state.v, state.lam),
        objective,
        params,
        constraints,
        config.inner_max,
        config.epsilon,
    )
    mesh, u, v_old, lam_old = inner_res.state
    if mesh_quality(mesh).min_quality < config.min_quality or (k + 1) % config.remesh_every == 0:
        new_mesh, _ = remesh(mesh, config.h)
        log.info("iteration %d: remeshed (%d -> %d triangles)", k + 1, mesh.n_triangles, new_mesh.n_triangles)
        u = objective.state(new_mesh)
        if not som:
            v_old = transfer_field(v_old, mesh, new_mesh)
            lam_old = transfer_field(lam_old, mesh, new_mesh)
        mesh = new_mesh
    if som:
        v, lam = u, ScalarField.constant(mesh, 0.0)
    else:
        v = update_v(u, lam_old, config.beta, config.a, config.b)
        lam = update_multiplier(lam_old, config.beta, u, v)
    new_state = AdmmState(
        k + 1, mesh, u, v, lam, objective.cost(u), objective.value(u, v, lam),
        _residual(u, v), inner_res.t,
    )
    return new_state, inner_res


def run(
    config: AdmmConfig,
    data: CauchyData,
    reference: BoundaryPolyline | None = None,
    outer: BoundaryPolyline | None = None,
    callback=None,
) -> RunResult:
    """Reconstruct the inclusion from Cauchy data.

    Each outer iteration takes ``inner_max`` Sobolev-gradient steps on G,
    re-solves the state on the moved mesh, then (ADMM only) updates v by
    projection and the multiplier by dual ascent.  The SOM baseline keeps
    v = u and lam = 0, which reduces G to the least-squares cost.

    The run ends after ``max_outer`` iterations, when |dG[V]| < epsilon,
    after repeated line-search failures (``history.status == "stagnated"``),
    or on a mesh or solver failure (``"aborted"``); the history recorded up
    to that point is always returned.
    """
    som = config.method == SOM
    if outer is None:
        outer = circle(0.0, 0.0, 1.0, h=config.h)
    inner = parse_shape(config.init_shape, h=config.h)
    constraints = config.constraints
    adm = check_admissibility(inner, outer, constraints)
    if not adm:
        raise MeshError(f"initial shape is not admissible: {adm.reason}")
    mesh = triangulate_annulus(outer, inner, config.h)
    objective = Objective(data, 0.0 if som else config.beta)
    params = config.line_search

    u = objective.state(mesh)
    if som:
        v, lam = u, ScalarField.constant(mesh, 0.0)
    else:
        v = ScalarField.constant(mesh, config.v0)
        lam = ScalarField.constant(mesh, config.lambda0)
    J = objective.cost(u)
    state = AdmmState(0, mesh, u, v, lam, J, objective.value(u, v, lam), _residual(u, v))
    J0 = J if J > 0 else 1.0

    history = ReconstructionHistory(config=config.as_dict())

    def record(st: AdmmState):
        hd = hausdorff(st.inclusion, reference) if reference is not None else float("nan")
        history.append(HistoryRecord(st.k, st.J, st.G, st.J / J0, hd, st.t, st.primal_residual))
        if st.k % config.save_every == 0:
            history.snapshots[st.k] = st.inclusion
        if callback is not None:
            callback(st)

    record(state)
    failures = 0
    history.status = "completed"
    for k in range(config.max_outer):
        try:
            state, inner_res = _outer_step(state, k, config, objective, params, constraints, som)
        except (MeshError, SingularSystemError, np.linalg.LinAlgError) as exc:
            history.status = "aborted"
            history.message = f"iteration {k + 1}: {exc}"
            log.warning(history.message)
            break
        record(state)
        failures = failures + 1 if inner_res.failed and inner_res.steps == 0 else 0
        if abs(inner_res.slope) < config.epsilon:
            history.status = "converged"
            break
        if failures >= MAX_LS_FAILURES:
            history.status = "stagnated"
            history.message = f"line search failed {failures} times in a row at iteration {k + 1}"
            log.warning(history.message)
            break
    history.snapshots[state.k] = state.inclusion
    return RunResult(history, state)
