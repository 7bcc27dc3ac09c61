import numpy as np
import pytest

from admmshape.admm import (
    CONFIG_KEYS,
    SOM,
    AdmmConfig,
    ConfigError,
    paper_bounds,
    project_K,
    read_config,
    run,
    update_multiplier,
    update_v,
    write_config,
)
from admmshape.fem import ScalarField
from admmshape.geometry import circle
from admmshape.metrics import hausdorff
from admmshape.problems import solve_state

from conftest import annulus

BETA = 0.0055


def test_defaults():
    c = AdmmConfig()
    assert (c.h, c.lambda0, c.beta, c.v0, c.epsilon, c.max_outer) == (0.04, 0.001, 0.0055, 1.0, 1e-12, 300)
    assert (c.a, c.b, c.init_shape, c.method) == (0.0, 2.0, "circle:0,0,0.8", "admm")
    assert set(c.as_dict()) == set(CONFIG_KEYS)


@pytest.mark.parametrize(
    "kw",
    [dict(beta=0), dict(a=0.1), dict(b=0), dict(method="newton"), dict(max_outer=-1), dict(shrink=2.0), dict(delta=0)],
)
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        AdmmConfig(**kw)


def test_config_file_round_trip(tmp_path):
    c = AdmmConfig(method=SOM, beta=5.5, max_outer=7, init_shape="ellipse:0,0,0.7,0.5")
    write_config(c, tmp_path / "c.cfg")
    assert read_config(tmp_path / "c.cfg") == c


def test_config_file_parsing(tmp_path):
    (tmp_path / "c.cfg").write_text("# comment\nbeta = 0.1  # trailing\n\nmax_outer=5\n")
    c = read_config(tmp_path / "c.cfg", max_outer=9)
    assert c.beta == 0.1 and c.max_outer == 9


@pytest.mark.parametrize("text", ["gamma = 1\n", "beta 0.1\n", "max_outer = many\n"])
def test_config_file_errors(tmp_path, text):
    (tmp_path / "c.cfg").write_text(text)
    with pytest.raises(ConfigError):
        read_config(tmp_path / "c.cfg")


def test_project_examples():
    np.testing.assert_array_equal(project_K(np.array([2.5, -1.0, 1.0]), 0, 2), [2.0, 0.0, 1.0])
    w = np.linspace(0, 2, 11)
    np.testing.assert_array_equal(project_K(w, 0, 2), w)


def test_projection_matches_grid_search():
    """Clamp equals the brute-force minimizer of q -> beta/2 (u + lam/beta - q)^2 on [a, b]."""
    rng = np.random.default_rng(11)
    a, b = 0.0, 2.0
    u = rng.uniform(-0.5, 2.5, 50)
    lam = rng.uniform(-0.01, 0.01, 50)
    w = u + lam / BETA
    # step 1e-4 over [a - 1, b + 1]; the v-subproblem is restricted to K = [a, b]
    grid = np.linspace(a - 1, b + 1, 40001)
    grid = grid[(grid >= a - 1e-12) & (grid <= b + 1e-12)]
    obj = 0.5 * BETA * (w[:, None] - grid[None, :]) ** 2
    best = grid[obj.argmin(axis=1)]
    np.testing.assert_allclose(project_K(w, a, b), best, atol=1e-4)


@pytest.fixture(scope="module")
def start_fields(start_mesh):
    u = solve_state(start_mesh, 1.0)
    lam = ScalarField.constant(start_mesh, 0.001)
    return u, lam


def test_update_v_examples(start_mesh, start_fields):
    u, lam = start_fields
    zero = ScalarField.constant(start_mesh, 0.0)
    np.testing.assert_array_equal(update_v(u, zero, BETA, 0, 2).values, u.values)
    forced = BETA * (2 + 1 - u)
    np.testing.assert_allclose(update_v(u, forced, BETA, 0, 2).values, 2.0, atol=0)
    v = update_v(u, lam, BETA, 0, 2)
    w = u.values + lam.values / BETA
    free = (w >= 0) & (w <= 2)
    assert free.all()
    np.testing.assert_allclose(v.values[free], w[free], rtol=0, atol=1e-15)


def test_update_multiplier_examples(start_mesh, start_fields):
    u, lam = start_fields
    np.testing.assert_array_equal(update_multiplier(lam, BETA, u, u).values, 0.001)
    new = update_multiplier(lam, BETA, u + 1.0, u)
    np.testing.assert_allclose(new.values, 0.001 + BETA, rtol=1e-14)


def test_multiplier_vanishes_without_clamp(start_mesh, start_fields):
    u, lam = start_fields
    v = update_v(u, lam, BETA, 0, 2)
    new = update_multiplier(lam, BETA, u, v)
    assert np.abs(new.values).max() <= 1e-12


def test_paper_bounds():
    lo, hi = paper_bounds(circle(0, 0, 0.5, h=0.04), circle(0, 0, 1, h=0.04))
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(1.5 * np.log(2), rel=5e-3)


def test_run_without_iterations(concentric_data):
    res = run(AdmmConfig(max_outer=0), concentric_data, reference=circle(0, 0, 0.5, h=0.04))
    assert len(res.history) == 1
    rec = res.history.final
    assert rec.k == 0 and rec.J_norm == 1.0
    assert rec.hausdorff == pytest.approx(0.3, abs=2e-3)
    assert 0 in res.history.snapshots


def test_run_from_the_truth_barely_moves(concentric_data):
    truth = circle(0, 0, 0.5, h=0.04)
    cfg = AdmmConfig(max_outer=10, init_shape="circle:0,0,0.5")
    res = run(cfg, concentric_data, reference=truth)
    assert res.history.records[0].J < 1e-5
    assert hausdorff(res.boundary, truth) <= 0.04


def test_invariants_along_the_run(concentric_data):
    seen = []

    def check(state):
        assert state.v.mesh is state.mesh and state.lam.mesh is state.mesh
        assert np.all((state.v.values >= 0) & (state.v.values <= 2))
        assert state.primal_residual >= 0 and np.isfinite(state.primal_residual)
        seen.append(state.k)

    run(AdmmConfig(max_outer=8), concentric_data, callback=check)
    assert seen == list(range(9))


def test_som_keeps_v_equal_u(concentric_data):
    def check(state):
        np.testing.assert_array_equal(state.v.values, state.u.values)
        assert np.all(state.lam.values == 0)
        assert state.G == state.J

    run(AdmmConfig(method=SOM, max_outer=5), concentric_data, callback=check)


def test_closed_form_consistency(concentric_data):
    """Unclamped projection makes the next multiplier vanish."""
    states = []
    run(AdmmConfig(max_outer=3), concentric_data, callback=states.append)
    for s in states[1:]:
        assert np.abs(s.lam.values).max() <= 1e-12


def test_runs_are_reproducible(concentric_data):
    a = run(AdmmConfig(max_outer=6), concentric_data).history
    b = run(AdmmConfig(max_outer=6), concentric_data).history
    assert [r.row() for r in a.records] == [r.row() for r in b.records]


def test_stagnation_returns_partial_history(concentric_data):
    cfg = AdmmConfig(max_outer=20, t_init=50.0, shrink=0.9, max_tries=1)
    res = run(cfg, concentric_data)
    assert res.history.status == "stagnated"
    assert len(res.history) == 4
    assert "line search" in res.history.message


def test_inadmissible_start_rejected(concentric_data):
    from admmshape.mesh import MeshError

    with pytest.raises(MeshError):
        run(AdmmConfig(init_shape="circle:0,0,0.98"), concentric_data)


def test_periodic_remeshing(concentric_data):
    from admmshape.mesh import mesh_quality

    meshes = []
    cfg = AdmmConfig(max_outer=4, remesh_every=2)
    run(cfg, concentric_data, callback=lambda s: meshes.append(s.mesh))
    assert meshes[2] is not meshes[1]
    assert mesh_quality(meshes[2]).min_quality >= 0.4
    assert meshes[2].h_target == cfg.h
