import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admmshape.fem import ScalarField, VectorField, integrate_domain
from admmshape.geometry import circle, square
from admmshape.mesh import (
    INNER,
    OUTER,
    ClearanceError,
    GeometryConstraints,
    InvertedElementError,
    Mesh,
    MeshError,
    check_admissibility,
    deform_mesh,
    mesh_quality,
    read_mesh,
    remesh,
    transfer_field,
    triangle_quality,
    triangulate_annulus,
    write_mesh,
)

from conftest import annulus, radius


def shear_field(mesh, r_in=0.5, r_out=1.0):
    """Rotational field vanishing on both circles."""
    x = mesh.vertices
    r = radius(x)
    psi = np.sin(np.pi * np.clip((r - r_in) / (r_out - r_in), 0, 1))
    V = psi[:, None] * np.c_[-x[:, 1], x[:, 0]]
    V[mesh.boundary_loop(OUTER)] = 0
    V[mesh.boundary_loop(INNER)] = 0
    return V


def test_reference_annulus():
    outer, inner = circle(0, 0, 1, n=157), circle(0, 0, 0.5, n=79)
    mesh = triangulate_annulus(outer, inner, 0.04)
    # about 4000 triangles; the invariants below are what matters
    assert 2000 <= mesh.n_triangles <= 5000
    mesh.validate()
    assert len(mesh.boundary_loop(OUTER)) == 157
    assert len(mesh.boundary_loop(INNER)) == 79
    assert set(map(tuple, outer.points)) <= set(map(tuple, mesh.vertices))
    assert set(map(tuple, inner.points)) <= set(map(tuple, mesh.vertices))
    lengths = np.linalg.norm(np.diff(mesh.vertices[mesh.edges], axis=1)[:, 0], axis=1)
    assert 0.5 * 0.04 <= np.median(lengths) <= 2 * 0.04


@pytest.mark.parametrize("h", [0.1, 0.06, 0.04])
def test_euler_relation(h):
    mesh = annulus(h)
    assert mesh.n_vertices - len(mesh.edges) + mesh.n_triangles == 0


def test_area_of_annulus(coarse_annulus):
    one = ScalarField.constant(coarse_annulus, 1.0)
    assert integrate_domain(one) == pytest.approx(np.pi * 0.75, rel=2e-2)


def test_degenerate_annulus_rejected():
    with pytest.raises(MeshError):
        triangulate_annulus(circle(0, 0, 1, n=157), circle(0, 0, 0.999, n=157), 0.04)


def test_nested_incorrectly_rejected():
    with pytest.raises(MeshError):
        triangulate_annulus(circle(0, 0, 0.5, n=80), circle(0, 0, 1, n=160), 0.04)


def test_intersecting_rejected():
    with pytest.raises(MeshError):
        triangulate_annulus(circle(0, 0, 1, n=160), circle(0.7, 0, 0.5, n=80), 0.04)


def test_h_larger_than_inclusion_rejected():
    with pytest.raises(MeshError):
        triangulate_annulus(circle(0, 0, 1, n=160), circle(0, 0, 0.1, n=16), 0.5)


def test_square_outer_boundary():
    mesh = triangulate_annulus(square(0, 0, 1, h=0.1), circle(0, 0, 0.3, h=0.1), 0.1)
    mesh.validate()
    assert mesh.polyline(OUTER).signed_area == pytest.approx(4.0)


def test_mesh_invariants(coarse_annulus):
    m = coarse_annulus
    assert np.all(m.areas > 0)
    t = m.triangles
    e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    assert set(counts.tolist()) == {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_edges)
    assert m.polyline(OUTER).is_ccw
    assert not m.polyline(INNER).is_ccw


def test_inverted_mesh_rejected(coarse_annulus):
    m = coarse_annulus
    tri = m.triangles.copy()
    tri[0] = tri[0, ::-1]
    with pytest.raises(MeshError):
        Mesh(m.vertices, tri, m.boundary_edges, m.boundary_labels, m.h_target)


def test_deform_zero_field_is_identity(coarse_annulus):
    m = coarse_annulus
    V = VectorField.zeros(m)
    assert deform_mesh(m, V, 3.0) is m
    assert deform_mesh(m, shear_field(m), 0.0) is m


def test_deform_radial_growth(start_mesh):
    m = start_mesh
    x = m.vertices
    r = radius(x)
    psi = np.clip((1 - r) / 0.2, 0, 1)
    V = psi[:, None] * x / r[:, None]
    V[m.boundary_loop(OUTER)] = 0
    t = 0.01
    moved = deform_mesh(m, V, t, GeometryConstraints())
    np.testing.assert_allclose(radius(moved.vertices[moved.boundary_loop(INNER)]), 0.8 + t, atol=1e-12)
    np.testing.assert_array_equal(moved.triangles, m.triangles)


def test_deform_huge_step_inverts(coarse_annulus):
    with pytest.raises(InvertedElementError):
        deform_mesh(coarse_annulus, shear_field(coarse_annulus), 100.0)


def test_deform_clearance_violation(start_mesh):
    m = start_mesh
    x = m.vertices
    r = radius(x)
    V = (np.clip((1 - r) / 0.2, 0, 1))[:, None] * x / r[:, None]
    V[m.boundary_loop(OUTER)] = 0
    with pytest.raises(ClearanceError):
        deform_mesh(m, V, 0.17, GeometryConstraints(delta=0.05))


def test_deform_requires_fixed_outer(coarse_annulus):
    with pytest.raises(ValueError):
        deform_mesh(coarse_annulus, np.ones_like(coarse_annulus.vertices), 0.01)


def _right_isoceles_oracle():
    a, b, c = np.sqrt(2.0), 1.0, 1.0
    area = 0.5
    inradius = area / ((a + b + c) / 2)
    circumradius = a * b * c / (4 * area)
    return 2 * inradius / circumradius


def test_triangle_quality_values():
    eq = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    ri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tri = np.array([[0, 1, 2]])
    assert triangle_quality(eq, tri)[0] == pytest.approx(1.0, abs=1e-14)
    assert triangle_quality(ri, tri)[0] == pytest.approx(_right_isoceles_oracle(), rel=1e-14)


def test_remesh_preserves_boundary_and_fixes_quality():
    m = annulus(0.06)
    V = shear_field(m)
    t = 0.05
    sheared = m
    while mesh_quality(sheared).min_quality >= 0.05:
        sheared = deform_mesh(m, V, t)
        t *= 1.2
    assert mesh_quality(sheared).min_quality < 0.05
    fresh, (outer, inner) = remesh(sheared, 0.06)
    assert mesh_quality(fresh).min_quality >= 0.4
    for label in (OUTER, INNER):
        np.testing.assert_array_equal(fresh.polyline(label).points, sheared.polyline(label).points)
    again, _ = remesh(fresh)
    for label in (OUTER, INNER):
        np.testing.assert_array_equal(again.polyline(label).points, fresh.polyline(label).points)


def test_transfer_constant_and_affine():
    old, new = annulus(0.06), annulus(0.045)
    c = transfer_field(ScalarField.constant(old, 2.5), old, new)
    assert np.all(c.values == 2.5)
    f = ScalarField.from_function(old, lambda x, y: 2 * x + 3 * y)
    g = transfer_field(f, old, new)
    inside = old.locator.locate(new.vertices)[0] >= 0
    exact = 2 * new.vertices[:, 0] + 3 * new.vertices[:, 1]
    assert inside.sum() > 0.8 * new.n_vertices
    np.testing.assert_allclose(g.values[inside], exact[inside], atol=1e-12)


def test_transfer_round_trip_second_order():
    def roundtrip_error(h):
        fine, coarse = annulus(h / 2), annulus(h)
        f = ScalarField.from_function(fine, lambda x, y: np.sin(np.pi * x))
        back = transfer_field(transfer_field(f, fine, coarse), coarse, fine)
        d = back - f
        return np.sqrt(integrate_domain(d, d))

    e1, e2 = roundtrip_error(0.08), roundtrip_error(0.04)
    assert 3.5 < e1 / e2 < 4.5


def test_transfer_requires_source_mesh(coarse_annulus, start_mesh):
    with pytest.raises(ValueError):
        transfer_field(ScalarField.constant(start_mesh, 1.0), coarse_annulus, start_mesh)


@pytest.mark.parametrize(
    "inner, ok",
    [(circle(0, 0, 0.5, n=100), True), (circle(0, 0, 0.95, n=100), False), (circle(0.5, 0, 0.5, n=100), False)],
)
def test_admissibility_examples(inner, ok):
    assert bool(check_admissibility(inner, circle(0, 0, 1, n=300), GeometryConstraints(delta=0.1))) is ok


@settings(max_examples=40, deadline=None)
@given(
    d1=st.floats(0.001, 0.5),
    d2=st.floats(0.001, 0.5),
    shift=st.floats(0.0, 0.45),
)
def test_admissibility_monotone_in_delta(d1, d2, shift):
    lo, hi = sorted((d1, d2))
    outer = circle(0, 0, 1, n=200)
    inner = circle(shift, 0, 0.4, n=80)
    if check_admissibility(inner, outer, GeometryConstraints(delta=hi)):
        assert check_admissibility(inner, outer, GeometryConstraints(delta=lo))


def test_mesh_round_trip(tmp_path, coarse_annulus):
    write_mesh(coarse_annulus, tmp_path / "m.txt")
    m = read_mesh(tmp_path / "m.txt")
    np.testing.assert_array_equal(m.vertices, coarse_annulus.vertices)
    np.testing.assert_array_equal(m.triangles, coarse_annulus.triangles)
