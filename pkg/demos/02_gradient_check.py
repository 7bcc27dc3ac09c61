"""Check the shape gradient against finite differences.

We perturb the inclusion C(0, 0.8) along a smooth bump field W and compare
the boundary formula for dG[W] with a central difference of G.  The
agreement should improve roughly linearly as the mesh is refined, because
the normal derivatives are recovered by gradient averaging.
"""
import numpy as np

from admmshape.fem import ScalarField, VectorField
from admmshape.geometry import circle
from admmshape.mesh import deform_mesh, triangulate_annulus
from admmshape.problems import generate_synthetic_data
from admmshape.shape import Objective, directional_derivative

data = generate_synthetic_data(circle(0, 0, 0.5, h=0.01), circle(0, 0, 1, h=0.01), g=1.0, fine_h=0.01)
objective = Objective(data, beta=0.0055)


def fields(mesh):
    # default ADMM starting values: v = 1, lambda = 0.001
    return objective.state(mesh), ScalarField.constant(mesh, 1.0), ScalarField.constant(mesh, 0.001)


def bump(mesh):
    x = mesh.vertices
    r, th = np.linalg.norm(x, axis=1), np.arctan2(x[:, 1], x[:, 0])
    psi = np.where(np.abs(r - 0.8) < 0.15, np.cos(np.pi * (r - 0.8) / 0.3) ** 2, 0.0)
    return VectorField(mesh, (psi * (1 + 0.3 * np.cos(2 * th)))[:, None] * x / r[:, None])


print(f"{'h':>6} {'tau':>8} {'formula':>10} {'central FD':>11} {'rel. error':>10}")
for h, tau in ((0.04, 2e-3), (0.02, 1e-3), (0.01, 5e-4)):
    mesh = triangulate_annulus(circle(0, 0, 1, h=h), circle(0, 0, 0.8, h=h), h)
    W = bump(mesh)
    formula = directional_derivative(objective.density(*fields(mesh)), W)
    plus = objective.value(*fields(deform_mesh(mesh, W, tau)))
    minus = objective.value(*fields(deform_mesh(mesh, W, -tau)))
    fd = (plus - minus) / (2 * tau)
    print(f"{h:6.2f} {tau:8.1e} {formula:10.5f} {fd:11.5f} {abs(formula - fd) / abs(fd):10.4f}")
