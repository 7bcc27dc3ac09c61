"""Forward problem on an annulus.

The potential u solves Laplace's equation in the annulus 0.5 < r < 1 with
u = 0 on the inclusion and unit flux on the outer circle.  The exact
solution is ln(r / 0.5), which lets us watch the P1 error fall by about 4x
each time the mesh size is halved.
"""
import numpy as np

from admmshape.fem import BcSpec, boundary_normal_derivative, l2_error, solve_elliptic
from admmshape.geometry import circle
from admmshape.mesh import INNER, OUTER, mesh_quality, triangulate_annulus


def exact(x, y):
    return np.log(np.hypot(x, y) / 0.5)


previous = None
print(f"{'h':>6} {'vertices':>9} {'min q':>6} {'L2 error':>10} {'ratio':>6} {'dn u on inner':>14}")
for h in (0.08, 0.04, 0.02, 0.01):
    mesh = triangulate_annulus(circle(0, 0, 1, h=h), circle(0, 0, 0.5, h=h), h)
    u = solve_elliptic(mesh, 0.0, 0, BcSpec(dirichlet={INNER: 0.0}, neumann={OUTER: 1.0}))
    err = l2_error(u, exact)
    ratio = previous / err if previous else float("nan")
    # the domain normal on the inclusion points toward the centre, so dn u = -1/r = -2
    dn = boundary_normal_derivative(u, INNER).mean()
    q = mesh_quality(mesh).min_quality
    print(f"{h:6.2f} {mesh.n_vertices:9d} {q:6.2f} {err:10.3e} {ratio:6.2f} {dn:14.4f}")
    previous = err

print(f"\nu on the outer circle at h = 0.01: {u.on(OUTER).mean():.6f} (ln 2 = {np.log(2):.6f})")
