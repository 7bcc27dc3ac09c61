import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from admmshape.geometry import circle, ellipse, peanut, square
from admmshape.metrics import (
    HISTORY_COLUMNS,
    HistoryRecord,
    ReconstructionHistory,
    directed_hausdorff,
    hausdorff,
    point_to_polyline_distance,
    read_history,
    write_history,
)


def dense_samples(poly, n):
    """n points spread along the closed polyline by arc length."""
    p = poly.points
    q = np.roll(p, -1, axis=0)
    seg = np.linalg.norm(q - p, axis=1)
    cum = np.r_[0, np.cumsum(seg)]
    s = np.linspace(0, cum[-1], n, endpoint=False)
    i = np.searchsorted(cum, s, side="right") - 1
    t = (s - cum[i]) / seg[i]
    return p[i] + t[:, None] * (q[i] - p[i])


def brute_hausdorff(A, B, n=100_000):
    a, b = dense_samples(A, n), dense_samples(B, n)
    return max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())


def test_concentric_circles():
    assert hausdorff(circle(0, 0, 0.5, n=200), circle(0, 0, 0.8, n=200)) == pytest.approx(0.3, abs=1e-3)


def test_identical_curves():
    p = peanut(n=100)
    assert hausdorff(p, p) == 0.0


def test_square_against_circle_dense_oracle():
    sq, c = square(0, 0, 1, n=400), circle(0, 0, 1, n=200)
    exact = hausdorff(sq, c)
    assert exact == pytest.approx(np.sqrt(2) - 1, abs=1e-3)
    assert exact == pytest.approx(brute_hausdorff(sq, c), abs=1e-4)


def test_segment_projection_beats_vertex_distance():
    coarse = square(0, 0, 1, n=8)
    d = point_to_polyline_distance(np.array([[0.0, 0.0], [0.5, 1.2]]), coarse)
    np.testing.assert_allclose(d, [1.0, 0.2], atol=1e-15)


def test_directed_is_asymmetric():
    small, big = circle(0, 0, 0.2, n=64), ellipse(0, 0, 0.9, 0.2, n=128)
    assert directed_hausdorff(small, big) != pytest.approx(directed_hausdorff(big, small))


shapes = st.sampled_from(
    [circle(0, 0, 0.5, n=80), peanut(n=90), ellipse(0.1, 0, 0.5, 0.3, n=70), square(0, 0, 0.4, n=64)]
)


@settings(max_examples=30, deadline=None)
@given(A=shapes, B=shapes, C=shapes)
def test_metric_properties(A, B, C):
    ab = hausdorff(A, B)
    assert ab == hausdorff(B, A)
    assert ab <= hausdorff(A, C) + hausdorff(C, B) + 1e-12


@settings(max_examples=30, deadline=None)
@given(rot=st.floats(-np.pi, np.pi), dx=st.floats(-1, 1), dy=st.floats(-1, 1))
def test_rigid_motion_invariance(rot, dx, dy):
    A, B = peanut(n=90), ellipse(0.1, 0, 0.5, 0.3, n=70)
    d0 = hausdorff(A, B)
    d1 = hausdorff(A.transformed(rot, (dx, dy)), B.transformed(rot, (dx, dy)))
    assert abs(d1 - d0) <= 1e-12


def _history(n):
    h = ReconstructionHistory()
    for k in range(n):
        h.append(HistoryRecord(k, 1.0 / (k + 1), 1.1 / (k + 1), 1.0 / (k + 1), float("nan") if k == 2 else 0.1, 0.5, 1e-3))
    return h


def test_history_requires_increasing_k():
    h = _history(3)
    with pytest.raises(ValueError):
        h.append(HistoryRecord(2, 0, 0, 0, 0, 0, 0))


@pytest.mark.parametrize("n", [1, 301])
def test_history_rows(tmp_path, n):
    write_history(_history(n), tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == ",".join(HISTORY_COLUMNS)
    assert len(lines) == n + 1


def test_history_round_trip(tmp_path):
    h = _history(5)
    write_history(h, tmp_path / "h.csv")
    g = read_history(tmp_path / "h.csv")
    for a, b in zip(h.records, g.records):
        for c in HISTORY_COLUMNS:
            x, y = getattr(a, c), getattr(b, c)
            assert x == y or (np.isnan(x) and np.isnan(y))


def test_history_bad_header(tmp_path):
    (tmp_path / "h.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_history(tmp_path / "h.csv")
