import numpy as np
import pytest

from conftest import elliptic
from zermelo import Euclidean
from zermelo.multiconvex import (
    ConvexIndicatrix,
    GeometryError,
    MultiConvexIndicatrix,
    hull_boundary,
    min_time_multiconvex,
    norm_eval,
    optimal_tack_constant,
    optimal_velocities,
    snell_residual,
)

S091 = np.sqrt(0.91)


def two_circles():
    return MultiConvexIndicatrix([ConvexIndicatrix.circle((0, 0.5), 1), ConvexIndicatrix.circle((0, -0.5), 1)])


def lens():
    return MultiConvexIndicatrix([
        ConvexIndicatrix.circle((0, -0.3), 1, window=(0, np.pi)),
        ConvexIndicatrix.circle((0, 0.3), 1, window=(np.pi, 2 * np.pi)),
    ])


def random_two_circles(rng):
    pieces = []
    for _ in range(2):
        r = rng.uniform(0.5, 1.5)
        ang, rad = rng.uniform(0, 2 * np.pi), rng.uniform(0, 0.8 * r)
        pieces.append(ConvexIndicatrix.circle((rad * np.cos(ang), rad * np.sin(ang)), r))
    return MultiConvexIndicatrix(pieces)


# -- norm ------------------------------------------------------------------------------


def test_unit_circle_norm(rng):
    s = MultiConvexIndicatrix([ConvexIndicatrix.circle((0, 0), 1)])
    v = rng.normal(size=(100, 2))
    assert np.allclose(norm_eval(s, v), np.linalg.norm(v, axis=1), rtol=1e-14)


def test_two_circle_norm_at_crossing():
    assert norm_eval(two_circles(), [np.sqrt(3) / 2, 0]) == pytest.approx(1.0, abs=1e-14)


def test_norm_homogeneity(rng):
    s = two_circles()
    v = rng.normal(size=(1000, 2))
    lam = rng.uniform(0.01, 100, 1000)
    assert np.max(np.abs(norm_eval(s, lam[:, None] * v) / (lam * norm_eval(s, v)) - 1)) < 1e-12


def test_zero_vector_and_bad_pieces():
    with pytest.raises(GeometryError):
        norm_eval(two_circles(), [0, 0])
    with pytest.raises(GeometryError):
        ConvexIndicatrix.circle((2, 0), 1)
    with pytest.raises(GeometryError):
        MultiConvexIndicatrix([ConvexIndicatrix.circle((0, 0), 1, window=(0, 1))])
    with pytest.raises(GeometryError):
        hull_boundary(two_circles(), M=128)


def test_from_metric_matches_elliptic_unit_ball(rng):
    m = elliptic("2", "1", "0.5", "0.3", "0.4")
    piece = ConvexIndicatrix.from_metric(m)
    s = MultiConvexIndicatrix([piece])
    v = rng.normal(size=(200, 2))
    assert np.allclose(s.norm(v), m.F(0.0, np.zeros_like(v), v), rtol=1e-12)


def test_polyline_piece_approximates_circle():
    phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    s = MultiConvexIndicatrix([ConvexIndicatrix.polyline(np.stack([np.cos(phi), np.sin(phi)], -1))])
    assert s.norm([0.3, 0.4]) == pytest.approx(0.5, rel=1e-6)


# -- hull --------------------------------------------------------------------------------


def test_two_circle_hull():
    hb = two_circles().hull()
    assert len(hb.cusps) == 0
    assert hb.h[0] == pytest.approx(1.0, abs=1e-6)
    n = hb.normals()
    # exact hull support: max of the two disc supports
    exact = np.maximum(n @ [0, 0.5], n @ [0, -0.5]) + 1
    assert np.abs(hb.h - exact).max() < 1e-6


def test_ellipse_hull_support():
    a, b = 2.0, 0.7
    hb = hull_boundary(MultiConvexIndicatrix([ConvexIndicatrix.ellipse((0, 0), a, b)]), M=512)
    exact = np.sqrt(a**2 * np.cos(hb.angles) ** 2 + b**2 * np.sin(hb.angles) ** 2)
    assert len(hb.cusps) == 0
    assert np.abs(hb.h - exact).max() < 1e-5


def test_lens_cusps():
    hb = lens().hull()
    assert len(hb.cusps) == 2
    got = hb.cusps[np.argsort(hb.cusps[:, 0])]
    assert np.allclose(got, [[-S091, 0], [S091, 0]], atol=1e-9)


def test_hull_contacts_are_on_supporting_lines():
    hb = two_circles().hull(M=256)
    for j in (0, 64, 128):
        for p in hb.contacts[j]:
            assert p @ hb.normals()[j] == pytest.approx(hb.h[j], abs=1e-6)


# -- optimal velocities and minimal time -------------------------------------------------


def test_flat_hull_direction_contacts():
    case, Q, Qset, _ = optimal_velocities(two_circles(), [0, 0], [3, 0])
    assert case == "contacts"
    assert np.allclose(Q, [1, 0], atol=1e-9)
    got = sorted(map(tuple, np.round(Qset, 9)))
    assert got == [(1.0, -0.5), (1.0, 0.5)]


def test_single_contact_direction():
    case, Q, Qset, _ = optimal_velocities(two_circles(), [0, 0], [0, 2])
    assert case == "contacts"
    assert np.allclose(Q, [0, 1.5], atol=1e-9)
    assert len(Qset) == 1 and np.allclose(Qset[0], Q, atol=1e-9)


def test_lens_cusp_direction():
    case, Q, Qset, _ = optimal_velocities(lens(), [0, 0], [1, 0])
    assert case == "cusp" and np.allclose(Q, [S091, 0], atol=1e-9)
    t, w = min_time_multiconvex(lens(), [0, 0], [2, 0])
    assert t == pytest.approx(2 / S091, rel=1e-9)
    assert w.n_tacks == 0


def test_two_circle_minimal_time_and_witness():
    s = two_circles()
    t, w = min_time_multiconvex(s, [0, 0], [2, 0])
    assert t == pytest.approx(2.0, rel=1e-9)
    assert 2 / norm_eval(s, [1.0, 0.0]) ** -1 == pytest.approx(4 / np.sqrt(3))
    assert w.n_tacks == 1
    assert np.allclose(w.points, [[0, 0], [1, 0.5], [2, 0]], atol=1e-9)
    assert np.allclose(w.velocities, [[1, 0.5], [1, -0.5]], atol=1e-9)
    assert abs(w.time - t) < 1e-10
    assert w.rows()[0][0] == 0 and len(w.rows()[0]) == 6


def test_single_ellipse_time_is_norm(rng):
    m = elliptic("1.7", "0.9", "0.3", "-0.2", "0.6")
    s = MultiConvexIndicatrix([ConvexIndicatrix.from_metric(m)])
    for _ in range(5):
        B = rng.normal(size=2) * 3
        t, w = min_time_multiconvex(s, [0, 0], B)
        assert t == pytest.approx(float(m.F(0, [0, 0], B)), rel=1e-8)
        assert w.n_tacks == 0


def test_equal_endpoints_rejected():
    with pytest.raises(GeometryError):
        optimal_velocities(two_circles(), [1, 1], [1, 1])


def test_hull_norm_is_convex_and_below_union(rng):
    s = random_two_circles(rng)
    u = rng.normal(size=(10_000, 2))
    v = rng.normal(size=(10_000, 2))
    hu, hv, huv = s.hull_norm(u), s.hull_norm(v), s.hull_norm(u + v)
    assert np.all(huv <= hu + hv + 1e-9)
    assert np.all(hu <= s.norm(u) * (1 + 1e-9))


def test_theorem_consistency_on_random_pairs(rng):
    for _ in range(100):
        s = random_two_circles(rng)
        B = rng.normal(size=2)
        t, w = min_time_multiconvex(s, [0, 0], B)
        straight = float(s.norm(B))
        case, _, Qset, _ = optimal_velocities(s, [0, 0], B)
        assert t <= straight * (1 + 1e-12)
        if case == "cusp" or len(Qset) == 1:
            assert t == pytest.approx(straight, abs=1e-9 * straight)
        assert abs(w.time - t) < 1e-10 * max(1.0, t)
        assert np.allclose(w.points[-1], B)


# -- constant single tack -----------------------------------------------------------------


def test_faster_metric_alone_tacks_at_b():
    p, t, kind = optimal_tack_constant(Euclidean(), Euclidean(scale=2.0), [0, 0], [1, 0])
    assert t == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(p, [1, 0], atol=1e-6)
    assert kind == "unique"


def test_equal_metrics_whole_segment():
    _, t, kind = optimal_tack_constant(Euclidean(), Euclidean(), [0, 0], [3, 4])
    assert kind == "whole-segment" and t == pytest.approx(5.0, abs=1e-10)


def test_shifted_circles_tack():
    a = elliptic("1", "1", "0", "1/2", name="up")
    b = elliptic("1", "1", "0", "-1/2", name="down")
    p, t, kind = optimal_tack_constant(a, b, [0, 0], [2, 0])
    assert np.allclose(p, [1, 0.5], atol=1e-8)
    assert t == pytest.approx(2.0, abs=1e-10)
    # brute force over a 500x500 grid of tack points
    g = np.linspace(-1, 3, 500)
    X, Y = np.meshgrid(g, np.linspace(-2, 2, 500))
    P = np.stack([X.ravel(), Y.ravel()], -1)
    d1, d2 = P, np.array([2.0, 0]) - P
    ok = (np.linalg.norm(d1, axis=1) > 0) & (np.linalg.norm(d2, axis=1) > 0)
    T = a.F(0.0, np.zeros_like(P[ok]), d1[ok]) + b.F(0.0, np.zeros_like(P[ok]), d2[ok])
    assert t <= T.min() + 1e-12
    assert T.min() - t < 1e-3 * t
    tm, _ = min_time_multiconvex(MultiConvexIndicatrix([ConvexIndicatrix.from_metric(a),
                                                        ConvexIndicatrix.from_metric(b)]), [0, 0], [2, 0])
    assert tm == pytest.approx(t, rel=1e-9)


def test_constant_tack_rejects_variable_metrics(general_metric):
    with pytest.raises(GeometryError):
        optimal_tack_constant(general_metric, Euclidean(), [0, 0], [1, 0])


# -- Snell residual --------------------------------------------------------------------------


def test_snell_examples():
    a = elliptic("1", "1", "0", "1/2")
    b = elliptic("1", "1", "0", "-1/2")
    assert np.allclose(snell_residual(a, a, 0.0, [0, 0], [1, 2], [1, 2]), 0)
    d = snell_residual(a, b, 0.0, [1, 0.5], [1, 0.5], [1, -0.5])
    assert np.allclose(d, 0, atol=1e-14)
    assert np.allclose(a.derivatives(0.0, np.zeros(2), np.array([1, 0.5]))[3], [1, 0], atol=1e-14)
    c, s = np.cos(0.1), np.sin(0.1)
    rot = np.array([[c, -s], [s, c]]) @ [1, -0.5]
    assert np.linalg.norm(snell_residual(a, b, 0.0, [1, 0.5], [1, 0.5], rot)) > 1e-3
    with pytest.raises(GeometryError):
        snell_residual(a, b, 0.0, [0, 0], [0, 0], [1, 0])


def test_snell_at_constant_optimum_along_supporting_line():
    a = elliptic("2", "2", "(3/2)*cos(pi/10)", "(3/2)*sin(pi/10)", "pi")
    b = elliptic("1", "1", "3/4", "0", "0")
    A, B = np.zeros(2), np.array([2.0, 8.0])
    p, t, _ = optimal_tack_constant(a, b, A, B)
    d = snell_residual(a, b, 0.0, p, p - A, B - p)
    sigma = MultiConvexIndicatrix([ConvexIndicatrix.from_metric(a), ConvexIndicatrix.from_metric(b)])
    _, _, _, n = optimal_velocities(sigma, A, B)
    assert abs(d @ np.array([-n[1], n[0]])) < 1e-8
