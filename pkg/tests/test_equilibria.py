import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from polyaurn.dynamics import DomainError, grad_lyapunov, lyapunov, vector_field
from polyaurn.equilibria import (
    LimitKind,
    LimitSet,
    NotAnEquilibriumError,
    Stability,
    classify,
    compute_interval,
    enumerate_equilibria,
    has_expanding_direction,
    jacobian,
    make_equilibrium,
    maximize_on_face,
    predict_limit,
    project_simplex,
    tangent_basis,
    tangent_spectrum,
)
from polyaurn.graph import Graph, vertex_covers
from polyaurn.verify import load_fixtures, simplex_grid

FIX = load_fixtures()
TRIANGLE, K32, CYCLE4, K2 = FIX["triangle"], FIX["k32"], FIX["cycle4"], FIX["k2"]
THIRD = np.full(3, 1 / 3)


def complete_bipartite(i, j):
    return Graph.from_edges([(a, b) for a in range(1, i + 1) for b in range(i + 1, i + j + 1)])


def slsqp_face_max(g, S):
    """Independent oracle: SLSQP on the face, starting off-center."""
    idx = np.array(sorted(S)) - 1
    k = idx.size

    def full(y):
        v = np.zeros(g.m)
        v[idx] = y
        return v

    def f(y):
        s = [full(y)[i] + full(y)[j] for i, j in g.edge_array]
        return -lyapunov(g, full(y)) if min(s) > 0 else 1e6

    y0 = np.linspace(1, 2, k)
    res = minimize(f, y0 / y0.sum(), method="SLSQP", bounds=[(0, 1)] * k,
                   constraints=[{"type": "eq", "fun": lambda y: y.sum() - 1}],
                   options={"ftol": 1e-15, "maxiter": 1000})
    return -res.fun


@pytest.mark.parametrize(
    "g, S, expected",
    [
        (TRIANGLE, {1, 2, 3}, [1 / 3] * 3),
        (TRIANGLE, {1, 2}, [0.5, 0.5, 0]),
        (CYCLE4, {1, 3}, [0.5, 0, 0.5, 0]),
        (K32, {4, 5}, [0, 0, 0, 0.5, 0.5]),
        (K2, {1}, [1, 0]),
    ],
)
def test_face_maxima(g, S, expected):
    np.testing.assert_allclose(maximize_on_face(g, S), expected, atol=1e-9)


def test_face_must_be_cover():
    with pytest.raises(ValueError):
        maximize_on_face(TRIANGLE, {1})


@st.composite
def small_graphs(draw):
    m = draw(st.integers(2, 5))
    edges = {tuple(sorted((k, draw(st.integers(1, k - 1))))) for k in range(2, m + 1)}
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    edges |= set(draw(st.lists(st.sampled_from(pairs), max_size=4)))
    return Graph.from_edges(sorted(edges), m)


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_face_maxima_match_slsqp(g):
    for S in vertex_covers(g):
        v = maximize_on_face(g, S)
        assert lyapunov(g, v) >= slsqp_face_max(g, S) - 1e-9
        # KKT: gradient constant on the support
        gr = grad_lyapunov(g, v)
        on = v > 1e-9
        assert np.ptp(gr[on]) < 1e-6


def test_triangle_census():
    eqs = enumerate_equilibria(TRIANGLE)
    pts = np.array([e.point for e in eqs])
    np.testing.assert_allclose(pts, [[0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5], [1 / 3] * 3], atol=1e-10)
    assert [e.stability for e in eqs] == [Stability.UNSTABLE] * 3 + [Stability.NON_UNSTABLE]


def test_triangle_grid_oracle():
    """No grid point of a face beats the reported face maximum."""
    grid = simplex_grid(3, 100)
    for S in vertex_covers(TRIANGLE):
        best = lyapunov(TRIANGLE, maximize_on_face(TRIANGLE, S))
        out = [i for i in range(3) if i + 1 not in S]
        pts = grid[np.all(grid[:, out] == 0, axis=1)] if out else grid
        pts = pts[np.min(pts[:, [0, 1, 0]] + pts[:, [1, 2, 2]], axis=1) > 0]
        assert lyapunov(TRIANGLE, pts).max() <= best + 1e-12


@pytest.mark.parametrize("name", sorted(FIX))
def test_enumeration_consistency(name):
    g = FIX[name]
    eqs = enumerate_equilibria(g)
    for e in eqs:
        assert np.abs(vector_field(g, e.point)).max() < 1e-8
        assert e.stability is classify(g, e.point)
        if e.stability is Stability.UNSTABLE:
            assert has_expanding_direction(tangent_spectrum(g, e.point))
    assert sum(e.stability is Stability.NON_UNSTABLE for e in eqs) == 1


def test_k2_single_interval_record():
    (e,) = enumerate_equilibria(K2)
    assert e.interval is not None
    lo, hi = sorted(map(tuple, e.interval.endpoints))
    np.testing.assert_allclose([lo, hi], [[0, 1], [1, 0]], atol=1e-10)


@pytest.mark.parametrize(
    "g, w, stability",
    [
        (TRIANGLE, [0.5, 0.5, 0], Stability.UNSTABLE),
        (K32, [0, 0, 0, 0.5, 0.5], Stability.NON_UNSTABLE),
        (TRIANGLE, THIRD, Stability.NON_UNSTABLE),
    ],
)
def test_classify(g, w, stability):
    assert classify(g, w) is stability


def test_classify_triangle_edge_gradient():
    e = make_equilibrium(TRIANGLE, [0.5, 0.5, 0])
    assert e.gradient[2] == pytest.approx(1 / 3, abs=1e-15)
    assert e.support == (1, 2) and e.marginal == ()


def test_classify_rejects_non_equilibrium():
    with pytest.raises(NotAnEquilibriumError):
        classify(TRIANGLE, [0.5, 0.3, 0.2])


def test_jacobian_cycle4_circulant():
    circ = np.array([[-2, -1, 0, -1], [-1, -2, -1, 0], [0, -1, -2, -1], [-1, 0, -1, -2]]) / 4
    np.testing.assert_allclose(jacobian(CYCLE4, [0.25] * 4), circ, atol=1e-15)


def test_jacobian_triangle():
    J = jacobian(TRIANGLE, THIRD)
    np.testing.assert_allclose(np.diag(J), -0.5, atol=1e-15)
    np.testing.assert_allclose(J[~np.eye(3, dtype=bool)], -0.25, atol=1e-15)


def test_jacobian_zero_row_is_diagonal():
    w = np.array([0, 0, 0, 0.5, 0.5])
    J = jacobian(K32, w)
    gr = grad_lyapunov(K32, w)
    for i in range(3):
        expected = np.zeros(5)
        expected[i] = gr[i]
        np.testing.assert_allclose(J[i], expected, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(sorted(FIX)), st.data())
def test_jacobian_finite_differences(name, data):
    g = FIX[name]
    w = np.array(data.draw(st.lists(st.floats(0.05, 1), min_size=g.m, max_size=g.m)))
    w /= w.sum()
    h = 1e-6
    fd = np.column_stack([(vector_field(g, w + h * e) - vector_field(g, w - h * e)) / (2 * h) for e in np.eye(g.m)])
    np.testing.assert_allclose(jacobian(g, w), fd, atol=1e-6)


def test_tangent_basis():
    Q = tangent_basis(5)
    np.testing.assert_allclose(Q.T @ Q, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(Q.sum(axis=0), 0, atol=1e-14)


def test_spectrum_cycle4():
    rep = tangent_spectrum(CYCLE4, [0.25] * 4)
    np.testing.assert_allclose(np.sort(rep.eigenvalues.real), [-0.5, -0.5, 0], atol=1e-12)
    assert rep.max_imag < 1e-9 and rep.zero_count == 1 and rep.realness_verified
    # the zero mode points along the segment
    J = jacobian(CYCLE4, [0.25] * 4)
    np.testing.assert_allclose(J @ np.array([1, -1, 1, -1]), 0, atol=1e-15)


def test_spectrum_triangle():
    rep = tangent_spectrum(TRIANGLE, THIRD)
    np.testing.assert_allclose(rep.eigenvalues.real, [-0.25, -0.25], atol=1e-12)
    assert rep.zero_count == 0


@pytest.mark.parametrize("eta", np.linspace(-0.24, 0.24, 20))
def test_spectrum_along_segment(eta):
    w = np.array([0.25, 0.25, 0.25, 0.25]) + eta * np.array([1, -1, 1, -1])
    rep = tangent_spectrum(CYCLE4, w)
    assert rep.max_imag < 1e-9 and rep.zero_count == 1
    assert rep.symmetric_deviation < 1e-9


def test_interval_cycle4():
    ls = compute_interval(CYCLE4, [0.25] * 4)
    assert ls.kind is LimitKind.INTERVAL
    ends = sorted(tuple(p) for p in ls.endpoints)
    np.testing.assert_allclose(ends, [[0, 0.5, 0, 0.5], [0.5, 0, 0.5, 0]], atol=1e-11)


def test_interval_points_are_equilibria():
    ls = predict_limit(CYCLE4)
    rng = np.random.default_rng(7)
    for eta in rng.uniform(*ls.eta_range, size=20):
        v = ls.point(eta)
        assert np.abs(vector_field(CYCLE4, v)).max() < 1e-12
        assert classify(CYCLE4, v) is Stability.NON_UNSTABLE


def test_interval_triangle_is_singleton():
    assert compute_interval(TRIANGLE, THIRD).kind is LimitKind.SINGLETON


def test_interval_k2():
    ls = compute_interval(K2, [0.5, 0.5])
    ends = sorted(tuple(p) for p in ls.endpoints)
    np.testing.assert_allclose(ends, [[0, 1], [1, 0]], atol=1e-11)


def test_interval_needs_non_unstable():
    with pytest.raises(NotAnEquilibriumError):
        compute_interval(TRIANGLE, [0.5, 0.5, 0])


@pytest.mark.parametrize(
    "g, kind, point",
    [
        (TRIANGLE, LimitKind.SINGLETON, THIRD),
        (K32, LimitKind.SINGLETON, [0, 0, 0, 0.5, 0.5]),
        (FIX["k4"], LimitKind.SINGLETON, [0.25] * 4),
    ],
)
def test_predict_limit(g, kind, point):
    ls = predict_limit(g)
    assert ls.kind is kind
    np.testing.assert_allclose(ls.base, point, atol=1e-9)


@pytest.mark.parametrize("i, j", [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)])
def test_complete_bipartite_limit(i, j):
    ls = predict_limit(complete_bipartite(i, j))
    assert ls.kind is LimitKind.SINGLETON
    np.testing.assert_allclose(ls.base, [0] * i + [1 / j] * j, atol=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_balanced_complete_bipartite_interval(k):
    ls = predict_limit(complete_bipartite(k, k))
    assert ls.kind is LimitKind.INTERVAL
    lo, hi = ls.endpoints
    np.testing.assert_allclose(sorted([lo.tolist(), hi.tolist()]),
                               [[0] * k + [1 / k] * k, [1 / k] * k + [0] * k], atol=1e-9)


def test_cycle6_interval():
    ls = predict_limit(FIX["cycle6"])
    assert ls.kind is LimitKind.INTERVAL
    np.testing.assert_allclose(sorted(p.tolist() for p in ls.endpoints),
                               [[0, 1 / 3] * 3, [1 / 3, 0] * 3], atol=1e-9)


def test_limitset_projection():
    ls = LimitSet(LimitKind.INTERVAL, np.full(4, 0.25), np.array([1.0, -1, 1, -1]), (-0.25, 0.25))
    eta, p = ls.project([0.4, 0.1, 0.4, 0.1])
    assert eta == pytest.approx(0.15)
    assert ls.distance([0.6, -0.1, 0.6, -0.1]) == pytest.approx(np.linalg.norm([0.1, -0.1, 0.1, -0.1]))
    assert LimitSet.singleton(THIRD).distance(THIRD) == 0


def test_project_simplex():
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0, 0.0])), [1, 0, 0])
    np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5, 0.5])), [1 / 3] * 3)


def test_jacobian_domain():
    with pytest.raises(DomainError):
        jacobian(TRIANGLE, [1, 0, 0])
