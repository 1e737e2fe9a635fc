"""Group paths and curve lifting through the graph foliation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liecomplete.algebra import AbelianGroup
from liecomplete.flow import COMPLETE, ESCAPED, IntegratorConfig
from liecomplete.lift import (
    ExpSeg,
    GPath,
    LiftEscapedError,
    LinearSeg,
    PathError,
    equivariance_check,
    gamma,
    lift_path,
)
from liecomplete.scenarios import build, circle_loop_path

E_MINUS_2PI = 1.8674427317079893e-3  # exp(-2*pi)


@pytest.fixture(scope="module")
def helicoid():
    return build("example6_helicoid", {"alpha": 1.0}).action


@pytest.fixture(scope="module")
def affine():
    return build("affine_line").action


# ---------------------------------------------------------------------------
# GPath construction and derivative


def test_left_log_derivative_linear():
    G = AbelianGroup(2)
    p = GPath(G, (0.0, 0.0), [LinearSeg((2.0, 0.0), 1.0)])
    for t in (0.0, 0.3, 0.99, 1.0):
        assert p.left_log_derivative(t) == [2.0, 0.0]


def test_left_log_derivative_exp_rate(affine):
    p = GPath(affine.group, np.eye(2), [ExpSeg((0.5, -1.0), 1.0)])
    assert p.left_log_derivative(0.5) == [0.5, -1.0]


def test_left_log_derivative_piecewise_and_boundary():
    G = AbelianGroup(1)
    p = GPath(G, (0.0,), [LinearSeg((1.0,), 1.0), LinearSeg((-3.0,), 1.0)])
    # widths are 1/2 each, so the clock-rate doubles the displacement
    assert p.left_log_derivative(0.25) == [2.0]
    assert p.left_log_derivative(0.5) == [-6.0]   # right-continuous at the seam
    assert p.left_log_derivative(1.0) == [-6.0]


def test_reversed_segment_negates_derivative():
    G = AbelianGroup(2)
    p = GPath(G, (0.0, 0.0), [LinearSeg((2.0, -1.0), 1.0)])
    r = p.reverse()
    assert r.left_log_derivative(0.5) == [-2.0, 1.0]
    assert np.allclose(r.endpoint(), (0.0, 0.0))


def test_path_validation():
    G = AbelianGroup(2)
    with pytest.raises(PathError):
        GPath(G, (0.0, 0.0), [LinearSeg((1.0, 0.0), 0.0)])
    with pytest.raises(PathError):
        GPath(G, (0.0, 0.0), [LinearSeg((1.0,), 1.0)])
    with pytest.raises(PathError):
        GPath(G, (0.0, 0.0), [LinearSeg((math.nan, 0.0), 1.0)])
    with pytest.raises(PathError):
        GPath(G, (0.0,), [LinearSeg((1.0, 0.0), 1.0)])


def test_linear_segment_needs_abelian_model(affine):
    with pytest.raises(PathError):
        GPath(affine.group, np.eye(2), [LinearSeg((1.0, 0.0), 1.0)])


def test_durations_are_clock_weights_only():
    G = AbelianGroup(2)
    a = GPath(G, (0.0, 0.0), [LinearSeg((1.0, 0.0), 1.0), LinearSeg((0.0, 1.0), 1.0)])
    b = GPath(G, (0.0, 0.0), [LinearSeg((1.0, 0.0), 5.0), LinearSeg((0.0, 1.0), 1.0)])
    assert np.allclose(a.endpoint(), b.endpoint())


def test_exp_path_endpoint_matrix(affine):
    p = GPath(affine.group, np.eye(2), [ExpSeg((1.0, 0.0), 2.0)])
    assert np.allclose(p.endpoint(), [[1.0, 2.0], [0.0, 1.0]], atol=1e-14)


def test_concat_requires_matching_endpoint():
    G = AbelianGroup(2)
    a = GPath(G, (0.0, 0.0), [LinearSeg((1.0, 0.0), 1.0)])
    b = GPath(G, (5.0, 5.0), [LinearSeg((1.0, 0.0), 1.0)])
    with pytest.raises(PathError):
        a.concat(b)


def test_from_m_projection():
    G = AbelianGroup(2)
    pts = [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    p = GPath.from_m_projection(G, (0.0, 0.0), pts)
    assert p.n_segments == 2
    assert np.allclose(p.endpoint(), (-1.0, 1.0))


# ---------------------------------------------------------------------------
# lifting oracles


def test_unit_loop_scales_z(helicoid):
    path = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=1.0, chords_per_turn=1024)
    res = lift_path(helicoid, path, (1.0, 0.0, 1.0))
    assert res.status == COMPLETE
    assert res.endpoint_m[2] == pytest.approx(E_MINUS_2PI, rel=1e-7)
    assert res.winding == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(res.endpoint_g, path.endpoint())


def test_translate_preserves_z(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [LinearSeg((1.0, 0.0), 1.0)])
    res = lift_path(helicoid, p, (1.0, 0.0, 0.7))
    assert res.status == COMPLETE
    assert np.allclose(res.endpoint_m, (2.0, 0.0, 0.7), atol=1e-9)
    assert res.winding == pytest.approx(0.0, abs=1e-12)


def test_radial_path_escapes(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [LinearSeg((-1.0, 0.0), 1.0)])
    res = lift_path(helicoid, p, (1.0, 0.0, 0.7))
    assert res.status == ESCAPED
    assert abs(res.escape_time - 1.0) < 1e-3
    assert res.failed_segment == 0
    assert not res.low_confidence
    assert all(helicoid.margin(m) > 0.0 for (_, _, m) in res.trace)


def test_clockwise_loop_grows_z(helicoid):
    path = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=1.0, chords_per_turn=1024, clockwise=True)
    res = lift_path(helicoid, path, (1.0, 0.0, 1.0))
    assert res.status == COMPLETE
    assert res.endpoint_m[2] == pytest.approx(1.0 / E_MINUS_2PI, rel=1e-7)
    assert res.winding == pytest.approx(-1.0, abs=1e-9)


def test_empty_path_is_identity(helicoid):
    p = GPath(helicoid.group, (0.4, -0.2), [])
    res = lift_path(helicoid, p, (1.0, 0.0, 0.5))
    assert res.status == COMPLETE
    assert res.endpoint_m == (1.0, 0.0, 0.5)
    assert np.allclose(res.endpoint_g, (0.4, -0.2))


def test_trace_is_dense_for_few_segments(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [LinearSeg((1.0, 0.0), 1.0)])
    res = lift_path(helicoid, p, (1.0, 0.0, 0.7))
    assert len(res.trace) >= 64
    # group points interpolate the segment: halfway row is halfway along g
    mid = min(res.trace, key=lambda row: abs(row[0] - 0.5))
    assert np.allclose(mid[1], (0.5, 0.0), atol=0.02)


def test_matrix_model_lift(affine):
    # dilation flow: c(t) = exp(t*D) lifts x0 = 1 to e^t
    p = GPath(affine.group, np.eye(2), [ExpSeg((0.0, 1.0), 1.0)])
    res = lift_path(affine, p, (1.0,))
    assert res.status == COMPLETE
    assert res.endpoint_m[0] == pytest.approx(math.e, rel=1e-8)
    assert np.allclose(res.endpoint_g, [[1.0 / math.e, 0.0], [0.0, 1.0]], atol=1e-12)


# ---------------------------------------------------------------------------
# homotopy: equal endpoints + equal winding => equal lift endpoints


def test_square_loop_matches_circle_loop(helicoid):
    circle = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=1.0, chords_per_turn=4096)
    corners = [(1.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (1.0, 0.0)]
    square = GPath.from_m_projection(helicoid.group, (0.0, 0.0), corners)
    a = lift_path(helicoid, circle, (1.0, 0.0, 1.0))
    b = lift_path(helicoid, square, (1.0, 0.0, 1.0))
    assert a.status == b.status == COMPLETE
    assert a.winding == pytest.approx(b.winding, abs=1e-9)
    assert np.max(np.abs(np.asarray(a.endpoint_m) - b.endpoint_m)) < 1e-6


# ---------------------------------------------------------------------------
# gamma


def test_gamma_identity_path(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [])
    probes = [(1.0, 0.0, 1.0), (2.0, 1.0, -0.5)]
    for probe, res in gamma(helicoid, p, probes):
        assert res.status == COMPLETE
        assert np.allclose(res.endpoint_m, probe)


def test_gamma_full_loop_scales_z_per_probe(helicoid):
    path = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=1.0, chords_per_turn=1024)
    probes = [(1.0, 0.0, 1.0), (1.0, 0.0, -2.0)]
    out = gamma(helicoid, path, probes)
    for (probe, res) in out:
        assert res.status == COMPLETE
        assert res.endpoint_m[2] == pytest.approx(probe[2] * E_MINUS_2PI, rel=1e-6)
        assert np.allclose(res.endpoint_m[:2], probe[:2], atol=1e-9)


def test_gamma_records_per_probe_escape(helicoid):
    # translated to start at (3,0) the projection circle misses the axis;
    # translated to start at (2,0) it passes through it
    path = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=1.0, chords_per_turn=256)
    out = gamma(helicoid, path, [(3.0, 0.0, 1.0), (2.0, 0.0, 1.0)])
    assert out[0][1].status == COMPLETE
    assert out[0][1].endpoint_m[2] == pytest.approx(1.0, rel=1e-6)  # winding 0
    assert out[1][1].status == ESCAPED


# ---------------------------------------------------------------------------
# equivariance


def test_equivariance_abelian(helicoid):
    path = circle_loop_path((0.0, 0.0), (1.0, 0.0), turns=0.5, chords_per_turn=128)
    res = equivariance_check(helicoid, path, (1.0, 0.0, 1.0), (0.3, -0.8))
    assert res < 1e-9


def test_equivariance_matrix(affine):
    p = GPath(affine.group, np.eye(2), [ExpSeg((0.4, 0.7), 1.0), ExpSeg((-0.2, 0.1), 1.0)])
    g = affine.group.exp_segment((0.5, -0.3), 1.0)
    res = equivariance_check(affine, p, (1.0,), g)
    assert res < 1e-8


def test_equivariance_identity_is_zero(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [LinearSeg((0.5, 0.5), 1.0)])
    res = equivariance_check(helicoid, p, (1.0, 0.0, 1.0), (0.0, 0.0))
    assert res == 0.0


def test_equivariance_raises_on_escape(helicoid):
    p = GPath(helicoid.group, (0.0, 0.0), [LinearSeg((-1.0, 0.0), 1.0)])
    with pytest.raises(LiftEscapedError):
        equivariance_check(helicoid, p, (1.0, 0.0, 1.0), (0.1, 0.1))


# ---------------------------------------------------------------------------
# reparametrization / concatenation properties


_seg_vec = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))


@settings(max_examples=30, deadline=None)
@given(vecs=st.lists(_seg_vec, min_size=1, max_size=3), lam=st.floats(0.2, 0.8))
def test_reparametrization_invariance(vecs, lam):
    action = build("example6_helicoid", {"alpha": 1.0}).action
    x0 = (3.0, 3.0, 0.5)
    segs = [LinearSeg(v, 1.0) for v in vecs]
    base = lift_path(action, GPath(action.group, (0.0, 0.0), segs), x0)
    # split the first segment into two pieces with the same total displacement
    v = np.asarray(vecs[0])
    split = [
        LinearSeg(tuple(lam * v), lam),
        LinearSeg(tuple((1 - lam) * v), 1 - lam),
    ] + segs[1:]
    alt = lift_path(action, GPath(action.group, (0.0, 0.0), split), x0)
    if base.status != COMPLETE or alt.status != COMPLETE:
        return
    assert np.max(np.abs(np.asarray(base.endpoint_m) - alt.endpoint_m)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(v1=_seg_vec, v2=_seg_vec)
def test_concatenation(v1, v2):
    action = build("example6_helicoid", {"alpha": 1.0}).action
    x0 = (3.0, 3.0, 0.5)
    G = action.group
    p1 = GPath(G, (0.0, 0.0), [LinearSeg(v1, 1.0)])
    p2 = GPath(G, tuple(v1), [LinearSeg(v2, 1.0)])
    r1 = lift_path(action, p1, x0)
    if r1.status != COMPLETE:
        return
    r2 = lift_path(action, p2, r1.endpoint_m)
    joined = lift_path(action, p1.concat(p2), x0)
    if r2.status != COMPLETE or joined.status != COMPLETE:
        return
    assert np.max(np.abs(np.asarray(joined.endpoint_m) - r2.endpoint_m)) < 1e-8


def test_concat_exp_segments_keeps_endpoint(affine):
    G = affine.group
    p1 = GPath(G, np.eye(2), [ExpSeg((0.3, 0.5), 2.0)])
    p2 = GPath(G, p1.endpoint(), [ExpSeg((-0.1, 0.2), 0.5)])
    joined = p1.concat(p2)
    assert np.max(np.abs(joined.endpoint() - G.mul(p1.endpoint(), G.exp_segment((-0.1, 0.2), 0.5)))) < 1e-12
