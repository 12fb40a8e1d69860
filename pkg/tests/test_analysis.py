import json

import numpy as np
import pytest
from helpers import ray_point
from oracles import FROZEN

from riemreg import model
from riemreg.analysis import (
    Ball,
    CheckReport,
    DiffConfig,
    Row,
    c11_crosscheck,
    combine,
    dexp_transport_gap,
    exp_comparison_check,
    gap_closed_form,
    gap_order_fit,
    grad_lip_estimate,
    hessian_quadform,
    invexp_transport_gap,
    lipschitz_estimate,
    midpoint_convexity_check,
    num_gradient,
    sampled_operator_norm,
    semiconcavity_check,
    semiconvexity_check,
)
from riemreg.fields import ScalarField, constant, dist, dist_sq

T_LIST = np.geomspace(1e-3, 1e-1, 7)


def test_diff_config_validation():
    with pytest.raises(ValueError):
        DiffConfig(h_grad=0.0)
    with pytest.raises(ValueError):
        DiffConfig(h_grad=1e-2, h_hess=1e-3)
    with pytest.raises(ValueError):
        DiffConfig(n_samples=0)


# --- derivatives ---------------------------------------------------------------
def test_gradient_of_constant_is_zero(S):
    g = num_gradient(constant(S, 3.0), ray_point(S, 0.4))
    assert np.max(np.abs(g)) <= 1e-10


def test_gradient_of_flat_half_norm(E):
    g = num_gradient(dist_sq(E, E.origin(), 0.5), np.array([1.0, 0.0]))
    assert np.allclose(g, [1.0, 0.0], atol=1e-8)


def test_gradient_of_hyperbolic_dist_sq(H):
    x = ray_point(H, 1.0)
    g = num_gradient(dist_sq(H, H.origin()), x)
    assert float(H.norm(x, g)) == pytest.approx(2.0, abs=1e-6)
    assert np.allclose(g, -2 * H.log(x, H.origin()), atol=1e-6)


def test_hessian_of_flat_half_norm(E, rng):
    f = dist_sq(E, E.origin(), 0.5)
    for ang in rng.uniform(0, 2 * np.pi, 5):
        v = np.array([np.cos(ang), np.sin(ang)])
        assert hessian_quadform(f, np.array([0.3, -0.2]), v) == pytest.approx(1.0, abs=1e-6)


def test_hyperbolic_dist_sq_hessian(H):
    f = dist_sq(H, H.origin())
    x = ray_point(H, 1.0)
    radial, transverse = H.orthonormal_frame(x)
    assert hessian_quadform(f, x, transverse) == pytest.approx(FROZEN["hess_d2_H_d1"], rel=1e-6)
    assert hessian_quadform(f, x, radial) == pytest.approx(2.0, rel=1e-6)


def test_lipschitz_estimate_of_distance(H):
    f = dist(H, H.origin())
    assert lipschitz_estimate(f, Ball(H, ray_point(H, 0.8), 0.3), n=100) == pytest.approx(1.0, abs=1e-6)


def test_grad_lip_estimates(E, H):
    affine = ScalarField(E, lambda x: 2.0 * x[..., 0] - x[..., 1])
    assert grad_lip_estimate(affine, Ball(E, E.origin(), 1.0), 100) <= 1e-6
    half = dist_sq(E, E.origin(), 0.5)
    assert grad_lip_estimate(half, Ball(E, E.origin(), 1.0), 100) == pytest.approx(1.0, abs=1e-4)
    hyp = dist_sq(H, H.origin(), 0.5)
    est = grad_lip_estimate(hyp, Ball(H, H.origin(), 1.0), 400)
    assert est == pytest.approx(FROZEN["coth1"], rel=0.1)


# --- convexity -------------------------------------------------------------------
def test_midpoint_convexity_examples(E, S):
    ball = Ball(E, E.origin(), 1.0)
    rep = midpoint_convexity_check(dist_sq(E, E.origin()), ball, 2000)
    assert rep.passed and rep.worst_violation <= 0
    rep = midpoint_convexity_check(-dist_sq(E, E.origin()), ball, 2000)
    assert not rep.passed and rep.worst_violation > 0.1
    sphere = midpoint_convexity_check(dist_sq(S, S.origin()), Ball(S, S.origin(), 1.0), 2000)
    assert sphere.passed


def test_midpoint_convexity_slack_is_monotone(E):
    ball = Ball(E, E.origin(), 1.0)
    f = -dist_sq(E, E.origin(), 1e-4)
    tight = midpoint_convexity_check(f, ball, 500)
    loose = midpoint_convexity_check(f, ball, 500, slack_fn=lambda a, b: 1e-3 + 0 * a)
    assert not tight.passed and loose.passed


def test_semiconvexity_examples(E, S):
    x0 = E.origin()
    assert semiconvexity_check(dist_sq(E, x0), 0.0, x0, 1.0, 1000).passed
    concave = -dist_sq(E, x0)
    exact = semiconvexity_check(concave, 1.0, x0, 1.0, 1000)
    assert exact.passed and abs(exact.worst_violation) <= 1e-12
    assert not semiconvexity_check(concave, 0.9, x0, 1.0, 1000).passed
    assert semiconcavity_check(dist_sq(S, S.origin()), 1.0, S.origin(), 0.5, 1000).passed


# --- gaps ------------------------------------------------------------------------
def test_euclidean_gaps_vanish(E):
    v = np.array([0.3, -0.7])
    assert dexp_transport_gap(E, E.origin(), v) <= 1e-15
    assert invexp_transport_gap(E, E.origin(), v) <= 1e-15


@pytest.mark.parametrize("kind,tag", [("sphere", "S"), ("hyperbolic", "H")])
def test_gap_values_at_radius_0p1(kind, tag):
    M = model(kind, 2)
    x = M.origin()
    v = 0.1 * M.orthonormal_frame(x)[0]
    assert dexp_transport_gap(M, x, v) == pytest.approx(FROZEN[f"gap_dexp_{tag}_0p1"], rel=1e-8)
    assert invexp_transport_gap(M, x, v) == pytest.approx(FROZEN[f"gap_inv_{tag}_0p1"], rel=1e-8)
    assert gap_closed_form(M, 0.1) == pytest.approx(FROZEN[f"gap_dexp_{tag}_0p1"], rel=1e-12)
    assert gap_closed_form(M, 0.1, "inv") == pytest.approx(FROZEN[f"gap_inv_{tag}_0p1"], rel=1e-12)


@pytest.mark.parametrize("kind", ["sphere", "hyperbolic"])
def test_sampled_operator_norm_agrees_with_spectral_norm(kind):
    M = model(kind, 2)
    x = ray_point(M, 0.3, 1)
    v = M.to_tangent(x, np.array([0.05, 0.08]))
    exact = float(dexp_transport_gap(M, x, v))
    assert sampled_operator_norm(M, x, v) == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("kind", ["sphere", "hyperbolic"])
@pytest.mark.parametrize("which", ["dexp", "inv"])
def test_gap_order_is_two(kind, which):
    M = model(kind, 2)
    x = ray_point(M, 0.4)
    slope, gaps = gap_order_fit(M, x, M.orthonormal_frame(x)[1], T_LIST, which)
    assert 1.9 <= slope <= 2.1 and np.all(gaps > 0)


def test_exp_comparison(E, S, H):
    assert exp_comparison_check(E, 0.0, 0.5, 500).passed
    assert exp_comparison_check(S, 0.0, 0.5, 500).passed
    rep = exp_comparison_check(H, 0.02, 0.1, 2000)
    assert rep.passed and rep.details["minimal_eps"] <= 0.02


# --- C^{1,1} -----------------------------------------------------------------------
@pytest.mark.parametrize("kind,expected", [("euclidean", 1.0), ("sphere", 1.0),
                                           ("hyperbolic", FROZEN["coth1"])])
def test_c11_constants_agree(kind, expected):
    M = model(kind, 2)
    rep = c11_crosscheck(dist_sq(M, M.origin(), 0.5), M.origin(), 1.0, n=24)
    assert rep.passed
    for value in rep.details.values():
        assert value == pytest.approx(expected, rel=0.05)


# --- reports -----------------------------------------------------------------------
def test_report_combination_and_serialisation():
    good = CheckReport("a", worst_violation=-1.0, slack=0.0, rows=[Row("r", np.float64(1.0))])
    bad = CheckReport("b", worst_violation=2.0, slack=0.5, passed=False, witness=[[1.0]])
    parent = combine("both", [good, bad])
    assert not parent.all_passed and parent.witness == [[1.0]]
    assert parent.attempted == 0 and len(parent.children) == 2
    data = parent.to_dict()
    json.dumps(data)
    assert data["children"][0]["rows"][0]["value_numeric"] == 1.0
    assert isinstance(good.rows[0].value_numeric, float)
    assert combine("ok", [good]).all_passed
