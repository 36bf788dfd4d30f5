import copy

import numpy as np
import pytest

from shockrefl import ShockCurve, TooFewSamples
from shockrefl.admissibility import (
    check_ellipticity,
    check_far_field,
    check_graph_and_convexity,
    check_pinching,
    check_shock_inequalities,
    check_tangent_distance,
    check_wedge_monotonicity,
    full_report,
    grid_tolerance,
)
from falsification import (
    nonconvex_shock,
    pinching_bump,
    reversed_shock_field,
    supersonic_uniform_field,
    tampered_incident_config,
)


def test_normal_reflection_report_passes_with_flatness_note(sol_normal65):
    rep = full_report(sol_normal65)
    assert rep.verdict
    conv = rep["graph_and_convexity"]
    assert "flat-shock exemption" in conv.note


def test_converged_85_report_passes(sol85_n65):
    rep = full_report(sol85_n65)
    assert rep.verdict
    assert rep["ellipticity"].worst > 0.0
    assert rep["shock_inequalities"].worst > 0.0
    # strict convexity in every sampled direction on the middle 80%
    conv = rep["graph_and_convexity"]
    for k, v in conv.details.items():
        if k.endswith("max_fpp_mid"):
            assert v < 0.0


def test_report_is_deterministic(sol85_n65):
    a = full_report(sol85_n65).to_json()
    b = full_report(sol85_n65).to_json()
    assert a == b


def test_supersonic_uniform_field_fails_ellipticity(sol_normal65):
    bad = supersonic_uniform_field(sol_normal65)
    rec = check_ellipticity(bad)
    assert not rec.passed
    assert rec.worst < 0.0 and rec.location is not None
    rep = full_report(bad)
    assert not rep.verdict
    assert not rep.checks[0].passed  # ellipticity is the first mandatory check


def test_pinching_bump_fails_at_the_node(sol85_n65):
    bad, loc = pinching_bump(sol85_n65)
    rec = check_pinching(bad)
    assert not rec.passed
    assert np.allclose(rec.location, loc, atol=1e-12)
    # the bump exceeds the band by 10*tol minus the field's own slack there
    assert rec.worst > 5.0 * grid_tolerance(sol85_n65)


def test_reversed_field_fails_shock_inequalities(sol85_n65):
    bad = reversed_shock_field(sol85_n65)
    rec = check_shock_inequalities(bad)
    assert not rec.passed


def test_sign_flipped_field_fails_wedge_monotonicity(sol85_n65):
    # add a linear ramp along nu_w twice the tolerance: d_nu_w(phi - phi2)
    # exceeds tol everywhere by construction
    bad = copy.copy(sol85_n65)
    nu_w = sol85_n65.config.wedge_normal()
    ramp = 2.0 * grid_tolerance(sol85_n65) * (sol85_n65.mesh.nodes @ nu_w)
    bad.phi = sol85_n65.phi + ramp
    rec = check_wedge_monotonicity(bad)
    assert not rec.passed


def test_phi_equals_phi2_is_boundary_case(sol85_n65):
    synth = copy.copy(sol85_n65)
    synth.phi = sol85_n65.config.state2.potential(sol85_n65.mesh.nodes)
    rec = check_wedge_monotonicity(synth)
    assert rec.passed
    # zero up to the discrete-gradient truncation error of the sampled state
    assert abs(rec.worst) < 1e-3


def test_cone_monotonicity_inverted_direction_fails(sol85_n65):
    """Sanity inversion: the negated mid-cone direction flips the sign."""
    from shockrefl import interior_cone_directions

    mid = interior_cone_directions(sol85_n65.config.e_s1)[1]
    grad1 = sol85_n65.config.state1.gradient(sol85_n65.mesh.nodes)
    diff = grad1 - sol85_n65.gradient()
    vals = (diff * (-mid)).sum(-1)
    interior = vals[3:-3, 3:-3]
    assert interior.max() > grid_tolerance(sol85_n65)


def test_state2_closed_form_cone_derivative(sol85_n65):
    """d_{e_S1}(phi1 - phi2) is a nonpositive constant (linear function)."""
    cfg = sol85_n65.config
    d = cfg.state1.gradient(np.zeros(2)) - cfg.state2.gradient(np.zeros(2))
    val = float(d @ cfg.e_s1)
    # e_S1 is orthogonal to D(phi1 - phi2): the boundary case of the
    # non-strict cone monotonicity, zero up to roundoff
    assert val <= 1e-12
    d2 = cfg.state1.gradient(np.array([1.0, 1.0])) - cfg.state2.gradient(np.array([1.0, 1.0]))
    assert float(d2 @ cfg.e_s1) == pytest.approx(val, abs=1e-14)


def test_straight_shock_fails_strict_convexity(sol85_n65):
    t = np.linspace(0.0, 1.0, 21)
    e = sol85_n65.shock.e
    ep = sol85_n65.shock.e_perp
    p0 = sol85_n65.shock.points[0]
    p1 = sol85_n65.shock.points[-1]
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    straight = ShockCurve(e=e, points=pts, tau_p1=sol85_n65.shock.tau_p1,
                          tau_p2=sol85_n65.shock.tau_p2)
    rec = check_graph_and_convexity(straight, theta_w=sol85_n65.theta_w,
                                    config=sol85_n65.config)
    assert not rec.passed  # f'' = 0: convex but not strictly


def test_concave_parabola_passes_convexity(sol85_n65):
    # f(T) = -T^2 in the nu_w frame: uniformly concave graph
    e = sol85_n65.shock.e
    ep = np.array([-e[1], e[0]])
    t = np.linspace(-1.0, 1.0, 41)
    f = -0.5 * t ** 2
    pts = f[:, None] * e[None, :] + t[:, None] * ep[None, :]
    tau1 = pts[1] - pts[0]
    tau2 = pts[-2] - pts[-1]
    curve = ShockCurve(e=e, points=pts, tau_p1=tau1 / np.linalg.norm(tau1),
                       tau_p2=tau2 / np.linalg.norm(tau2))
    rec = check_graph_and_convexity(curve, theta_w=1.0, config=None, tol=1e-6)
    assert rec.passed


def test_nonconvex_shock_fails(sol85_n65):
    bad = nonconvex_shock(sol85_n65)
    rec = check_graph_and_convexity(bad, theta_w=sol85_n65.theta_w, config=sol85_n65.config)
    assert not rec.passed


def test_too_few_samples():
    pts = np.array([[0.0, 1.0], [0.0, 0.5], [0.0, 0.0]])
    curve = ShockCurve.__new__(ShockCurve)  # bypass __init__ min-sample guard
    with pytest.raises(TooFewSamples):
        ShockCurve(e=np.array([-1.0, 0.0]), points=pts,
                   tau_p1=np.array([0.0, -1.0]), tau_p2=np.array([0.0, 1.0]))


def test_tangent_distance_circle_arc_is_constant():
    ang = np.linspace(0.3, 1.2, 31)
    r = 2.0
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])[::-1]
    e = np.array([1.0, 0.0])
    tau1 = pts[1] - pts[0]
    curve = ShockCurve(e=e, points=pts, tau_p1=tau1 / np.linalg.norm(tau1),
                       tau_p2=(pts[-2] - pts[-1]) / np.linalg.norm(pts[-2] - pts[-1]))
    rec = check_tangent_distance(curve)
    assert rec.details["d_start"] == pytest.approx(r, rel=1e-4)
    assert rec.worst < 1e-3  # constant distance: degenerate-pass


def test_tangent_distance_monotone_on_converged(sol85_n65):
    rec = check_tangent_distance(sol85_n65.shock)
    assert rec.passed  # diagnostic never gates


def test_far_field_passes_and_detects_tampering(sol85_n65):
    rec = check_far_field(sol85_n65)
    assert rec.passed and rec.worst < 1e-10
    bad = tampered_incident_config(sol85_n65)
    rec2 = check_far_field(bad)
    assert not rec2.passed
    assert rec2.details["incident_worst"] > 1e-6


def test_phi_tau_tau_agreement_high(sol85_n65):
    from shockrefl.admissibility import check_phi_tau_tau_equivalence

    rec = check_phi_tau_tau_equivalence(sol85_n65)
    assert rec.details["agreement"] >= 0.95
