"""Constructed violation cases shared by the admissibility tests and the
acceptance suite: each is designed so a specific check catches it."""

import copy
import dataclasses
import math

import numpy as np

from shockrefl import ShockCurve, make_uniform_state
from shockrefl.admissibility import grid_tolerance


def supersonic_uniform_field(sol):
    """Replace the field with a uniform state moving faster than its own
    sound speed; ellipticity must fail everywhere."""
    bad = copy.copy(sol)
    st = make_uniform_state(3.0, 0.0, -5.0, sol.config.params)
    assert math.hypot(st.u, st.v) > st.c  # genuinely supersonic
    bad.phi = st.potential(sol.mesh.nodes)
    return bad


def pinching_bump(sol):
    """Bump one interior node by 10x the grid tolerance; pinching must fail
    there."""
    bad = copy.copy(sol)
    tol = grid_tolerance(sol)
    phi = sol.phi.copy()
    i, j = phi.shape[0] // 2, phi.shape[1] // 2
    phi[i, j] += 10.0 * tol
    bad.phi = phi
    return bad, tuple(float(v) for v in sol.mesh.nodes[i, j])


def reversed_shock_field(sol):
    """phi -> 2 phi1 - phi flips the shock inequalities by construction."""
    bad = copy.copy(sol)
    bad.phi = 2.0 * sol.config.state1.potential(sol.mesh.nodes) - sol.phi
    return bad


def nonconvex_shock(sol, amplitude=0.05, waves=3):
    """Sine-wiggled shock graph: strict convexity must fail."""
    t = sol.shock.t_values
    tau = (t - t[0]) / (t[-1] - t[0])
    f, _ = sol.shock.graph_value(t)
    f = f + amplitude * np.sin(waves * 2.0 * math.pi * tau) * np.sin(math.pi * tau)
    e, ep = sol.shock.e, sol.shock.e_perp
    pts = f[:, None] * e[None, :] + t[:, None] * ep[None, :]
    return ShockCurve(e=e, points=pts, tau_p1=sol.shock.tau_p1, tau_p2=sol.shock.tau_p2)


def tampered_incident_config(sol, factor=1.05):
    """Config whose stored incident u1 is wrong: the far-field incident
    residual must become nonzero."""
    cfg = sol.config
    bad_inc = dataclasses.replace(cfg.incident, u1=cfg.incident.u1 * factor)
    bad_state1 = make_uniform_state(bad_inc.u1, 0.0, bad_inc.k1, cfg.params)
    bad_cfg = dataclasses.replace(cfg, incident=bad_inc, state1=bad_state1)
    bad = copy.copy(sol)
    bad.config = bad_cfg
    return bad
