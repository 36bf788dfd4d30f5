"""Rankine-Hugoniot machinery and the reflection-point algebra.

Across a shock the potential flow jump conditions are continuity of the
mass flux rho*Dphi.nu and of the potential phi itself; the entropy condition
selects jumps where density increases in the pseudo-flow direction.

The incident shock is the vertical half-line xi1 = xi1_0 separating state (0)
at rest from state (1) moving with (u1, 0).  At the reflection point P0 (where
the incident shock meets the wedge boundary) a uniform state (2) must satisfy
three conditions: slip along the wedge, phi2 = phi1, and the mass flux jump
against state (1).  With the slip condition (u2, v2) = u2*(1, tan(theta_w))
and phi-continuity fixing k2, the system collapses to one scalar equation
F(u2) = 0 whose two entropic roots are the weak and strong states (2).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BracketingFailure,
    DetachedWedgeAngle,
    NoCompression,
    NonpositiveDensity,
    RootSeparationFailure,
)
from .gas import UniformState, density, make_uniform_state

# Scan/bisection controls (see module notes: bracketed bisection only, no
# derivative methods; roots near detachment can be nearly tangent).
SCAN_POINTS = 10_000
BISECT_STEPS = 120
ANGLE_TOL = 1e-10


@dataclass(frozen=True)
class IncidentData:
    """Incident-shock data: state-(1) velocity, shock location, k1, c1."""

    u1: float
    xi1_0: float
    k1: float
    c1: float


@dataclass(frozen=True)
class State2Pair:
    """Weak and strong solutions of the reflection-point system at one angle.

    mach_p0_weak is |Dphi2(P0)|/c2 for the weak root; it is +inf at
    theta_w = pi/2 where P0 recedes to infinity along the wall.
    """

    weak: UniformState
    strong: UniformState
    p0: tuple
    mach_p0_weak: float
    theta_w: float


@dataclass(frozen=True)
class AngleDiagram:
    """Transition angles and the attachment criterion for one parameter set."""

    theta_d: float
    theta_s: float
    rho_c: float
    attachment_possible: bool


class Regime(Enum):
    SUPERSONIC = "supersonic"
    SONIC = "sonic"
    SUBSONIC_NEAR_SONIC = "subsonic_near_sonic"
    SUBSONIC_AWAY = "subsonic_away_from_sonic"


def incident_state(params):
    """Solve the Rankine-Hugoniot conditions across the vertical incident shock.

    Mass flux and phi-continuity (with k0 = 0) give closed forms

        u1^2   = 2*(rho1-rho0)*(rho1^(g-1)-rho0^(g-1)) / ((g-1)*(rho1+rho0)),
        xi1_0  = rho1*u1/(rho1-rho0),
        k1     = -u1*xi1_0.

    Raises NoCompression when rho1 <= rho0.
    """
    r0, r1, g = params.rho0, params.rho1, params.gamma
    if not r1 > r0:
        raise NoCompression("incident shock needs rho1 > rho0")
    u1 = math.sqrt(2.0 * (r1 - r0) * (r1 ** (g - 1.0) - r0 ** (g - 1.0)) / ((g - 1.0) * (r1 + r0)))
    xi1_0 = r1 * u1 / (r1 - r0)
    return IncidentData(u1=u1, xi1_0=xi1_0, k1=-u1 * xi1_0, c1=params.c1)


def state0(params):
    """Uniform state (0): at rest, k = 0, density rho0."""
    return make_uniform_state(0.0, 0.0, 0.0, params)


def state1(params, inc=None):
    """Uniform state (1) behind the incident shock."""
    inc = inc or incident_state(params)
    return make_uniform_state(inc.u1, 0.0, inc.k1, params)


def rh_residual(left, right, point, normal, params=None):
    """Rankine-Hugoniot residuals between two uniform states at a point.

    Returns (mass_jump, potential_jump) where

        mass_jump      = [rho(|Dphi|^2, phi) Dphi . nu],
        potential_jump = [phi],

    evaluated left-minus-right.  Both vanish iff the point can lie on a valid
    discontinuity between the states with that normal.  When params is given
    the densities are recomputed through the closure (exercising the
    xi-independence of the closure on uniform states); otherwise the stored
    densities are used.
    """
    point = np.asarray(point, dtype=float)
    nu = np.asarray(normal, dtype=float)
    out_mass = []
    out_phi = []
    for st in (left, right):
        phi = st.potential(point)
        grad = st.gradient(point)
        if params is not None:
            rho = density(np.sum(grad * grad, axis=-1), phi, params)
        else:
            rho = st.rho
        out_mass.append(rho * np.sum(grad * nu, axis=-1))
        out_phi.append(phi)
    return out_mass[0] - out_mass[1], out_phi[0] - out_phi[1]


def entropy_satisfied(upstream_rho, downstream_rho):
    """True iff density increases across the shock in the pseudo-flow direction."""
    if upstream_rho <= 0.0 or downstream_rho <= 0.0:
        raise NonpositiveDensity("entropy check needs positive densities")
    return downstream_rho > upstream_rho


# ----------------------------------------------------------------------
# The reduced state-(2) system.

def _state2_pieces(u2, theta_w, params, inc):
    """rho2 base and the scalar mass-RH mismatch F(u2) for the reduced system.

    v2 = u2*tan(th) and k2 = -xi1_0*u2*sec^2(th) are eliminated; F is the
    mass condition rho2*Dphi2.n - rho1*Dphi1.n at P0 with n = (u1-u2, -v2)
    (unnormalized; roots are unchanged).
    """
    g = params.gamma
    u1, xi10 = inc.u1, inc.xi1_0
    t = math.tan(theta_w)
    sec2 = 1.0 + t * t
    u2 = np.asarray(u2, dtype=float)
    base = params.rho0_pow + (g - 1.0) * (u2 * sec2) * (xi10 - 0.5 * u2)
    rho2 = np.where(base > 0.0, np.abs(base) ** (1.0 / (g - 1.0)), np.nan)
    lhs = rho2 * (u2 - xi10) * (u1 - u2 * sec2)
    rhs = params.rho1 * ((u1 - xi10) * (u1 - u2) + xi10 * u2 * t * t)
    return lhs - rhs, rho2


def _entropic_window(theta_w, params, inc):
    """(u_lo, u_hi) inside which rho2 > rho1 and Dphi2(P0) points down-wedge.

    rho2 = rho1 at u*(xi10 - u/2) = delta*cos^2/( g-1 ); the lower quadratic
    root bounds the window from below and u2 = xi1_0 caps it from above.
    """
    g = params.gamma
    delta = params.rho1 ** (g - 1.0) - params.rho0_pow
    a_val = delta * math.cos(theta_w) ** 2 / (g - 1.0)
    disc = inc.xi1_0 ** 2 - 2.0 * a_val
    if disc <= 0.0:
        return None
    u_lo = inc.xi1_0 - math.sqrt(disc)
    return u_lo, inc.xi1_0


def _bisect(f, a, b, fa=None, fb=None, steps=BISECT_STEPS):
    """Plain bracketed bisection to full float resolution.

    Unconditionally safe for tangent-prone roots; terminates when the
    midpoint can no longer be distinguished from the bracket endpoints,
    so small roots keep full relative precision.
    """
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise BracketingFailure(f"no sign change on [{a}, {b}]")
    for _ in range(steps):
        m = 0.5 * (a + b)
        if m == a or m == b:
            return m
        fm = f(m)
        if fm == 0.0:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _scan_roots(theta_w, params, inc, n=SCAN_POINTS):
    """Bracket-scan the entropic window; returns refined roots of F sorted by u2."""
    win = _entropic_window(theta_w, params, inc)
    if win is None:
        return []
    u_lo, u_hi = win
    # Include u_hi = xi1_0 itself: F there is strictly negative, and the
    # strong root crowds against it as theta_w -> pi/2.
    grid = np.linspace(u_lo * (1.0 + 1e-14) + 1e-300, u_hi, n)
    fval, _ = _state2_pieces(grid, theta_w, params, inc)
    sign = np.sign(fval)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    scalar = lambda u: float(_state2_pieces(u, theta_w, params, inc)[0])
    roots = [
        _bisect(scalar, grid[i], grid[i + 1], fval[i], fval[i + 1]) for i in flips
    ]
    exact = grid[fval == 0.0]
    roots.extend(float(u) for u in exact)
    return sorted(roots)


def _lobe_extremum(theta_w, params, inc, s_in, n=SCAN_POINTS):
    """F at the interior lobe extremum (argmax of s_in*F); crosses zero at theta_d."""
    win = _entropic_window(theta_w, params, inc)
    if win is None:
        return -math.inf * s_in, math.nan
    u_lo, u_hi = win
    grid = np.linspace(u_lo * (1.0 + 1e-14) + 1e-300, u_hi, n)
    fval, _ = _state2_pieces(grid, theta_w, params, inc)
    fval = s_in * fval
    i = int(np.nanargmax(fval))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n - 1)]
    # golden-section refine the smooth lobe maximum
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = s_in * float(_state2_pieces(c, theta_w, params, inc)[0])
    fd = s_in * float(_state2_pieces(d, theta_w, params, inc)[0])
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = s_in * float(_state2_pieces(c, theta_w, params, inc)[0])
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = s_in * float(_state2_pieces(d, theta_w, params, inc)[0])
    u_star = 0.5 * (a + b)
    return float(_state2_pieces(u_star, theta_w, params, inc)[0]), u_star


def _inner_sign(params, inc, probe_theta=None):
    """Sign of F between the weak and strong roots, fixed per parameter set."""
    th = probe_theta if probe_theta is not None else math.pi / 2.0 - 0.01
    roots = _scan_roots(th, params, inc)
    if len(roots) < 2:
        raise BracketingFailure("no two reflection roots near pi/2; cannot orient lobe")
    mid = 0.5 * (roots[0] + roots[-1])
    val = float(_state2_pieces(mid, th, params, inc)[0])
    if val == 0.0:
        raise RootSeparationFailure("F vanishes between roots at the probe angle")
    return 1.0 if val > 0.0 else -1.0


def _pair_from_u2(u2, theta_w, params, inc):
    """Uniform state (2) from the reduced unknown u2."""
    t = math.tan(theta_w)
    v2 = u2 * t
    k2 = -inc.xi1_0 * u2 * (1.0 + t * t)
    return make_uniform_state(u2, v2, k2, params)


def state2_residuals(state, theta_w, params, inc=None):
    """Relative residuals of the three reflection-point conditions at P0.

    Returns (slip, potential, mass), each normalized by the magnitude of the
    terms entering it (so the check is meaningful in float64 even near pi/2,
    where the strong-root fluxes grow like sec^2).  The mass condition uses
    the unit normal nu_S1 = D(phi1-phi2)/|D(phi1-phi2)|.
    """
    inc = inc or incident_state(params)
    s1 = state1(params, inc)
    p0 = np.array([inc.xi1_0, inc.xi1_0 * math.tan(theta_w)])
    nu_w = np.array([-math.sin(theta_w), math.cos(theta_w)])
    d2 = state.gradient(p0)
    d1 = s1.gradient(p0)
    slip = float(d2 @ nu_w) / max(1.0, float(np.linalg.norm(d2)))
    phi2_val = float(state.potential(p0))
    phi1_val = float(s1.potential(p0))
    pot = (phi2_val - phi1_val) / max(1.0, abs(phi1_val), abs(phi2_val))
    n = np.array([s1.u - state.u, -state.v])
    nn = np.linalg.norm(n)
    if nn == 0.0:
        return slip, pot, math.nan
    n = n / nn
    # Densities of uniform states are xi-independent; the stored values are
    # the well-conditioned evaluation of the closure (recomputing it at a far
    # P0 would add |P0|^2 * eps cancellation noise, nothing else).
    flux2 = state.rho * float(d2 @ n)
    flux1 = s1.rho * float(d1 @ n)
    mass = (flux2 - flux1) / max(1.0, abs(flux1), abs(flux2))
    return slip, pot, mass


def normal_reflection_state(params):
    """Rest state behind the flat vertical reflected shock at theta_w = pi/2.

    Solves the vertical-shock RH pair between state (1) and a state at rest:
    returns (xi1_bar < 0, UniformState).  The root is bracketed by scanning
    g(x) = -x*rho(x) - rho1*(u1 - x) on x < 0 and refined by bisection; the
    entropy condition rho_bar > rho1 is verified.
    """
    inc = incident_state(params)
    g = params.gamma

    def mass_mismatch(x):
        k2 = inc.u1 * x + inc.k1
        base = params.rho0_pow - (g - 1.0) * k2
        if base <= 0.0:
            return math.inf
        return -x * base ** (1.0 / (g - 1.0)) - params.rho1 * (inc.u1 - x)

    lo = -max(1.0, inc.xi1_0)
    for _ in range(200):
        if mass_mismatch(lo) > 0.0:
            break
        lo *= 2.0
    else:
        raise BracketingFailure("normal reflection: no bracket for the vertical shock")
    xbar = _bisect(mass_mismatch, lo, -1e-300)
    rest = make_uniform_state(0.0, 0.0, inc.u1 * xbar + inc.k1, params)
    if not rest.rho > params.rho1:
        raise BracketingFailure("normal reflection root violates entropy")
    return xbar, rest


def state2_solve(params, theta_w, n_scan=SCAN_POINTS):
    """Both roots of the reflection-point system at wedge angle theta_w.

    The 3x3 system is reduced to a scalar F(u2) = 0 on the entropic window
    (rho2 > rho1, u2 < xi1_0); the two roots, bracketed by a dense scan and
    refined by bisection, are the weak (smaller density) and strong states.

    At theta_w = pi/2 exactly the system degenerates: the weak root is the
    normal-reflection rest state (v2 = 0); the strong branch diverges
    (rho2 -> inf), so the rest state is returned for both with
    mach_p0_weak = inf.

    Raises DetachedWedgeAngle below the detachment angle.
    """
    if not 0.0 < theta_w <= math.pi / 2.0:
        raise DetachedWedgeAngle(f"theta_w={theta_w} outside (0, pi/2]")
    inc = incident_state(params)

    if abs(theta_w - math.pi / 2.0) < 1e-14:
        _, rest = normal_reflection_state(params)
        return State2Pair(
            weak=rest,
            strong=rest,
            p0=(inc.xi1_0, math.inf),
            mach_p0_weak=math.inf,
            theta_w=theta_w,
        )

    roots = _scan_roots(theta_w, params, inc, n=n_scan)
    tangent_pair = False
    if len(roots) == 0:
        # Possibly a tangent double root the scan cannot split: accept it when
        # the interior lobe extremum of F is indistinguishable from zero
        # (angles within ~1e-8 of the detachment angle).
        s_in = _inner_sign(params, inc)
        lobe, u_star = _lobe_extremum(theta_w, params, inc, s_in)
        fscale = abs(float(_state2_pieces(inc.xi1_0 * (1 - 1e-14), theta_w, params, inc)[0]))
        if math.isfinite(lobe) and abs(lobe) <= 1e-8 * max(fscale, 1.0):
            roots = [u_star, u_star]
            tangent_pair = True
        else:
            raise DetachedWedgeAngle(
                f"no reflection states at theta_w={math.degrees(theta_w):.6f} deg"
            )
    if len(roots) == 1:
        raise RootSeparationFailure(
            f"single sign change at theta_w={math.degrees(theta_w):.6f} deg"
        )
    if len(roots) > 2:
        raise RootSeparationFailure(
            f"{len(roots)} entropic roots at theta_w={math.degrees(theta_w):.6f} deg"
        )

    weak = _pair_from_u2(roots[0], theta_w, params, inc)
    strong = _pair_from_u2(roots[1], theta_w, params, inc)
    if strong.rho < weak.rho:
        weak, strong = strong, weak
    p0 = (inc.xi1_0, inc.xi1_0 * math.tan(theta_w))
    speed = (inc.xi1_0 - weak.u) / math.cos(theta_w)
    pair = State2Pair(
        weak=weak,
        strong=strong,
        p0=p0,
        mach_p0_weak=speed / weak.c,
        theta_w=theta_w,
    )
    for st in (weak, strong):
        res = state2_residuals(st, theta_w, params, inc)
        worst = max(abs(r) for r in res)
        # The mass flux scales with (xi1_0 - u2); once that gap nears the ulp
        # of u2 (strong root as theta_w -> pi/2) the achievable residual is
        # limited by cancellation, so widen the check accordingly.  A tangent
        # double root is located only to sqrt precision.
        gap = max(abs(inc.xi1_0 - st.u), 1e-300)
        allowance = 1e-10 + 64.0 * np.finfo(float).eps * inc.xi1_0 / gap
        if tangent_pair:
            allowance = max(allowance, 1e-6)
        if worst > allowance:
            raise RootSeparationFailure(
                f"reflection-point residual {worst:.2e} exceeds {allowance:.2e} at "
                f"theta_w={math.degrees(theta_w):.6f} deg"
            )
    return pair


def detachment_angle(params, angle_tol=ANGLE_TOL):
    """Smallest wedge angle with real reflection states, by bisection.

    The existence indicator is the sign of the extremal value of F over the
    entropic window (oriented so it is positive iff F crosses zero), which
    stays resolvable even when the two roots are closer than the scan spacing.
    """
    inc = incident_state(params)
    lo, hi = 0.01, math.pi / 2.0 - 0.01
    s_in = _inner_sign(params, inc)

    def exists(theta):
        if len(_scan_roots(theta, params, inc)) >= 2:
            return True
        lobe, _ = _lobe_extremum(theta, params, inc, s_in)
        return s_in * lobe > 0.0

    if not exists(hi):
        raise BracketingFailure("no reflection states even near pi/2")
    if exists(lo):
        raise BracketingFailure("reflection states persist at 0.01 rad; no detachment bracket")
    while hi - lo > angle_tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _mach_weak(params, theta_w):
    return state2_solve(params, theta_w).mach_p0_weak


def sonic_angle(params, angle_tol=ANGLE_TOL):
    """Angle where the weak state (2) is exactly sonic at P0, by bisection.

    Near pi/2 state (2) is supersonic at P0 and near the detachment angle it
    is subsonic, so mach - 1 brackets a sign change on (theta_d, pi/2).
    """
    theta_d = detachment_angle(params)
    lo = theta_d + 1e-7
    hi = math.pi / 2.0 - 1e-4
    f_lo = _mach_weak(params, lo) - 1.0
    f_hi = _mach_weak(params, hi) - 1.0
    if f_lo >= 0.0 or f_hi <= 0.0:
        raise BracketingFailure(
            f"mach-1 does not change sign on ({lo}, {hi}): {f_lo:.3e}, {f_hi:.3e}"
        )
    while hi - lo > angle_tol:
        mid = 0.5 * (lo + hi)
        if _mach_weak(params, mid) - 1.0 > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_density(params_gamma, rho0, tol=1e-12):
    """Density rho^c with u1(rho^c) = c1(rho^c): attachment becomes possible above it.

    u1/c1 -> sqrt(2/(gamma-1)) as rho1 -> inf, so for gamma >= 3 the incident
    flow is subsonic relative to c1 for every rho1 and rho^c = +inf is
    returned (the dichotomy u1 <= c1 iff rho1 <= rho^c then holds vacuously).
    """
    g = params_gamma
    if g <= 1.0 or rho0 <= 0.0:
        raise NonpositiveDensity("need gamma > 1 and rho0 > 0")

    def mismatch(r1):
        u1sq = 2.0 * (r1 - rho0) * (r1 ** (g - 1.0) - rho0 ** (g - 1.0)) / ((g - 1.0) * (r1 + rho0))
        return math.sqrt(u1sq) - r1 ** ((g - 1.0) / 2.0)

    if g >= 3.0:
        return math.inf
    hi = 2.0 * rho0
    while mismatch(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e14 * rho0:
            return math.inf
    lo = rho0 * (1.0 + 1e-12)
    if mismatch(lo) >= 0.0:
        raise BracketingFailure("u1 - c1 not negative just above rho0")
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if mismatch(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def attachment_possible(params):
    """True iff u1 > c1 for the given data (shock may attach to the vertex)."""
    return incident_state(params).u1 > params.c1


def angle_diagram(params):
    """Detachment angle, sonic angle, rho^c, and the attachment flag."""
    return AngleDiagram(
        theta_d=detachment_angle(params),
        theta_s=sonic_angle(params),
        rho_c=critical_density(params.gamma, params.rho0),
        attachment_possible=attachment_possible(params),
    )


def classify_regime(params, theta_w, sigma=0.1, sonic_tol=1e-8):
    """Regime of the weak state (2) at P0 from |Dphi2(P0)|/c2 thresholds.

    Supersonic above 1, Sonic within sonic_tol of 1, subsonic-near-sonic on
    (1-sigma, 1), subsonic-away-from-sonic at or below 1-sigma.  sigma is a
    reporting convention (default 0.1), not a claim about the true regularity
    threshold.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0,1), got {sigma}")
    m = state2_solve(params, theta_w).mach_p0_weak
    if abs(m - 1.0) <= sonic_tol:
        return Regime.SONIC
    if m > 1.0:
        return Regime.SUPERSONIC
    if m > 1.0 - sigma:
        return Regime.SUBSONIC_NEAR_SONIC
    return Regime.SUBSONIC_AWAY
