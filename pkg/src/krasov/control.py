"""Dynamic state feedback built from velocity-based storage.

The controller integrates its own state u through

    udot = alpha(x, xdot) u + beta(x, xdot) + vdot

with alpha = -(g'g)^{-1} g' gdot and beta = -g' M xdot.  The outer
stabilizing loop closes vdot through the potential Gamma of M g and the
power-shaping output y = g' M xdot.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import as_vector, g_time_derivative
from .errors import InfeasibleSetpointError, IntegrabilityError, SingularInputError

# alpha refuses to evaluate near rank loss instead of regularizing: a
# regularized alpha would silently break gdot + g alpha = 0, which the
# passivity argument needs.
CONDITION_CAP = 1e12

EQUILIBRIUM_TOL = 1e-9

PATH_SEGMENTS = 1000

PATH_CHECK_TOL = 1e-6


@dataclass(frozen=True)
class ControllerGains:
    """Loop gains: k1 scales the velocity storage, kd damps, ki integrates."""

    k1: float = 1.0
    kd: float = 1.0
    ki: float = 1.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if self.kd < 0:
            raise ValueError(f"kd must be >= 0, got {self.kd}")
        if not self.ki > 0:
            raise ValueError(f"ki must be > 0, got {self.ki}")


@dataclass(frozen=True)
class Setpoint:
    """Admissible operating point: f(x*) + g(x*) u* = 0 within tolerance."""

    x_star: np.ndarray
    u_star: np.ndarray
    gamma_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float))
        object.__setattr__(self, "u_star", np.asarray(self.u_star, dtype=float))
        object.__setattr__(self, "gamma_star", np.asarray(self.gamma_star, dtype=float))


def make_setpoint(model, x_star, tol=EQUILIBRIUM_TOL):
    """Build a validated setpoint for x*: solves for u* and records Gamma(x*)."""
    x_star = as_vector(x_star, model.n, name="x_star")
    u_star = solve_equilibrium_input(model, x_star, tol=tol)
    gamma_star = potential_gamma(model, x_star)
    return Setpoint(x_star=x_star, u_star=u_star, gamma_star=gamma_star)


@dataclass
class ControllerRealization:
    """A controller wired to one model: gains, setpoint, potential and the
    dynamic state u.

    The u state is owned by a single simulation run; use clone() to reuse
    the same wiring in another run.
    """

    model: object
    gains: ControllerGains
    setpoint: Setpoint
    u: np.ndarray
    potential: Callable = field(repr=False, default=None)

    def clone(self):
        return ControllerRealization(
            model=self.model,
            gains=self.gains,
            setpoint=self.setpoint,
            u=self.u.copy(),
            potential=self.potential,
        )


def make_realization(model, gains, setpoint, u0=None):
    """Assemble a controller; u starts at zero unless given (contraction makes
    the final behaviour independent of it)."""
    u = np.zeros(model.m) if u0 is None else as_vector(u0, model.m, name="u0")
    return ControllerRealization(
        model=model,
        gains=gains,
        setpoint=setpoint,
        u=u,
        potential=lambda x: potential_gamma(model, x),
    )


# -- pointwise maps ------------------------------------------------------------


def xdot(model, x, u):
    """Plant velocity f(x) + g(x) u."""
    u = as_vector(u, model.m, name="u")
    return model.f(x) + model.g(x) @ u


def alpha(model, x, xdot_val):
    """-(g'g)^{-1} g' gdot evaluated along the velocity xdot_val.

    Satisfies gdot + g alpha = 0 whenever the annihilator condition holds.
    Raises SingularInputError when cond(g'g) exceeds the cap.
    """
    g = model.g(x)
    gtg = g.T @ g
    cond = float(np.linalg.cond(gtg))
    if not np.isfinite(cond) or cond > CONDITION_CAP:
        raise SingularInputError(
            f"g'g is numerically singular (cond={cond:.3g}) at x={np.asarray(x)}",
            x=np.asarray(x, dtype=float),
            cond=cond,
        )
    gdot = g_time_derivative(model, x, xdot_val)
    return -np.linalg.solve(gtg, g.T @ gdot)


def output_y(model, x, xdot_val):
    """Power-shaping output y = g' M xdot."""
    xdot_val = as_vector(xdot_val, model.n, name="xdot")
    return model.g(x).T @ (model.metric @ xdot_val)


def beta(model, x, xdot_val):
    """Feedthrough term -g' M xdot; identically -y."""
    return -output_y(model, x, xdot_val)


def u_dot(model, x, u, vdot):
    """Controller state equation alpha u + beta + vdot, with xdot = f + g u."""
    u = as_vector(u, model.m, name="u")
    vdot = as_vector(vdot, model.m, name="vdot")
    xd = xdot(model, x, u)
    return alpha(model, x, xd) @ u + beta(model, x, xd) + vdot


# -- potential of M g ----------------------------------------------------------


def potential_via_path(model, x, x_ref, segments=PATH_SEGMENTS):
    """Line integral of (M g)' dx along the straight segment x_ref -> x.

    Composite trapezoid rule; error O(segments^-2).  Anchored so the value
    at x_ref is zero.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    x = as_vector(x, model.n)
    x_ref = as_vector(x_ref, model.n, name="x_ref")
    delta = x - x_ref
    metric = model.metric
    total = np.zeros(model.m)
    prev = (metric @ model.g(x_ref)).T @ delta
    for k in range(1, segments + 1):
        pt = x_ref + (k / segments) * delta
        cur = (metric @ model.g(pt)).T @ delta
        total += 0.5 * (prev + cur) / segments
        prev = cur
    return total


def potential_via_polyline(model, points, segments=PATH_SEGMENTS):
    """Line integral of (M g)' dx along a piecewise-linear path through points."""
    pts = [as_vector(p, model.n, name="path point") for p in points]
    if len(pts) < 2:
        raise ValueError("a polyline needs at least two points")
    per_leg = max(segments // (len(pts) - 1), 8)
    total = np.zeros(model.m)
    for a, b in zip(pts[:-1], pts[1:]):
        total += potential_via_path(model, b, a, segments=per_leg)
    return total


def _staircase(x_ref, x):
    """Axis-by-axis corner path from x_ref to x."""
    pts = [np.asarray(x_ref, dtype=float)]
    cur = pts[0].copy()
    for k in range(len(cur)):
        cur = cur.copy()
        cur[k] = x[k]
        pts.append(cur)
    return pts


def potential_gamma(model, x, x_ref=None, segments=PATH_SEGMENTS, check_tol=PATH_CHECK_TOL):
    """Gamma(x) with grad Gamma_j = column j of M g.

    Uses the model's registered closed form when present.  Otherwise
    integrates along a straight segment from the domain center (or x_ref)
    and cross-checks against an axis-aligned staircase path; disagreement
    beyond check_tol means M g is not integrable.
    """
    x = as_vector(x, model.n)
    if model.potential is not None:
        return np.asarray(model.potential(x), dtype=float).reshape(model.m)
    x_ref = model.state_domain.center if x_ref is None else as_vector(x_ref, model.n, name="x_ref")
    straight = potential_via_path(model, x, x_ref, segments=segments)
    stair = potential_via_polyline(model, _staircase(x_ref, x), segments=segments)
    scale = max(1.0, float(np.abs(straight).max()))
    gap = float(np.abs(straight - stair).max())
    if gap > check_tol * scale:
        raise IntegrabilityError(
            f"path-dependent line integral of M g (straight vs staircase gap {gap:.3g}); "
            "the integrability condition does not hold"
        )
    return straight


# -- equilibrium and the outer loop --------------------------------------------


def solve_equilibrium_input(model, x_star, tol=EQUILIBRIUM_TOL):
    """Least-squares u* for f(x*) + g(x*) u = 0; rejects x* unless the
    residual proves it admissible."""
    x_star = as_vector(x_star, model.n, name="x_star")
    f_star = model.f(x_star)
    g_star = model.g(x_star)
    u_star, *_ = np.linalg.lstsq(g_star, -f_star, rcond=None)
    residual = float(np.linalg.norm(f_star + g_star @ u_star))
    if not residual < tol:
        raise InfeasibleSetpointError(
            f"no input drives x*={x_star} to equilibrium (residual {residual:.3g})",
            residual=residual,
        )
    return u_star


def stabilizing_vdot(realization, x, xdot_val, vbar_dot=None):
    """Outer loop (vbar_dot - kd y - ki (Gamma(x) - Gamma(x*))) / k1.

    With vbar_dot = 0 this is the stabilizer that makes the shaped storage
    decrease at rate kd |y|^2.
    """
    gains = realization.gains
    model = realization.model
    y = output_y(model, x, xdot_val)
    if vbar_dot is None:
        vbar_dot = np.zeros(model.m)
    else:
        vbar_dot = as_vector(vbar_dot, model.m, name="vbar_dot")
    gamma_err = realization.potential(x) - realization.setpoint.gamma_star
    return (vbar_dot - gains.kd * y - gains.ki * gamma_err) / gains.k1
