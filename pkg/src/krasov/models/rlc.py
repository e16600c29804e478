"""Brayton-Moser RLC circuits and their velocity-storage passivity monitor.

The circuit state is x = (i, v): inductor currents and capacitor
voltages.  Dynamics derive from the mixed potential

    P(i, v) = i' Gamma v + G(i) - J(v)

as  -L di/dt = dP/di - B_s V_s,   C dv/dt = dP/dv,

with controlled sources V_s in series with the inductors.  Written
control-affinely, f carries the potential gradients, g = [L^{-1} B_s; 0]
is constant, and the natural metric is diag(L, C).  The monitored storage
S = 1/2 xdot' diag(L, C) xdot then dissipates up to the port power
(B_s' di/dt)' dV_s/dt.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import Box, ControlAffineModel, check_metric
from ..simulate import (
    CONVERGENCE_WINDOW,
    SimulationTrace,
    TraceRecord,
    TraceSummary,
    _convergence,
    _fd_derivative,
    step_rk4,
)


@dataclass(frozen=True)
class RlcParams:
    """Matrices and potentials of one circuit.

    g_pot/j_pot are the current and voltage potentials with gradients and
    Hessians supplied alongside; both Hessians must stay positive
    semidefinite on the domain for the dissipation inequality to hold.
    """

    l: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    b_s: np.ndarray
    g_pot: Callable
    g_grad: Callable
    g_hess: Callable
    j_pot: Callable
    j_grad: Callable
    j_hess: Callable
    domain_lo: float = -3.0
    domain_hi: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "l", check_metric(self.l))
        object.__setattr__(self, "c", check_metric(self.c))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "b_s", np.asarray(self.b_s, dtype=float))
        n_l, n_c = self.l.shape[0], self.c.shape[0]
        if self.gamma.shape != (n_l, n_c):
            raise ValueError(f"gamma must be {n_l}x{n_c}, got {self.gamma.shape}")
        if self.b_s.ndim != 2 or self.b_s.shape[0] != n_l:
            raise ValueError(f"b_s must have {n_l} rows, got shape {self.b_s.shape}")
        if self.b_s.shape[1] >= n_l + n_c:
            raise ValueError("number of sources must be below the state dimension")

    @property
    def n_l(self):
        return self.l.shape[0]

    @property
    def n_c(self):
        return self.c.shape[0]

    @property
    def m(self):
        return self.b_s.shape[1]


def _quadratic_potentials(r_mesh, g_load):
    """Linear-resistor potentials G(i) = 1/2 i'Ri and J(v) = 1/2 v'Gv."""
    r_mesh = np.asarray(r_mesh, dtype=float)
    g_load = np.asarray(g_load, dtype=float)
    return dict(
        g_pot=lambda i: 0.5 * float(i @ (r_mesh @ i)),
        g_grad=lambda i: r_mesh @ i,
        g_hess=lambda i: r_mesh,
        j_pot=lambda v: 0.5 * float(v @ (g_load @ v)),
        j_grad=lambda v: g_load @ v,
        j_hess=lambda v: g_load,
    )


@dataclass(frozen=True)
class RlcSystem:
    """A circuit plus its control-affine wrapping."""

    params: RlcParams
    model: ControlAffineModel

    def mixed_potential(self, i, v):
        i = np.asarray(i, dtype=float)
        v = np.asarray(v, dtype=float)
        p = self.params
        return float(i @ (p.gamma @ v)) + p.g_pot(i) - p.j_pot(v)

    def storage(self, xdot):
        """Velocity storage 1/2 xdot' diag(L, C) xdot."""
        xdot = np.asarray(xdot, dtype=float)
        return 0.5 * float(xdot @ (self.model.metric @ xdot))


def rlc_model(params):
    """Wrap a circuit as a control-affine model with metric diag(L, C).

    The source matrix is constant, so the potential of M g is the linear
    map B_s' i and the annihilator conditions hold with zero residual.
    """
    p = params
    n_l, n_c, m = p.n_l, p.n_c, p.m
    n = n_l + n_c
    l_inv = np.linalg.inv(p.l)
    c_inv = np.linalg.inv(p.c)
    g_const = np.vstack([l_inv @ p.b_s, np.zeros((n_c, m))])
    dg_zero = np.zeros((n, m))

    def drift(x):
        i, v = x[:n_l], x[n_l:]
        didt = -l_inv @ (p.gamma @ v + p.g_grad(i))
        dvdt = c_inv @ (p.gamma.T @ i - p.j_grad(v))
        return np.concatenate([didt, dvdt])

    def drift_jacobian(x):
        i, v = x[:n_l], x[n_l:]
        top = np.hstack([-l_inv @ p.g_hess(i), -l_inv @ p.gamma])
        bottom = np.hstack([c_inv @ p.gamma.T, -c_inv @ p.j_hess(v)])
        return np.vstack([top, bottom])

    def potential(x):
        return p.b_s.T @ x[:n_l]

    metric = np.zeros((n, n))
    metric[:n_l, :n_l] = p.l
    metric[n_l:, n_l:] = p.c

    model = ControlAffineModel(
        n=n,
        m=m,
        drift=drift,
        input_matrix=lambda x: g_const,
        metric=metric,
        state_domain=Box(np.full(n, p.domain_lo), np.full(n, p.domain_hi)),
        drift_jacobian=drift_jacobian,
        input_matrix_jacobian=lambda x, w: dg_zero,
        potential=potential,
        name="rlc",
    )
    return RlcSystem(params=p, model=model)


def series_rlc(l=1.0, c=1.0, r=1.0):
    """Single mesh: source, inductor and resistor in series with a capacitor.

    With a constant source the equilibrium is i = 0, v = V_s.
    """
    params = RlcParams(
        l=np.array([[l]]),
        c=np.array([[c]]),
        gamma=np.array([[1.0]]),
        b_s=np.array([[1.0]]),
        **_quadratic_potentials(np.array([[r]]), np.array([[0.0]])),
    )
    return rlc_model(params)


def two_mesh_rlc():
    """Two coupled meshes with one source, mesh resistances and capacitor
    load conductances; the load makes the drift strictly contracting."""
    params = RlcParams(
        l=np.diag([1.0, 0.5]),
        c=np.diag([1.0, 2.0]),
        gamma=np.array([[1.0, 0.0], [-1.0, 1.0]]),
        b_s=np.array([[1.0], [0.0]]),
        **_quadratic_potentials(np.diag([1.0, 0.5]), np.diag([0.2, 0.3])),
    )
    return rlc_model(params)


def simulate_driven(system, x0, vs, vs_dot, t_end, dt=1e-3, log_stride=1, band=0.01):
    """Integrate the circuit under a prescribed source and monitor its storage.

    vs and vs_dot are callables t -> R^m giving the source vector and its
    time derivative.  The trace reuses the closed-loop record layout: u is
    the applied source, y = B_s' di/dt the port output, vdot = dV_s/dt the
    port input, and V = Vd = S the velocity storage; the storage residual
    is the finite-differenced violation of Sdot <= y' vdot.

    A convergence verdict is only meaningful for a constant source
    (vs_dot must then return zeros); for time-varying sources the summary
    reports converged = None.
    """
    model = system.model
    p = system.params
    n, m = model.n, model.m
    x0 = np.asarray(x0, dtype=float).reshape(n)
    steps = int(round(t_end / dt))
    if abs(steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end must be an integer multiple of dt")
    if steps % log_stride != 0:
        raise ValueError("the number of steps must be divisible by log_stride")

    def rhs(t, z):
        return model.f(z) + model.g(z) @ np.asarray(vs(t), dtype=float)

    ts, xs = [0.0], [x0]
    z = x0
    for k in range(1, steps + 1):
        z = step_rk4(rhs, (k - 1) * dt, z, dt)
        if k % log_stride == 0:
            ts.append(k * dt)
            xs.append(z)
    ts = np.array(ts)

    count = len(xs)
    xds = np.empty((count, n))
    us = np.empty((count, m))
    vdots = np.empty((count, m))
    ys = np.empty((count, m))
    S = np.empty(count)
    for idx, (t, x) in enumerate(zip(ts, xs)):
        u = np.asarray(vs(t), dtype=float).reshape(m)
        xd = model.f(x) + model.g(x) @ u
        xds[idx] = xd
        us[idx] = u
        vdots[idx] = np.asarray(vs_dot(t), dtype=float).reshape(m)
        ys[idx] = p.b_s.T @ xd[: p.n_l]
        S[idx] = system.storage(xd)
    spacing = ts[1] - ts[0] if count > 1 else dt * log_stride
    resid = _fd_derivative(S, spacing) - np.einsum("ij,ij->i", ys, vdots)

    source_constant = bool(np.all(vdots == 0.0))
    rates = np.abs(xds).max(axis=1)
    if source_constant:
        converged, t_converge = _convergence(ts, rates, t_end, band, CONVERGENCE_WINDOW)
    else:
        converged, t_converge = None, None
    summary = TraceSummary(
        final_error=float(rates[-1]),
        converged=converged,
        t_converge=t_converge,
        max_storage_residual=float(resid.max()),
        max_vd_residual=None,
        vbar_zero=False,
        mode="driven",
    )
    records = [
        TraceRecord(
            t=float(ts[idx]),
            x=xs[idx],
            u=us[idx],
            xdot=xds[idx],
            y=ys[idx],
            vdot=vdots[idx],
            V=float(S[idx]),
            Vd=float(S[idx]),
            storage_residual=float(resid[idx]),
            vd_residual=0.0,
        )
        for idx in range(count)
    ]
    return SimulationTrace(records, summary)
