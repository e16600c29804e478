"""Fixed-step closed-loop and variational integration with passivity bookkeeping.

Classical RK4 on the augmented state (x, u); the velocity fed to the
controller terms is always the algebraic f + g u, never a differenced
trajectory.  Every run logs the velocity storage V = 1/2 xdot' M xdot and
the shaped storage V_d, plus finite-differenced residuals of the two
dissipation inequalities the controller is supposed to enforce.
"""

import io
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .assumptions import CheckConfig, check_all
from .control import (
    ControllerGains,
    Setpoint,
    make_realization,
    output_y,
    stabilizing_vdot,
)
from .core import as_vector
from .errors import (
    AssumptionError,
    EvaluationError,
    InfeasibleSetpointError,
    IntegrationBlowupError,
    SimulationAborted,
    SingularInputError,
)

CSV_FLOAT_FMT = "%.17g"

# Discretization slack for the audit inequalities: they hold exactly in
# continuous time, so the tolerance scales with the square of the logging
# interval (second-order differencing + RK4 trajectory error far below it).
DEFAULT_AUDIT_COEFF = 50.0

CONVERGENCE_BAND = 0.01

# Fraction of the horizon over which the band must hold for "converged".
CONVERGENCE_WINDOW = 0.05


def step_rk4(deriv, t, z, dt):
    """One classical 4-stage Runge-Kutta step; local error O(dt^5).

    Raises IntegrationBlowupError if any stage goes non-finite.
    """
    k1 = np.asarray(deriv(t, z), dtype=float)
    k2 = np.asarray(deriv(t + 0.5 * dt, z + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(deriv(t + 0.5 * dt, z + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(deriv(t + dt, z + dt * k3), dtype=float)
    z_next = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(z_next)):
        raise IntegrationBlowupError(f"integration blew up at t={t:g}", t=t)
    return z_next


@dataclass(frozen=True)
class SimulationConfig:
    """Run description for the closed loop.

    t_end must be an integer number of dt steps and the step count an
    integer number of log strides, so the logged grid is exactly uniform.
    """

    t_end: float
    x0: np.ndarray
    gains: ControllerGains
    setpoint: Setpoint
    dt: float = 1e-3
    u0: Optional[np.ndarray] = None
    vbar_dot: Optional[Callable] = None
    log_stride: int = 1
    band: float = CONVERGENCE_BAND
    waive_assumption_check: bool = False
    assumption_samples: int = 100
    assumption_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least one step")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")
        steps = int(round(self.t_end / self.dt))
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, abs(self.t_end)):
            raise ValueError("t_end must be an integer multiple of dt")
        if steps % self.log_stride != 0:
            raise ValueError("the number of steps must be divisible by log_stride")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.u0 is not None:
            object.__setattr__(self, "u0", np.asarray(self.u0, dtype=float))

    @property
    def steps(self):
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class TraceRecord:
    t: float
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    y: np.ndarray
    vdot: np.ndarray
    V: float
    Vd: float
    storage_residual: float
    vd_residual: float


@dataclass(frozen=True)
class TraceSummary:
    final_error: float
    converged: Optional[bool]
    t_converge: Optional[float]
    max_storage_residual: float
    max_vd_residual: Optional[float]
    vbar_zero: bool
    mode: str = "closed-loop"

    def to_dict(self):
        return {
            "mode": self.mode,
            "converged": self.converged,
            "t_converge": self.t_converge,
            "final_error": self.final_error,
            "max_storage_residual": self.max_storage_residual,
            "max_vd_residual": self.max_vd_residual,
            "vbar_zero": self.vbar_zero,
        }


class SimulationTrace:
    """Uniformly spaced trace records plus run-level summary."""

    def __init__(self, records: List[TraceRecord], summary: TraceSummary):
        self.records = records
        self.summary = summary

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def spacing(self):
        if len(self.records) < 2:
            return None
        return self.records[1].t - self.records[0].t

    def to_csv(self):
        """CSV text: t,x1..xn,u1..um,y1..ym,vdot1..vdotm,V,Vd,storage_residual,vd_residual."""
        if not self.records:
            return ""
        n = len(self.records[0].x)
        m = len(self.records[0].u)
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u{j + 1}" for j in range(m)]
            + [f"y{j + 1}" for j in range(m)]
            + [f"vdot{j + 1}" for j in range(m)]
            + ["V", "Vd", "storage_residual", "vd_residual"]
        )
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for r in self.records:
            row = (
                [r.t]
                + list(r.x)
                + list(r.u)
                + list(r.y)
                + list(r.vdot)
                + [r.V, r.Vd, r.storage_residual, r.vd_residual]
            )
            buf.write(",".join(CSV_FLOAT_FMT % v for v in row) + "\n")
        return buf.getvalue()


def _fd_derivative(values, spacing):
    """Second-order finite-difference d/dt of a sampled signal (one-sided at
    the ends); zeros when fewer than three samples."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 3:
        return np.zeros_like(values)
    return np.gradient(values, spacing, edge_order=2)


def _zero_input(m):
    zero = np.zeros(m)

    def fn(t):
        return zero

    return fn


def _closed_loop_parts(realization, t, x, u, vbar_dot):
    """One evaluation of the loop: returns (xdot, udot, y, vdot)."""
    model = realization.model
    f = model.f(x)
    g = model.g(x)
    xd = f + g @ u
    y = g.T @ (model.metric @ xd)
    vdot = stabilizing_vdot(realization, x, xd, vbar_dot(t))
    gdot = model.dg(x, xd)
    gtg = g.T @ g
    cond = float(np.linalg.cond(gtg))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInputError(
            f"g'g is numerically singular (cond={cond:.3g}) at x={x}", x=x, cond=cond
        )
    alpha_mat = -np.linalg.solve(gtg, g.T @ gdot)
    udot = alpha_mat @ u + (-y) + vdot
    return xd, udot, y, vdot


def _verify_or_reject(model, config):
    residual = float(
        np.linalg.norm(model.f(config.setpoint.x_star) + model.g(config.setpoint.x_star) @ config.setpoint.u_star)
    )
    if not residual < 1e-9:
        raise InfeasibleSetpointError(
            f"setpoint is not an equilibrium (residual {residual:.3g})", residual=residual
        )
    if not config.waive_assumption_check:
        report = check_all(
            model,
            CheckConfig(samples=config.assumption_samples, seed=config.assumption_seed),
        )
        if report.any_error or not report.all_pass:
            failed = [
                name
                for name, sub in (("a1", report.a1), ("a2", report.a2), ("a3", report.a3))
                if sub.error is not None or not sub.passed
            ]
            raise AssumptionError(
                f"assumption check failed for {', '.join(failed)}; "
                "verify the model or waive the check in the config"
            )


def _convergence(ts, errors, t_end, band, window):
    converged = bool(np.all(errors[ts >= (1.0 - window) * t_end] < band))
    t_converge = None
    if converged:
        above = np.flatnonzero(errors >= band)
        t_converge = float(ts[0]) if above.size == 0 else float(ts[int(above[-1]) + 1])
    return converged, t_converge


def simulate_closed_loop(model, config):
    """Integrate plant + controller from (x0, u0) and log the passivity data.

    The setpoint is validated up front; a singularity or blow-up mid-run
    raises SimulationAborted carrying the partial trace.
    """
    x0 = as_vector(config.x0, model.n, name="x0")
    u0 = np.zeros(model.m) if config.u0 is None else as_vector(config.u0, model.m, name="u0")
    _verify_or_reject(model, config)
    realization = make_realization(model, config.gains, config.setpoint, u0)
    vbar = config.vbar_dot if config.vbar_dot is not None else _zero_input(model.m)
    n, m = model.n, model.m

    def rhs(t, z):
        xd, ud, _, _ = _closed_loop_parts(realization, t, z[:n], z[n:], vbar)
        return np.concatenate([xd, ud])

    ts, zs = [], []
    z = np.concatenate([x0, u0])
    error = None
    ts.append(0.0)
    zs.append(z)
    try:
        for k in range(1, config.steps + 1):
            z = step_rk4(rhs, (k - 1) * config.dt, z, config.dt)
            if k % config.log_stride == 0:
                ts.append(k * config.dt)
                zs.append(z)
    except (SingularInputError, EvaluationError) as exc:
        error = ("singular_input", exc)
    except IntegrationBlowupError as exc:
        error = ("blowup", exc)

    trace = _build_trace(realization, config, np.array(ts), zs, vbar)
    if error is not None:
        reason, exc = error
        raise SimulationAborted(
            f"run aborted at t={ts[-1]:g}: {exc}", reason=reason, t=ts[-1], trace=trace, cause=exc
        )
    return trace


def _build_trace(realization, config, ts, zs, vbar):
    model = realization.model
    gains = realization.gains
    n, m = model.n, model.m
    count = len(zs)
    xs = np.array([z[:n] for z in zs])
    us = np.array([z[n:] for z in zs])
    xds = np.empty((count, n))
    ys = np.empty((count, m))
    vds = np.empty((count, m))
    V = np.empty(count)
    Vd = np.empty(count)
    gamma_star = realization.setpoint.gamma_star
    for i in range(count):
        xd, _, y, vdot = _closed_loop_parts(realization, ts[i], xs[i], us[i], vbar)
        xds[i] = xd
        ys[i] = y
        vds[i] = vdot
        V[i] = 0.5 * xd @ (model.metric @ xd)
        gerr = realization.potential(xs[i]) - gamma_star
        Vd[i] = gains.k1 * V[i] + 0.5 * gains.ki * float(gerr @ gerr)
    spacing = ts[1] - ts[0] if count > 1 else config.dt * config.log_stride
    storage_resid = _fd_derivative(V, spacing) - np.einsum("ij,ij->i", ys, vds)
    vd_resid = _fd_derivative(Vd, spacing) + gains.kd * np.einsum("ij,ij->i", ys, ys)

    errors = np.abs(xs - realization.setpoint.x_star).max(axis=1)
    vbar_zero = config.vbar_dot is None
    converged, t_converge = _convergence(ts, errors, config.t_end, config.band, CONVERGENCE_WINDOW)
    summary = TraceSummary(
        final_error=float(errors[-1]),
        converged=converged,
        t_converge=t_converge,
        max_storage_residual=float(storage_resid.max()) if count else 0.0,
        max_vd_residual=float(vd_resid.max()) if vbar_zero and count else None,
        vbar_zero=vbar_zero,
    )
    records = [
        TraceRecord(
            t=float(ts[i]),
            x=xs[i],
            u=us[i],
            xdot=xds[i],
            y=ys[i],
            vdot=vds[i],
            V=float(V[i]),
            Vd=float(Vd[i]),
            storage_residual=float(storage_resid[i]),
            vd_residual=float(vd_resid[i]),
        )
        for i in range(count)
    ]
    return SimulationTrace(records, summary)


# -- audits ---------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    """Worst finite-difference violations of the two dissipation inequalities."""

    eps_num: float
    max_storage_residual: float
    storage_worst_t: float
    storage_ok: bool
    max_vd_residual: Optional[float]
    vd_worst_t: Optional[float]
    vd_ok: Optional[bool]

    @property
    def clean(self):
        return self.storage_ok and (self.vd_ok is not False)

    def to_dict(self):
        return {
            "eps_num": self.eps_num,
            "max_storage_residual": self.max_storage_residual,
            "storage_worst_t": self.storage_worst_t,
            "storage_ok": self.storage_ok,
            "max_vd_residual": self.max_vd_residual,
            "vd_worst_t": self.vd_worst_t,
            "vd_ok": self.vd_ok,
            "clean": self.clean,
        }


def audit_epsilon(spacing, coeff=DEFAULT_AUDIT_COEFF):
    """Discretization slack C * (logging interval)^2 for the audit inequalities."""
    return coeff * spacing * spacing


def passivity_audit(trace, gains, eps_num=None, coeff=DEFAULT_AUDIT_COEFF):
    """Check Vdot <= y'vdot + eps and (with vbar = 0) Vd_dot <= -kd y'y + eps.

    Report-only: recomputes the finite-difference residuals from the logged
    columns and flags the worst violations against the slack.
    """
    if len(trace) < 3:
        raise ValueError("audit needs at least 3 records")
    ts = trace.column("t")
    spacing = float(ts[1] - ts[0])
    if eps_num is None:
        eps_num = audit_epsilon(spacing, coeff)
    ys = trace.column("y")
    vdots = trace.column("vdot")
    storage_resid = _fd_derivative(trace.column("V"), spacing) - np.einsum("ij,ij->i", ys, vdots)
    i_s = int(np.argmax(storage_resid))
    vd_resid = None
    if trace.summary.vbar_zero:
        vd_resid = _fd_derivative(trace.column("Vd"), spacing) + gains.kd * np.einsum(
            "ij,ij->i", ys, ys
        )
        i_v = int(np.argmax(vd_resid))
    return AuditReport(
        eps_num=float(eps_num),
        max_storage_residual=float(storage_resid[i_s]),
        storage_worst_t=float(ts[i_s]),
        storage_ok=bool(storage_resid[i_s] <= eps_num),
        max_vd_residual=None if vd_resid is None else float(vd_resid[i_v]),
        vd_worst_t=None if vd_resid is None else float(ts[i_v]),
        vd_ok=None if vd_resid is None else bool(vd_resid[i_v] <= eps_num),
    )


# -- prolonged (variational) system ----------------------------------------------


@dataclass(frozen=True)
class VariationalState:
    """State triple of the prolonged system: base x, variation dx, input state u."""

    x: np.ndarray
    delta_x: np.ndarray
    u: np.ndarray

    def pack(self):
        return np.concatenate([self.x, self.u, self.delta_x])

    @classmethod
    def unpack(cls, z, n, m):
        return cls(x=z[:n], u=z[n : n + m], delta_x=z[n + m :])


@dataclass(frozen=True)
class VariationalRecord:
    t: float
    x: np.ndarray
    u: np.ndarray
    delta_x: np.ndarray
    delta_u: np.ndarray
    delta_y: np.ndarray
    delta_storage: float
    residual: float


class VariationalTrace:
    def __init__(self, records, summary):
        self.records = records
        self.summary = summary

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self):
        if not self.records:
            return ""
        n = len(self.records[0].x)
        m = len(self.records[0].u)
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u{j + 1}" for j in range(m)]
            + [f"dx{i + 1}" for i in range(n)]
            + [f"du{j + 1}" for j in range(m)]
            + [f"dy{j + 1}" for j in range(m)]
            + ["dstorage", "residual"]
        )
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for r in self.records:
            row = (
                [r.t]
                + list(r.x)
                + list(r.u)
                + list(r.delta_x)
                + list(r.delta_u)
                + list(r.delta_y)
                + [r.delta_storage, r.residual]
            )
            buf.write(",".join(CSV_FLOAT_FMT % v for v in row) + "\n")
        return buf.getvalue()


def _variational_parts(realization, x, u, dx, dv):
    """delta_u (algebraic) and the variational velocity delta_xdot."""
    model = realization.model
    g = model.g(x)
    dg_dx = model.dg(x, dx)
    gtg = g.T @ g
    cond = float(np.linalg.cond(gtg))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInputError(
            f"g'g is numerically singular (cond={cond:.3g}) at x={x}", x=x, cond=cond
        )
    alpha_d = -np.linalg.solve(gtg, g.T @ dg_dx)
    beta_d = -(g.T @ (model.metric @ dx))
    du = alpha_d @ u + beta_d + dv
    dxdot = model.jac_f(x) @ dx + dg_dx @ u + g @ du
    dy = g.T @ (model.metric @ dx)
    return du, dxdot, dy


def simulate_prolonged(model, config, delta_x0, delta_v=None):
    """Co-integrate the closed loop and its variational system.

    The variation in the input is applied algebraically (no extra
    integrator state): delta_u = alpha_d u + beta_d + delta_v with the
    variational alpha_d, beta_d built from the direction delta_x.  Logs the
    variational output delta_y = g' M delta_x and the variational storage
    1/2 delta_x' M delta_x with its dissipation residual.
    """
    x0 = as_vector(config.x0, model.n, name="x0")
    u0 = np.zeros(model.m) if config.u0 is None else as_vector(config.u0, model.m, name="u0")
    dx0 = as_vector(delta_x0, model.n, name="delta_x0")
    _verify_or_reject(model, config)
    realization = make_realization(model, config.gains, config.setpoint, u0)
    vbar = config.vbar_dot if config.vbar_dot is not None else _zero_input(model.m)
    dv_fn = delta_v if delta_v is not None else _zero_input(model.m)
    n, m = model.n, model.m

    def rhs(t, z):
        st = VariationalState.unpack(z, n, m)
        xd, ud, _, _ = _closed_loop_parts(realization, t, st.x, st.u, vbar)
        _, dxdot, _ = _variational_parts(realization, st.x, st.u, st.delta_x, dv_fn(t))
        return np.concatenate([xd, ud, dxdot])

    ts, zs = [0.0], [VariationalState(x0, dx0, u0).pack()]
    z = zs[0]
    error = None
    try:
        for k in range(1, config.steps + 1):
            z = step_rk4(rhs, (k - 1) * config.dt, z, config.dt)
            if k % config.log_stride == 0:
                ts.append(k * config.dt)
                zs.append(z)
    except (SingularInputError, EvaluationError) as exc:
        error = ("singular_input", exc)
    except IntegrationBlowupError as exc:
        error = ("blowup", exc)

    trace = _build_variational_trace(realization, config, np.array(ts), zs, dv_fn)
    if error is not None:
        reason, exc = error
        raise SimulationAborted(
            f"run aborted at t={ts[-1]:g}: {exc}", reason=reason, t=ts[-1], trace=trace, cause=exc
        )
    return trace


def _build_variational_trace(realization, config, ts, zs, dv_fn):
    model = realization.model
    n, m = model.n, model.m
    count = len(zs)
    states = [VariationalState.unpack(z, n, m) for z in zs]
    dus = np.empty((count, m))
    dys = np.empty((count, m))
    dvs = np.empty((count, m))
    W = np.empty(count)
    for i, st in enumerate(states):
        dv = np.asarray(dv_fn(ts[i]), dtype=float)
        du, _, dy = _variational_parts(realization, st.x, st.u, st.delta_x, dv)
        dus[i] = du
        dys[i] = dy
        dvs[i] = dv
        W[i] = 0.5 * st.delta_x @ (model.metric @ st.delta_x)
    spacing = ts[1] - ts[0] if count > 1 else config.dt * config.log_stride
    resid = _fd_derivative(W, spacing) - np.einsum("ij,ij->i", dys, dvs)

    dv_zero = bool(np.all(dvs == 0.0))
    slack = 1e-12 * max(1.0, float(W.max()) if count else 1.0)
    monotone = bool(np.all(np.diff(W) <= slack)) if count > 1 else True
    summary = {
        "mode": "variational",
        "max_residual": float(resid.max()) if count else 0.0,
        "worst_t": float(ts[int(np.argmax(resid))]) if count else 0.0,
        "delta_v_zero": dv_zero,
        "storage_monotone": monotone if dv_zero else None,
        "initial_delta_storage": float(W[0]) if count else 0.0,
        "final_delta_storage": float(W[-1]) if count else 0.0,
        "final_delta_norm": float(np.abs(states[-1].delta_x).max()) if count else 0.0,
    }
    records = [
        VariationalRecord(
            t=float(ts[i]),
            x=states[i].x,
            u=states[i].u,
            delta_x=states[i].delta_x,
            delta_u=dus[i],
            delta_y=dys[i],
            delta_storage=float(W[i]),
            residual=float(resid[i]),
        )
        for i in range(count)
    ]
    return VariationalTrace(records, summary)
