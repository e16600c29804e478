"""Core model interface: control-affine dynamics with a constant contraction metric.

A model bundles the vector field f, the state-dependent input matrix g,
a symmetric positive definite metric M and the box on which sampled
verification runs.  Jacobians may be supplied analytically; otherwise
central finite differences are used.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError

# Central-difference step on normalized coordinates: balances truncation
# against round-off for double precision.
DEFAULT_FD_STEP = 1e-5

METRIC_SYMMETRY_RTOL = 1e-12


def as_vector(x, n=None, name="x"):
    """Coerce to a 1-d float array, checking length and finiteness."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise EvaluationError(f"{name}[{bad}] is not finite", x=v, index=bad)
    return v


def check_metric(m, rtol=METRIC_SYMMETRY_RTOL):
    """Validate a constant metric: symmetric within ``rtol`` relative, min eigenvalue > 0.

    Returns the validated matrix as a float array.
    """
    mat = np.asarray(m, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"metric must be square, got shape {mat.shape}")
    scale = max(np.abs(mat).max(), 1.0)
    if np.abs(mat - mat.T).max() > rtol * scale:
        raise ValueError("metric is not symmetric")
    eigmin = float(np.linalg.eigvalsh(mat).min())
    if eigmin <= 0.0:
        raise ValueError(f"metric is not positive definite (min eigenvalue {eigmin:g})")
    return mat


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in state space, used for sampled assumption checks."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d vectors of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have hi > lo in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo + margin) and np.all(x <= self.hi - margin))

    def sample(self, rng, count):
        """Uniform samples, shape (count, dim)."""
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))


@dataclass(frozen=True)
class ControlAffineModel:
    """Description of xdot = f(x) + g(x) u with metric M.

    Parameters
    ----------
    n, m : int
        State and input dimensions, m < n.
    drift : callable
        x -> f(x), shape (n,).
    input_matrix : callable
        x -> g(x), shape (n, m).  Must have full column rank on the domain.
    metric : array
        Constant symmetric positive definite M, shape (n, n).
    state_domain : Box
        Box over which assumptions are sampled.
    drift_jacobian : callable, optional
        x -> df/dx, shape (n, n).  Finite differences if omitted.
    input_matrix_jacobian : callable, optional
        (x, w) -> (dg/dx . w), shape (n, m): the directional derivative of g
        along w.  Finite differences if omitted.
    potential : callable, optional
        Closed-form x -> Gamma(x), shape (m,), with grad Gamma_j = (M g) e_j.

    All callables must be pure; instances are immutable and safe to share
    across threads.
    """

    n: int
    m: int
    drift: Callable
    input_matrix: Callable
    metric: np.ndarray
    state_domain: Box
    drift_jacobian: Optional[Callable] = None
    input_matrix_jacobian: Optional[Callable] = None
    potential: Optional[Callable] = None
    name: str = "model"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension must be >= 1")
        if not 0 < self.m < self.n:
            raise ValueError(f"input dimension must satisfy 0 < m < n, got m={self.m}, n={self.n}")
        object.__setattr__(self, "metric", check_metric(self.metric))
        if self.metric.shape != (self.n, self.n):
            raise ValueError("metric shape does not match state dimension")
        if self.state_domain.dim != self.n:
            raise ValueError("state_domain dimension does not match state dimension")

    # -- validated evaluation -------------------------------------------------

    def f(self, x):
        val = np.asarray(self.drift(x), dtype=float).reshape(self.n)
        _require_finite(val, x, "f(x)")
        return val

    def g(self, x):
        val = np.asarray(self.input_matrix(x), dtype=float).reshape(self.n, self.m)
        _require_finite(val, x, "g(x)")
        return val

    def jac_f(self, x, h=DEFAULT_FD_STEP):
        """df/dx: analytic when provided, central differences otherwise."""
        if self.drift_jacobian is not None:
            val = np.asarray(self.drift_jacobian(x), dtype=float).reshape(self.n, self.n)
            _require_finite(val, x, "df/dx")
            return val
        return numeric_drift_jacobian(self, x, h)

    def dg(self, x, w, h=DEFAULT_FD_STEP):
        """(dg/dx . w): analytic when provided, central differences otherwise."""
        if self.input_matrix_jacobian is not None:
            val = np.asarray(self.input_matrix_jacobian(x, w), dtype=float).reshape(self.n, self.m)
            _require_finite(val, x, "dg/dx.w")
            return val
        return _directional_g_derivative(self, x, w, h)


def _require_finite(arr, x, what):
    if not np.all(np.isfinite(arr)):
        bad = np.unravel_index(int(np.flatnonzero(~np.isfinite(arr.ravel()))[0]), arr.shape)
        idx = bad[0] if len(bad) == 1 else tuple(int(b) for b in bad)
        raise EvaluationError(
            f"{what} returned a non-finite entry at index {idx} for x={np.asarray(x)}",
            x=np.asarray(x, dtype=float),
            index=idx,
        )


def numeric_jacobian(fun, x, h=DEFAULT_FD_STEP):
    """Central-difference Jacobian of an arbitrary vector map; error O(h^2).

    The step is scaled per coordinate as h * (1 + |x_k|).
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty(f0.shape + x.shape, dtype=float)
    for k in range(x.shape[0]):
        hk = h * (1.0 + abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += hk
        xm[k] -= hk
        fp = np.asarray(fun(xp), dtype=float)
        fm = np.asarray(fun(xm), dtype=float)
        jac[..., k] = (fp - fm) / (2.0 * hk)
    return jac


def numeric_drift_jacobian(model, x, h=DEFAULT_FD_STEP):
    """Central-difference df/dx at x; error O(h^2) for smooth f."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    x = as_vector(x, model.n)
    jac = numeric_jacobian(lambda p: model.f(p), x, h)
    _require_finite(jac, x, "df/dx (finite differences)")
    return jac


def _directional_g_derivative(model, x, w, h=DEFAULT_FD_STEP):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return np.zeros((model.n, model.m))
    unit = w / norm
    gp = model.g(x + h * unit)
    gm = model.g(x - h * unit)
    val = (gp - gm) * (norm / (2.0 * h))
    _require_finite(val, x, "dg/dx.w (finite differences)")
    return val


def g_time_derivative(model, x, xdot, h=DEFAULT_FD_STEP):
    """Chain-rule time derivative of g along the velocity xdot: (dg/dx) . xdot.

    Uses the model's directional derivative when available, otherwise a
    central difference of g along the direction of xdot.  Exactly linear in
    xdot by construction (scaling is applied after differencing).
    """
    xdot = as_vector(xdot, model.n, name="xdot")
    return model.dg(np.asarray(x, dtype=float), xdot, h)
