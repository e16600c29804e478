"""Sampled verification of the structural assumptions behind the controller.

Three conditions are checked on a user-declared box, by dense seeded
sampling with reported margins:

* a1 -- M df/dx + (df/dx)' M negative definite (contraction of the drift),
* a2 -- the left annihilator of g also annihilates every directional
  derivative of g,
* a3 -- M g is curl-free column by column, so a potential exists.

The checks are a numerical surrogate for conditions that are stated
globally but come with no decision procedure; verdicts are deterministic
given (model, seed, tolerances).
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import as_vector
from .errors import EvaluationError, SingularInputError

ANNIHILATOR_RTOL = 1e-12


@dataclass(frozen=True)
class CheckConfig:
    samples: int = 1000
    probes: int = 8
    tol: float = 1e-8
    margin_a1: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.probes < 1:
            raise ValueError("probes must be >= 1")
        if self.margin_a1 < 0:
            raise ValueError("margin_a1 must be >= 0")


@dataclass(frozen=True)
class SubReport:
    """Verdict of one check with its worst-case margin and location.

    ``worst`` is the largest eigenvalue (a1), largest absolute annihilator
    residual (a2) or largest Jacobian asymmetry (a3) seen over the samples;
    ``at`` is the sample where it occurred.  ``error`` is set when the check
    itself failed to evaluate.
    """

    passed: Optional[bool]
    worst: Optional[float]
    at: Optional[np.ndarray]
    error: Optional[str] = None

    def to_dict(self, worst_key):
        return {
            "pass": self.passed,
            worst_key: self.worst,
            "at": None if self.at is None else [float(v) for v in self.at],
            **({"error": self.error} if self.error is not None else {}),
        }


@dataclass(frozen=True)
class AssumptionReport:
    a1: SubReport
    a2: SubReport
    a3: SubReport
    seed: int
    samples: int
    domain_lo: np.ndarray = field(repr=False, default=None)
    domain_hi: np.ndarray = field(repr=False, default=None)

    @property
    def all_pass(self):
        return bool(self.a1.passed and self.a2.passed and self.a3.passed)

    @property
    def any_error(self):
        return any(r.error is not None for r in (self.a1, self.a2, self.a3))

    def to_dict(self):
        return {
            "a1": self.a1.to_dict("worst_eig"),
            "a2": self.a2.to_dict("worst_residual"),
            "a3": self.a3.to_dict("worst_asymmetry"),
            "seed": self.seed,
            "samples": self.samples,
            "all_pass": self.all_pass,
            "domain": {
                "lo": [float(v) for v in self.domain_lo],
                "hi": [float(v) for v in self.domain_hi],
            },
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def annihilator(g_at_x, x=None):
    """Orthonormal basis of the left null space of a full-column-rank matrix.

    Returns g_perp of shape (n - m, n) with g_perp @ g = 0 (entries at
    machine level) and g_perp @ g_perp.T = I.  Raises SingularInputError
    when g is rank deficient.
    """
    g = np.asarray(g_at_x, dtype=float)
    if g.ndim != 2:
        raise ValueError(f"input matrix must be 2-d, got shape {g.shape}")
    n, m = g.shape
    if m >= n:
        raise ValueError("input matrix must be tall (m < n)")
    u, s, _ = np.linalg.svd(g, full_matrices=True)
    if s[0] == 0.0 or s[-1] <= ANNIHILATOR_RTOL * s[0]:
        where = "" if x is None else f" at x={np.asarray(x)}"
        raise SingularInputError(
            f"input matrix is rank deficient{where} (singular values {s})",
            x=None if x is None else np.asarray(x, dtype=float),
        )
    return u[:, m:].T


def check_a1(model, samples=1000, margin=0.0, seed=0):
    """Largest eigenvalue of M df/dx + (df/dx)' M over the sampled box.

    Passes iff the worst eigenvalue is below -margin at every sample.
    """
    rng = np.random.default_rng(seed)
    pts = model.state_domain.sample(rng, samples)
    return _a1_on_samples(model, pts, margin)


def check_a2(model, samples=1000, probes=8, tol=1e-8, seed=0):
    """Worst entry of g_perp (dg/dx . w) over samples and random unit probes."""
    rng = np.random.default_rng(seed)
    pts = model.state_domain.sample(rng, samples)
    dirs = _unit_directions(rng, probes, model.n)
    return _a2_on_samples(model, pts, dirs, tol)


def check_a3(model, samples=1000, tol=1e-8, seed=0):
    """Worst asymmetry of the Jacobian of each column of M g over the samples.

    A symmetric Jacobian for every column means the field is curl-free,
    hence a potential exists.
    """
    rng = np.random.default_rng(seed)
    pts = model.state_domain.sample(rng, samples)
    return _a3_on_samples(model, pts, tol)


def check_all(model, config=None):
    """Run a1, a2, a3 with one shared sample set; errors in one check do not
    abort the others."""
    cfg = config or CheckConfig()
    rng = np.random.default_rng(cfg.seed)
    pts = model.state_domain.sample(rng, cfg.samples)
    dirs = _unit_directions(rng, cfg.probes, model.n)

    def guarded(fn, *args):
        try:
            return fn(*args)
        except (EvaluationError, SingularInputError) as exc:
            return SubReport(passed=None, worst=None, at=getattr(exc, "x", None), error=str(exc))

    return AssumptionReport(
        a1=guarded(_a1_on_samples, model, pts, cfg.margin_a1),
        a2=guarded(_a2_on_samples, model, pts, dirs, cfg.tol),
        a3=guarded(_a3_on_samples, model, pts, cfg.tol),
        seed=cfg.seed,
        samples=cfg.samples,
        domain_lo=model.state_domain.lo,
        domain_hi=model.state_domain.hi,
    )


def _unit_directions(rng, count, n):
    dirs = rng.standard_normal((count, n))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return dirs / norms


def _a1_on_samples(model, pts, margin):
    metric = model.metric
    worst = -np.inf
    worst_at = None
    for x in pts:
        try:
            jac = model.jac_f(x)
        except EvaluationError as exc:
            exc.x = x if exc.x is None else exc.x
            raise
        sym = metric @ jac + jac.T @ metric
        top = float(np.linalg.eigvalsh(sym)[-1])
        if top > worst:
            worst = top
            worst_at = x
    return SubReport(passed=bool(worst < -margin), worst=worst, at=worst_at)


def _a2_on_samples(model, pts, dirs, tol):
    worst = 0.0
    worst_at = pts[0]
    for x in pts:
        gperp = annihilator(model.g(x), x=x)
        for w in dirs:
            resid = float(np.abs(gperp @ model.dg(x, w)).max())
            if resid >= worst:
                worst = resid
                worst_at = x
    return SubReport(passed=bool(worst < tol), worst=worst, at=worst_at)


def _a3_on_samples(model, pts, tol):
    metric = model.metric
    eye = np.eye(model.n)
    worst = 0.0
    worst_at = pts[0]
    for x in pts:
        # deriv[k][i, j] = d(M g)_{ij} / dx_k
        deriv = np.stack([metric @ model.dg(x, eye[k]) for k in range(model.n)])
        asym = float(np.abs(deriv - deriv.transpose(1, 0, 2)).max())
        if asym >= worst:
            worst = asym
            worst_at = x
    return SubReport(passed=bool(worst < tol), worst=worst, at=worst_at)
