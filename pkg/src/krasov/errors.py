"""Exception types shared across the toolkit."""


class KrasovError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(KrasovError):
    """A model callable produced a non-finite value.

    Carries the evaluation point and the index of the offending entry
    when known.
    """

    def __init__(self, message, x=None, index=None):
        super().__init__(message)
        self.x = x
        self.index = index


class SingularInputError(KrasovError):
    """The input matrix lost column rank (or g'g is numerically singular)."""

    def __init__(self, message, x=None, cond=None):
        super().__init__(message)
        self.x = x
        self.cond = cond


class IntegrabilityError(KrasovError):
    """M g(x) is not curl-free: line integrals depend on the path taken."""


class InfeasibleSetpointError(KrasovError):
    """No input solves f(x*) + g(x*) u = 0 to tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class AssumptionError(KrasovError):
    """A precondition check (contraction / annihilator / integrability) failed."""


class IntegrationBlowupError(KrasovError):
    """A fixed-step integration stage produced a non-finite value."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class SimulationAborted(KrasovError):
    """A run died mid-trajectory; the partial trace is attached.

    ``reason`` is ``"singular_input"`` or ``"blowup"``; ``trace`` holds the
    records logged before the failure.
    """

    def __init__(self, message, reason, t, trace, cause=None):
        super().__init__(message)
        self.reason = reason
        self.t = t
        self.trace = trace
        self.cause = cause


class ScenarioError(KrasovError):
    """A scenario file failed to parse or validate."""
