"""Exception hierarchy shared by the compute modules and the CLI."""


class ImcfError(Exception):
    """Base class for all package errors."""


class InputError(ImcfError, ValueError):
    """Rejected input (non-finite values, wrong grid, bad shapes)."""


class DomainError(ImcfError, ValueError):
    """Argument outside the domain of a map (e.g. non-positive radius)."""


class FlowBreakdown(ImcfError):
    """Mean convexity lost during a flow step.

    ``node`` is the flat grid index where ``H <= 0`` was first seen and
    ``trace`` holds the partial trace when raised from ``run``.
    """

    def __init__(self, message, node=None, t=None, trace=None):
        super().__init__(message)
        self.node = node
        self.t = t
        self.trace = trace


class StepRejected(ImcfError):
    """Step failed the instability detector; retry with a smaller dt."""

    def __init__(self, message, dt=None):
        super().__init__(message)
        self.dt = dt


class InsufficientData(ImcfError):
    """Trace too short for the requested fit or residual."""


class NotConverged(ImcfError):
    """Profile extraction failed its Cauchy test."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class CertificationFailure(ImcfError):
    """A certification condition failed; ``condition`` names it."""

    def __init__(self, message, condition=None, report=None):
        super().__init__(message)
        self.condition = condition
        self.report = report


class ConfigError(ImcfError):
    """Invalid run configuration; ``path`` is the offending field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
