"""Domain error hierarchy shared across the engine."""


class DomainError(Exception):
    """Base class for model-domain failures (as opposed to I/O or config errors)."""


class InfeasibleDrift(DomainError):
    """The drift equation has no positive intensity solution.

    Carries the step index and the intensity state at failure when raised
    from a path simulation.
    """

    def __init__(self, message, step=None, state=None):
        super().__init__(message)
        self.step = step
        self.state = state


class OutOfBand(DomainError):
    """Option price violates its no-arbitrage bounds."""


class NoConvergence(DomainError):
    """Iterative solver exhausted its budget without bracketing a root."""


class EmptySample(DomainError):
    """An estimator was handed zero paths or observations."""


class DivergentMoment(DomainError):
    """Requested exponential moment of a jump-size law does not exist."""


class DensityMismatch(DomainError):
    """A realized jump size has zero density under the target law."""


class NonFiniteInput(DomainError):
    """Input data contains NaN or infinities."""


class EmptyInput(DomainError):
    """Input data is empty."""
