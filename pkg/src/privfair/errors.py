"""Exception types shared across the toolkit."""


class PrivfairError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PrivfairError):
    """An object violates one of its structural invariants."""


class LabelError(ValidationError):
    """A label is not a member of the relevant alphabet."""


class UndefinedConditionalError(PrivfairError):
    """Conditioning on an event of probability zero."""


class HypothesisViolationError(PrivfairError):
    """An input violates a hypothesis of the theorem being evaluated."""


class FloorViolationError(HypothesisViolationError):
    """A conditional expected utility is zero where a positive floor is required."""


class InsufficientDataError(PrivfairError):
    """An empirical estimate conditions on a cell with no samples."""


class EmptySceneError(PrivfairError):
    """All points were filtered out while building a grid map."""


class InvalidEndpointError(PrivfairError):
    """A path query starts or ends on a non-traversable cell."""


class NoPathError(PrivfairError):
    """The goal cell is unreachable from the start cell."""


class NoCandidatesError(PrivfairError):
    """None of the requested destinations is reachable."""


class ScenarioError(PrivfairError):
    """A scenario file or scenario invocation is malformed."""


class EngineError(PrivfairError):
    """A decision engine failed; carries the request that triggered it."""

    def __init__(self, message, request=None):
        super().__init__(message)
        self.request = request


class EngineNetworkError(EngineError):
    """Transport-level failure talking to a remote engine (retriable)."""


class ProtocolError(EngineError):
    """A remote engine answered with an unusable body (not retriable)."""

    def __init__(self, message, body=None, request=None):
        super().__init__(message, request=request)
        self.body = body
