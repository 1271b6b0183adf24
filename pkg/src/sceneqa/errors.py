"""Exception types shared across the package.

Everything raised on purpose derives from :class:`SceneQaError` so callers can
catch one base class at pipeline boundaries and map it to an exit code.
"""

from __future__ import annotations


class SceneQaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SceneQaError):
    """Invalid or inconsistent configuration values."""


class MalformedFileError(SceneQaError):
    """A file could not be parsed at all (bad JSON, bad PLY header, ...)."""


class SchemaViolationError(SceneQaError):
    """A file parsed, but its structure does not match the expected schema."""


class InconsistentTripletError(SceneQaError):
    """Mesh / segmentation / aggregation files disagree with each other."""


class InvalidSpecError(SceneQaError):
    """A synthetic-scene specification is unsatisfiable (bad dims, counts...)."""


class DegenerateInputError(SceneQaError):
    """An operation received geometry it cannot work with (e.g. empty set)."""


class NotConvergedError(SceneQaError):
    """An iterative solver hit its iteration cap before certifying a result."""

    def __init__(self, message: str, iterations: int = 0, gap: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.gap = gap


class EmptyAfterFilterError(SceneQaError):
    """Label filtering removed every instance of a scene."""


class ArityMismatchError(SceneQaError):
    """Template placeholders and provided bindings do not line up."""


class InsufficientCandidatesError(SceneQaError):
    """A generation stratum ran out of eligible referent tuples.

    ``shortfalls`` maps a stratum name to (requested, produced).
    """

    def __init__(self, message: str, shortfalls: dict[str, tuple[int, int]] | None = None):
        super().__init__(message)
        self.shortfalls = dict(shortfalls or {})


class QueueEmptyError(SceneQaError):
    """A scripted service client ran out of queued responses."""


class ServiceUnavailableError(SceneQaError):
    """The rewrite service could not be reached after retries."""


class ExhaustedAttemptsError(SceneQaError):
    """All rewrite attempts for one job failed validation.

    ``verdicts`` holds one validation verdict per attempt, in order.
    """

    def __init__(self, message: str, verdicts: list | None = None):
        super().__init__(message)
        self.verdicts = list(verdicts or [])
