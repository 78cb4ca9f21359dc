"""Exception types shared across the toolkit."""


class JbpldaError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefinite(JbpldaError):
    """A matrix that must be (strictly) positive definite failed to factor."""


class AsymmetricInput(JbpldaError):
    """A symmetric-matrix argument is asymmetric beyond tolerance."""


class DimensionMismatch(JbpldaError):
    """Array shapes are inconsistent with each other or with a model."""


class ZeroVector(JbpldaError):
    """An operation that divides by a vector norm received a zero vector."""


class EmptyDataset(JbpldaError):
    """Training was invoked on a dataset with no speakers."""


class EmptySet(JbpldaError):
    """A likelihood-ratio side contains no vectors."""


class SingularAccumulator(JbpldaError):
    """An M-step normal-equation matrix is singular."""


class RankDeficient(JbpldaError):
    """A projection was requested beyond the achievable rank."""


class MissingLabels(JbpldaError):
    """A metric needs both target and nontarget labelled scores."""


class InvalidOperatingPoint(JbpldaError):
    """Detection-cost parameters are out of range."""


class InsufficientSpeakers(JbpldaError):
    """Trial generation needs more speakers or sessions than available."""


class SizeGuardExceeded(JbpldaError):
    """A brute-force oracle was asked to materialize too large a system."""


class PathUnsupported(JbpldaError):
    """The selected scoring path cannot handle the given inputs."""


class UnknownId(JbpldaError):
    """A trial references an id that resolves to neither speaker nor utterance."""


class UnknownUtteranceId(UnknownId):
    """A label or trial references an utterance id absent from the vectors."""


class ParseError(JbpldaError):
    """A data file failed to parse; carries file position context."""

    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
