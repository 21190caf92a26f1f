"""Exception hierarchy shared by the pipeline modules."""


class PipelineError(Exception):
    """Base class for everything raised deliberately by this package."""


class InvalidConfigError(PipelineError):
    """A configuration value violates its invariant (p <= 0, K < 1, ...)."""


class SrtParseError(PipelineError):
    """SubRip text could not be parsed.

    ``block`` is the 1-based position of the offending block in the file.
    """

    def __init__(self, message: str, block: int | None = None):
        super().__init__(message if block is None else f"block {block}: {message}")
        self.block = block


class ValidationError(PipelineError):
    """An input file parsed but violates a cross-file invariant."""


class UndefinedSimilarityError(PipelineError):
    """Cosine similarity requested for a zero-norm vector."""


class UnanswerableQueryError(PipelineError):
    """The query has no known entity to anchor frame selection on."""


class ScoringError(PipelineError):
    """A backend call failed while scoring; carries where it happened."""


class GenerationError(PipelineError):
    """A synthetic-movie spec cannot be realized."""


class BackendError(PipelineError):
    """Base class for scorer-backend failures."""


class ContractError(BackendError):
    """A backend was called with ids it does not know."""


class ScoreFileError(BackendError):
    """A recorded-score file is malformed."""


class MissingScoreError(BackendError):
    """Strict file backend has no record for the requested key."""


class BackendUnavailableError(BackendError):
    """Remote scorer unreachable or persistently failing."""


class ProtocolError(BackendError):
    """Remote scorer answered outside the wire contract."""
