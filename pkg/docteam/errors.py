from typing import Optional


class DocteamError(Exception):
    """Base class for all errors raised by ``docteam``."""


class BackendError(DocteamError, RuntimeError):
    """Something went wrong while obtaining a completion from a backend."""


class BackendUnavailableError(BackendError):
    """The backend could not be reached within the retry budget."""


class RequestRejectedError(BackendError):
    """The backend refused the request (a client error, never retried)."""


class ScriptExhaustedError(BackendError):
    """A scripted backend has no response left for the request."""


class ScriptMismatchError(BackendError):
    """In strict FIFO mode, the next scripted entry does not match the request."""


class ReplayMissError(BackendError):
    """
    A replayed session has no response recorded for a request.

    Args:
        request_hash: The hash of the request that could not be served.
    """

    def __init__(self, request_hash: str) -> None:
        self.request_hash = request_hash
        super().__init__(f"No recorded response for request {request_hash}.")


class EmptyRosterError(DocteamError, ValueError):
    """No expert could be parsed from recruiter output."""


class StructureError(DocteamError, ValueError):
    """A roster or team pipeline does not have the shape a branch requires."""


class InvalidWeightError(DocteamError, ValueError):
    """A vote carries a negative weight."""


class MissingRankingError(DocteamError, ValueError):
    """A vote without a ranking was passed to a ranking-based method."""


class EmptyTableError(DocteamError, ValueError):
    """A success table without problems was passed to the accuracy model."""


class MissingGoldError(DocteamError, ValueError):
    """A query without gold answer was used where one is required."""


class ConfigError(DocteamError, ValueError):
    """A configuration file could not be read or is invalid."""


class DatasetError(DocteamError, ValueError):
    """
    A dataset file could not be parsed or contains invalid items.

    Args:
        message: The description of the problem.
        line_number: The (1-based) line the problem was found on, if any.
    """

    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        self.line_number = line_number

        if line_number is not None:
            message = f"line {line_number}: {message}"

        super().__init__(message)
