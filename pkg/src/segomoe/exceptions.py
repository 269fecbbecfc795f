from __future__ import annotations

from collections.abc import Mapping, Sequence
from http import HTTPStatus


class SegomoeError(Exception):
    """
    Base class for every error raised by segomoe.
    """

    status: int = HTTPStatus.INTERNAL_SERVER_ERROR
    code: str = "error"
    default_detail: str = "internal error"

    def __init__(self, message: str | None = None) -> None:
        super().__init__(message or self.default_detail)


class ConfigurationError(SegomoeError, ValueError):
    status = HTTPStatus.BAD_REQUEST
    code = "invalid-configuration"


class DesignSpaceError(SegomoeError, ValueError):
    status = HTTPStatus.BAD_REQUEST
    code = "invalid-design-space"

    def __init__(self, messages: str | Sequence[str]) -> None:
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class DegenerateDataError(SegomoeError, ValueError):
    """
    Training data carries no information (constant outputs or inputs).
    """

    code = "degenerate-data"


class SurrogateFitError(SegomoeError):
    code = "surrogate-fit-failed"


class ProtocolError(SegomoeError):
    status = HTTPStatus.CONFLICT
    code = "protocol-error"


class PendingEvaluationError(ProtocolError):
    code = "pending-evaluation"
    default_detail = "pending evaluation"


class BudgetExhaustedError(ProtocolError):
    status = HTTPStatus.GONE
    code = "budget-exhausted"
    default_detail = "budget exhausted"


class NoPendingAskError(ProtocolError):
    code = "no-pending-ask"
    default_detail = "no pending ask"


class PointMismatchError(ProtocolError):
    code = "point-mismatch"
    default_detail = "point differs from the pending ask"


class TokenMismatchError(ProtocolError):
    code = "token-mismatch"
    default_detail = "token differs from the pending ask"


class ArityError(SegomoeError, ValueError):
    status = HTTPStatus.UNPROCESSABLE_ENTITY
    code = "wrong-arity"


class SessionNotFound(SegomoeError, LookupError):
    status = HTTPStatus.NOT_FOUND
    code = "session-not-found"
    default_detail = "no such session"


class SchemaError(SegomoeError, ValueError):
    status = HTTPStatus.BAD_REQUEST
    code = "schema-violation"

    def __init__(self, fields: Mapping[str, Sequence[str]]) -> None:
        self.fields = {key: list(value) for key, value in fields.items()}
        summary = "; ".join(
            f"{key}: {message}"
            for key, messages in self.fields.items()
            for message in messages
        )
        super().__init__(summary or "invalid body")
