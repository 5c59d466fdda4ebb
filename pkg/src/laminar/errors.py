"""Exception hierarchy shared by every layer.

Each error knows its wire ``type`` and HTTP status so the server can render
it as an ``ApiError`` body without a lookup table.
"""

from __future__ import annotations

from typing import Any


class LaminarError(Exception):
    status = 500

    def __init__(self, details: str = "", **failed_parameters: Any):
        super().__init__(details)
        self.details = details
        self.failed_parameters = failed_parameters

    @property
    def type(self) -> str:
        return type(self).__name__

    def to_api_error(self) -> dict[str, Any]:
        return {
            "type": self.type,
            "code": self.status,
            "failedParameters": {k: _jsonable(v) for k, v in self.failed_parameters.items()},
            "details": self.details,
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


class ValidationError(LaminarError):
    status = 400


class NotFound(LaminarError):
    status = 404


class Unauthorized(LaminarError):
    status = 401


class Conflict(LaminarError):
    status = 409


# graph construction
class InvalidDescriptor(ValidationError):
    pass


class InvalidGraph(ValidationError):
    pass


class UnknownNode(InvalidGraph):
    pass


class UnknownPort(InvalidGraph):
    pass


class WrongDirection(InvalidGraph):
    pass


class CycleDetected(InvalidGraph):
    pass


class NoRoot(InvalidGraph):
    pass


class TooFewProcesses(ValidationError):
    pass


class UnsupportedMapping(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


# execution
class UnresolvedPE(ValidationError):
    pass


class MissingRequirements(ValidationError):
    pass


class BehaviorPanic(LaminarError):
    pass


class WorkerFailure(LaminarError):
    pass


class PathEscape(ValidationError):
    pass


class DecodeError(ValidationError):
    pass


# registry / auth
class DuplicateUser(Conflict):
    pass


class InvalidCredentials(Unauthorized):
    pass


# search
class InvalidScope(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class ProviderUnavailable(LaminarError):
    pass


class RouteNotFound(NotFound):
    pass
