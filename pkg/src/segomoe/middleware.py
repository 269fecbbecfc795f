from __future__ import annotations

import logging
from collections.abc import Awaitable, Callable
from http import HTTPStatus
from typing import Any

from asgiref.sync import iscoroutinefunction, markcoroutinefunction
from django.http import HttpRequest, JsonResponse
from django.http.response import HttpResponseBase

from segomoe.defaults import wire_version
from segomoe.exceptions import DesignSpaceError, SchemaError, SegomoeError

logger = logging.getLogger(__name__)


def error_body(exception: SegomoeError) -> dict[str, Any]:
    fields: dict[str, list[str]] = {}
    if isinstance(exception, SchemaError):
        fields = exception.fields
    elif isinstance(exception, DesignSpaceError):
        fields = {"space": exception.messages}
    body: dict[str, Any] = {
        "version": wire_version,
        "error": exception.code,
        "detail": str(exception),
        "fields": fields,
    }
    links = getattr(exception, "links", None)
    if links:
        body["links"] = links
    return body


class ApiErrorMiddleware:
    """
    Render every exception raised by a view as a versioned JSON error body.
    """

    sync_capable = True
    async_capable = True

    def __init__(
        self,
        get_response: (
            Callable[[HttpRequest], HttpResponseBase]
            | Callable[[HttpRequest], Awaitable[HttpResponseBase]]
        ),
    ) -> None:
        self.get_response = get_response
        self.async_mode = iscoroutinefunction(self.get_response)

        if self.async_mode:
            markcoroutinefunction(self)

    def __call__(
        self, request: HttpRequest
    ) -> HttpResponseBase | Awaitable[HttpResponseBase]:
        if self.async_mode:
            return self.__acall__(request)
        response = self.get_response(request)
        assert isinstance(response, HttpResponseBase)
        return response

    async def __acall__(self, request: HttpRequest) -> HttpResponseBase:
        result = self.get_response(request)
        assert not isinstance(result, HttpResponseBase)
        return await result

    def process_exception(
        self, request: HttpRequest, exception: Exception
    ) -> HttpResponseBase:
        if isinstance(exception, SegomoeError):
            logger.info(
                "%s %s: %s (%s)",
                request.method,
                request.path,
                exception.code,
                exception,
            )
            return JsonResponse(error_body(exception), status=exception.status)
        logger.exception("Unhandled error on %s %s", request.method, request.path)
        return JsonResponse(
            {
                "version": wire_version,
                "error": "internal-error",
                "detail": "internal error",
                "fields": {},
            },
            status=HTTPStatus.INTERNAL_SERVER_ERROR,
        )
