"""POST-with-retry helper shared by the remote embedding and chat clients."""

from __future__ import annotations

import logging
import os
import time
from typing import Any, Callable

import httpx

from expmem.errors import BackendError, BackendUnavailable, ProtocolViolation

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com"
DEFAULT_TIMEOUT = 30.0
DEFAULT_ATTEMPTS = 3
API_KEY_ENV = "EXPMEM_API_KEY"
BASE_URL_ENV = "EXPMEM_BASE_URL"


def resolve_base_url(base_url: str | None) -> str:
    return (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")


def auth_headers(api_key: str | None) -> dict[str, str]:
    key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    headers: dict[str, str],
    attempts: int = DEFAULT_ATTEMPTS,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, Any]:
    """POST ``payload`` and return the decoded JSON body.

    Transport errors, 429 and 5xx are retried with exponential backoff
    (``backoff``, ``2*backoff``, ...). Other non-2xx statuses fail at once.
    """
    last_error = ""
    for attempt in range(1, attempts + 1):
        try:
            resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            logger.warning("POST %s failed (attempt %d/%d): %s", url, attempt, attempts, last_error)
            if attempt < attempts:
                sleep(backoff * 2 ** (attempt - 1))
                continue
            raise BackendUnavailable(
                f"{url} unreachable after {attempts} attempts", attempts, last_error
            ) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            logger.warning("POST %s returned %d (attempt %d/%d)", url, resp.status_code, attempt, attempts)
            if attempt < attempts:
                sleep(backoff * 2 ** (attempt - 1))
                continue
            raise BackendError(f"{url} returned {resp.status_code}", resp.status_code, resp.text)
        if not 200 <= resp.status_code < 300:
            raise BackendError(f"{url} returned {resp.status_code}", resp.status_code, resp.text)
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolViolation(f"{url} returned a non-JSON body") from exc
        if not isinstance(body, dict):
            raise ProtocolViolation(f"{url} returned JSON that is not an object")
        return body
    raise AssertionError("unreachable")
