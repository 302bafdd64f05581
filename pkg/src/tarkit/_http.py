from __future__ import annotations

import logging
import os
import time
from typing import Any

import httpx

logger = logging.getLogger(__name__)

DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF_S = 0.5


class RetriesExhausted(Exception):
    pass


def auth_headers(api_key_env: str | None) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(api_key_env) if api_key_env else None
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return headers


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    *,
    headers: dict[str, str],
    attempts: int = DEFAULT_ATTEMPTS,
    backoff_s: float = DEFAULT_BACKOFF_S,
) -> Any:
    """POST ``payload`` and decode the JSON reply, retrying with exponential backoff."""
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            response = client.post(url, json=payload, headers=headers)
            response.raise_for_status()
            return response.json()
        except (httpx.HTTPError, ValueError) as exc:
            last = exc
            logger.warning("POST %s failed (attempt %d/%d): %s", url, attempt + 1, attempts, exc)
            if attempt + 1 < attempts:
                time.sleep(backoff_s * (2**attempt))
    raise RetriesExhausted(f"POST {url} failed after {attempts} attempts: {last}") from last
