"""
A small HTTP GET client for cloud metadata endpoints.

Retries connection errors and non-200 answers, then gives up with
MetadataUnreachable so the resolver can fall back.
"""

import logging
from typing import Mapping, Optional

import requests

from flakeless_app.errors import MetadataUnreachable

logger = logging.getLogger(__name__)


class MetadataClient:
    """
    >>> MetadataClient(timeout_ms=500).get("http://169.254.169.254/...")  # doctest: +SKIP
    '10.0.1.2'
    """

    def __init__(
        self,
        timeout_ms: int = 1000,
        retries: int = 2,
        session: Optional[requests.Session] = None,
    ):
        self.timeout_ms = timeout_ms
        self.retries = retries
        self.session = session or requests.Session()

    def get(self, url: str, headers: Optional[Mapping[str, str]] = None) -> str:
        """Return the response body of a 200 answer, retrying up to `retries` times."""
        attempts = self.retries + 1
        last_error = "no attempt made"

        for attempt in range(1, attempts + 1):
            try:
                res = self.session.get(
                    url, headers=dict(headers or {}), timeout=self.timeout_ms / 1000
                )
            except requests.exceptions.RequestException as e:
                last_error = f"{type(e).__name__}: {e}"
            else:
                if res.status_code == 200:
                    return res.text
                last_error = f"HTTP {res.status_code}"
            logger.debug("[RESOLVER] attempt %d/%d for %s failed: %s", attempt, attempts, url, last_error)

        raise MetadataUnreachable(f"{url} unreachable after {attempts} attempts ({last_error})")
