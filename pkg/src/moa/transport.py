"""HTTP plumbing shared by live tools, the remote embedder, and the LLM backend.

The transport is the single choke point for network activity: when offline
mode is on, any attempt to reach the wire raises OfflineViolationError, which
is what lets the test suite prove that --offline runs touch nothing live.
Retries apply to transport-level failures only (connection errors, timeouts),
never to HTTP status errors.
"""

from __future__ import annotations

import logging
import threading
import time

import requests

from moa.errors import OfflineViolationError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 0.5
DEFAULT_TIMEOUT_SECONDS = 20.0


class RateLimiter:
    """Serializes live API calls to a configurable requests/sec budget."""

    def __init__(self, requests_per_second: float = 3.0):
        if requests_per_second <= 0:
            raise ValueError("requests_per_second must be positive")
        self._interval = 1.0 / requests_per_second
        self._lock = threading.Lock()
        self._last_call = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._last_call + self._interval - now
            if wait > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()


class HttpStatusError(TransportError):
    """Non-2xx response; not retried."""

    def __init__(self, status_code: int, url: str, body: str = ""):
        super().__init__(f"HTTP {status_code} from {url}", attempts=1)
        self.status_code = status_code
        self.body = body


class HttpTransport:
    """requests-backed transport with offline guard, retries, and rate limiting."""

    def __init__(
        self,
        offline: bool = False,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_seconds: float = DEFAULT_BACKOFF_SECONDS,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        rate_limiter: RateLimiter | None = None,
        session: requests.Session | None = None,
    ):
        self.offline = offline
        self.max_attempts = max(1, max_attempts)
        self.backoff_seconds = backoff_seconds
        self.timeout_seconds = timeout_seconds
        self.rate_limiter = rate_limiter
        self._session = session

    def _request(self, method: str, url: str, **kwargs):
        if self.offline:
            raise OfflineViolationError(f"offline mode forbids live call to {url}")
        if self._session is None:
            self._session = requests.Session()
        if self.rate_limiter is not None:
            self.rate_limiter.acquire()
        last_exc: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                started = time.perf_counter()
                response = self._session.request(
                    method, url, timeout=self.timeout_seconds, **kwargs
                )
                logger.info(
                    "http %s %s status=%s elapsed_ms=%d",
                    method,
                    url,
                    response.status_code,
                    int((time.perf_counter() - started) * 1000),
                )
                if response.status_code >= 400:
                    raise HttpStatusError(response.status_code, url, response.text[:500])
                return response
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                if attempt < self.max_attempts:
                    time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
        raise TransportError(
            f"{method} {url} failed after {self.max_attempts} attempts: {last_exc}",
            attempts=self.max_attempts,
        )

    def get_json(self, url: str, params: dict | None = None, headers: dict | None = None) -> dict:
        response = self._request("GET", url, params=params, headers=headers)
        return response.json()

    def get_text(self, url: str, params: dict | None = None, headers: dict | None = None) -> str:
        response = self._request("GET", url, params=params, headers=headers)
        return response.text

    def post_json(self, url: str, body: dict, headers: dict | None = None) -> dict:
        response = self._request("POST", url, json=body, headers=headers)
        return response.json()
