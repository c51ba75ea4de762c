"""Minimal HTTP client built on the standard library.

Requests go through :func:`net.backoff.retry_call`, so transient server
errors are retried with exponential backoff before the client gives up.
"""

import json
import urllib.error
import urllib.request

from ..core.base import Component
from ..core.errors import NetworkError
from . import auth as auth_mod
from .backoff import ExponentialBackoff, retry_call

DEFAULT_TIMEOUT = 10.0


class Request:
    """Outgoing request as seen by authentication strategies."""

    def __init__(self, method, url, body=None):
        self.method = method
        self.url = url
        self.body = body
        self.headers = {"Accept": "application/json"}


class Response:
    """Decoded HTTP response."""

    def __init__(self, status, body, headers=None):
        self.status = status
        self.body = body
        self.headers = dict(headers or {})

    @property
    def ok(self):
        return 200 <= self.status < 300

    def json(self):
        """Decode the body as JSON."""
        return json.loads(self.body or "null")


class HttpClient(Component):
    """JSON over HTTP with retries and optional authentication."""

    def __init__(self, base_url, token=None, attempts=3, timeout=DEFAULT_TIMEOUT):
        super().__init__("http", {"base_url": base_url})
        self.base_url = base_url.rstrip("/")
        self.backoff = ExponentialBackoff(base=0.2)
        self.auth = auth_mod.make_auth({"token": token}) if token else None
        self.attempts = attempts
        self.timeout = timeout

    def url_for(self, path):
        return "%s/%s" % (self.base_url, path.lstrip("/"))

    def _send(self, method, path, body=None):
        url = self.url_for(path)
        request = Request(method, url, body)
        auth_mod.sign_request(request, self.auth)
        data = body.encode("utf-8") if isinstance(body, str) else body
        raw = urllib.request.Request(url, data=data, method=method, headers=request.headers)
        try:
            with urllib.request.urlopen(raw, timeout=self.timeout) as reply:
                text = reply.read().decode("utf-8")
                return Response(reply.status, text, reply.headers)
        except urllib.error.HTTPError as exc:
            raise NetworkError("HTTP %d" % exc.code, status=exc.code, url=url)
        except urllib.error.URLError as exc:
            raise NetworkError(str(exc.reason), url=url)

    def request(self, method, path, body=None):
        """Send a request, retrying transient failures."""

        def attempt():
            return self._send(method, path, body)

        return retry_call(attempt, attempts=self.attempts, backoff=self.backoff)

    def get(self, path):
        return self.request("GET", path)

    def post(self, path, body):
        return self.request("POST", path, json.dumps(body))

    def retry_schedule(self):
        """Delays the client would sleep between its attempts."""
        return self.backoff.delays(self.attempts - 1)
