"""HTTP transport with retries and authentication."""

from .backoff import ExponentialBackoff, retry_call
from .http_client import HttpClient, Response
