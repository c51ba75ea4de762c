"""Retry policy for network calls.

The HTTP client wraps every request in :func:`retry_call`, which retries
transient failures with exponentially growing, jittered delays until the
attempt budget is spent and then raises :class:`RetryExhausted`.
"""

import random
import time

from ..core.errors import NetworkError, RetryExhausted

MAX_ATTEMPTS = 10


class ExponentialBackoff:
    """Delay schedule ``base * factor ** attempt`` capped at ``cap``."""

    def __init__(self, base=0.5, factor=2.0, cap=30.0, jitter=0.1, seed=None):
        if base <= 0 or factor < 1:
            raise ValueError("base must be positive and factor at least 1")
        self.base = base
        self.factor = factor
        self.cap = cap
        self.jitter = jitter
        self._random = random.Random(seed)

    def delay(self, attempt):
        """Seconds to wait before retry number ``attempt`` (0-based)."""
        raw = min(self.cap, self.base * self.factor ** attempt)
        spread = raw * self.jitter
        return max(0.0, raw + self._random.uniform(-spread, spread))

    def delays(self, attempts):
        """The full schedule for ``attempts`` retries."""
        return [self.delay(i) for i in range(attempts)]

    def total(self, attempts):
        """Upper bound of the time spent sleeping for ``attempts`` retries."""
        return sum(min(self.cap, self.base * self.factor ** i) * (1 + self.jitter) for i in range(attempts))


def should_retry(error, attempt, attempts):
    """Decide whether ``error`` raised on ``attempt`` deserves another try."""
    if attempt + 1 >= attempts:
        return False
    if isinstance(error, NetworkError):
        return error.is_transient()
    return isinstance(error, (ConnectionError, TimeoutError))


def retry_call(fn, attempts=3, backoff=None, sleep=time.sleep):
    """Call ``fn`` until it succeeds or the attempt budget is spent.

    Only transient failures are retried; anything else propagates
    immediately. When all attempts fail the last error is attached to
    the raised :class:`RetryExhausted`.
    """
    attempts = max(1, min(attempts, MAX_ATTEMPTS))
    backoff = backoff or ExponentialBackoff()
    last_error = None
    for attempt in range(attempts):
        try:
            return fn()
        except (NetworkError, ConnectionError, TimeoutError) as exc:
            last_error = exc
            if not should_retry(exc, attempt, attempts):
                break
            sleep(backoff.delay(attempt))
    raise RetryExhausted(getattr(last_error, "url", None), attempts, last_error)
