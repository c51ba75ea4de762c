"""Core building blocks shared by every package."""

from .base import Component, Configurable
from .errors import TidewaterError
from .registry import Registry
