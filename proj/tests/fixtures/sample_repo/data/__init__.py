"""Record loading: file readers, line parsers and schemas."""

from .loader import Loader
from .parser import CsvParser, JsonParser
from .schema import Field, Schema
