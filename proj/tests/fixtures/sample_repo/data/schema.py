"""Record schemas.

A :class:`Schema` is an ordered collection of :class:`Field` objects.
Validation coerces raw string values to the declared kinds, fills in
defaults and reports the first missing required field.
"""

from core.errors import SchemaError
from utils.text import normalize

KINDS = ("str", "int", "float", "bool")

_TRUE_WORDS = frozenset({"1", "true", "yes", "on"})
_FALSE_WORDS = frozenset({"0", "false", "no", "off", ""})


class Field:
    """One named, typed column of a record."""

    def __init__(self, name, kind="str", required=True, default=None):
        if kind not in KINDS:
            raise SchemaError(name, "unknown kind %r" % kind)
        self.name = name
        self.kind = kind
        self.required = required
        self.default = default

    def coerce(self, value):
        """Convert a raw value to this field's kind."""
        if value is None:
            return self.default
        if self.kind == "int":
            return int(value)
        if self.kind == "float":
            return float(value)
        if self.kind == "bool":
            word = normalize(value).lower()
            if word in _TRUE_WORDS:
                return True
            if word in _FALSE_WORDS:
                return False
            raise SchemaError(self.name, "not a boolean: %r" % value)
        return normalize(value)

    def __repr__(self):
        return "Field(%r, %r)" % (self.name, self.kind)


class Schema:
    """Ordered set of fields with validation of whole records."""

    def __init__(self, fields):
        self.fields = list(fields)
        self._by_name = {field.name: field for field in self.fields}
        if len(self._by_name) != len(self.fields):
            raise SchemaError("*", "duplicate field names")

    def field_names(self):
        return [field.name for field in self.fields]

    def get(self, name):
        return self._by_name.get(name)

    def validate(self, record):
        """Return a new record with coerced values.

        Missing required fields raise :class:`SchemaError`; unknown keys
        are dropped silently so upstream sources may carry extra columns.
        """
        clean = {}
        for field in self.fields:
            raw = record.get(field.name)
            if raw is None and field.required:
                raise SchemaError(field.name, "required field is missing")
            try:
                clean[field.name] = field.coerce(raw)
            except ValueError as exc:
                raise SchemaError(field.name, str(exc))
        return clean


def validate_record(record, schema):
    """Validate ``record`` against ``schema`` (any object with validate)."""
    return schema.validate(record)


def build_schema(spec):
    """Build a schema from ``{"name": "kind"}`` or ``{"name": (kind, required)}``."""
    fields = []
    for name, value in spec.items():
        if isinstance(value, tuple):
            kind, required = value
        else:
            kind, required = value, True
        fields.append(Field(name, kind=kind, required=required))
    return Schema(fields)
