"""Pipeline stages.

A stage is a callable object that maps a list of records to a new list
of records. Stages are assembled by :func:`build_stages` from the
``stages`` section of the application configuration.
"""

from utils import text

DEFAULT_ORDER = ("normalize", "filter", "slug")


class Stage:
    """Base stage: applies ``apply`` to every record."""

    def __init__(self, name):
        self.name = name
        self.seen = 0

    def apply(self, record):
        """Transform one record; return ``None`` to drop it."""
        return record

    def __call__(self, records):
        out = []
        for record in records:
            self.seen += 1
            result = self.apply(record)
            if result is not None:
                out.append(result)
        return out

    def __repr__(self):
        return "<%s %s>" % (type(self).__name__, self.name)


class NormalizeStage(Stage):
    """Normalises whitespace in the selected string fields."""

    def __init__(self, fields=None):
        super().__init__("normalize")
        self.fields = tuple(fields or ())

    def apply(self, record):
        clean = dict(record)
        for key in self.fields or clean.keys():
            if isinstance(clean.get(key), str):
                clean[key] = text.normalize(clean[key])
        return clean


class FilterStage(Stage):
    """Keeps only records for which ``predicate`` returns true."""

    def __init__(self, predicate):
        super().__init__("filter")
        self.predicate = predicate

    def apply(self, record):
        return record if self.predicate(record) else None


class SlugStage(Stage):
    """Adds a ``slug`` field derived from a source field."""

    source = "title"

    def apply(self, record):
        record = dict(record)
        record["slug"] = text.slugify(record.get(self.source, ""))
        return record


def require_fields(*names):
    """Predicate factory: record must have non-empty values for ``names``."""

    def predicate(record):
        return all(record.get(name) not in (None, "") for name in names)

    return predicate


def build_stages(config):
    """Create the stage list described by ``config["stages"]``.

    Unknown stage names are ignored so older configurations keep
    working when stages are retired.
    """
    names = config.get("stages", DEFAULT_ORDER)
    stages = []
    for name in names:
        if name == "normalize":
            stages.append(NormalizeStage(config.get("normalize_fields")))
        elif name == "filter":
            stages.append(FilterStage(require_fields(*config.get("required", ()))))
        elif name == "slug":
            stages.append(SlugStage("slug"))
    return stages


def run_stages(stages, records):
    """Feed ``records`` through every stage in order."""
    for stage in stages:
        records = stage(records)
    return records
