"""Tests for the loader and the line parsers."""

import pytest

from core.errors import ParseError
from data.loader import Loader
from data.parser import CsvParser, JsonParser, parse_json_line, sniff_format
from data.schema import build_schema
from tests.conftest import write_sample


def test_csv_with_header(tmp_path):
    path = write_sample(tmp_path, "people.csv", ["name,age", "ada,36", "alan,41"])
    loader = Loader()
    records = loader.load(str(path))
    assert records == [{"name": "ada", "age": "36"}, {"name": "alan", "age": "41"}]


def test_cache_is_reused(tmp_path):
    path = write_sample(tmp_path, "a.csv", ["x", "1"])
    loader = Loader()
    first = loader.load(str(path))
    assert loader.load(str(path)) is first
    loader.clear()
    assert loader.load(str(path)) is not first


def test_json_lines(tmp_path):
    path = write_sample(tmp_path, "a.jsonl", ['{"a": 1}', "", '{"a": 2}'])
    records = Loader().load_many([str(path)])
    assert [r["a"] for r in records] == [1, 2]


def test_parse_json_line_uses_inherited_driver():
    assert parse_json_line('{"k": "v"}') == {"k": "v"}
    assert parse_json_line("   ") is None


def test_strict_parser_raises():
    parser = JsonParser()
    with pytest.raises(ParseError):
        parser.parse(["not json"])


def test_lenient_parser_collects_errors():
    parser = CsvParser(config={"strict": False})
    records = parser.parse(["a,b", "1,2", "3"])
    assert records == [{"a": "1", "b": "2"}]
    assert len(parser.errors) == 1


def test_quoted_cells():
    parser = CsvParser(header=["a", "b"])
    assert parser.split('"x,y",z') == ["x,y", "z"]


def test_schema_applied(tmp_path):
    path = write_sample(tmp_path, "n.csv", ["n", "7"])
    loader = Loader()
    loader.schema = build_schema({"n": "int"})
    assert loader.load(str(path)) == [{"n": 7}]


def test_sniff_format():
    assert sniff_format(["", '{"a": 1}']) == "json"
    assert sniff_format(["a,b"]) == "csv"
