"""Canonical JSON rendering and file writers."""

from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest

from vesselpose.serialize import canonical_json, to_jsonable, write_json, write_jsonl


@dataclasses.dataclass(frozen=True)
class Sample:
    name: str
    values: tuple[int, ...]


class TestToJsonable:
    def test_dataclass_and_tuples(self):
        assert to_jsonable(Sample("x", (1, 2))) == {"name": "x", "values": [1, 2]}

    def test_numpy_scalars(self):
        out = to_jsonable({"i": np.int64(3), "f": np.float64(2.5), "b": np.bool_(True)})
        assert out == {"i": 3, "f": 2.5, "b": True}
        assert type(out["i"]) is int and type(out["f"]) is float and type(out["b"]) is bool

    def test_dict_keys_become_strings(self):
        assert to_jsonable({1: "a"}) == {"1": "a"}

    def test_strings_pass_through(self):
        assert to_jsonable("plain") == "plain"

    def test_nested(self):
        obj = {"rows": [Sample("a", (0,)), {"k": (np.int32(1), 2)}]}
        assert to_jsonable(obj) == {"rows": [{"name": "a", "values": [0]}, {"k": [1, 2]}]}


class TestCanonicalJson:
    def test_sorted_compact_newline(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}\n'

    def test_key_order_independent(self):
        a = canonical_json({"x": 1, "y": {"p": 2, "q": 3}})
        b = canonical_json({"y": {"q": 3, "p": 2}, "x": 1})
        assert a == b

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            canonical_json({"v": float("nan")})
        with pytest.raises(ValueError):
            canonical_json({"v": float("inf")})


class TestFileWriters:
    def test_write_json_bytes(self, tmp_path):
        path = tmp_path / "out.json"
        write_json(path, {"b": 2, "a": 1})
        assert path.read_bytes() == b'{"a":1,"b":2}\n'

    def test_write_jsonl_roundtrip(self, tmp_path):
        path = tmp_path / "out.jsonl"
        records = [{"id": 0, "v": 1.5}, {"id": 1, "v": -2.0}]
        write_jsonl(path, records)
        lines = path.read_text().splitlines()
        assert [json.loads(line) for line in lines] == records
        assert path.read_text().endswith("\n")

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        payload = {"z": [3, 2], "m": {"k": True}}
        write_json(a, payload)
        write_json(b, dict(reversed(list(payload.items()))))
        assert a.read_bytes() == b.read_bytes()
