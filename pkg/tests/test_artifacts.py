"""Canonical JSON bytes, config hashing, and the JSONL/CSV window codecs."""

import json
import math

import numpy as np
import pytest

from dimsum.artifacts import (
    canonical,
    config_hash,
    dump_json,
    read_json,
    read_jsonl,
    require_artifact,
    window_from_record,
    window_record,
    write_csv,
    write_json,
    write_jsonl,
)
from dimsum.core import ConfigError, ContractViolation, SeriesWindow


class TestCanonical:
    def test_numpy_values_become_plain(self):
        obj = {
            "i": np.int64(3),
            "f": np.float64(0.5),
            "b": np.bool_(True),
            "a": np.arange(3, dtype=np.float64),
            "t": (1, 2),
        }
        out = canonical(obj)
        assert out == {"i": 3, "f": 0.5, "b": True, "a": [0.0, 1.0, 2.0], "t": [1, 2]}
        assert type(out["i"]) is int
        assert type(out["f"]) is float
        assert type(out["b"]) is bool

    def test_non_finite_floats_become_null(self):
        out = canonical({"nan": float("nan"), "inf": float("inf"), "ninf": -math.inf})
        assert out == {"nan": None, "inf": None, "ninf": None}

    def test_non_string_keys_rejected(self):
        with pytest.raises(ContractViolation):
            canonical({1: "x"})

    def test_unserializable_rejected(self):
        with pytest.raises(ContractViolation):
            canonical({"x": object()})


class TestDumpJson:
    def test_sorted_and_compact(self):
        assert dump_json({"b": 1, "a": [1.5, None]}) == '{"a":[1.5,null],"b":1}'

    def test_insertion_order_irrelevant(self):
        one = dump_json({"x": 1, "y": {"b": 2, "a": 3}})
        two = dump_json({"y": {"a": 3, "b": 2}, "x": 1})
        assert one == two

    def test_floats_round_trip(self):
        rng = np.random.default_rng(0)
        values = [float(v) for v in rng.standard_normal(200) * 10.0**rng.integers(-8, 8)]
        back = json.loads(dump_json({"v": values}))["v"]
        assert back == values


class TestFileIo:
    def test_json_round_trip(self, tmp_path):
        path = str(tmp_path / "x.json")
        obj = {"a": [1, 2.5, None], "b": {"c": "s"}}
        write_json(path, obj)
        assert read_json(path) == obj
        with open(path, "rb") as fh:
            raw = fh.read()
        assert raw.endswith(b"\n")
        assert b" " not in raw

    def test_jsonl_round_trip_and_count(self, tmp_path):
        path = str(tmp_path / "rows.jsonl")
        rows = [{"i": i, "v": i / 3.0} for i in range(5)]
        assert write_jsonl(path, rows) == 5
        assert read_jsonl(path) == rows

    def test_jsonl_skips_blank_lines(self, tmp_path):
        path = str(tmp_path / "rows.jsonl")
        with open(path, "w") as fh:
            fh.write('{"a":1}\n\n{"a":2}\n')
        assert read_jsonl(path) == [{"a": 1}, {"a": 2}]

    def test_csv_bytes_deterministic(self, tmp_path):
        p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        rows = [[0, 0.1, "x", None], [1, np.float64(2.0), "y", 3]]
        write_csv(p1, ["i", "v", "s", "n"], rows)
        write_csv(p2, ["i", "v", "s", "n"], rows)
        with open(p1, "rb") as fh:
            raw = fh.read()
        with open(p2, "rb") as fh:
            assert fh.read() == raw
        assert raw == b"i,v,s,n\n0,0.1,x,\n1,2.0,y,3\n"


class TestConfigHash:
    BASE = {"seed": 7, "w": 96, "output_dir": "/tmp/a", "threads": 4}

    def test_volatile_keys_ignored(self):
        moved = dict(self.BASE, output_dir="/elsewhere", threads=1)
        assert config_hash(self.BASE) == config_hash(moved)

    def test_result_fields_matter(self):
        assert config_hash(self.BASE) != config_hash(dict(self.BASE, seed=8))
        assert config_hash(self.BASE) != config_hash(dict(self.BASE, w=48))

    def test_shape(self):
        h = config_hash(self.BASE)
        assert len(h) == 16
        assert set(h) <= set("0123456789abcdef")


class TestWindowCodec:
    def test_round_trip_preserves_everything(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal(24)
        mask = (rng.random(24) >= 0.3).astype(np.uint8)
        mask[0] = 1
        win = SeriesWindow.create("s1", 4, values, mask, normalized=True)
        back = window_from_record(window_record(win))
        assert back.key == win.key
        assert back.normalized is True
        assert np.array_equal(back.mask, win.mask)
        vis = win.mask == 1
        assert np.array_equal(back.values[vis], win.values[vis])
        assert np.isnan(back.values[~vis]).all()

    def test_record_is_json_ready(self):
        win = SeriesWindow.create("s2", 0, [1.0, float("nan"), 3.0])
        rec = window_record(win)
        assert rec["values"] == [1.0, None, 3.0]
        assert rec["mask"] == [1, 0, 1]
        assert dump_json(rec) == dump_json(json.loads(dump_json(rec)))


class TestRequireArtifact:
    def test_missing_names_producer(self, tmp_path):
        with pytest.raises(ConfigError, match="dimsum preprocess"):
            require_artifact(str(tmp_path / "windows.jsonl"), "dimsum preprocess")

    def test_present_passes_through(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{}")
        assert require_artifact(str(path), "dimsum x") == str(path)
