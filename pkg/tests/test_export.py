"""Tests for the CSV and JSON writers."""

import json

import numpy as np

from src.core.export import SCHEMA_VERSION, format_csv, format_json, write_csv, write_json


def test_csv_round_trip_precision():
    text = format_csv(("q", "A_q"), [(3, 0.1 + 0.2), (np.int64(4), np.float64(np.pi))])
    lines = text.splitlines()
    assert lines[0] == "q,A_q"
    q, value = lines[2].split(",")
    assert q == "4"
    assert float(value) == np.pi
    assert float(lines[1].split(",")[1]) == 0.1 + 0.2


def test_json_is_sorted_and_plain():
    report = {"b": np.arange(3), "a": {"x": np.float64(1.5), "flag": np.bool_(True)}, "bad": float("nan")}
    text = format_json(report)
    data = json.loads(text)
    assert data["schema"] == SCHEMA_VERSION
    assert data["b"] == [0, 1, 2]
    assert data["a"] == {"flag": True, "x": 1.5}
    assert data["bad"] is None
    assert list(data) == sorted(data)


def test_writers_create_parent_directories(tmp_path):
    csv_path = tmp_path / "out" / "table.csv"
    write_csv(("t", "x"), [(0.0, 1.0)], csv_path)
    assert csv_path.read_text() == "t,x\n0,1\n"
    json_path = tmp_path / "out" / "report.json"
    write_json({"ok": True}, json_path)
    assert json.loads(json_path.read_text()) == {"ok": True, "schema": SCHEMA_VERSION}


def test_stdout_when_no_path(capsys):
    write_csv(("q",), [(5,)])
    assert capsys.readouterr().out == "q\n5\n"


def test_json_floats_carry_seventeen_digits():
    text = format_json({"x": 0.1, "whole": 2.0, "tiny": 1e-300, "n": 3})
    assert '"x": 0.10000000000000001' in text
    assert '"whole": 2.0' in text
    assert '"n": 3' in text
    data = json.loads(text)
    assert data["x"] == 0.1
    assert data["tiny"] == 1e-300
    assert isinstance(data["whole"], float)
