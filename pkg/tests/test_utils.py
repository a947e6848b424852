import csv
import json
from pathlib import Path

import numpy as np
import pytest

from grid_isle.utils import assert_type, flatten_row, to_jsonable, write_csv, write_json


def test_assert_type():
    assert assert_type(int, 3) == 3
    with pytest.raises(TypeError, match="Expected int, got str"):
        assert_type(int, "3")


def test_to_jsonable():
    obj = {1: np.float64(0.5), "s": {3, 1}, "a": np.arange(2), "p": Path("x")}
    assert to_jsonable(obj) == {"1": 0.5, "s": [1, 3], "a": [0, 1], "p": "x"}


def test_write_json_creates_folders(tmp_path: Path):
    path = tmp_path / "a" / "b.json"
    write_json(path, {"x": (1, 2)})
    assert json.loads(path.read_text()) == {"x": [1, 2]}


def test_flatten_row_uses_dotted_columns():
    row = flatten_row({"cost": {"pre": 1.0}, "steps": [{"cut": "1-2"}]})
    assert row == {"cost.pre": 1.0, "steps.0.cut": "1-2"}


def test_write_csv(tmp_path: Path):
    path = tmp_path / "rows.csv"
    write_csv(path, ["t", "v"], [[0.0, np.int64(1)], [0.5, 2]])
    with open(path) as f:
        assert list(csv.reader(f)) == [["t", "v"], ["0.0", "1"], ["0.5", "2"]]
