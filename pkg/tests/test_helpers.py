"""Tests for the shared helpers."""

import json

import numpy as np
import pytest

from fracvar.utils.exceptions import InvalidParam
from fracvar.utils.helpers import (
    grid_frame,
    load_config_file,
    parallel_map,
    summarize,
    thread_count,
    write_frame,
)


def test_load_config_file(tmp_path):
    """Comments and blank lines are skipped; underscores become dashes."""
    path = tmp_path / "run.conf"
    path.write_text("# defaults\n\nalpha_min = 0.2\nf=sin(t) + 1\n")
    assert load_config_file(str(path)) == {"alpha-min": "0.2", "f": "sin(t) + 1"}


def test_load_config_file_reports_the_line(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("alpha=0.5\nbroken\n")
    with pytest.raises(InvalidParam, match=":2:"):
        load_config_file(str(path))


@pytest.mark.parametrize("value", ["0", "-2", "many"])
def test_thread_count_validation(mocker, value):
    mocker.patch("fracvar.utils.helpers.FRACVAR_THREADS", value)
    with pytest.raises(InvalidParam):
        thread_count()


def test_parallel_map_keeps_order(mocker):
    mocker.patch("fracvar.utils.helpers.FRACVAR_THREADS", "4")
    assert thread_count() == 4
    assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    assert parallel_map(str, []) == []


def test_write_frame_csv(tmp_path):
    """CSV output keeps 17 significant digits."""
    frame = grid_frame(np.array([0.0, 0.5]), np.array([1.0 / 3.0, 2.0]), 1e-9)
    path = tmp_path / "out.csv"
    write_frame(frame, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,value,estimate_error"
    assert lines[1] == "0,0.33333333333333331,1.0000000000000001e-09"


def test_write_frame_json(tmp_path):
    frame = grid_frame(np.array([0.0, 1.0]), np.array([2.0, 3.0]))
    path = tmp_path / "out.json"
    write_frame(frame, str(path), "json", {"n": 1})
    payload = json.loads(path.read_text())
    assert payload == {"t": [0.0, 1.0], "value": [2.0, 3.0], "config": {"n": 1}}


def test_write_frame_rejects_unknown_format(tmp_path):
    with pytest.raises(InvalidParam):
        write_frame(grid_frame(np.zeros(2), np.zeros(2)), str(tmp_path / "out.xml"), "xml")


def test_summarize():
    summary = summarize(
        {"command": "verify", "n": 64, "suites": {"boundedness": 1, "max_point": 0}, "output": None}
    )
    assert summary.startswith("SUMMARY: verify done.")
    assert "boundedness" in summary
    assert "max_point" in summary
    assert "written" not in summary
