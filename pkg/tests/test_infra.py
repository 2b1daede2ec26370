import csv

import numpy as np
import pytest

from rydmirror.output import read_csv, write_csv, write_summary
from rydmirror.parallel import pmap, set_default_threads, default_threads
from rydmirror.rng import stream


def test_stream_independence_and_reproducibility():
    assert np.array_equal(stream(1, 2).random(5), stream(1, 2).random(5))
    assert not np.array_equal(stream(1, 2).random(5), stream(1, 3).random(5))
    assert not np.array_equal(stream(1).random(5), stream(2).random(5))


def test_pmap_order_and_threads():
    assert pmap(lambda v: v * v, range(20), threads=4) == [v * v for v in range(20)]
    set_default_threads(3)
    try:
        assert default_threads() == 3
    finally:
        set_default_threads(1)


def test_csv_round_trip_rfc4180(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["r_um", "value"], [np.array([1.0, 2.5]), np.array([1 / 3, -2e-9])])
    raw = p.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["r_um", "value"]
    back = read_csv(p)
    assert back["value"] == pytest.approx([1 / 3, -2e-9], rel=1e-9)


def test_csv_rejects_ragged(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", ["a", "b"], [np.ones(2), np.ones(3)])


def test_summary_is_json(tmp_path):
    import json

    p = write_summary(tmp_path / "s.json", dict(a=np.float64(1.5), b=np.int64(2), c=True, d=np.array([1, 2])))
    assert json.loads(p.read_text()) == dict(a=1.5, b=2, c=True, d=[1, 2])
