import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinetic_cpw.errors import DataError
from kinetic_cpw.fit.resonance import S21Trace
from kinetic_cpw.io import atomic_write_text, dumps_json, read_table, read_trace, write_table, write_trace


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_rows(tmp_path):
    p = write(tmp_path, "freq_hz,re_s21,im_s21\n1e9,1,0\n2e9,0.5,0.1\n3e9,1,-0.0\n")
    trace = read_trace(p)
    assert len(trace) == 3
    assert trace.s21[1] == 0.5 + 0.1j
    assert trace.power_dbm is None


def test_power_column(tmp_path):
    p = write(tmp_path, "freq_hz,re_s21,im_s21,power_dbm\n1,1,0,-60\n2,1,0,-60\n")
    assert read_trace(p).power_dbm == -60.0
    p = write(tmp_path, "freq_hz,re_s21,im_s21,power_dbm\n1,1,0,-60\n2,1,0,-50\n")
    with pytest.raises(DataError) as info:
        read_trace(p)
    assert info.value.line == 3


def test_decreasing_rows_report_line(tmp_path):
    p = write(tmp_path, "freq_hz,re_s21,im_s21\n1,1,0\n3,1,0\n2,1,0\n")
    with pytest.raises(DataError) as info:
        read_trace(p)
    assert info.value.line == 4
    assert "line 4" in str(info.value)


@pytest.mark.parametrize(
    "body,line",
    [
        ("1,1,0\n2,abc,0\n", 3),
        ("1,1,0\n2,1\n", 3),
        ("1,1,0\n2,nan,0\n", 3),
        ("1,1,0\n2,1,inf\n", 3),
        ("1,1,0\n2,1,0,5\n", 3),
    ],
)
def test_malformed_rows(tmp_path, body, line):
    p = write(tmp_path, "freq_hz,re_s21,im_s21\n" + body)
    with pytest.raises(DataError) as info:
        read_trace(p)
    assert info.value.line == line


@pytest.mark.parametrize("header", ["freq,re,im", "freq_hz;re_s21;im_s21", "re_s21,freq_hz,im_s21", ""])
def test_bad_header(tmp_path, header):
    p = write(tmp_path, header + "\n1,1,0\n")
    with pytest.raises(DataError) as info:
        read_trace(p)
    assert info.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_trace(tmp_path / "nope.csv")


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 50),
    seed=st.integers(0, 2**32 - 1),
    power=st.one_of(st.none(), st.floats(-150, 20)),
)
def test_round_trip_is_identity(tmp_path_factory, n, seed, power):
    rng = np.random.default_rng(seed)
    f = np.cumsum(rng.uniform(1e-3, 1e6, n)) + 6e9
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    trace = S21Trace(f, z, power)
    path = tmp_path_factory.mktemp("rt") / "trace.csv"
    back = read_trace(write_trace(path, trace))
    assert np.array_equal(back.freq, trace.freq)
    assert np.array_equal(back.s21, trace.s21)
    assert back.power_dbm == power


def test_header_is_exact(tmp_path):
    path = write_trace(tmp_path / "x.csv", S21Trace(np.array([1.0, 2.0]), np.array([1, 1j])))
    assert path.read_text().splitlines()[0] == "freq_hz,re_s21,im_s21"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["out.txt"]


def test_atomic_write_failure_keeps_old_file(tmp_path, monkeypatch):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "old")

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_table_round_trip(tmp_path):
    rows = [[1, 0.1, 1 / 3], [2, 1e-300, 6.02214076e23]]
    path = write_table(tmp_path / "t.csv", ["i", "a_hz", "b"], rows)
    table = read_table(path)
    assert list(table) == ["i", "a_hz", "b"]
    assert table["b"][0] == 1 / 3
    assert table["a_hz"][1] == 1e-300


def test_json_full_precision_and_nonfinite():
    text = dumps_json({"x": 0.1 + 0.2, "arr": np.array([1.5, np.inf]), "n": np.int64(3), "flag": np.bool_(True)})
    data = json.loads(text)
    assert data["x"] == 0.1 + 0.2
    assert data["arr"] == [1.5, None]
    assert data["n"] == 3 and data["flag"] is True
