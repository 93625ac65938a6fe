import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carryover import (
    DataError,
    Dataset,
    DgpConfig,
    Support,
    TreatmentPath,
    load_dataset,
    save_dataset,
    simulate,
)

BIN = Support.categorical(2)
REAL = Support.continuous()


def test_load_rows_direct():
    rows = [
        {"a0": 0, "l1": 1, "a1": 1, "y": 0.5},
        {"a0": 1, "l1": 0, "a1": 0, "y": -1.25},
        {"a0": 1, "l1": 1, "a1": 1, "y": 3.0},
    ]
    ds = load_dataset(rows, BIN, REAL)
    assert ds.n == 3
    assert ds.unit(1).y == -1.25
    assert ds.l1.dtype == np.int64 and ds.y.dtype == np.float64


def test_treatment_out_of_domain_names_row():
    rows = [{"a0": 0, "l1": 0, "a1": 0, "y": 1.0}, {"a0": 2, "l1": 0, "a1": 0, "y": 1.0}]
    with pytest.raises(DataError, match=r"treatment must be 0 or 1 \(row 2"):
        load_dataset(rows, BIN, REAL)


def test_level_outside_support():
    with pytest.raises(DataError, match="outside declared support"):
        load_dataset([{"a0": 0, "l1": 2, "a1": 0, "y": 1.0}], BIN, REAL)


def test_missing_field_and_empty_input():
    with pytest.raises(DataError, match="field y"):
        load_dataset([{"a0": 0, "l1": 0, "a1": 0}], BIN, REAL)
    with pytest.raises(DataError, match="no records"):
        load_dataset([], BIN, REAL)
    with pytest.raises(DataError, match="no records"):
        load_dataset(io.StringIO("unit_id,a0,l1,a1,y\n"), BIN, REAL)


def test_malformed_csv_value():
    text = "unit_id,a0,l1,a1,y\nu1,0,0,1,abc\n"
    with pytest.raises(DataError, match=r"row 1, field y"):
        load_dataset(io.StringIO(text), BIN, REAL)


def test_dataset_is_immutable():
    ds = simulate(DgpConfig(n=5))
    with pytest.raises(AttributeError):
        ds.l_support = REAL
    with pytest.raises(ValueError):
        ds.y[0] = 1.0


def test_single_row_file_layout():
    ds = Dataset([1], [0], [1], [0.25], BIN, REAL, ["unit-a"])
    buf = io.StringIO()
    save_dataset(ds, buf)
    assert buf.getvalue() == "unit_id,a0,l1,a1,y\nunit-a,1,0,1,0.25\n"


def test_empty_selection_errors_before_write(tmp_path):
    ds = simulate(DgpConfig(n=10))
    target = tmp_path / "never.csv"
    with pytest.raises(DataError):
        save_dataset(ds.select(np.zeros(10, bool)), target)
    assert not target.exists()


def test_round_trip_simulated_file(tmp_path):
    ds = simulate(DgpConfig(n=1000, delta=0.3, eta=-0.1, noise_y=1.0, noise_l=0.5, seed=5))
    path = tmp_path / "d.csv"
    save_dataset(ds, path)
    assert load_dataset(path, ds.l_support, ds.y_support) == ds
    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.startswith(b"unit_id,a0,l1,a1,y\n")


def test_continuous_l_round_trip(tmp_path):
    ds = simulate(DgpConfig(n=300, l_kind="continuous", alpha_l=0.7, noise_l=1.0, noise_y=1.0, seed=2))
    path = tmp_path / "c.csv"
    save_dataset(ds, path)
    assert load_dataset(path, REAL, REAL) == ds


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 3), st.integers(0, 1), finite,
                          st.text(alphabet="abc,\"x 1", max_size=6)),
                min_size=1, max_size=30))
def test_round_trip_property(rows):
    a0, l1, a1, y, ids = zip(*rows)
    ds = Dataset(a0, l1, a1, y, Support.categorical(4), REAL, ids)
    buf = io.StringIO()
    save_dataset(ds, buf)
    back = load_dataset(io.StringIO(buf.getvalue()), Support.categorical(4), REAL)
    assert back == ds
    assert [u.unit_id for u in back] == list(ids)


def test_treatment_path_parse():
    assert TreatmentPath.parse("1,0") == TreatmentPath(1, 0)
    assert TreatmentPath.parse([0, 1]) == TreatmentPath(0, 1)
    with pytest.raises(ValueError):
        TreatmentPath.parse("1,2")
    with pytest.raises(ValueError):
        TreatmentPath.parse("1")
