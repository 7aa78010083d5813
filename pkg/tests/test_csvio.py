import numpy as np
import pytest

from roibid import csvio


def test_shortest_round_trip():
    for x in [0.1, 1 / 3, 2.9999999999999996, 1e-300, 123456.789, -0.0]:
        assert float(csvio.fmt(x)) == x
    assert csvio.fmt(0.1) == "0.1"
    assert csvio.fmt(np.float64(0.2)) == "0.2"
    assert csvio.fmt(np.int64(7)) == "7"
    assert csvio.fmt(True) == "1" and csvio.fmt(np.bool_(False)) == "0"
    assert csvio.fmt(float("inf")) == "inf"
    assert csvio.fmt(np.str_("explore")) == "explore"


def test_round_trip(tmp_path):
    rows = [(0.5, 0.1, "ROIBinding", -1e-17, 0.05)]
    path = csvio.write_csv(tmp_path / "r.csv", "revenue", rows)
    name, got = csvio.read_csv(path, "revenue")
    assert name == "revenue"
    assert float(got[0]["roi_slack"]) == -1e-17 and got[0]["class"] == "ROIBinding"


def test_header_versioned(tmp_path):
    path = csvio.write_csv(tmp_path / "a.csv", "pricing", [(1, 0.5, 1, "explore")])
    assert path.read_text().splitlines()[0] == "#schema=pricing/1"


def test_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("#schema=pricing/2\nt,price,take,phase\n")
    with pytest.raises(csvio.SchemaError):
        csvio.read_csv(path)
    path.write_text("t,price,take,phase\n")
    with pytest.raises(csvio.SchemaError):
        csvio.read_csv(path)


def test_rejects_wrong_schema_and_columns(tmp_path):
    path = csvio.write_csv(tmp_path / "a.csv", "pricing", [])
    with pytest.raises(csvio.SchemaError):
        csvio.read_csv(path, "run")
    path.write_text("#schema=pricing/1\nt,price,phase\n")
    with pytest.raises(csvio.SchemaError):
        csvio.read_csv(path)


def test_row_width_checked():
    with pytest.raises(csvio.SchemaError):
        csvio.render("pricing", [(1, 2)])
    with pytest.raises(csvio.SchemaError):
        csvio.render("nope", [])


def test_meta_sidecar(tmp_path):
    path = csvio.write_meta(tmp_path, seed=3)
    assert '"seed": 3' in path.read_text() and '"created"' in path.read_text()
