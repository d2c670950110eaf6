import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfmimp.curves import CurveFormatError, ImpedanceCurve, ingest_measured_curve, write_curve_csv

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_round_trip_exact(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("c") / "c.csv"
    f = np.arange(len(vals)) * 0.1 + 1.0
    z = np.array([complex(a, b) for a, b in vals])
    write_curve_csv(ImpedanceCurve(f, z, "test"), path)
    back = ingest_measured_curve(path)
    assert np.array_equal(back.freqs, f) and np.array_equal(back.values, z)


def test_sidecar(tmp_path):
    c = ImpedanceCurve([1.0, 2.0], [1 + 1j, 2 - 1j], "CCL_ONLY", "abc", meta={"x": np.float64(1.5)})
    write_curve_csv(c, tmp_path / "a.csv")
    side = json.loads((tmp_path / "a.json").read_text())
    assert side["provenance"] == "CCL_ONLY" and side["meta"]["x"] == 1.5 and side["n_points"] == 2


def test_optional_columns(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("freq_hz,re_ohm,im_ohm\n10,1,2\n\n20,3,4\n")
    c = ingest_measured_curve(p)
    assert c.provenance.startswith("measured:")
    assert c.values[1] == 3 + 4j


@pytest.mark.parametrize("text", [
    "",
    "f,re,im\n1,2,3\n",
    "freq_hz,re_ohm,im_ohm\n1,2\n",
    "freq_hz,re_ohm,im_ohm\n1,2,nan\n",
    "freq_hz,re_ohm,im_ohm\n1,2,3\n1,2,3\n",
    "freq_hz,re_ohm,im_ohm\n2,2,3\n1,2,3\n",
    "freq_hz,re_ohm,im_ohm\n",
])
def test_malformed(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CurveFormatError):
        ingest_measured_curve(p)


def test_missing_file(tmp_path):
    with pytest.raises(CurveFormatError):
        ingest_measured_curve(tmp_path / "none.csv")


def test_curve_validation():
    with pytest.raises(ValueError):
        ImpedanceCurve([2.0, 1.0], [1j, 1j], "x")
    with pytest.raises(ValueError):
        ImpedanceCurve([1.0], [1j, 1j], "x")
