import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gfmimp import band_index as bi
from gfmimp import models as m
from gfmimp.curves import ImpedanceCurve
from gfmimp.params import ConverterParams

P = ConverterParams()


def _synthetic(fa, fb, step=0.1, f_N=50.0):
    """|Z| with local minima at fa and fb and a pole-like rise at f_N."""
    f = m.frequency_grid(30.0, 70.0, step, f_N)
    mag = 1.0 / np.abs(f - f_N) + 0.02 * np.where(f < f_N, (f - fa) ** 2, (f - fb) ** 2)
    return ImpedanceCurve(f, mag * np.exp(0.3j), "synthetic")


def _apcl(step=0.1, **pu):
    p = P.with_pu(**pu) if pu else P
    return m.sample_curve(m.tier_from_name("apcl"), p, freqs=m.frequency_grid(1, 100, step))


def test_exclusion_arithmetic():
    d = bi.exclusion_bandwidth(41.7, 56.9)
    assert d["delta_f1"] == pytest.approx(8.3)
    assert d["delta_f2"] == pytest.approx(6.9)
    assert d["delta_f"] == pytest.approx(8.3)
    with pytest.raises(bi.BandIndexError):
        bi.exclusion_bandwidth(51.0, 56.0)


def test_synthetic_corners_recovered():
    fa, fb = bi.find_corner_frequencies(_synthetic(42.0, 57.0))
    # true minima of the continuous function on a fine grid
    x = np.linspace(35, 65, 300000)
    y = 1.0 / np.abs(x - 50) + 0.02 * np.where(x < 50, (x - 42) ** 2, (x - 57) ** 2)
    below, above = x < 49.9, x > 50.1
    assert fa == pytest.approx(x[below][np.argmin(y[below])], abs=0.02)
    assert fb == pytest.approx(x[above][np.argmin(y[above])], abs=0.02)


def test_vcl_has_no_corner():
    c = m.sample_curve(m.tier_from_name("vcl"), P, freqs=m.frequency_grid(1, 100, 0.1, None))
    with pytest.raises(bi.NoCornerError) as exc:
        bi.find_corner_frequencies(c)
    assert exc.value.sides == ("below", "above")


def test_grid_checks():
    f = np.array([45.0, 46.0, 47.0, 48.0, 49.0, 51.0, 52.0, 53.0, 54.0, 55.0])
    with pytest.raises(bi.BandIndexError):
        bi.find_corner_frequencies(ImpedanceCurve(f, np.ones(10) + 0j, "x"))
    f = np.concatenate([np.arange(40.0, 50.0, 0.5), np.arange(51.0, 60.0, 1.0)])
    with pytest.raises(bi.BandIndexError):
        bi.find_corner_frequencies(ImpedanceCurve(f, np.ones(len(f)) + 0j, "x"))


def test_plateau_bridged():
    m_ = np.array([5.0, 4.0, 3.0, 3.0, 3.0, 4.0, 5.0])
    assert bi._discrete_minima(m_) == [3]
    m_ = np.array([5.0, 4.0, 3.0, 3.0, 3.0, 3.0, 3.0, 4.0])
    assert bi._discrete_minima(m_) == []


def test_median_filter_removes_spike():
    c = _apcl()
    fa, fb = bi.find_corner_frequencies(c)
    noisy = c.values.copy()
    k = int(np.argmin(np.abs(c.freqs - 47.0)))
    noisy[k] *= 0.5
    spiky = ImpedanceCurve(c.freqs, noisy, "noisy")
    fa2, fb2 = bi.find_corner_frequencies(spiky, median_filter=True)
    assert fa2 == pytest.approx(fa, abs=0.15) and fb2 == pytest.approx(fb, abs=0.15)
    rep = bi.compute_band_index(spiky, median_filter=True)
    assert rep.method_notes["median_prefilter"] is True


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_invariance(k):
    c = _apcl()
    assert bi.find_corner_frequencies(c.scaled(k)) == pytest.approx(bi.find_corner_frequencies(c), abs=1e-9)


def test_grid_refinement_stability():
    coarse = bi.find_corner_frequencies(_apcl(0.2))
    fine = bi.find_corner_frequencies(_apcl(0.1))
    assert np.all(np.abs(np.subtract(coarse, fine)) < 0.2)


@settings(max_examples=20, deadline=None)
@given(st.floats(10.0, 60.0), st.floats(1.0, 8.0))
def test_report_invariants(dp, j):
    rep = bi.compute_band_index(_apcl(D_p=dp, J=j))
    assert rep.f_a < rep.f_N < rep.f_b
    assert rep.delta_f == max(rep.delta_f1, rep.delta_f2)
    assert rep.f_a <= rep.f_peak <= rep.f_b


def test_peak_at_sample_nearest_fundamental():
    rep = bi.compute_band_index(_apcl())
    assert rep.f_peak in (49.9, 50.1)


def test_peak_grows_with_refinement():
    a = bi.compute_band_index(_apcl(0.1)).Z_peak
    b = bi.compute_band_index(_apcl(0.05)).Z_peak
    assert abs(b) > abs(a)


@pytest.mark.parametrize("name,bands", [
    ("nerc", ((0.0, 300.0),)),
    ("fingrid", ((0.0, 47.0), (53.0, 250.0))),
    ("china", ((1.0, 45.0), (55.0, 1000.0))),
    ("unifi", ((10.0, 46.0), (54.0, 90.0))),
])
def test_presets(name, bands):
    assert bi.compliance_preset(name).required_bands == bands


def test_preset_60hz_and_unknown():
    assert bi.compliance_preset("unifi", 60.0).excluded_band == (56.0, 64.0)
    with pytest.raises(KeyError):
        bi.compliance_preset("ieee")


def test_band_set_validation(tmp_path):
    with pytest.raises(ValueError):
        bi.ComplianceBandSet("x", ((5.0, 1.0),))
    with pytest.raises(ValueError):
        bi.ComplianceBandSet("x", ((1.0, 10.0), (5.0, 20.0)))
    path = tmp_path / "b.json"
    path.write_text(json.dumps({"name": "mine", "required_bands": [[1, 40], [60, 90]]}))
    assert bi.load_band_set(path).required_bands == ((1.0, 40.0), (60.0, 90.0))


def test_compliance_sampling_and_gaps():
    f = np.array([10.0, 20.0, 30.0, 40.0])
    z = np.array([1.0, -1.0, -2.0, 1.0]) + 0j
    v = bi.compliance_check(ImpedanceCurve(f, z, "x"), bi.ComplianceBandSet("b", ((0.0, 50.0), (60.0, 70.0))))
    assert v[0].status == "fail" and v[0].first_violation_hz == 20.0
    assert v[0].violations == [(20.0, 30.0)]
    assert v[0].untested == [(0.0, 10.0), (40.0, 50.0)]
    assert v[1].status == "untested" and v[1].n_samples == 0
    assert bi.overall_verdict(v) == "fail"
    assert bi.overall_verdict(v[1:]) == "untested"


def test_vcl_passes_nerc():
    c = m.sample_curve(m.tier_from_name("vcl"), P, freqs=m.frequency_grid(0, 300, 0.1, None))
    assert bi.overall_verdict(bi.compliance_check(c, bi.compliance_preset("nerc"))) == "pass"


def test_report_serialisation():
    rep = bi.compute_band_index(_apcl(), bands=bi.compliance_preset("unifi"))
    d = json.loads(rep.to_json())
    assert d["exclusion_band"] == [pytest.approx(50 - rep.delta_f), pytest.approx(50 + rep.delta_f)]
    assert len(d["verdicts"]) == 2
    assert "df" in rep.summary()
