"""Acceptance criteria, each checked at its stated tolerance."""
import json
import time

import numpy as np
import pytest

from gfmimp import band_index as bi
from gfmimp import models as m
from gfmimp import sim
from gfmimp.cli import main
from gfmimp.curves import ingest_measured_curve, write_curve_csv
from gfmimp.operating_point import pf_to_pq, solve_operating_point
from gfmimp.params import ConverterParams, GridParams, kq_pu_discrepancy
from dataclasses import replace

P = ConverterParams()
G = GridParams.from_scr(P, 10.0, 0.1)
ORACLE_FREQS = [30.0, 34.0, 38.0, 42.0, 46.0, 49.0, 51.0, 54.0, 62.0, 70.0]
MATRIX_FREQS = m.frequency_grid(41.0, 59.0, 0.5)
PFS = (1.0, 0.95, 0.9)
SCRS = (10.0, 5.0, 3.0)
RXS = (0.1, 0.3, 1.0)


def _apcl_curve(p=P, step=0.1, inertia=True):
    tier = m.tier_from_name("apcl", inertia_enabled=inertia)
    return m.sample_curve(tier, p, freqs=m.frequency_grid(1.0, 100.0, step))


def test_c01_worked_example(criterion):
    t0 = time.perf_counter()
    rep = bi.compute_band_index(_apcl_curve(P.with_pu(D_p=20, J=4)))
    dt = time.perf_counter() - t0
    want = {"f_a": 41.7, "f_b": 56.9, "delta_f1": 8.3, "delta_f2": 6.9, "delta_f": 8.3}
    got = {k: getattr(rep, k) for k in want}
    ok = all(abs(got[k] - want[k]) <= 0.3 for k in want) and dt < 1.0
    detail = ", ".join(f"{k}={got[k]:.3f} (want {want[k]})" for k in want) + f", {dt:.2f} s"
    criterion("1", ok, detail)


def test_c02_per_unit(criterion):
    vals = {"J": (P.to_pu("J"), 4.0), "D_p": (P.to_pu("D_p"), 50.0), "K_v": (P.to_pu("K_v"), 12.5)}
    ok = all(abs(a / b - 1) <= 0.005 for a, b in vals.values())
    kq = kq_pu_discrepancy(P)
    detail = ", ".join(f"{k}={a:.4f} pu" for k, (a, _) in vals.items())
    detail += f"; K_q computed {kq['K_q_pu_computed']:.3f} pu vs listed 4 (reported only)"
    criterion("2", ok, detail)


def test_c03_tier_behaviour(criterion):
    f = m.frequency_grid(1.0, 100.0, 0.1)
    ccl = m.sample_curve(m.tier_from_name("ccl"), P, freqs=f)
    f_max = ccl.freqs[np.argmax(ccl.mag)]
    nearest = np.abs(ccl.freqs - 50.0).min()
    vcl = m.sample_curve(m.tier_from_name("vcl"), P, freqs=m.frequency_grid(1.0, 100.0, 0.1, None))
    z499 = abs(vcl.values[np.isclose(vcl.freqs, 49.9)][0])
    ph = vcl.phase_deg
    ok = (abs(f_max - 50.0) == nearest and z499 < 0.05
          and np.all(ph >= -90.0) and np.all(ph <= 90.0))
    criterion("3", ok, f"CCL max at {f_max:.1f} Hz; VCL |Z(49.9)|={z499:.4f} ohm; "
                       f"VCL phase range [{ph.min():.1f}, {ph.max():.1f}] deg")


def _rel_coeff_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return np.inf
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def test_c04_algebraic_identity(criterion):
    errs = []
    for a, b in ((m.vcl_impedance(P), m.vcl_closed_form(P)),
                 (m.apcl_simplified_matrix(P, power_gain=1.0)[1, 0], m.coupling_closed_form(P))):
        errs += [_rel_coeff_err(a.num.coeffs, b.num.coeffs), _rel_coeff_err(a.den.coeffs, b.den.coeffs)]
    criterion("4", max(errs) <= 1e-12, f"max relative coefficient error {max(errs):.2e}")


def _oracle_cases():
    g3 = GridParams.from_scr(P, 3.0, 0.3)
    op = solve_operating_point(P, G, P.P_ref, P.Q_ref)
    op3 = solve_operating_point(P, g3, P.P_ref, P.Q_ref)
    f = np.array(ORACLE_FREQS)
    return [
        ("CCL_ONLY", sim.make_model(P, G, op, "ccl"), m.dq_to_positive_sequence(m.ccl_impedance(P), f)),
        ("CCL_VCL", sim.make_model(P, G, op, "vcl"), m.dq_to_positive_sequence(m.vcl_impedance(P), f)),
        ("APCL_SIMPLIFIED", sim.make_model(P, G, op, "apcl"),
         m.dq_to_positive_sequence(m.apcl_simplified_matrix(P), f)),
        ("FULL_NUMERIC", sim.make_model(P, g3, op3, "full"),
         m.dq_to_positive_sequence(m.full_impedance_numeric(P, g3, op3, "full"), f)),
    ]


def test_c05_oracle_equivalence(criterion):
    parts, ok = [], True
    for name, model, z_ref in _oracle_cases():
        c1, _, e1 = sim.scan_sweep(model, ORACLE_FREQS, 0.01)
        c2, _, e2 = sim.scan_sweep(model, ORACLE_FREQS, 0.005)
        if e1 or e2:
            ok = False
            parts.append(f"{name}: scan errors {e1 + e2}")
            continue
        mag = float(np.max(np.abs(np.abs(c1.values) / np.abs(z_ref) - 1)))
        ph = float(np.max(np.abs(np.angle(c1.values / z_ref, deg=True))))
        lin = float(np.max(np.abs(c2.values - c1.values) / np.abs(c1.values)))
        ok &= mag <= 0.02 and ph <= 2.0 and lin <= 0.01
        parts.append(f"{name} {100 * mag:.2f}%/{ph:.2f}deg lin {100 * lin:.3f}%")
    criterion("5", ok, "; ".join(parts))


def test_c06_simplified_fidelity(criterion):
    op = solve_operating_point(P, G, P.P_ref, P.Q_ref)
    f = m.frequency_grid(1.0, 100.0, 0.1)
    simp = m.sample_curve(m.tier_from_name("apcl"), P, G, op, f)
    full = m.sample_curve(m.ModelTier(m.FULL_NUMERIC, stack="apcl"), P, G, op, f)
    band = (f >= 40) & (f <= 60) & (np.abs(f - 50) > 0.2)
    dev = float(np.max(np.abs(20 * np.log10(simp.mag[band] / full.mag[band]))))
    neg = []
    for c in (simp, full):
        rep = bi.compute_band_index(c)
        inside = (c.freqs > rep.f_a) & (c.freqs < rep.f_b)
        neg.append(bool(np.any(c.values.real[inside] < 0)))
    rpcl = m.sample_curve(m.ModelTier(m.FULL_NUMERIC, stack="full"), P, G, op, f)
    dev_rpcl = float(np.max(np.abs(20 * np.log10(simp.mag[band] / rpcl.mag[band]))))
    criterion("6", dev <= 2.0 and all(neg),
              f"max |dB| deviation {dev:.3f} (APCL + inner loops), Re<0 inside (f_a, f_b): {neg}; "
              f"with RPCL added {dev_rpcl:.2f} dB (info)")


def test_c07a_delta_f_monotone(criterion):
    d_dp = [bi.compute_band_index(_apcl_curve(P.with_pu(D_p=d))).delta_f for d in (10, 20, 30, 40, 50)]
    d_j = [bi.compute_band_index(_apcl_curve(P.with_pu(J=j))).delta_f for j in (1, 2, 4, 8)]
    ok = all(b <= a for a, b in zip(d_dp, d_dp[1:])) and all(b <= a for a, b in zip(d_j, d_j[1:]))
    criterion("7a", ok, f"df over D_p {np.round(d_dp, 3).tolist()}, over J {np.round(d_j, 3).tolist()}")


def test_c07b_peak_across_damping(criterion):
    peaks = [abs(bi.compute_band_index(_apcl_curve(P.with_pu(D_p=d))).Z_peak) for d in (10, 20, 30, 40, 50)]
    spread = 20 * np.log10(max(peaks) / min(peaks))
    criterion("7b", spread < 1.0, f"Z_peak {np.round(peaks, 2).tolist()} ohm, spread {spread:.2f} dB")


@pytest.fixture(scope="module")
def scan_matrix():
    """Scanned curves over PF x SCR x R/X on the APCL + inner-loop stack."""
    out = {}
    for pf in PFS:
        P_, Q_ = pf_to_pq(P, pf)
        p = replace(P, P_ref=P_, Q_ref=Q_)
        for scr in SCRS:
            for rx in RXS:
                g = GridParams.from_scr(p, scr, rx)
                model = sim.make_model(p, g, solve_operating_point(p, g, P_, Q_), "apcl")
                curve, _, errors = sim.scan_sweep(model, MATRIX_FREQS)
                out[(pf, scr, rx)] = (curve, errors, model)
    return out


def _matrix_reports(scan_matrix):
    return {k: bi.compute_band_index(c) for k, (c, _, _) in scan_matrix.items()}


def _nonincreasing_along(reps, axis):
    bad = []
    keys = sorted(reps)
    for k in keys:
        seq_keys = {"pf": [(v, k[1], k[2]) for v in PFS], "scr": [(k[0], v, k[2]) for v in SCRS],
                    "rx": [(k[0], k[1], v) for v in RXS]}[axis]
        if seq_keys[0] != k:
            continue
        z = [abs(reps[s].Z_peak) for s in seq_keys]
        if any(b > a for a, b in zip(z, z[1:])):
            bad.append((k, np.round(z, 3).tolist()))
    return bad


def test_c07c_peak_trends(scan_matrix, criterion):
    errors = [e for _, e, _ in scan_matrix.values() if e]
    reps = _matrix_reports(scan_matrix)
    res = {axis: _nonincreasing_along(reps, axis) for axis in ("pf", "scr", "rx")}
    detail = "; ".join(f"{a}: {len(v)} of 9 sequences increase" for a, v in res.items())
    first = next((v[0] for v in res.values() if v), None)
    if first:
        detail += f"; e.g. {first}"
    criterion("7c", not errors and not any(res.values()), detail)


def test_c07d_delta_f_spread(scan_matrix, criterion):
    d = np.array([r.delta_f for r in _matrix_reports(scan_matrix).values()])
    spread = (d.max() - d.min()) / d.mean()
    criterion("7d", spread < 0.30, f"df in [{d.min():.2f}, {d.max():.2f}] Hz, mean {d.mean():.2f}, "
                                   f"spread {100 * spread:.1f}% of mean")


def test_c08_compliance(tmp_path, criterion):
    nerc = bi.compliance_preset("nerc")
    vcl = m.sample_curve(m.tier_from_name("vcl"), P, freqs=m.frequency_grid(0.0, 300.0, 0.1, None))
    v_vcl = bi.overall_verdict(bi.compliance_check(vcl, nerc))
    op = solve_operating_point(P, G, P.P_ref, P.Q_ref)
    full = m.sample_curve(m.ModelTier(m.FULL_NUMERIC, stack="full"), P, G, op,
                          m.frequency_grid(0.0, 300.0, 0.1))
    verdict = bi.compliance_check(full, nerc)[0]
    rep = bi.compute_band_index(full)
    inside = [r for r in verdict.violations if r[0] < rep.f_b and r[1] > rep.f_a]
    codes = (main(["check", "--preset", "nerc", "--tier", "vcl", "--out", str(tmp_path / "a")]),
             main(["check", "--preset", "nerc", "--tier", "full", "--stack", "full",
                   "--out", str(tmp_path / "b")]),
             main(["check", "--preset", "nope", "--tier", "vcl", "--out", str(tmp_path / "c")]))
    ok = v_vcl == "pass" and verdict.status == "fail" and bool(inside) and codes == (0, 5, 2)
    criterion("8", ok, f"VCL {v_vcl}; full stack {verdict.status}, Re<0 on {verdict.violations} "
                       f"with (f_a, f_b) = ({rep.f_a:.2f}, {rep.f_b:.2f}); exit codes {codes}")


def test_c09_instability_demo(criterion):
    t0 = time.perf_counter()
    rep = sim.run_instability_demo(P)
    dt = time.perf_counter() - t0
    f = rep.findings
    err = f.get("coupling_error_hz")
    env = f.get("recovery_envelope_pu", [])
    ok = (f.get("oscillation_detected") and err is not None and err < 0.5
          and f.get("recovery_monotone") and len(env) >= 3 and dt < 120)
    criterion("9", bool(ok),
              f"P osc {f.get('p_oscillation_hz'):.2f} Hz, i sidebands {f.get('i_sub_hz'):.2f}/"
              f"{f.get('i_super_hz'):.2f} Hz (reference 38.7/61.3, not asserted), |f1+f2-2fN|={err:.4f} Hz, "
              f"recovery envelope {np.round(env, 4).tolist()}, {dt:.1f} s")


def test_c10_pipeline_closure(scan_matrix, tmp_path, criterion):
    curve, _, model = scan_matrix[(1.0, 10.0, 0.1)]
    mem = bi.compute_band_index(curve)
    a = write_curve_csv(curve, tmp_path / "a.csv")
    back = bi.compute_band_index(ingest_measured_curve(a))
    again, _, _ = sim.scan_sweep(model, MATRIX_FREQS)
    b = write_curve_csv(again, tmp_path / "b.csv")
    same_scan = a.read_bytes() == b.read_bytes() and (
        a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes())
    for d in ("c1", "c2"):
        main(["curve", "--tier", "ccl,vcl,apcl", "--out", str(tmp_path / d)])
    same_cli = all((tmp_path / "c1" / n).read_bytes() == (tmp_path / "c2" / n).read_bytes()
                   for n in ("curve_ccl.csv", "curve_vcl.csv", "curve_apcl.csv", "curve_apcl.json"))
    ok = back.delta_f == mem.delta_f and back.f_a == mem.f_a and same_scan and same_cli
    criterion("10", ok, f"df in memory {mem.delta_f!r}, re-ingested {back.delta_f!r}; "
                        f"repeat scan identical {same_scan}; repeat CLI identical {same_cli}")
