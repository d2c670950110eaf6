import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

from gfmimp.operating_point import (InfeasibleOperatingPoint, build_ssop_matrices, forward_powers,
                                    pf_to_pq, rated_operating_point, solve_operating_point)
from gfmimp.params import ConverterParams, GridParams


def _two_bus_oracle(p, g, P, Q):
    """Independent polar power flow, unknowns |V| and angle."""
    z = complex(g.R_g, p.omega_N * g.L_g)

    def res(x):
        v = x[0] * np.exp(1j * x[1])
        s = 1.5 * v * np.conj((v - g.V_grid) / z)
        return [(s.real - P) / p.S_N, (s.imag - Q) / p.S_N]

    vm, th = fsolve(res, [p.V_N, 0.05], xtol=1e-13)
    return vm, th


def test_stiff_grid_rated():
    p = ConverterParams()
    op = solve_operating_point(p, GridParams.stiff(p), 200e3, 0.0)
    assert op.V_d0 == pytest.approx(563.0)
    assert op.I_d0 == pytest.approx(236.8, abs=0.05)
    assert op.I_q0 == pytest.approx(0.0, abs=1e-9)


def test_against_two_bus_oracle():
    p = ConverterParams()
    g = GridParams.from_scr(p, 5.0, 0.1)
    op = solve_operating_point(p, g, 100e3, 0.0)
    vm, th = _two_bus_oracle(p, g, 100e3, 0.0)
    assert op.V_d0 == pytest.approx(vm, rel=1e-8)
    assert op.theta_0 == pytest.approx(th, rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-0.5, 0.5), st.floats(3.0, 20.0), st.floats(0.0, 1.0))
def test_forward_powers_round_trip(P, Q, scr, rx):
    p = ConverterParams()
    g = GridParams.from_scr(p, scr, rx)
    try:
        op = solve_operating_point(p, g, P * p.S_N, Q * p.S_N)
    except InfeasibleOperatingPoint:
        return
    P2, Q2 = forward_powers(op)
    assert P2 == pytest.approx(P * p.S_N, abs=1e-9 * p.S_N)
    assert Q2 == pytest.approx(Q * p.S_N, abs=1e-9 * p.S_N)
    assert op.V_q0 == 0.0
    if P or Q:
        assert op.pf == pytest.approx(P / np.hypot(P, Q))


def test_infeasible_reported():
    p = ConverterParams()
    g = GridParams.from_scr(p, 0.5, 0.1)
    with pytest.raises(InfeasibleOperatingPoint):
        solve_operating_point(p, g, 5 * p.S_N, 0.0)


def test_rated_ssop_entries():
    p = ConverterParams()
    op = solve_operating_point(p, GridParams.stiff(p), p.S_N, 0.0)
    b = build_ssop_matrices(op, p)
    assert not b.extrapolated
    assert b.B_Vo_v[1, 0] == pytest.approx(316969.0)
    assert b.B_Ic_i[1, 0] == pytest.approx(55696.0)
    for m in b.as_dict().values():
        assert np.count_nonzero(m) == 1


def test_off_rated_ssop_extrapolated():
    p = ConverterParams()
    op = rated_operating_point(p, GridParams.from_scr(p, 3.0, 1.0))
    b = build_ssop_matrices(op, p)
    assert b.extrapolated
    assert b.B_Vo_v[1, 0] == pytest.approx(op.V_d0 ** 2)
    assert np.all(b.zeroed("B_Vo_v").B_Vo_v == 0)
    with pytest.raises(KeyError):
        b.zeroed("B_nope")


def test_pf_split():
    p = ConverterParams()
    P, Q = pf_to_pq(p, 0.9)
    assert P == pytest.approx(0.9 * p.S_N)
    assert np.hypot(P, Q) == pytest.approx(p.S_N)
