"""Compiled averaged-model equations and integration loops.

Everything here works on flat float arrays so numba can compile it. The
public wrappers live in :mod:`gfmimp.sim`.

State vector (grid frame rotating at omega_N):

    0,1  i_d, i_q    converter current, positive towards the grid
    2    delta       converter angle relative to the grid frame
    3    omega       APCL frequency
    4,5  xv_d, xv_q  voltage-controller integrators (converter frame)
    6,7  xi_d, xi_q  current-controller integrators (converter frame)
    8    xq          RPCL integrator (volts added to V_N)
"""
import math

import numpy as np
from numba import njit

N_STATE = 9

# parameter vector layout
LF, LG, RG, KPI, KII, KPV, KIV, JJ, DP, KV, KQ, VN, WN, PREF, QREF, VREF0, IREFD, IREFQ, \
    USE_VCL, USE_APCL, USE_RPCL = range(21)
N_PRM = 21


@njit(cache=True)
def algebra(x, prm, vg):
    """Return (u, v, P, Q, omega) for state ``x`` and grid source ``vg`` (grid frame)."""
    lf = prm[LF]
    lg = prm[LG]
    rg = prm[RG]
    ltot = lf + lg
    a = lg / ltot
    i = complex(x[0], x[1])
    dl = x[2]
    rot = complex(math.cos(dl), -math.sin(dl))
    ic = i * rot
    a0 = (1.0 - a) * (vg + rg * i)
    use_vcl = prm[USE_VCL] > 0.5
    use_apcl = prm[USE_APCL] > 0.5
    vref = 0.0
    k = 0.0
    if use_vcl:
        if prm[USE_RPCL] > 0.5:
            vref = prm[VN] + x[8]
        else:
            vref = prm[VREF0]
        k = prm[KPI] * prm[KPV]
    w = x[3]
    n_iter = 1
    if use_apcl and prm[JJ] <= 0.0:
        n_iter = 4
    u = 0j
    v = 0j
    p = 0.0
    q = 0.0
    for _ in range(n_iter):
        if use_vcl:
            c0 = prm[KPI] * (prm[KPV] * vref + complex(x[4], x[5]) - ic) + complex(x[6], x[7]) \
                + 1j * w * lf * ic
            uc = (c0 - k * a0 * rot) / (1.0 + a * k)
        else:
            iref = complex(prm[IREFD], prm[IREFQ])
            uc = prm[KPI] * (iref - ic) + complex(x[6], x[7]) + 1j * w * lf * ic
        u = uc * rot.conjugate()
        v = a0 + a * u
        s = 1.5 * v * i.conjugate()
        p = s.real
        q = s.imag
        if n_iter > 1:
            w = prm[WN] + (prm[PREF] - p) / prm[DP]
    return u, v, p, q, w


@njit(cache=True)
def deriv(x, prm, vg, dx):
    u, v, p, q, w = algebra(x, prm, vg)
    lf = prm[LF]
    ltot = lf + prm[LG]
    i = complex(x[0], x[1])
    di = (u - vg - prm[RG] * i - 1j * prm[WN] * ltot * i) / ltot
    dx[0] = di.real
    dx[1] = di.imag
    dl = x[2]
    rot = complex(math.cos(dl), -math.sin(dl))
    ic = i * rot
    if prm[USE_APCL] > 0.5:
        dx[2] = w - prm[WN]
        if prm[JJ] > 0.0:
            dx[3] = (prm[PREF] - p - prm[DP] * (w - prm[WN])) / prm[JJ]
        else:
            dx[3] = 0.0
    else:
        dx[2] = 0.0
        dx[3] = 0.0
    if prm[USE_VCL] > 0.5:
        if prm[USE_RPCL] > 0.5:
            vref = prm[VN] + x[8]
        else:
            vref = prm[VREF0]
        ev = vref - v * rot
        dxv = prm[KIV] * ev
        iref = prm[KPV] * ev + complex(x[4], x[5])
        dx[4] = dxv.real
        dx[5] = dxv.imag
    else:
        iref = complex(prm[IREFD], prm[IREFQ])
        dx[4] = 0.0
        dx[5] = 0.0
    dxi = prm[KII] * (iref - ic)
    dx[6] = dxi.real
    dx[7] = dxi.imag
    if prm[USE_VCL] > 0.5 and prm[USE_RPCL] > 0.5:
        dx[8] = prm[KQ] * (prm[QREF] - q + prm[KV] * (prm[VN] - abs(v)))
    else:
        dx[8] = 0.0


@njit(cache=True)
def rk4_step(x, prm, vg0, vg_half, vg1, dt, k1, k2, k3, k4, tmp):
    n = x.shape[0]
    deriv(x, prm, vg0, k1)
    for j in range(n):
        tmp[j] = x[j] + 0.5 * dt * k1[j]
    deriv(tmp, prm, vg_half, k2)
    for j in range(n):
        tmp[j] = x[j] + 0.5 * dt * k2[j]
    deriv(tmp, prm, vg_half, k3)
    for j in range(n):
        tmp[j] = x[j] + dt * k3[j]
    deriv(tmp, prm, vg1, k4)
    for j in range(n):
        x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True)
def _diverged(x, limit_i, limit_v):
    for j in range(x.shape[0]):
        if not math.isfinite(x[j]):
            return True
    if math.hypot(x[0], x[1]) > limit_i:
        return True
    if abs(x[8]) > limit_v or math.hypot(x[6], x[7]) > limit_v:
        return True
    return False


@njit(cache=True)
def scan_run(x, prm, vgrid, inj_amp, inj_w, dt, n_settle, n_cap, w_dft, limit_i, limit_v):
    """Integrate with a grid-source injection and accumulate single-bin DFTs.

    The source is ``vgrid + inj_amp * exp(j inj_w t)`` in the grid frame.
    Over the last ``n_cap`` samples the PCC voltage and current are
    correlated against ``exp(-j w t)`` for ``w`` in ``(0, +w_dft, -w_dft)``.

    Returns ``(status, step, dft)`` where ``dft`` is a (2, 4) complex array:
    rows v, i; columns DC, +w, -w, mean |x|^2. ``status`` is 0 on success,
    1 on divergence at ``step``.
    """
    k1 = np.empty(N_STATE)
    k2 = np.empty(N_STATE)
    k3 = np.empty(N_STATE)
    k4 = np.empty(N_STATE)
    tmp = np.empty(N_STATE)
    acc = np.zeros((2, 4), dtype=np.complex128)
    n_total = n_settle + n_cap
    t = 0.0
    for n in range(n_total):
        t = n * dt
        if n >= n_settle:
            vg = vgrid + inj_amp * complex(math.cos(inj_w * t), math.sin(inj_w * t))
            _, v, _, _, _ = algebra(x, prm, vg)
            i = complex(x[0], x[1])
            tc = (n - n_settle) * dt
            ep = complex(math.cos(w_dft * tc), -math.sin(w_dft * tc))
            em = ep.conjugate()
            acc[0, 0] += v
            acc[0, 1] += v * ep
            acc[0, 2] += v * em
            acc[0, 3] += v.real * v.real + v.imag * v.imag
            acc[1, 0] += i
            acc[1, 1] += i * ep
            acc[1, 2] += i * em
            acc[1, 3] += i.real * i.real + i.imag * i.imag
        vg0 = vgrid + inj_amp * complex(math.cos(inj_w * t), math.sin(inj_w * t))
        th = t + 0.5 * dt
        vgh = vgrid + inj_amp * complex(math.cos(inj_w * th), math.sin(inj_w * th))
        t1 = t + dt
        vg1 = vgrid + inj_amp * complex(math.cos(inj_w * t1), math.sin(inj_w * t1))
        rk4_step(x, prm, vg0, vgh, vg1, dt, k1, k2, k3, k4, tmp)
        if _diverged(x, limit_i, limit_v):
            return 1, n, acc
    for r in range(2):
        for c in range(4):
            acc[r, c] /= n_cap
    return 0, n_total, acc


@njit(cache=True)
def trace_run(x, prm, vgrid, dt, n_steps, decim, ev_steps, ev_dp, ev_kick, limit_i, limit_v):
    """Integrate ``n_steps`` recording every ``decim``-th sample.

    ``ev_steps``/``ev_dp`` give step indices at which ``D_p`` is replaced;
    ``ev_kick`` is added to the converter angle at the same instants.
    Output columns: t, P, Q, v_d, v_q, i_d, i_q, omega (grid frame).
    Returns ``(status, step, rows_written, out)``.
    """
    k1 = np.empty(N_STATE)
    k2 = np.empty(N_STATE)
    k3 = np.empty(N_STATE)
    k4 = np.empty(N_STATE)
    tmp = np.empty(N_STATE)
    n_rows = n_steps // decim + 1
    out = np.full((n_rows, 8), np.nan)
    row = 0
    ev = 0
    for n in range(n_steps + 1):
        while ev < ev_steps.shape[0] and ev_steps[ev] <= n:
            prm[DP] = ev_dp[ev]
            x[2] += ev_kick[ev]
            ev += 1
        if n % decim == 0 and row < n_rows:
            _, v, p, q, w = algebra(x, prm, vgrid)
            out[row, 0] = n * dt
            out[row, 1] = p
            out[row, 2] = q
            out[row, 3] = v.real
            out[row, 4] = v.imag
            out[row, 5] = x[0]
            out[row, 6] = x[1]
            out[row, 7] = w
            row += 1
        if n == n_steps:
            break
        rk4_step(x, prm, vgrid, vgrid, vgrid, dt, k1, k2, k3, k4, tmp)
        if _diverged(x, limit_i, limit_v):
            return 1, n, row, out
    return 0, n_steps, row, out
