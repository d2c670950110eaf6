"""Averaged time-domain model of the converter on a Thevenin grid.

The converter is an ideal controlled voltage source behind ``L_f``; the grid
is ``R_g + L_g`` in series with a stiff source. Equations are written in a
frame rotating at ``omega_N`` and integrated with fixed-step RK4 (see
:mod:`gfmimp._kernel` for the state layout).

Frequency scans add a positive-sequence series voltage to the grid source and
extract single-bin DFT phasors over a window spanning whole periods of both
the perturbation and the fundamental. Two runs are made per frequency (the
perturbation and its mirror ``2 f_N - f``) so the 2x2 sequence-domain
impedance can be solved; ``ScanResult.Z_p`` is its positive-sequence
element.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernel as K
from .operating_point import OperatingPoint, solve_operating_point
from .params import ConverterParams, GridParams

log = logging.getLogger(__name__)

STACKS = ("ccl", "vcl", "apcl", "full")


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"simulation diverged at t = {t:.6f} s")
        self.t = t


class NonlinearContaminationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimModel:
    """Converter + grid at an operating point, with a control stack.

    ``stack`` selects the active loops: ``ccl`` (fixed angle, fixed current
    reference), ``vcl`` (fixed angle, fixed voltage reference), ``apcl``
    (APCL with fixed voltage reference) or ``full`` (APCL and RPCL).
    """

    p: ConverterParams
    g: GridParams
    op: OperatingPoint
    stack: str = "full"

    def __post_init__(self):
        if self.stack not in STACKS:
            raise ValueError(f"unknown control stack {self.stack!r}; expected one of {STACKS}")

    @property
    def references(self) -> dict:
        """Controller references that make ``op`` an equilibrium."""
        p, op = self.p, self.op
        return {
            "P_ref": op.P_0,
            # RPCL settles where Q_ref - Q + K_v (V_N - |V|) = 0
            "Q_ref": op.Q_0 - p.K_v * (p.V_N - op.V_d0),
            "V_ref0": op.V_d0,
            "i_ref": (op.I_d0, op.I_q0),
        }

    def prm(self) -> np.ndarray:
        p, g = self.p, self.g
        r = self.references
        prm = np.zeros(K.N_PRM)
        prm[K.LF] = p.L_f
        prm[K.LG] = g.L_g
        prm[K.RG] = g.R_g
        prm[K.KPI] = p.k_pI
        prm[K.KII] = p.k_iI
        prm[K.KPV] = p.k_pV
        prm[K.KIV] = p.k_iV
        prm[K.JJ] = p.J
        prm[K.DP] = p.D_p
        prm[K.KV] = p.K_v
        prm[K.KQ] = p.K_q
        prm[K.VN] = p.V_N
        prm[K.WN] = p.omega_N
        prm[K.PREF] = r["P_ref"]
        prm[K.QREF] = r["Q_ref"]
        prm[K.VREF0] = r["V_ref0"]
        prm[K.IREFD], prm[K.IREFQ] = r["i_ref"]
        prm[K.USE_VCL] = float(self.stack != "ccl")
        prm[K.USE_APCL] = float(self.stack in ("apcl", "full"))
        prm[K.USE_RPCL] = float(self.stack == "full")
        return prm

    def equilibrium(self) -> np.ndarray:
        """Closed-form steady state at ``op``."""
        op, p = self.op, self.p
        i_c = complex(op.I_d0, op.I_q0)
        i_g = i_c * np.exp(1j * op.theta_0)
        x = np.zeros(K.N_STATE)
        x[0], x[1] = i_g.real, i_g.imag
        x[2] = op.theta_0
        x[3] = p.omega_N
        x[4], x[5] = i_c.real, i_c.imag
        # decoupling cancels the cross term, so the current-controller
        # integrator holds the PCC voltage
        x[6], x[7] = op.V_d0, op.V_q0
        x[8] = op.V_d0 - p.V_N
        return x

    def vgrid(self) -> complex:
        return complex(self.g.V_grid, 0.0)

    def limits(self) -> tuple[float, float]:
        return 100.0 * self.p.I_N, 100.0 * self.p.V_N

    def with_grid(self, g: GridParams) -> "SimModel":
        return replace(self, g=g)


def make_model(p: ConverterParams, g: GridParams, op: Optional[OperatingPoint] = None,
               stack: str = "full") -> SimModel:
    if op is None:
        op = solve_operating_point(p, g, p.P_ref, p.Q_ref)
    return SimModel(p, g, op, stack)


def state_derivative(model: SimModel, x: np.ndarray, vg: Optional[complex] = None) -> np.ndarray:
    dx = np.empty(K.N_STATE)
    K.deriv(np.asarray(x, dtype=float), model.prm(), model.vgrid() if vg is None else complex(vg), dx)
    return dx


def outputs(model: SimModel, x: np.ndarray, vg: Optional[complex] = None) -> dict:
    u, v, p, q, w = K.algebra(np.asarray(x, dtype=float), model.prm(),
                              model.vgrid() if vg is None else complex(vg))
    return {"u": u, "v": v, "i": complex(x[0], x[1]), "P": p, "Q": q, "omega": w}


def step_model(model: SimModel, x: np.ndarray, dt: float, vg: Optional[complex] = None,
               vg_next: Optional[complex] = None) -> np.ndarray:
    """One RK4 step; returns a new state array."""
    if dt > 50e-6:
        raise ValueError("dt must not exceed 50 us")
    vg0 = model.vgrid() if vg is None else complex(vg)
    vg1 = vg0 if vg_next is None else complex(vg_next)
    vgh = 0.5 * (vg0 + vg1)
    xn = np.array(x, dtype=float)
    work = [np.empty(K.N_STATE) for _ in range(5)]
    K.rk4_step(xn, model.prm(), vg0, vgh, vg1, dt, *work)
    li, lv = model.limits()
    if K._diverged(xn, li, lv):
        raise SimulationDiverged(dt)
    return xn


def simulate(model: SimModel, x0: np.ndarray, t_end: float, dt: float = 10e-6,
             decim: int = 10, dp_events: Sequence[tuple[float, float]] = (),
             kick: float = 0.0) -> dict:
    """Free simulation with optional ``D_p`` step events ``(t, D_p_SI)``.

    ``kick`` (rad) is added to the converter angle at every event so that an
    unstable mode has something to grow from.

    Returns a dict with the recorded ``table`` (columns t, P, Q, v_d, v_q,
    i_d, i_q, omega, grid frame), ``diverged`` flag and divergence time.
    """
    n_steps = int(round(t_end / dt))
    ev_steps = np.array([int(round(t / dt)) for t, _ in dp_events], dtype=np.int64)
    ev_dp = np.array([d for _, d in dp_events], dtype=float)
    ev_kick = np.full(len(ev_dp), float(kick))
    li, lv = model.limits()
    x = np.array(x0, dtype=float)
    status, step, rows, out = K.trace_run(x, model.prm(), model.vgrid(), dt, n_steps, decim,
                                          ev_steps, ev_dp, ev_kick, li, lv)
    return {"table": out[:rows], "diverged": bool(status), "t_diverged": step * dt if status else None,
            "final_state": x, "dt": dt, "decim": decim}


def settle(model: SimModel, x0: np.ndarray, dt: float = 10e-6, tol_pu: float = 1e-9,
           max_time: float = 20.0, periods: int = 3) -> tuple[np.ndarray, float]:
    """Run until no state moves more than ``tol_pu`` (of its base) over one
    fundamental period, for ``periods`` periods in a row.

    The default tolerance is well below 1e-6 p.u. because the slow APCL mode
    decays by only about 10 % per period; a looser test stops while the
    remaining drift is still of the same order.
    """
    period = 2 * math.pi / model.p.omega_N
    n = max(1, int(round(period / dt)))
    bases = _state_bases(model.p)
    x = np.array(x0, dtype=float)
    t = 0.0
    li, lv = model.limits()
    prm = model.prm()
    empty_i = np.zeros(0, dtype=np.int64)
    empty_f = np.zeros(0)
    quiet = 0
    while t < max_time:
        prev = x.copy()
        status, _, _, _ = K.trace_run(x, prm, model.vgrid(), dt, n, n, empty_i, empty_f, empty_f,
                                      li, lv)
        t += n * dt
        if status:
            raise SimulationDiverged(t)
        quiet = quiet + 1 if np.all(np.abs(x - prev) / bases < tol_pu) else 0
        if quiet >= periods:
            return x, t
    raise RuntimeError(f"no steady state within {max_time} s")


def _state_bases(p: ConverterParams) -> np.ndarray:
    return np.array([p.I_N, p.I_N, 1.0, p.omega_N, p.I_N, p.I_N, p.V_N, p.V_N, p.V_N])


# --------------------------------------------------------------------------- scans

@dataclass(frozen=True)
class ScanConfig:
    f_pert: float
    amplitude: float = 0.01
    settle_time: float = 2.0
    capture_periods: int = 20
    dt: float = 10e-6

    def __post_init__(self):
        if not 0 < self.amplitude <= 0.05:
            raise ValueError("amplitude must lie in (0, 0.05]")
        if self.f_pert <= 0:
            raise ValueError("f_pert must be positive")


def capture_window(f_pert: float, f_n: float, min_periods: int) -> float:
    """Shortest window holding whole periods of ``f_pert`` and ``f_n`` and at least
    ``min_periods`` perturbation periods."""
    a = Fraction(f_pert).limit_denominator(100000)
    b = Fraction(f_n).limit_denominator(100000)
    g = Fraction(math.gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                 a.denominator * b.denominator)
    t0 = 1 / g
    m = max(1, math.ceil(min_periods / (a * t0)))
    return float(m * t0)


@dataclass
class ScanResult:
    f_pert: float
    Z_p: complex
    V_phasor: complex
    I_phasor: complex
    thd_residual: float
    z_apparent: complex = 0j
    Z_seq: Optional[np.ndarray] = None
    window: float = 0.0
    dt: float = 0.0
    warnings: list = field(default_factory=list)


def _injection_run(model: SimModel, x0, amp: complex, w_inj: float, w_dft: float,
                   dt: float, n_settle: int, n_cap: int):
    li, lv = model.limits()
    x = np.array(x0, dtype=float)
    status, step, acc = K.scan_run(x, model.prm(), model.vgrid(), amp, w_inj, dt,
                                   n_settle, n_cap, w_dft, li, lv)
    if status:
        raise SimulationDiverged(step * dt)
    return acc


def _residual(acc_row) -> float:
    tone = abs(acc_row[1]) ** 2 + abs(acc_row[2]) ** 2
    rest = max(0.0, acc_row[3].real - abs(acc_row[0]) ** 2 - tone)
    tot = rest + tone
    return 0.0 if tot == 0 else rest / tot


def run_scan(model: SimModel, cfg: ScanConfig, x0: Optional[np.ndarray] = None) -> ScanResult:
    """Measure the positive-sequence impedance at ``cfg.f_pert``.

    The returned ``V_phasor``/``I_phasor``/``z_apparent`` come from the
    direct injection alone; ``Z_p`` is resolved from both injections and is
    free of the grid's frequency-coupling feedback.
    """
    p = model.p
    f_n = p.f_N
    if abs(cfg.f_pert - f_n) < 1e-9:
        raise ValueError("cannot scan at the fundamental frequency")
    x0 = model.equilibrium() if x0 is None else x0
    window = capture_window(cfg.f_pert, f_n, cfg.capture_periods)
    n_cap = int(math.ceil(window / cfg.dt - 1e-9))
    dt = window / n_cap
    n_settle = int(math.ceil(cfg.settle_time / dt))
    w = 2 * math.pi * (cfg.f_pert - f_n)
    amp = cfg.amplitude * p.V_N
    acc1 = _injection_run(model, x0, amp, w, w, dt, n_settle, n_cap)
    acc2 = _injection_run(model, x0, amp, -w, w, dt, n_settle, n_cap)
    # rows: (+w component, conj of mirror component); columns: injections
    V = np.array([[acc1[0, 1], acc2[0, 1]], [np.conj(acc1[0, 2]), np.conj(acc2[0, 2])]])
    I = np.array([[acc1[1, 1], acc2[1, 1]], [np.conj(acc1[1, 2]), np.conj(acc2[1, 2])]])
    Z_seq = -V @ np.linalg.inv(I)
    thd = max(_residual(acc1[0]), _residual(acc1[1]), _residual(acc2[0]), _residual(acc2[1]))
    res = ScanResult(f_pert=cfg.f_pert, Z_p=complex(Z_seq[0, 0]), V_phasor=complex(acc1[0, 1]),
                     I_phasor=complex(acc1[1, 1]), thd_residual=thd,
                     z_apparent=complex(acc1[0, 1] / -acc1[1, 1]), Z_seq=Z_seq,
                     window=window, dt=dt)
    if thd > 0.1:
        msg = f"nonlinear contamination at {cfg.f_pert} Hz (residual {thd:.3f})"
        res.warnings.append(msg)
        warnings.warn(msg, NonlinearContaminationWarning)
    return res


def worker_count() -> int:
    env = os.environ.get("GFMIMP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _scan_one(args):
    model, cfg = args
    try:
        return run_scan(model, cfg), None
    except (SimulationDiverged, ValueError, np.linalg.LinAlgError) as exc:
        return None, f"{cfg.f_pert}: {exc}"


def scan_sweep(model: SimModel, freqs: Sequence[float], amplitude: float = 0.01,
               settle_time: float = 2.0, capture_periods: int = 20, dt: float = 10e-6,
               workers: Optional[int] = None):
    """Scan every frequency; returns ``(curve, results, errors)``.

    Failed points are left out of the curve and listed in ``errors``; the
    curve is then flagged partial.
    """
    from .curves import ImpedanceCurve

    jobs = [(model, ScanConfig(float(f), amplitude, settle_time, capture_periods, dt)) for f in freqs]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            outs = list(ex.map(_scan_one, jobs))
    else:
        outs = [_scan_one(j) for j in jobs]
    results = [r for r, _ in outs if r is not None]
    errors = [e for _, e in outs if e is not None]
    curve = ImpedanceCurve(
        freqs=np.array([r.f_pert for r in results]),
        values=np.array([r.Z_p for r in results]),
        provenance="scan",
        params_digest=model.p.digest({"grid": [model.g.L_g, model.g.R_g, model.g.V_grid],
                                      "P": model.op.P_0, "Q": model.op.Q_0, "stack": model.stack}),
        meta={"stack": model.stack, "amplitude": amplitude, "partial": bool(errors),
              "errors": errors},
    )
    return curve, results, errors


# --------------------------------------------------------------------------- instability demo

# Grid used by the instability demo when none is given. With the averaged
# model the low-damping APCL mode is only unstable on moderately weak,
# resistive grids; see the decisions notes.
WEAK_GRID_SCR = 5.0
WEAK_GRID_RX = 1.0
DEMO_KICK_RAD = 0.01


@dataclass
class DemoReport:
    table: np.ndarray
    events: list
    diverged: bool
    t_diverged: Optional[float]
    spectra: dict
    findings: dict


def _spectrum(t: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Hann-windowed amplitude spectrum of a real signal."""
    n = len(y)
    dt = t[1] - t[0]
    win = np.hanning(n)
    spec = np.fft.rfft((y - np.mean(y)) * win) * 2.0 / win.sum()
    f = np.fft.rfftfreq(n, dt)
    return f, np.abs(spec), np.degrees(np.angle(spec))


def _phase_a(table: np.ndarray, cols: tuple[int, int], omega_n: float) -> np.ndarray:
    t = table[:, 0]
    z = table[:, cols[0]] + 1j * table[:, cols[1]]
    return np.real(z * np.exp(1j * omega_n * t))


def _refined_peak(f: np.ndarray, mag: np.ndarray, lo: float, hi: float):
    """Largest bin of ``mag`` on ``(lo, hi)`` with parabolic refinement; ``(None, 0)`` if empty."""
    idx = np.flatnonzero((f > lo) & (f < hi))
    if idx.size == 0:
        return None, 0.0
    k = idx[np.argmax(mag[idx])]
    fk = float(f[k])
    if 0 < k < len(mag) - 1:
        a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
        den = a - 2 * b + c
        if den < 0:
            fk += 0.5 * (a - c) / den * float(f[1] - f[0])
    return fk, float(mag[k])


def _sideband_spectrum(t: np.ndarray, z: np.ndarray, z0: complex, f_n: float, pad: int = 8):
    """Spectrum of the stationary-frame deviation ``(z - z0) e^{j w_N t}``.

    Removing the steady-state phasor first leaves only the oscillation
    sidebands, which land at ``f_N +/- f_m``. Returned frequencies are
    stationary-frame (may be negative for very low sidebands).
    """
    n = len(z)
    dt = t[1] - t[0]
    win = np.hanning(n)
    m = pad * n
    spec = np.fft.fftshift(np.fft.fft((z - z0) * win, m)) * 2.0 / win.sum()
    f = np.fft.fftshift(np.fft.fftfreq(m, dt)) + f_n
    return f, np.abs(spec)


def run_instability_demo(p: ConverterParams, g: Optional[GridParams] = None,
                         schedule: Sequence[tuple[float, float]] = ((1.0, 2.5), (4.0, 50.0)),
                         t_end: float = 7.0, dt: float = 10e-6, decim: int = 10,
                         analysis_window: float = 1.0, stack: str = "full",
                         kick: float = DEMO_KICK_RAD, detect_pu: float = 1e-3) -> DemoReport:
    """Step ``D_p`` (given in p.u.) at the scheduled times and analyse the response.

    Starts from the steady state with ``p.D_p``; each event also nudges the
    converter angle by ``kick`` rad. Spectra are taken over the last
    ``analysis_window`` seconds before the final schedule event (or the end
    of the run without events). An oscillation is reported when the largest
    sub-synchronous component of ``P`` exceeds ``detect_pu``.
    """
    times = [t for t, _ in schedule]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("schedule times must be strictly increasing")
    g = GridParams.from_scr(p, WEAK_GRID_SCR, WEAK_GRID_RX) if g is None else g
    model = make_model(p, g, stack=stack)
    base = p.S_N / p.omega_N
    events = [(float(t), float(d) * base) for t, d in schedule]
    x0 = model.equilibrium()
    run = simulate(model, x0, t_end, dt, decim, events, kick)
    table = run["table"]
    t = table[:, 0]
    f_n = p.f_N

    a_end = (times[-1] if len(times) > 1 else t_end) if schedule else t_end
    if run["diverged"]:
        a_end = min(a_end, run["t_diverged"])
    sel = (t >= a_end - analysis_window) & (t < a_end)
    ts = t[sel]
    spectra: dict = {}
    findings: dict = {"diverged": run["diverged"], "t_diverged": run["t_diverged"],
                      "analysis_window": [float(a_end - analysis_window), float(a_end)],
                      "grid": {"L_g": g.L_g, "R_g": g.R_g, "V_grid": g.V_grid},
                      "stack": stack, "kick_rad": kick,
                      "reference_values_hz": {"p": 11.3, "sub": 38.7, "super": 61.3}}
    if len(ts) > 16:
        sub = table[sel]
        spectra["p"] = _spectrum(ts, sub[:, 1] / p.S_N)
        spectra["v"] = _spectrum(ts, _phase_a(sub, (3, 4), p.omega_N) / p.V_N)
        spectra["i"] = _spectrum(ts, _phase_a(sub, (5, 6), p.omega_N) / p.I_N)
        out0 = outputs(model, x0)
        fi, mi = _sideband_spectrum(ts, sub[:, 5] + 1j * sub[:, 6], out0["i"], f_n)
        fv, mv = _sideband_spectrum(ts, sub[:, 3] + 1j * sub[:, 4], out0["v"], f_n)
        fp, mp = _refined_peak(spectra["p"][0], spectra["p"][1], 0.5, f_n - 0.5)
        f1, a1 = _refined_peak(fi, mi / p.I_N, 0.5, f_n - 0.5)
        f2, a2 = _refined_peak(fi, mi / p.I_N, f_n + 0.5, 2 * f_n - 0.5)
        fv1, av1 = _refined_peak(fv, mv / p.V_N, 0.5, f_n - 0.5)
        fv2, av2 = _refined_peak(fv, mv / p.V_N, f_n + 0.5, 2 * f_n - 0.5)
        detected = mp > detect_pu
        findings.update({
            "p_oscillation_hz": fp, "p_oscillation_amp_pu": mp,
            "i_sub_hz": f1, "i_sub_amp_pu": a1, "i_super_hz": f2, "i_super_amp_pu": a2,
            "v_sub_hz": fv1, "v_sub_amp_pu": av1, "v_super_hz": fv2, "v_super_amp_pu": av2,
            "oscillation_detected": bool(detected),
            "coupling_error_hz": (abs(f1 + f2 - 2 * f_n) if (detected and f1 and f2) else None),
        })
    if len(schedule) >= 2 and not run["diverged"]:
        _recovery(findings, t, table[:, 1], p, times[-1])
    return DemoReport(table=table, events=[(t_, d / base) for t_, d in events],
                      diverged=run["diverged"], t_diverged=run["t_diverged"],
                      spectra=spectra, findings=findings)


def _recovery(findings: dict, t: np.ndarray, p_w: np.ndarray, p: ConverterParams, t2: float):
    """Peak ``|P - P_ref|`` per half oscillation period over the second after ``t2``."""
    f_osc = findings.get("p_oscillation_hz") or 0.0
    span = max(0.5 / f_osc, 0.1) if f_osc > 1.0 else 0.1
    edges = t2 + span * np.arange(int(math.floor(1.0 / span + 1e-9)) + 1)
    env = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        w = (t >= lo) & (t < hi)
        if np.any(w):
            env.append(float(np.max(np.abs(p_w[w] - p.P_ref)) / p.S_N))
    findings["recovery_window_s"] = float(span)
    findings["recovery_envelope_pu"] = env
    findings["recovery_monotone"] = bool(env) and all(b <= a for a, b in zip(env, env[1:]))
    tail = t >= t[-1] - 0.5
    findings["final_p_deviation_pu"] = float(np.max(np.abs(p_w[tail] - p.P_ref)) / p.S_N)
