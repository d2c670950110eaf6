"""Analytic impedance models and the numerically linearized full model.

All dq-frame models are rationals in ``s``. A stationary-frame
positive-sequence frequency ``f`` is evaluated at ``s = j 2 pi (f - f_N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernel as K
from .curves import POSITIVE_SEQ_STATIONARY, ImpedanceCurve
from .operating_point import OperatingPoint, SSOPMatrices, build_ssop_matrices, solve_operating_point
from .params import ConverterParams, GridParams
from .tf import RationalTF, TFMatrix2x2, evaluate

CCL_ONLY = "CCL_ONLY"
CCL_VCL = "CCL_VCL"
APCL_SIMPLIFIED = "APCL_SIMPLIFIED"
FULL_NUMERIC = "FULL_NUMERIC"
TIER_TAGS = (CCL_ONLY, CCL_VCL, APCL_SIMPLIFIED, FULL_NUMERIC)

# P = 1.5 (v_d i_d + v_q i_q): the power perturbation reaching the APCL is
# 1.5 times the SSOP product
POWER_GAIN = 1.5

# tiers whose dq model has an integrator pole at s = 0
POLE_AT_FUNDAMENTAL = {CCL_ONLY: True, CCL_VCL: False, APCL_SIMPLIFIED: True, FULL_NUMERIC: True}


class ModelError(RuntimeError):
    pass


# --------------------------------------------------------------------------- building blocks

def filter_impedance(p: ConverterParams) -> RationalTF:
    return RationalTF([0.0, p.L_f])


def current_controller(p: ConverterParams) -> RationalTF:
    return RationalTF([p.k_iI, p.k_pI], [0.0, 1.0])


def voltage_controller(p: ConverterParams) -> RationalTF:
    return RationalTF([p.k_iV, p.k_pV], [0.0, 1.0])


def ccl_impedance(p: ConverterParams) -> RationalTF:
    """``s L_f + k_pI + k_iI / s``."""
    return filter_impedance(p) + current_controller(p)


def vcl_impedance(p: ConverterParams) -> RationalTF:
    """``(Z_f + G_I) / (1 + G_V G_I)`` with the spurious ``s`` factor cancelled."""
    gi = current_controller(p)
    gv = voltage_controller(p)
    return ((filter_impedance(p) + gi) / (1 + gv * gi)).reduce()


def vcl_closed_form(p: ConverterParams) -> RationalTF:
    num = [0.0, p.k_iI, p.k_pI, p.L_f]
    den = [p.k_iI * p.k_iV, p.k_pI * p.k_iV + p.k_iI * p.k_pV, p.k_pI * p.k_pV + 1.0]
    return RationalTF(num, den)


def apcl_gain(p: ConverterParams, inertia_enabled: bool = True) -> RationalTF:
    """``1 / (s (J s + D_p))``, or ``1 / (s D_p)`` without inertia."""
    if p.D_p <= 0:
        raise ModelError("D_p must be positive")
    if inertia_enabled and p.J > 0:
        return RationalTF([1.0], [0.0, p.D_p, p.J])
    return RationalTF([1.0], [0.0, p.D_p])


def voltage_loop_ratio(p: ConverterParams) -> RationalTF:
    """``G_V G_I / (1 + G_V G_I)``."""
    gvi = voltage_controller(p) * current_controller(p)
    return (gvi / (1 + gvi)).reduce()


def coupling_term(p: ConverterParams, b21: Optional[float] = None,
                  inertia_enabled: bool = True) -> RationalTF:
    b21 = p.V_N ** 2 if b21 is None else b21
    return (apcl_gain(p, inertia_enabled) * voltage_loop_ratio(p)) * b21


def coupling_closed_form(p: ConverterParams, b21: Optional[float] = None,
                         inertia_enabled: bool = True) -> RationalTF:
    """Expanded coupling term: ``b21 [k_pI k_pV s^2 + ...] / (s (J s + D_p) [...])``."""
    b21 = p.V_N ** 2 if b21 is None else b21
    a2 = p.k_pI * p.k_pV
    a1 = p.k_pI * p.k_iV + p.k_iI * p.k_pV
    a0 = p.k_iI * p.k_iV
    quad = np.array([a0, a1, a2 + 1.0])
    outer = [0.0, p.D_p, p.J] if (inertia_enabled and p.J > 0) else [0.0, p.D_p]
    den = np.convolve(quad, outer)
    return RationalTF([b21 * a0, b21 * a1, b21 * a2], list(den))


def apcl_simplified_matrix(p: ConverterParams, B_override: Optional[SSOPMatrices] = None,
                           inertia_enabled: bool = True,
                           power_gain: float = POWER_GAIN) -> TFMatrix2x2:
    """Diagonal VCL impedance plus the ``B_Vo_v`` angle-coupling term at (2,1).

    The (2,1) coefficient is ``power_gain * B_Vo_v[1, 0]``; ``power_gain=1``
    gives the bare ``V_N**2`` form.
    """
    zv = vcl_impedance(p)
    b21 = p.V_N ** 2 if B_override is None else float(B_override.B_Vo_v[1, 0])
    b21 *= power_gain
    z21 = RationalTF.zero() if b21 == 0.0 else coupling_term(p, b21, inertia_enabled)
    return TFMatrix2x2(((zv, RationalTF.zero()), (z21, zv)))


# --------------------------------------------------------------------------- frame mapping

def dq_to_positive_sequence(m: Union[TFMatrix2x2, RationalTF, "LinearizedConverter"], f,
                            f_N: float = 50.0):
    """Positive-sequence stationary-frame impedance at ``f`` (Hz, scalar or array).

    A scalar rational is treated as a diagonal matrix, which reduces to
    direct evaluation at the shifted frequency.
    """
    f_arr = np.asarray(f, dtype=float)
    s = 1j * 2 * np.pi * (f_arr - f_N)
    if isinstance(m, RationalTF):
        return evaluate(m, s)
    z = m.evaluate(s)
    zp = 0.5 * (z[..., 0, 0] + z[..., 1, 1]) + 0.5j * (z[..., 1, 0] - z[..., 0, 1])
    return complex(zp) if np.ndim(zp) == 0 else zp


# --------------------------------------------------------------------------- numeric full model

def state_bases(p: ConverterParams) -> np.ndarray:
    return np.array([p.I_N, p.I_N, 1.0, p.omega_N, p.I_N, p.I_N, p.V_N, p.V_N, p.V_N])


STACK_FLAGS = {"ccl": (0.0, 0.0, 0.0), "vcl": (1.0, 0.0, 0.0),
               "apcl": (1.0, 1.0, 0.0), "full": (1.0, 1.0, 1.0)}


def _equilibrium_state(p: ConverterParams, op: OperatingPoint) -> np.ndarray:
    i_c = complex(op.I_d0, op.I_q0)
    i_g = i_c * np.exp(1j * op.theta_0)
    return np.array([i_g.real, i_g.imag, op.theta_0, p.omega_N, i_c.real, i_c.imag,
                     op.V_d0, op.V_q0, op.V_d0 - p.V_N])


def _kernel_params(p: ConverterParams, op: OperatingPoint, stack: str,
                   L_g: float = 0.0, R_g: float = 0.0) -> np.ndarray:
    use_vcl, use_apcl, use_rpcl = STACK_FLAGS[stack]
    prm = np.zeros(K.N_PRM)
    prm[K.LF] = p.L_f
    prm[K.LG] = L_g
    prm[K.RG] = R_g
    prm[K.KPI], prm[K.KII], prm[K.KPV], prm[K.KIV] = p.k_pI, p.k_iI, p.k_pV, p.k_iV
    prm[K.JJ] = p.J
    prm[K.DP] = p.D_p
    prm[K.KV] = p.K_v
    prm[K.KQ] = p.K_q
    prm[K.VN] = p.V_N
    prm[K.WN] = p.omega_N
    prm[K.PREF] = op.P_0
    prm[K.QREF] = op.Q_0 - p.K_v * (p.V_N - op.V_d0)
    prm[K.VREF0] = op.V_d0
    prm[K.IREFD], prm[K.IREFQ] = op.I_d0, op.I_q0
    prm[K.USE_VCL], prm[K.USE_APCL], prm[K.USE_RPCL] = use_vcl, use_apcl, use_rpcl
    return prm


def _active_states(stack: str, inertia: bool) -> list[int]:
    idx = [0, 1, 6, 7]
    if stack != "ccl":
        idx += [4, 5]
    if stack in ("apcl", "full"):
        idx += [2] + ([3] if inertia else [])
    if stack == "full":
        idx.append(8)
    return sorted(idx)


@dataclass
class LinearizedConverter:
    """Small-signal converter admittance about an operating point.

    ``A``, ``B`` act on the active states with the PCC voltage (grid frame,
    d/q) as input; the output is the converter current. ``evaluate`` returns
    the dq impedance ``-Y^-1`` rotated into the converter frame.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    theta_0: float
    stack: str
    states: list
    op: OperatingPoint
    meta: dict = field(default_factory=dict)

    def admittance(self, s) -> np.ndarray:
        s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
        n = self.A.shape[0]
        out = np.empty(s_arr.shape + (2, 2), dtype=complex)
        eye = np.eye(n)
        for k, sk in np.ndenumerate(s_arr):
            out[k] = self.C @ np.linalg.solve(sk * eye - self.A, self.B)
        return out

    def evaluate(self, s) -> np.ndarray:
        scalar = np.ndim(s) == 0
        z = -np.linalg.inv(self.admittance(s))
        c, sn = math.cos(self.theta_0), math.sin(self.theta_0)
        rot = np.array([[c, sn], [-sn, c]])
        z = rot @ z @ rot.T
        return z[0] if scalar else z

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)


def _jacobian(x0: np.ndarray, prm: np.ndarray, vg: complex, states: list, bases: np.ndarray,
              v_base: float, rel_step: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(states)
    f_plus = np.empty(K.N_STATE)
    f_minus = np.empty(K.N_STATE)
    A = np.empty((n, n))
    for col, k in enumerate(states):
        h = rel_step * bases[k]
        xp = x0.copy()
        xm = x0.copy()
        xp[k] += h
        xm[k] -= h
        K.deriv(xp, prm, vg, f_plus)
        K.deriv(xm, prm, vg, f_minus)
        A[:, col] = ((f_plus - f_minus) / (2 * h))[states]
    B = np.empty((n, 2))
    h = rel_step * v_base
    for col, dv in enumerate((1.0, 1j)):
        K.deriv(x0, prm, vg + h * dv, f_plus)
        K.deriv(x0, prm, vg - h * dv, f_minus)
        B[:, col] = ((f_plus - f_minus) / (2 * h))[states]
    return A, B


def full_impedance_numeric(p: ConverterParams, g: Optional[GridParams] = None,
                           op: Optional[OperatingPoint] = None, stack: str = "full",
                           rel_step: float = 1e-6, eq_tol: float = 1e-6) -> LinearizedConverter:
    """Linearize the averaged converter model about ``op`` with the PCC voltage as input.

    The grid only enters through the operating point. Central differences use
    ``rel_step`` times each state's base.
    """
    if stack not in STACK_FLAGS:
        raise ValueError(f"unknown control stack {stack!r}")
    if op is None:
        if g is None:
            raise ValueError("need a grid or an operating point")
        op = solve_operating_point(p, g, p.P_ref, p.Q_ref)
    prm = _kernel_params(p, op, stack)
    x0 = _equilibrium_state(p, op)
    vg = complex(op.v_complex)
    bases = state_bases(p)
    dx = np.empty(K.N_STATE)
    K.deriv(x0, prm, vg, dx)
    worst = float(np.max(np.abs(dx) / bases))
    if worst > eq_tol:
        raise ModelError(f"averaged model not at steady state (max derivative {worst:.3e} p.u./s)")
    states = _active_states(stack, p.J > 0)
    A, B = _jacobian(x0, prm, vg, states, bases, p.V_N, rel_step)
    C = np.zeros((2, len(states)))
    C[0, states.index(0)] = 1.0
    C[1, states.index(1)] = 1.0
    return LinearizedConverter(A=A, B=B, C=C, theta_0=op.theta_0, stack=stack, states=states,
                               op=op, meta={"rel_step": rel_step, "equilibrium_residual": worst})


def closed_loop_eigenvalues(p: ConverterParams, g: GridParams, op: Optional[OperatingPoint] = None,
                            stack: str = "full", rel_step: float = 1e-6) -> np.ndarray:
    """Eigenvalues of converter + grid linearized about ``op`` (active states only)."""
    op = solve_operating_point(p, g, p.P_ref, p.Q_ref) if op is None else op
    prm = _kernel_params(p, op, stack, g.L_g, g.R_g)
    states = _active_states(stack, p.J > 0)
    A, _ = _jacobian(_equilibrium_state(p, op), prm, complex(g.V_grid, 0.0), states,
                     state_bases(p), p.V_N, rel_step)
    return np.linalg.eigvals(A)


# --------------------------------------------------------------------------- tiers and curves

@dataclass(frozen=True)
class ModelTier:
    """Which model to sample.

    ``stack`` only applies to ``FULL_NUMERIC`` and picks the linearized
    control loops (``apcl`` is APCL with inner loops, ``full`` adds the
    RPCL); ``linearization`` may carry a precomputed result.
    """

    tag: str
    inertia_enabled: bool = True
    ssop_override: Optional[SSOPMatrices] = None
    stack: str = "apcl"
    power_gain: float = POWER_GAIN
    linearization: Optional[LinearizedConverter] = None

    def __post_init__(self):
        if self.tag not in TIER_TAGS:
            raise ValueError(f"unknown tier {self.tag!r}; expected one of {TIER_TAGS}")

    @property
    def has_fundamental_pole(self) -> bool:
        if self.tag == FULL_NUMERIC:
            return self.stack != "vcl"
        return POLE_AT_FUNDAMENTAL[self.tag]


TIER_ALIASES = {"ccl": CCL_ONLY, "vcl": CCL_VCL, "apcl": APCL_SIMPLIFIED, "full": FULL_NUMERIC}


def tier_from_name(name: str, **opts) -> ModelTier:
    key = name.strip()
    tag = TIER_ALIASES.get(key.lower(), key.upper())
    return ModelTier(tag, **opts)


def frequency_grid(start: float = 1.0, stop: float = 100.0, step: float = 0.1,
                   f_N: Optional[float] = 50.0) -> np.ndarray:
    """Inclusive grid ``start:stop:step``; ``f_N`` is dropped when given."""
    if step <= 0 or stop < start:
        raise ValueError("grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    f = np.round(start + step * np.arange(n), 10)
    if f_N is not None:
        f = f[np.abs(f - f_N) > 1e-9 * max(1.0, f_N)]
    return f


def parse_grid(spec: str, f_N: Optional[float] = 50.0) -> np.ndarray:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ValueError(f"frequency grid must be 'start:stop:step', got {spec!r}") from None
    return frequency_grid(start, stop, step, f_N)


def tier_model(tier: ModelTier, p: ConverterParams, g: Optional[GridParams] = None,
               op: Optional[OperatingPoint] = None):
    """The evaluable model behind ``tier``."""
    if tier.tag == CCL_ONLY:
        return ccl_impedance(p)
    if tier.tag == CCL_VCL:
        return vcl_impedance(p)
    if tier.tag == APCL_SIMPLIFIED:
        return apcl_simplified_matrix(p, tier.ssop_override, tier.inertia_enabled,
                                      tier.power_gain)
    if tier.linearization is not None:
        return tier.linearization
    q = p if tier.inertia_enabled else _without_inertia(p)
    return full_impedance_numeric(q, g if g is not None else GridParams.from_scr(q), op, tier.stack)


def _without_inertia(p: ConverterParams) -> ConverterParams:
    from dataclasses import replace
    return replace(p, J=0.0)


def sample_curve(tier: ModelTier, p: ConverterParams, g: Optional[GridParams] = None,
                 op: Optional[OperatingPoint] = None,
                 freqs: Optional[Sequence[float]] = None) -> ImpedanceCurve:
    """Positive-sequence curve of ``tier`` on ``freqs`` (default 1-100 Hz, 0.1 Hz)."""
    f_N = p.f_N
    freqs = frequency_grid(f_N=f_N) if freqs is None else np.asarray(freqs, dtype=float)
    if tier.has_fundamental_pole and np.any(np.abs(freqs - f_N) <= 1e-9 * f_N):
        raise ValueError("frequency grid must exclude f_N for a model with a fundamental pole")
    model = tier_model(tier, p, g, op)
    values = np.atleast_1d(dq_to_positive_sequence(model, freqs, f_N))
    meta = {"tier": tier.tag, "inertia_enabled": tier.inertia_enabled,
            "fundamental_pole": tier.has_fundamental_pole}
    if tier.has_fundamental_pole:
        meta["note"] = "model has a pole at f_N; sampled peak depends on grid resolution"
    if tier.tag == FULL_NUMERIC:
        meta["stack"] = tier.stack
    if tier.ssop_override is not None:
        meta["ssop_override"] = {k: v.tolist() for k, v in tier.ssop_override.as_dict().items()}
    extra = {"tier": tier.tag, "inertia": tier.inertia_enabled}
    if g is not None:
        extra["grid"] = [g.L_g, g.R_g, g.V_grid]
    return ImpedanceCurve(freqs=np.asarray(freqs, dtype=float), values=values, provenance=tier.tag,
                          params_digest=p.digest(extra), frame=POSITIVE_SEQ_STATIONARY, meta=meta)


def default_ssop(p: ConverterParams, g: GridParams) -> SSOPMatrices:
    return build_ssop_matrices(solve_operating_point(p, g, p.P_ref, p.Q_ref), p)
