"""Steady-state operating point and the SSOP coupling matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ConverterParams, GridParams


class InfeasibleOperatingPoint(RuntimeError):
    def __init__(self, residual: float, msg: str = "infeasible operating point"):
        super().__init__(f"{msg} (final residual {residual:.3e} p.u.)")
        self.residual = residual


@dataclass(frozen=True)
class OperatingPoint:
    """PCC voltage and converter current in the converter dq frame.

    The frame is aligned with the PCC voltage, so ``V_q0 == 0``. ``theta_0``
    is the PCC voltage angle relative to the grid source. Current is positive
    out of the converter; ``P = 1.5 (V_d I_d + V_q I_q)`` and
    ``Q = 1.5 (V_q I_d - V_d I_q)`` (positive Q is inductive export).
    """

    V_d0: float
    V_q0: float
    I_d0: float
    I_q0: float
    P_0: float
    Q_0: float
    theta_0: float

    @property
    def pf(self) -> float:
        s = math.hypot(self.P_0, self.Q_0)
        return 1.0 if s == 0 else self.P_0 / s

    @property
    def v_complex(self) -> complex:
        """PCC voltage as a grid-frame space vector."""
        return complex(self.V_d0, self.V_q0) * np.exp(1j * self.theta_0)

    @property
    def i_complex(self) -> complex:
        return complex(self.I_d0, self.I_q0) * np.exp(1j * self.theta_0)


def _powers(v: complex, i: complex) -> tuple[float, float]:
    s = 1.5 * v * np.conj(i)
    return float(s.real), float(s.imag)


def solve_operating_point(p: ConverterParams, g: GridParams, P: float, Q: float,
                          max_iter: int = 50, tol: float = 1e-9) -> OperatingPoint:
    """Power flow from the converter PCC through ``R_g + j omega_N L_g`` to ``V_grid``.

    Unknowns are the PCC voltage magnitude ``V_d0`` and angle ``theta_0``;
    damped Newton from ``(V_grid, 0)``. Residuals are measured in p.u. of S_N.
    """
    z_g = complex(g.R_g, p.omega_N * g.L_g)
    if abs(z_g) == 0.0:
        v = complex(g.V_grid, 0.0)
        i = np.conj((P + 1j * Q) / (1.5 * v))
        return OperatingPoint(V_d0=g.V_grid, V_q0=0.0, I_d0=float(i.real), I_q0=float(i.imag),
                              P_0=P, Q_0=Q, theta_0=0.0)

    def resid(x):
        vm, th = x
        v = vm * np.exp(1j * th)
        i = (v - g.V_grid) / z_g
        pc, qc = _powers(v, i)
        return np.array([(pc - P) / p.S_N, (qc - Q) / p.S_N])

    x = np.array([g.V_grid, 0.0])
    r = resid(x)
    for _ in range(max_iter):
        nr = float(np.max(np.abs(r)))
        if nr < tol:
            break
        jac = np.empty((2, 2))
        for k, h in enumerate((1e-6 * g.V_grid, 1e-7)):
            dx = np.zeros(2)
            dx[k] = h
            jac[:, k] = (resid(x + dx) - resid(x - dx)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise InfeasibleOperatingPoint(nr) from None
        lam = 1.0
        while lam > 1e-4:
            x_new = x + lam * step
            r_new = resid(x_new)
            if x_new[0] > 0 and np.max(np.abs(r_new)) < nr:
                break
            lam *= 0.5
        else:
            raise InfeasibleOperatingPoint(nr)
        x, r = x_new, r_new
    nr = float(np.max(np.abs(r)))
    if nr >= tol:
        raise InfeasibleOperatingPoint(nr)
    vm, th = x
    v = vm * np.exp(1j * th)
    i_c = ((v - g.V_grid) / z_g) * np.exp(-1j * th)
    # currents from the requested powers so P/Q hold by construction
    i_d = 2.0 * P / (3.0 * vm)
    i_q = -2.0 * Q / (3.0 * vm)
    assert abs(complex(i_d, i_q) - i_c) <= 1e-6 * max(1.0, abs(i_c))
    return OperatingPoint(V_d0=float(vm), V_q0=0.0, I_d0=i_d, I_q0=i_q, P_0=P, Q_0=Q,
                          theta_0=float(th))


def forward_powers(op: OperatingPoint) -> tuple[float, float]:
    return (1.5 * (op.V_d0 * op.I_d0 + op.V_q0 * op.I_q0),
            1.5 * (op.V_q0 * op.I_d0 - op.V_d0 * op.I_q0))


def rated_operating_point(p: ConverterParams, g: GridParams) -> OperatingPoint:
    return solve_operating_point(p, g, p.P_ref, p.Q_ref)


def pf_to_pq(p: ConverterParams, pf: float, s: float | None = None) -> tuple[float, float]:
    """Split apparent power ``s`` (default S_N) at power factor ``pf`` (inductive export)."""
    s = p.S_N if s is None else s
    return s * pf, s * math.sqrt(max(0.0, 1.0 - pf * pf))


SSOP_NAMES = ("B_Vo_i", "B_Ic_i", "B_Vc_i", "B_Vo_v", "B_Ic_v", "B_Vc_v")


@dataclass(frozen=True)
class SSOPMatrices:
    """Six 2x2 steady-state coupling matrices.

    ``B_X_y`` couples the rotation of signal X (output voltage ``Vo``,
    controlled current ``Ic``, control voltage ``Vc``) with the power
    perturbation weighted by the steady-state voltage (``_v``) or current
    (``_i``).
    """

    B_Vo_i: np.ndarray
    B_Ic_i: np.ndarray
    B_Vc_i: np.ndarray
    B_Vo_v: np.ndarray
    B_Ic_v: np.ndarray
    B_Vc_v: np.ndarray
    extrapolated: bool = False

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in SSOP_NAMES}

    def zeroed(self, *names: str) -> "SSOPMatrices":
        d = self.as_dict()
        for n in names:
            if n not in d:
                raise KeyError(n)
            d[n] = np.zeros((2, 2))
        return SSOPMatrices(**d, extrapolated=self.extrapolated)


def _coupling(x_d: float, x_q: float, y_d: float, y_q: float) -> np.ndarray:
    # rotation column [-x_q, x_d] times power row [y_d, y_q]
    return np.array([[-x_q * y_d, -x_q * y_q], [x_d * y_d, x_d * y_q]])


def is_rated_unity(op: OperatingPoint, p: ConverterParams, rtol: float = 1e-2) -> bool:
    return (abs(op.P_0 - p.S_N) <= rtol * p.S_N and abs(op.Q_0) <= 1e-6 * p.S_N
            and abs(op.V_d0 - p.V_N) <= rtol * p.V_N)


def build_ssop_matrices(op: OperatingPoint, p: ConverterParams) -> SSOPMatrices:
    """SSOP matrices at ``op``.

    At rated unity power factor the literal rated-value matrices are returned
    (only entry (2,1) nonzero). Elsewhere the rated amplitudes are replaced by
    the operating values and the q-axis column follows the same rotation
    pattern; those results carry ``extrapolated=True``.
    """
    if is_rated_unity(op, p):
        vn, i_n = p.V_N, p.I_N

        def m(k):
            return np.array([[0.0, 0.0], [k, 0.0]])

        return SSOPMatrices(B_Vo_i=m(vn * i_n), B_Ic_i=m(i_n * i_n), B_Vc_i=m(vn * i_n),
                            B_Vo_v=m(vn * vn), B_Ic_v=m(vn * i_n), B_Vc_v=m(vn * vn),
                            extrapolated=False)
    v = (op.V_d0, op.V_q0)
    i = (op.I_d0, op.I_q0)
    return SSOPMatrices(
        B_Vo_i=_coupling(*v, *i), B_Ic_i=_coupling(*i, *i), B_Vc_i=_coupling(*v, *i),
        B_Vo_v=_coupling(*v, *v), B_Ic_v=_coupling(*i, *v), B_Vc_v=_coupling(*v, *v),
        extrapolated=True,
    )
