"""Converter and grid parameter sets, per-unit bases and the JSON parameter file."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ConverterParams:
    """Converter ratings and controller constants, all SI.

    Voltages and currents are peak phase amplitudes (amplitude-invariant dq
    transform), so ``S_N = 1.5 * V_N * I_N``.
    """

    S_N: float = 200e3
    V_N: float = 563.0
    I_N: float = 236.0
    omega_N: float = 100.0 * math.pi
    J: float = 2546.0
    D_p: float = 31832.0
    K_v: float = 4438.0
    K_q: float = 0.01
    k_pV: float = 0.04
    k_iV: float = 347.0
    k_pI: float = 1.26
    k_iI: float = 420.0
    L_f: float = 300e-6
    P_ref: float = 200e3
    Q_ref: float = 0.0
    V_dc: float = 1300.0  # recorded only

    def __post_init__(self):
        for name in ("S_N", "V_N", "I_N", "omega_N", "D_p", "L_f"):
            if not getattr(self, name) > 0:
                raise ParamsError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if self.J < 0:
            raise ParamsError(f"J must be >= 0, got {self.J}")

    @property
    def f_N(self) -> float:
        return self.omega_N / (2.0 * math.pi)

    def with_pu(self, **pu_values: float) -> "ConverterParams":
        """Copy with selected quantities given in per-unit (e.g. ``D_p=20``)."""
        b = per_unit_bases(self)
        return replace(self, **{k: v * b.base_of(k) for k, v in pu_values.items()})

    def to_pu(self, name: str) -> float:
        return getattr(self, name) / per_unit_bases(self).base_of(name)

    def digest(self, extra: Optional[dict] = None) -> str:
        payload = asdict(self)
        if extra:
            payload["extra"] = extra
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class PerUnitBases:
    S_base: float
    V_base: float
    I_base: float
    omega_base: float
    Z_base: float
    L_base: float
    J_base: float
    D_base: float
    Kv_base: float
    Kq_base: float

    _MAP = {
        "S_N": "S_base", "P_ref": "S_base", "Q_ref": "S_base",
        "V_N": "V_base", "V_dc": "V_base", "V_grid": "V_base",
        "I_N": "I_base", "omega_N": "omega_base",
        "J": "J_base", "D_p": "D_base", "K_v": "Kv_base", "K_q": "Kq_base",
        "L_f": "L_base", "L_g": "L_base", "R_g": "Z_base",
        "k_pI": "Z_base", "k_iI": None, "k_pV": None, "k_iV": None,
    }

    def base_of(self, name: str) -> float:
        attr = self._MAP.get(name)
        if attr is None:
            raise ParamsError(f"no per-unit base defined for {name!r}")
        return getattr(self, attr)


def per_unit_bases(p: ConverterParams) -> PerUnitBases:
    """Bases that reproduce the dual SI / p.u. listing of the converter data sheet.

    ``J`` and ``D_p`` share the base ``S_N / omega_N``; ``K_v`` uses
    ``S_N / V_N``. ``K_q`` uses the reciprocal ``V_N / S_N``, which gives
    3.55 p.u. for the default 0.01 rather than the listed 4.0 (see
    :func:`kq_pu_discrepancy`).
    """
    z_base = 1.5 * p.V_N ** 2 / p.S_N
    return PerUnitBases(
        S_base=p.S_N,
        V_base=p.V_N,
        I_base=p.I_N,
        omega_base=p.omega_N,
        Z_base=z_base,
        L_base=z_base / p.omega_N,
        J_base=p.S_N / p.omega_N,
        D_base=p.S_N / p.omega_N,
        Kv_base=p.S_N / p.V_N,
        Kq_base=p.V_N / p.S_N,
    )


def kq_pu_discrepancy(p: ConverterParams, listed_pu: float = 4.0) -> dict:
    """Report (not assert) the mismatch between the listed K_q p.u. value and the base."""
    b = per_unit_bases(p)
    return {
        "K_q_si": p.K_q,
        "K_q_pu_computed": p.K_q / b.Kq_base,
        "K_q_pu_listed": listed_pu,
        "implied_base": p.K_q / listed_pu,
        "convention_base": b.Kq_base,
        "relative_mismatch": (p.K_q / b.Kq_base - listed_pu) / listed_pu,
    }


@dataclass(frozen=True)
class GridParams:
    """Thevenin grid behind the PCC.

    Build with either ``(L_g, R_g)`` or ``(SCR, ratio_RX)``; the other pair is
    derived through ``X_g = 1.5 V_N**2 / (SCR * S_N)`` at ``omega_N``, which is
    ``V_LL_rms**2 / (SCR * S_N)``.
    """

    L_g: float
    R_g: float
    SCR: float
    ratio_RX: float
    V_grid: float

    @classmethod
    def from_scr(cls, p: ConverterParams, SCR: float = 10.0, ratio_RX: float = 0.1,
                 V_grid: Optional[float] = None) -> "GridParams":
        if not SCR > 0:
            raise ParamsError(f"SCR must be > 0, got {SCR}")
        if ratio_RX < 0:
            raise ParamsError(f"ratio_RX must be >= 0, got {ratio_RX}")
        x_g = 1.5 * p.V_N ** 2 / (SCR * p.S_N)
        return cls(L_g=x_g / p.omega_N, R_g=ratio_RX * x_g, SCR=SCR, ratio_RX=ratio_RX,
                   V_grid=p.V_N if V_grid is None else V_grid)

    @classmethod
    def from_lr(cls, p: ConverterParams, L_g: float, R_g: float,
                V_grid: Optional[float] = None) -> "GridParams":
        if L_g < 0 or R_g < 0:
            raise ParamsError("L_g and R_g must be >= 0")
        x_g = p.omega_N * L_g
        z = math.hypot(x_g, R_g)
        scr = math.inf if z == 0 else 1.5 * p.V_N ** 2 / (z * p.S_N)
        ratio = math.inf if x_g == 0 and R_g > 0 else (R_g / x_g if x_g > 0 else 0.0)
        return cls(L_g=L_g, R_g=R_g, SCR=scr, ratio_RX=ratio,
                   V_grid=p.V_N if V_grid is None else V_grid)

    @classmethod
    def stiff(cls, p: ConverterParams) -> "GridParams":
        return cls.from_lr(p, 0.0, 0.0)


DEFAULT_SCR = 10.0
DEFAULT_RATIO_RX = 0.1

_CONVERTER_FIELDS = {f.name for f in fields(ConverterParams)}


def _resolve(name: str, raw: Any, bases: Optional[PerUnitBases]) -> float:
    if isinstance(raw, dict):
        if "value" not in raw:
            raise ParamsError(f"{name}: object form needs a 'value' key")
        val = float(raw["value"])
        if raw.get("pu"):
            if bases is None:
                raise ParamsError(f"{name}: per-unit value needs converter ratings first")
            val *= bases.base_of(name)
        return val
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParamsError(f"{name}: expected a number, got {raw!r}")
    return float(raw)


def params_from_dict(doc: dict) -> tuple[ConverterParams, GridParams]:
    """Parse a parameter document.

    Layout::

        {"converter": {"S_N": 200000, "D_p": {"value": 20, "pu": true}, ...},
         "grid": {"SCR": 10, "ratio_RX": 0.1}}

    Ratings (``S_N``, ``V_N``, ``I_N``, ``omega_N``) are read first so that
    per-unit entries can be converted. ``f_N`` may be given instead of
    ``omega_N``.
    """
    conv = dict(doc.get("converter", {}))
    if "f_N" in conv:
        if "omega_N" in conv:
            raise ParamsError("give either f_N or omega_N, not both")
        conv["omega_N"] = 2.0 * math.pi * _resolve("f_N", conv.pop("f_N"), None)
    unknown = set(conv) - _CONVERTER_FIELDS
    if unknown:
        raise ParamsError(f"unknown converter fields: {sorted(unknown)}")
    ratings = {k: _resolve(k, conv[k], None) for k in ("S_N", "V_N", "I_N", "omega_N") if k in conv}
    base_params = ConverterParams(**ratings)
    bases = per_unit_bases(base_params)
    values = {k: _resolve(k, v, bases) for k, v in conv.items()}
    p = ConverterParams(**values)

    grid = dict(doc.get("grid", {}))
    v_grid = _resolve("V_grid", grid["V_grid"], bases) if "V_grid" in grid else None
    has_lr = "L_g" in grid or "R_g" in grid
    has_scr = "SCR" in grid or "ratio_RX" in grid
    if has_lr and has_scr:
        raise ParamsError("grid: supply either (L_g, R_g) or (SCR, ratio_RX), not both")
    if has_lr:
        g = GridParams.from_lr(p, _resolve("L_g", grid.get("L_g", 0.0), bases),
                               _resolve("R_g", grid.get("R_g", 0.0), bases), v_grid)
    else:
        g = GridParams.from_scr(p, float(grid.get("SCR", DEFAULT_SCR)),
                                float(grid.get("ratio_RX", DEFAULT_RATIO_RX)), v_grid)
    return p, g


def load_params(path: Optional[str | Path]) -> tuple[ConverterParams, GridParams]:
    if path is None:
        p = ConverterParams()
        return p, GridParams.from_scr(p, DEFAULT_SCR, DEFAULT_RATIO_RX)
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParamsError(f"cannot read parameter file {path}: {exc}") from exc
    return params_from_dict(doc)


def params_to_dict(p: ConverterParams, g: Optional[GridParams] = None) -> dict:
    doc: dict = {"converter": asdict(p)}
    if g is not None:
        doc["grid"] = {"L_g": g.L_g, "R_g": g.R_g, "V_grid": g.V_grid}
    return doc
