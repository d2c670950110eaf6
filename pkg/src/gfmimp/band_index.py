"""Corner frequencies, exclusion bandwidth and grid-code resistance checks."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal import medfilt

from .curves import ImpedanceCurve

MAX_STEP_HZ = 0.5
MIN_POINTS_PER_SIDE = 5
PLATEAU_BRIDGE = 3


class NoCornerError(ValueError):
    """No slope sign change (- to +) on one or both sides of f_N."""

    def __init__(self, sides: Sequence[str], detail: str = ""):
        names = " and ".join(sides)
        msg = f"no corner detected {names} f_N"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.sides = tuple(sides)


class BandIndexError(ValueError):
    pass


# --------------------------------------------------------------------------- corners

def _parabola_vertex(x: np.ndarray, y: np.ndarray) -> float:
    """Abscissa of the vertex through three points; falls back to the middle one."""
    x0, x1, x2 = x
    y0, y1, y2 = y
    d0 = (y1 - y0) / (x1 - x0)
    d1 = (y2 - y1) / (x2 - x1)
    a = (d1 - d0) / (x2 - x0)
    if a <= 0:
        return float(x1)
    xv = 0.5 * (x0 + x1) - d0 / (2 * a)
    return float(np.clip(xv, x0, x2))


def _discrete_minima(m: np.ndarray, bridge: int = PLATEAU_BRIDGE) -> list[int]:
    """Indices where the first difference goes from strictly negative to strictly positive.

    Runs of up to ``bridge`` zero differences between the two are accepted; the
    reported index is the middle of the flat run.
    """
    d = np.diff(m)
    out = []
    for i in range(1, len(m) - 1):
        if d[i - 1] >= 0:
            continue
        j = i
        while j < len(d) and d[j] == 0 and j - i < bridge:
            j += 1
        if j < len(d) and d[j] > 0:
            out.append((i + j) // 2)
    return out


def _check_grid(f: np.ndarray, f_N: float):
    below = np.count_nonzero(f < f_N)
    above = np.count_nonzero(f > f_N)
    if below < MIN_POINTS_PER_SIDE or above < MIN_POINTS_PER_SIDE:
        raise BandIndexError(f"curve must bracket f_N with at least {MIN_POINTS_PER_SIDE} points "
                             f"per side (has {below} below, {above} above)")
    # each side on its own: the step straddling f_N may skip the excluded point
    for side in (f[(f > f_N - 15.0) & (f < f_N)], f[(f > f_N) & (f < f_N + 15.0)]):
        if len(side) > 1 and np.max(np.diff(side)) > MAX_STEP_HZ + 1e-12:
            raise BandIndexError(f"grid step near f_N exceeds {MAX_STEP_HZ} Hz")


def find_corner_frequencies(curve: ImpedanceCurve, f_N: float = 50.0,
                            median_filter: bool = False) -> tuple[float, float]:
    """Local minima of ``|Z|`` nearest to ``f_N`` on each side, parabola-refined.

    A candidate on a side needs its two neighbours on the same side of
    ``f_N``, so the peak flank itself is never taken as a corner.
    """
    f = curve.freqs
    m = np.abs(curve.values)
    _check_grid(f, f_N)
    if median_filter:
        m = medfilt(m, 3)
    minima = _discrete_minima(m)
    below = [i for i in minima if f[i + 1] < f_N]
    above = [i for i in minima if f[i - 1] > f_N]
    missing = [side for side, c in (("below", below), ("above", above)) if not c]
    if missing:
        raise NoCornerError(missing, "flat curve or insufficient span")
    ia, ib = below[-1], above[0]
    f_a = _parabola_vertex(f[ia - 1:ia + 2], m[ia - 1:ia + 2])
    f_b = _parabola_vertex(f[ib - 1:ib + 2], m[ib - 1:ib + 2])
    return f_a, f_b


def exclusion_bandwidth(f_a: float, f_b: float, f_N: float = 50.0) -> dict:
    if not f_a < f_N < f_b:
        raise BandIndexError(f"need f_a < f_N < f_b, got {f_a}, {f_N}, {f_b}")
    d1 = f_N - f_a
    d2 = f_b - f_N
    return {"f_a": f_a, "f_b": f_b, "delta_f1": d1, "delta_f2": d2, "delta_f": max(d1, d2)}


def peak_characterize(curve: ImpedanceCurve, f_a: float, f_b: float) -> tuple[float, complex]:
    """Largest sampled ``|Z|`` on ``[f_a, f_b]``."""
    sel = np.flatnonzero((curve.freqs >= f_a) & (curve.freqs <= f_b))
    if sel.size == 0:
        raise BandIndexError("no samples between the corners")
    k = sel[np.argmax(np.abs(curve.values[sel]))]
    return float(curve.freqs[k]), complex(curve.values[k])


# --------------------------------------------------------------------------- compliance

@dataclass(frozen=True)
class ComplianceBandSet:
    name: str
    required_bands: tuple
    excluded_band: Optional[tuple] = None
    f_N: float = 50.0

    def __post_init__(self):
        bands = tuple((float(lo), float(hi)) for lo, hi in self.required_bands)
        for lo, hi in bands:
            if not hi > lo:
                raise ValueError(f"band ({lo}, {hi}) is empty")
        for (_, h0), (l1, _) in zip(bands, bands[1:]):
            if l1 < h0:
                raise ValueError("required bands must be ascending and non-overlapping")
        object.__setattr__(self, "required_bands", bands)
        if self.excluded_band is not None:
            object.__setattr__(self, "excluded_band", tuple(float(x) for x in self.excluded_band))

    def to_dict(self) -> dict:
        return {"name": self.name, "f_N": self.f_N, "required_bands": [list(b) for b in self.required_bands],
                "excluded_band": list(self.excluded_band) if self.excluded_band else None}


PRESET_NAMES = ("nerc", "fingrid", "china", "unifi")


def compliance_preset(name: str, f_N: float = 50.0) -> ComplianceBandSet:
    key = name.lower()
    if key == "nerc":
        return ComplianceBandSet("nerc", ((0.0, 300.0),), None, f_N)
    if key == "fingrid":
        return ComplianceBandSet("fingrid", ((0.0, f_N - 3), (f_N + 3, 250.0)), (f_N - 3, f_N + 3), f_N)
    if key == "china":
        return ComplianceBandSet("china", ((1.0, f_N - 5), (f_N + 5, 1000.0)), (f_N - 5, f_N + 5), f_N)
    if key == "unifi":
        return ComplianceBandSet("unifi", ((f_N - 40, f_N - 4), (f_N + 4, f_N + 40)),
                                 (f_N - 4, f_N + 4), f_N)
    raise KeyError(f"unknown compliance preset {name!r}; expected one of {PRESET_NAMES}")


def load_band_set(path: str | Path) -> ComplianceBandSet:
    doc = json.loads(Path(path).read_text())
    return ComplianceBandSet(doc.get("name", Path(path).stem), tuple(map(tuple, doc["required_bands"])),
                             tuple(doc["excluded_band"]) if doc.get("excluded_band") else None,
                             float(doc.get("f_N", 50.0)))


@dataclass
class BandVerdict:
    band: tuple
    status: str  # "pass", "fail" or "untested"
    n_samples: int
    covered: Optional[tuple] = None
    untested: list = field(default_factory=list)
    first_violation_hz: Optional[float] = None
    min_resistance_ohm: Optional[float] = None
    violations: list = field(default_factory=list)


def compliance_check(curve: ImpedanceCurve, bands: ComplianceBandSet) -> list[BandVerdict]:
    """Require ``Re{Z} >= 0`` at every sample inside each band.

    Only samples are judged; stretches of a band outside the curve's span are
    listed as untested.
    """
    f = curve.freqs
    r = curve.values.real
    out = []
    for lo, hi in bands.required_bands:
        sel = np.flatnonzero((f >= lo) & (f <= hi))
        if sel.size == 0:
            out.append(BandVerdict((lo, hi), "untested", 0, None, [(lo, hi)]))
            continue
        c_lo, c_hi = float(f[sel[0]]), float(f[sel[-1]])
        gaps = [g for g in ((lo, c_lo), (c_hi, hi)) if g[1] > g[0]]
        bad = sel[r[sel] < 0]
        v = BandVerdict((lo, hi), "fail" if bad.size else "pass", int(sel.size), (c_lo, c_hi), gaps,
                        float(f[bad[0]]) if bad.size else None, float(np.min(r[sel])),
                        _runs(f, sel, r[sel] < 0))
        out.append(v)
    return out


def _runs(f: np.ndarray, sel: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    """Sampled ``[first, last]`` frequency of each consecutive run of ``mask``."""
    runs = []
    start = None
    for k, bad in enumerate(mask):
        if bad and start is None:
            start = k
        if start is not None and (not bad or k == len(mask) - 1):
            end = k if bad else k - 1
            runs.append((float(f[sel[start]]), float(f[sel[end]])))
            start = None
    return runs


def overall_verdict(verdicts: Sequence[BandVerdict]) -> str:
    if any(v.status == "fail" for v in verdicts):
        return "fail"
    if any(v.status == "pass" for v in verdicts):
        return "pass"
    return "untested"


# --------------------------------------------------------------------------- report

@dataclass
class BandIndexReport:
    f_a: float
    f_b: float
    delta_f1: float
    delta_f2: float
    delta_f: float
    f_peak: float
    Z_peak: complex
    f_N: float = 50.0
    method_notes: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)

    @property
    def exclusion_band(self) -> tuple[float, float]:
        """Band to omit from stationary-frame resistance checks."""
        return (self.f_N - self.delta_f, self.f_N + self.delta_f)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("f_a", "f_b", "delta_f1", "delta_f2", "delta_f",
                                            "f_peak", "f_N")}
        d["Z_peak"] = {"re": self.Z_peak.real, "im": self.Z_peak.imag, "mag": abs(self.Z_peak)}
        d["exclusion_band"] = list(self.exclusion_band)
        d["method_notes"] = self.method_notes
        d["verdicts"] = [_verdict_dict(v) for v in self.verdicts]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [
            f"f_a      {self.f_a:.3f} Hz",
            f"f_b      {self.f_b:.3f} Hz",
            f"df1      {self.delta_f1:.3f} Hz",
            f"df2      {self.delta_f2:.3f} Hz",
            f"df       {self.delta_f:.3f} Hz",
            f"peak     {abs(self.Z_peak):.6g} ohm at {self.f_peak:.3f} Hz",
            f"omit     {self.exclusion_band[0]:.3f} .. {self.exclusion_band[1]:.3f} Hz "
            "in stationary-frame resistance checks",
        ]
        if self.method_notes.get("fundamental_pole"):
            lines.append("note     model has a pole at f_N; the peak value depends on grid resolution")
        for v in self.verdicts:
            lines.append(_verdict_line(v))
        return "\n".join(lines) + "\n"


def _verdict_dict(v: BandVerdict) -> dict:
    d = asdict(v)
    d["band"] = list(v.band)
    d["covered"] = list(v.covered) if v.covered else None
    d["untested"] = [list(g) for g in v.untested]
    d["violations"] = [list(g) for g in v.violations]
    return d


def _verdict_line(v: BandVerdict) -> str:
    s = f"band     {v.band[0]:g}-{v.band[1]:g} Hz: {v.status}"
    if v.violations:
        s += " (Re<0 on " + ", ".join(f"{a:g}-{b:g}" for a, b in v.violations) + " Hz)"
    if v.untested and v.status != "untested":
        s += " untested " + ", ".join(f"{a:g}-{b:g}" for a, b in v.untested)
    return s


def compute_band_index(curve: ImpedanceCurve, f_N: float = 50.0, median_filter: bool = False,
                       bands: Optional[ComplianceBandSet] = None) -> BandIndexReport:
    f_a, f_b = find_corner_frequencies(curve, f_N, median_filter)
    ex = exclusion_bandwidth(f_a, f_b, f_N)
    f_peak, z_peak = peak_characterize(curve, f_a, f_b)
    steps = np.diff(curve.freqs)
    notes = {
        "grid_step_hz": [float(steps.min()), float(steps.max())] if steps.size else None,
        "n_points": int(curve.freqs.size),
        "slope_test": "first difference sign change - to +, nearest to f_N per side",
        "plateau_bridge_samples": PLATEAU_BRIDGE,
        "refinement": "3-point parabola on |Z|",
        "median_prefilter": bool(median_filter),
        "provenance": curve.provenance,
        "fundamental_pole": bool(curve.meta.get("fundamental_pole", False)),
    }
    verdicts = compliance_check(curve, bands) if bands is not None else []
    return BandIndexReport(f_a=ex["f_a"], f_b=ex["f_b"], delta_f1=ex["delta_f1"],
                           delta_f2=ex["delta_f2"], delta_f=ex["delta_f"], f_peak=f_peak,
                           Z_peak=z_peak, f_N=f_N, method_notes=notes, verdicts=verdicts)
