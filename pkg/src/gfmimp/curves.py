"""Sampled impedance curves and their CSV/JSON file format."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

CSV_HEADER = ("freq_hz", "re_ohm", "im_ohm", "mag_ohm", "phase_deg")

POSITIVE_SEQ_STATIONARY = "POSITIVE_SEQ_STATIONARY"
DQ_SCALAR = "DQ_SCALAR"


class CurveFormatError(ValueError):
    pass


@dataclass
class ImpedanceCurve:
    freqs: np.ndarray
    values: np.ndarray
    provenance: str
    params_digest: str = ""
    frame: str = POSITIVE_SEQ_STATIONARY
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.freqs.shape != self.values.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if len(self.freqs) > 1 and not np.all(np.diff(self.freqs) > 0):
            raise ValueError("freqs must be strictly increasing")

    @property
    def mag(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.values))

    def scaled(self, k: float) -> "ImpedanceCurve":
        return ImpedanceCurve(self.freqs.copy(), self.values * k, self.provenance,
                              self.params_digest, self.frame, dict(self.meta))

    def sidecar(self) -> dict:
        return {"provenance": self.provenance, "params_digest": self.params_digest,
                "frame": self.frame, "n_points": int(len(self.freqs)), "meta": self.meta}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(curve: ImpedanceCurve, path: str | Path, sidecar: bool = True) -> Path:
    """Write the curve; float fields use ``repr`` so a re-read is exact."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for f, z in zip(curve.freqs, curve.values):
            w.writerow([_fmt(f), _fmt(z.real), _fmt(z.imag), _fmt(abs(z)),
                        _fmt(math.degrees(math.atan2(z.imag, z.real)))])
    if sidecar:
        path.with_suffix(".json").write_text(json.dumps(curve.sidecar(), indent=2, sort_keys=True,
                                                        default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o)}")


def ingest_measured_curve(path: str | Path, provenance: Optional[str] = None) -> ImpedanceCurve:
    """Read a curve CSV. ``mag_ohm``/``phase_deg`` columns are optional and ignored."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise CurveFormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CurveFormatError(f"{path}: empty file") from None
        try:
            ci = [header.index(c) for c in CSV_HEADER[:3]]
        except ValueError:
            raise CurveFormatError(f"{path}: header must contain freq_hz, re_ohm, im_ohm") from None
        freqs: list[float] = []
        vals: list[complex] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                f, re, im = (float(row[k]) for k in ci)
            except (ValueError, IndexError):
                raise CurveFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not all(math.isfinite(x) for x in (f, re, im)):
                raise CurveFormatError(f"{path}:{lineno}: non-finite value")
            if freqs and f == freqs[-1]:
                raise CurveFormatError(f"{path}:{lineno}: duplicate frequency {f}")
            if freqs and f < freqs[-1]:
                raise CurveFormatError(f"{path}:{lineno}: frequency {f} not ascending")
            freqs.append(f)
            vals.append(complex(re, im))
    if not freqs:
        raise CurveFormatError(f"{path}: no data rows")
    return ImpedanceCurve(np.array(freqs), np.array(vals),
                          provenance or f"measured:{path}", params_digest="")
