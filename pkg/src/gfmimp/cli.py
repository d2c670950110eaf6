"""``gfmimp`` command-line front end.

Every command writes its outputs plus ``manifest.json`` into ``--out``. The
manifest holds the resolved configuration and the base parameter document,
so ``gfmimp <cmd> --from-manifest OUT/manifest.json`` repeats a run.

Exit codes: 0 ok, 2 configuration error, 3 model error, 4 no corner
detected, 5 compliance failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import itertools
import json
import logging
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import band_index as bi
from . import models as mdl
from . import sim
from .curves import CurveFormatError, ImpedanceCurve, ingest_measured_curve, write_curve_csv
from .operating_point import InfeasibleOperatingPoint, pf_to_pq, solve_operating_point
from .params import ConverterParams, GridParams, ParamsError, params_from_dict, params_to_dict
from .tf import PoleEvaluationError

log = logging.getLogger("gfmimp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_NO_CORNER = 4
EXIT_COMPLIANCE = 5

DEFAULT_CURVE_GRID = "1:100:0.1"
DEFAULT_SCAN_FREQS = "30:70:0.5"
DEFAULT_SWEEP_DP = "10,20,30,40,50"
DEFAULT_SWEEP_J = "1,2,4,8"
DEFAULT_SCHEDULE = "1.0:2.5,4.0:50"
COMPLIANCE_STEP_HZ = 0.1


class ConfigError(ValueError):
    pass


class ModelFailure(RuntimeError):
    pass


# --------------------------------------------------------------------------- helpers

def _float_list(text: Optional[str], name: str) -> Optional[list[float]]:
    if text is None:
        return None
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"--{name}: empty list")
    return vals


def _single(text, name: str) -> Optional[float]:
    vals = _float_list(None if text is None else str(text), name)
    if vals is None:
        return None
    if len(vals) != 1:
        raise ConfigError(f"--{name} takes one value for this command")
    return vals[0]


def _parse_schedule(text: str) -> list[tuple[float, float]]:
    if text.strip().lower() in ("", "none"):
        return []
    out = []
    for item in text.split(","):
        try:
            t, d = item.split(":")
            out.append((float(t), float(d)))
        except ValueError:
            raise ConfigError(f"--schedule entries must be 'time:D_p_pu', got {item!r}") from None
    return out


def _grid(spec: str, f_N: Optional[float]) -> np.ndarray:
    try:
        return mdl.parse_grid(spec, f_N)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _params_doc(args) -> dict:
    """The parameter document as read, so a manifest re-run parses identical values."""
    doc = getattr(args, "_params_doc", None)
    if doc is None:
        if args.params is None:
            doc = {}
        else:
            try:
                doc = json.loads(Path(args.params).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ParamsError(f"cannot read parameter file {args.params}: {exc}") from None
        args._params_doc = doc
    return doc


def _load_base(args) -> tuple[ConverterParams, GridParams]:
    return params_from_dict(_params_doc(args))


def _apply_overrides(p: ConverterParams, g: GridParams, dp_pu=None, j_pu=None, scr=None,
                     rx=None) -> tuple[ConverterParams, GridParams]:
    pu = {}
    if dp_pu is not None:
        pu["D_p"] = dp_pu
    if j_pu is not None:
        pu["J"] = j_pu
    if pu:
        p = p.with_pu(**pu)
    if scr is not None or rx is not None:
        g = GridParams.from_scr(p, g.SCR if scr is None else scr,
                                g.ratio_RX if rx is None else rx, g.V_grid)
    return p, g


def _operating_point(p: ConverterParams, g: GridParams, pf: Optional[float]):
    if pf is None:
        P, Q = p.P_ref, p.Q_ref
    else:
        if not 0 < pf <= 1:
            raise ConfigError(f"--pf must lie in (0, 1], got {pf}")
        P, Q = pf_to_pq(p, pf)
        p = replace(p, P_ref=P, Q_ref=Q)
    return p, solve_operating_point(p, g, P, Q)


def _tier(name: str, args) -> mdl.ModelTier:
    try:
        return mdl.tier_from_name(name, inertia_enabled=not args.no_inertia, stack=args.stack)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _tier_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ConfigError("--tier: empty list")
    return names


def _model_curve(tier_name: str, args, freqs_spec: str) -> tuple[ImpedanceCurve, ConverterParams]:
    p, g = _load_base(args)
    p, g = _apply_overrides(p, g, _single(args.dp_pu, "dp-pu"), _single(args.j_pu, "j-pu"),
                            args.scr, args.rx)
    p, op = _operating_point(p, g, args.pf)
    tier = _tier(tier_name, args)
    freqs = _grid(freqs_spec, p.f_N if tier.has_fundamental_pole else None)
    return mdl.sample_curve(tier, p, g, op, freqs), p


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())
            if not k.startswith("_") and k not in ("func", "from_manifest")}


def _write_manifest(args, out: Path, outputs: Sequence[Path], extra: Optional[dict] = None):
    p, g = _load_base(args)
    doc = {
        "command": args.command,
        "config": _config_dict(args),
        "params": _params_doc(args),
        "resolved_params": params_to_dict(p, g),
        "outputs": sorted(str(o.relative_to(out)) for o in outputs),
        "package_version": _version(),
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    _write_json(out / "manifest.json", doc)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return repr(float(x))


# --------------------------------------------------------------------------- commands

def cmd_curve(args, out: Path) -> int:
    written = []
    for name in _tier_list(args.tier):
        curve, _ = _model_curve(name, args, args.grid)
        stem = f"curve_{name.lower()}" + ("_noinertia" if args.no_inertia else "")
        written.append(write_curve_csv(curve, out / f"{stem}.csv"))
        written.append((out / f"{stem}.csv").with_suffix(".json"))
        print(f"{curve.provenance}: {len(curve.freqs)} points -> {out / (stem + '.csv')}")
    _write_manifest(args, out, written)
    return EXIT_OK


def _curve_source(args) -> tuple[ImpedanceCurve, float]:
    """Measured CSV if ``--curve`` is given, otherwise the single ``--tier``."""
    if args.curve:
        curve = ingest_measured_curve(args.curve)
        p, _ = _load_base(args)
        return curve, p.f_N
    names = _tier_list(args.tier)
    if len(names) != 1:
        raise ConfigError("this command takes exactly one --tier (or --curve)")
    curve, p = _model_curve(names[0], args, args.grid)
    return curve, p.f_N


def _band_set(args, f_N: float) -> Optional[bi.ComplianceBandSet]:
    if getattr(args, "bands", None):
        try:
            return bi.load_band_set(args.bands)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read band file {args.bands}: {exc}") from None
    if args.preset:
        try:
            return bi.compliance_preset(args.preset, args.preset_fn or f_N)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    return None


def cmd_index(args, out: Path) -> int:
    curve, f_N = _curve_source(args)
    bands = _band_set(args, f_N)
    try:
        rep = bi.compute_band_index(curve, f_N, args.median_filter, bands)
    except bi.NoCornerError as exc:
        reason = str(exc)
        if curve.provenance == mdl.CCL_VCL:
            reason += "; the voltage-controlled converter has no impedance peak without the APCL"
        _write_json(out / "index_report.json", {"error": reason, "provenance": curve.provenance})
        _write_manifest(args, out, [out / "index_report.json"])
        print(f"error: {reason}", file=sys.stderr)
        return EXIT_NO_CORNER
    (out / "index_report.json").write_text(rep.to_json())
    (out / "index_report.txt").write_text(rep.summary())
    sys.stdout.write(rep.summary())
    _write_manifest(args, out, [out / "index_report.json", out / "index_report.txt"])
    return EXIT_OK


def cmd_check(args, out: Path) -> int:
    if args.curve:
        curve, f_N = _curve_source(args)
        bands = _band_set(args, f_N)
    else:
        p, _ = _load_base(args)
        bands = _band_set(args, p.f_N)
        if bands is None:
            raise ConfigError("check needs --preset or --bands")
        if args.grid is None:
            lo = min(b[0] for b in bands.required_bands)
            hi = max(b[1] for b in bands.required_bands)
            args.grid = f"{lo:g}:{hi:g}:{COMPLIANCE_STEP_HZ:g}"
        curve, f_N = _curve_source(args)
    if bands is None:
        raise ConfigError("check needs --preset or --bands")
    verdicts = bi.compliance_check(curve, bands)
    overall = bi.overall_verdict(verdicts)
    doc = {"bands": bands.to_dict(), "overall": overall, "provenance": curve.provenance,
           "verdicts": [bi._verdict_dict(v) for v in verdicts]}
    try:
        rep = bi.compute_band_index(curve, f_N)
        doc["index"] = {"f_a": rep.f_a, "f_b": rep.f_b, "delta_f": rep.delta_f}
    except (bi.NoCornerError, bi.BandIndexError) as exc:
        doc["index"] = {"error": str(exc)}
    _write_json(out / "check.json", doc)
    for v in verdicts:
        print(bi._verdict_line(v))
    print(f"overall  {overall}")
    _write_manifest(args, out, [out / "check.json"])
    return EXIT_OK if overall == "pass" else EXIT_COMPLIANCE


def _scan_model(p: ConverterParams, g: GridParams, pf: Optional[float], stack: str):
    p, op = _operating_point(p, g, pf)
    return sim.make_model(p, g, op, stack)


def cmd_scan(args, out: Path) -> int:
    p, g = _load_base(args)
    p, g = _apply_overrides(p, g, _single(args.dp_pu, "dp-pu"), _single(args.j_pu, "j-pu"),
                            args.scr, args.rx)
    model = _scan_model(p, g, args.pf, args.stack)
    freqs = _grid(args.freqs, p.f_N)
    try:
        curve, _, errors = sim.scan_sweep(model, freqs, args.amplitude, args.settle_time,
                                          args.capture_periods, args.dt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for e in errors:
        print(f"warning: scan point failed at {e}", file=sys.stderr)
    if len(curve.freqs) == 0:
        raise ModelFailure("every scan point failed")
    path = write_curve_csv(curve, out / "scan.csv")
    print(f"scan: {len(curve.freqs)}/{len(freqs)} points -> {path}")
    _write_manifest(args, out, [path, path.with_suffix(".json")])
    return EXIT_OK


SWEEP_COLUMNS = ("dp_pu", "j_pu", "pf", "scr", "rx", "delta_f", "delta_f1", "delta_f2",
                 "f_a", "f_b", "z_peak_ohm", "f_peak", "error")


def _sweep_point(args, base, point: dict, source: str, freqs: np.ndarray) -> dict:
    p, g = base
    row = dict(point)
    try:
        p, g = _apply_overrides(p, g, point["dp_pu"], point["j_pu"], point["scr"], point["rx"])
        if source == "scan":
            model = _scan_model(p, g, point["pf"], args.stack)
            curve, _, errors = sim.scan_sweep(model, freqs, args.amplitude, args.settle_time,
                                              args.capture_periods, args.dt)
            if errors:
                row["error"] = f"{len(errors)} scan points failed"
        else:
            p, op = _operating_point(p, g, point["pf"])
            curve = mdl.sample_curve(_tier(args.tier, args), p, g, op, freqs)
        rep = bi.compute_band_index(curve, p.f_N)
        row.update(delta_f=rep.delta_f, delta_f1=rep.delta_f1, delta_f2=rep.delta_f2,
                   f_a=rep.f_a, f_b=rep.f_b, z_peak_ohm=abs(rep.Z_peak), f_peak=rep.f_peak)
    except Exception as exc:  # recorded per point, the sweep goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args, out: Path) -> int:
    base = _load_base(args)
    dp = _float_list(args.dp_pu, "dp-pu")
    j = _float_list(args.j_pu, "j-pu")
    pf = _float_list(args.pf, "pf")
    scr = _float_list(args.scr, "scr")
    rx = _float_list(args.rx, "rx")
    source = args.source
    if source == "auto":
        source = "scan" if any(v is not None for v in (pf, scr, rx)) else "analytic"
    if source == "analytic" and dp is None and j is None:
        dp = _float_list(DEFAULT_SWEEP_DP, "dp-pu")
        j = _float_list(DEFAULT_SWEEP_J, "j-pu")
    args.source = source
    axes = {"dp_pu": dp or [None], "j_pu": j or [None], "pf": pf or [None],
            "scr": scr or [None], "rx": rx or [None]}
    f_N = base[0].f_N
    if source == "scan":
        freqs = _grid(args.freqs, f_N)
    else:
        tier = _tier(args.tier, args)
        freqs = _grid(args.grid, f_N if tier.has_fundamental_pole else None)
    rows = [_sweep_point(args, base, dict(zip(axes, combo)), source, freqs)
            for combo in itertools.product(*axes.values())]
    path = out / "sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) if c != "error" else r.get("error", "") for c in SWEEP_COLUMNS])
    n_bad = sum(1 for r in rows if r.get("error"))
    print(f"sweep ({source}): {len(rows)} points, {n_bad} with errors -> {path}")
    sens = _sensitivity(rows, axes)
    for k, v in sens.items():
        print(f"df range over {k}: {v:.3f} Hz (mean over the other axes)")
    _write_manifest(args, out, [path], {"delta_f_range_hz": sens} if sens else None)
    return EXIT_OK


def _sensitivity(rows: list[dict], axes: dict) -> dict:
    """Mean spread of delta_f along each swept axis, the others held fixed."""
    out = {}
    for name, vals in axes.items():
        if len(vals) < 2:
            continue
        groups: dict = {}
        for r in rows:
            if r.get("delta_f") is None:
                continue
            key = tuple(r[k] for k in axes if k != name)
            groups.setdefault(key, []).append(r["delta_f"])
        spans = [max(g) - min(g) for g in groups.values() if len(g) == len(vals)]
        if spans:
            out[name] = float(np.mean(spans))
    return out


TIMESERIES_HEADER = ("t_s", "p_w", "q_var", "vd_v", "vq_v", "id_a", "iq_a", "omega_rads")


def cmd_demo(args, out: Path) -> int:
    p, g = _load_base(args)
    scr = sim.WEAK_GRID_SCR if args.scr is None else args.scr
    rx = sim.WEAK_GRID_RX if args.rx is None else args.rx
    args.scr, args.rx = scr, rx
    p, g = _apply_overrides(p, g, _single(args.dp_pu, "dp-pu"), _single(args.j_pu, "j-pu"), scr, rx)
    schedule = _parse_schedule(args.schedule)
    try:
        rep = sim.run_instability_demo(p, g, schedule, t_end=args.t_end, dt=args.dt,
                                       stack=args.stack, kick=args.kick)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    written = []
    ts = out / "demo_timeseries.csv"
    with ts.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_HEADER)
        for row in rep.table:
            w.writerow([f"{x:.10g}" for x in row])
    written.append(ts)
    for key, (f, mag, ph) in sorted(rep.spectra.items()):
        path = out / f"demo_spectrum_{key}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("freq_hz", "mag", "phase_deg"))
            for row in zip(f, mag, ph):
                w.writerow([f"{x:.10g}" for x in row])
        written.append(path)
    findings = dict(rep.findings)
    findings["schedule_pu"] = rep.events
    f_osc = findings.get("p_oscillation_hz")
    if findings.get("oscillation_detected") and f_osc:
        findings["coupled_pair_hz"] = [p.f_N - f_osc, p.f_N + f_osc]
        findings["coupling_check"] = {"f_sub_plus_f_super_hz": (findings["i_sub_hz"] or 0)
                                      + (findings["i_super_hz"] or 0), "two_f_N": 2 * p.f_N}
    written.append(_write_json(out / "demo_findings.json", findings))
    print(f"oscillation detected: {findings.get('oscillation_detected')}")
    if f_osc is not None:
        print(f"P oscillation {f_osc:.3f} Hz; current sidebands "
              f"{findings.get('i_sub_hz')} / {findings.get('i_super_hz')} Hz")
    if rep.diverged:
        print(f"simulation diverged at t = {rep.t_diverged:.4f} s")
    _write_manifest(args, out, written)
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def _common(sp: argparse.ArgumentParser):
    sp.add_argument("--params", help="parameter JSON file (defaults to the built-in rating set)")
    sp.add_argument("--out", default="gfmimp_out", help="output directory")
    sp.add_argument("--from-manifest", help="repeat the run recorded in a manifest.json")
    sp.add_argument("--dp-pu", help="APCL damping D_p in p.u.")
    sp.add_argument("--j-pu", help="virtual inertia J in p.u.")
    sp.add_argument("--no-inertia", action="store_true", help="drop the inertia term (J = 0)")
    sp.add_argument("--stack", default="apcl", choices=sim.STACKS,
                    help="control loops for simulation and the full tier")


def _grid_flags(sp, pf_help="power factor of the operating point"):
    sp.add_argument("--pf", type=float, help=pf_help)
    sp.add_argument("--scr", type=float, help="grid short-circuit ratio")
    sp.add_argument("--rx", type=float, help="grid R/X ratio")


def _scan_flags(sp):
    sp.add_argument("--freqs", default=DEFAULT_SCAN_FREQS, help="scan grid start:stop:step in Hz")
    sp.add_argument("--amplitude", type=float, default=0.01, help="injection amplitude, p.u. of V_N")
    sp.add_argument("--settle-time", type=float, default=2.0)
    sp.add_argument("--capture-periods", type=int, default=20)
    sp.add_argument("--dt", type=float, default=10e-6)


def _index_flags(sp):
    sp.add_argument("--tier", default="apcl", help="ccl, vcl, apcl or full")
    sp.add_argument("--curve", help="impedance CSV to use instead of a model tier")
    _grid_flags(sp)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gfmimp",
                                 description="Impedance models, exclusion bandwidth and "
                                             "frequency scans for grid-forming converters.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("curve", help="sample model impedance curves")
    _common(sp)
    sp.add_argument("--tier", default="ccl,vcl,apcl", help="comma list of ccl, vcl, apcl, full")
    sp.add_argument("--grid", default=DEFAULT_CURVE_GRID, help="start:stop:step in Hz")
    _grid_flags(sp)
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("index", help="corner frequencies and exclusion bandwidth")
    _common(sp)
    _index_flags(sp)
    sp.add_argument("--grid", default=DEFAULT_CURVE_GRID, help="start:stop:step in Hz")
    sp.add_argument("--median-filter", action="store_true", help="3-point median prefilter")
    sp.add_argument("--preset", help="also judge a compliance preset")
    sp.add_argument("--preset-fn", type=float, help="f_N of the preset (default: converter f_N)")
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("sweep", help="exclusion bandwidth over parameter sets")
    _common(sp)
    sp.add_argument("--tier", default="apcl", help="tier for analytic sweeps")
    sp.add_argument("--grid", default=DEFAULT_CURVE_GRID, help="analytic grid start:stop:step")
    sp.add_argument("--pf", help="comma list of power factors (scanned)")
    sp.add_argument("--scr", help="comma list of SCR values (scanned)")
    sp.add_argument("--rx", help="comma list of R/X values (scanned)")
    sp.add_argument("--source", default="auto", choices=("auto", "analytic", "scan"))
    _scan_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("scan", help="time-domain frequency scan")
    _common(sp)
    _grid_flags(sp)
    _scan_flags(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("check", help="grid-code resistance check")
    _common(sp)
    _index_flags(sp)
    sp.add_argument("--grid", default=None, help="start:stop:step (default: preset span, 0.1 Hz)")
    sp.add_argument("--preset", help="nerc, fingrid, china or unifi")
    sp.add_argument("--preset-fn", type=float, help="f_N of the preset (default: converter f_N)")
    sp.add_argument("--bands", help="custom band-set JSON file")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("demo", help="D_p step instability demo")
    _common(sp)
    _grid_flags(sp)
    sp.set_defaults(stack="full")
    sp.add_argument("--schedule", default=DEFAULT_SCHEDULE,
                    help="comma list of time:D_p_pu events, or 'none'")
    sp.add_argument("--t-end", type=float, default=7.0)
    sp.add_argument("--dt", type=float, default=10e-6)
    sp.add_argument("--kick", type=float, default=sim.DEMO_KICK_RAD,
                    help="angle nudge in rad applied at each event")
    sp.set_defaults(func=cmd_demo)
    return ap


def _from_manifest(args, parser: argparse.ArgumentParser, argv: Sequence[str]):
    try:
        doc = json.loads(Path(args.from_manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {args.from_manifest}: {exc}") from None
    if doc.get("command") != args.command:
        raise ConfigError(f"manifest records command {doc.get('command')!r}, not {args.command!r}")
    out_given = any(a == "--out" or a.startswith("--out=") for a in argv)
    out = args.out
    for k, v in doc["config"].items():
        setattr(args, k, v)
    if out_given:
        args.out = out
    args._params_doc = doc["params"]
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.from_manifest:
            args = _from_manifest(args, parser, argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, out)
    except (ConfigError, ParamsError, CurveFormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except bi.NoCornerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CORNER
    except (ModelFailure, mdl.ModelError, InfeasibleOperatingPoint, PoleEvaluationError,
            sim.SimulationDiverged, np.linalg.LinAlgError, bi.BandIndexError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
