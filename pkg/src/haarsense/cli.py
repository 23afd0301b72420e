"""Command-line front end.

Subcommands::

    haarsense transform   IN.csv --order N -o coeffs.json
    haarsense simulate    CONFIG.json [--out-dir DIR]
    haarsense reconstruct coeffs.json --order N -o recon.csv [--all-orders]
    haarsense detect      coeffs.json --orders 5,6 --threshold 5 -o events.json
    haarsense sensitivity --t2 300 --t2-star 3 -M 1e6 -T 64 --n-max 10 -o table.csv

Exit codes: 0 success, 1 invalid configuration or arguments, 2 phase wrap,
3 packing failure, 4 file or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, PackingError, PhaseWrapError, SignalFormatError
from .protocol import (CONVENTIONS, detect_events, plan_haar, plan_ramsey, plan_walsh,
                       run_budget, run_haar_protocol, run_ramsey_protocol,
                       run_walsh_protocol)
from .sensitivity import MAX_TABLE_ORDER, compare_protocols, write_table
from .signals import (Impulse, ImpulseTrain, Sinusoid, Waveform, generate,
                      load_csv, random_impulse_train, save_csv)
from .spinsim import SensorParams
from .wavelet import (HaarCoefficients, Reconstruction, WalshSpectrum,
                      haar_reconstruct_points, haar_transform,
                      walsh_reconstruct_points)

EXIT_OK, EXIT_CONFIG, EXIT_WRAP, EXIT_PACKING, EXIT_IO = 0, 1, 2, 3, 4
RECON_HEADER = ("t_us", "b_uT", "sigma_uT")

# --- schemas --------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_SIGNAL_SCHEMA = {"oneOf": [
    {"type": "object", "additionalProperties": False,
     "required": ["type", "amplitude", "period"],
     "properties": {"type": {"const": "sinusoid"}, "amplitude": {"type": "number", "minimum": 0},
                    "period": _POS, "phase": _NUM}},
    {"type": "object", "additionalProperties": False, "required": ["type"],
     "properties": {"type": {"const": "waveform"},
                    "values": {"type": "array", "items": _NUM, "minItems": 1},
                    "path": {"type": "string"}}},
    {"type": "object", "additionalProperties": False, "required": ["type", "events"],
     "properties": {"type": {"const": "impulse_train"},
                    "events": {"type": "array", "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["center"],
                        "properties": {"center": _NUM, "polarity": {"enum": [-1, 1]},
                                       "amplitude": {"type": "number", "minimum": 0},
                                       "width": _POS}}}}},
    {"type": "object", "additionalProperties": False,
     "required": ["type", "count", "amplitude", "width"],
     "properties": {"type": {"const": "random_impulses"},
                    "count": {"type": "integer", "minimum": 1},
                    "amplitude": {"type": "number", "minimum": 0}, "width": _POS,
                    "min_separation": _POS, "seed": {"type": "integer", "minimum": 0}}},
]}

_SENSOR_KEYS = ("gamma", "t2", "t2_star", "contrast_amplitude", "photons_bright",
                "photons_dark", "decoherence_exponent", "ramsey_exponent",
                "pi_pulse_fidelity")

CONFIG_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["signal", "duration_us", "protocol"],
    "properties": {
        "signal": _SIGNAL_SCHEMA,
        "duration_us": _POS,
        "sample_count": {"type": "integer", "minimum": 2},
        "sensor": {"type": "object", "additionalProperties": False,
                   "properties": {k: _NUM for k in _SENSOR_KEYS}},
        "protocol": {
            "type": "object", "additionalProperties": False, "required": ["kind", "order"],
            "properties": {
                "kind": {"enum": ["haar", "walsh", "ramsey"]},
                "order": {"type": "integer", "minimum": 0, "maximum": 16},
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 1},
                           "minItems": 1},
                "c0": {"oneOf": [{"enum": ["ramsey", "zero"]}, _NUM,
                                 {"type": "object", "additionalProperties": False,
                                  "required": ["value", "sigma"],
                                  "properties": {"value": _NUM,
                                                 "sigma": {"type": "number", "minimum": 0}}}]},
                "overhead_us": {"type": "number", "minimum": 0},
                "max_runs": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
            }},
        "repetitions": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
        "seed": {"type": "integer", "minimum": 0},
        "convention": {"enum": sorted(CONVENTIONS)},
        "outputs": {"type": "object", "additionalProperties": False,
                    "properties": {k: {"type": "string"} for k in
                                   ("coefficients", "budget", "reconstruction", "signal")}},
    },
}

_PROVENANCE = {"type": "object"}

COEFFICIENTS_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["format", "duration_us", "max_order", "mean", "coefficients",
                 "measured_orders", "provenance"],
    "properties": {
        "format": {"const": "haar_coefficients"},
        "duration_us": _POS,
        "max_order": {"type": "integer", "minimum": 0},
        "mean": {"type": "object", "additionalProperties": False,
                 "required": ["value", "sigma"],
                 "properties": {"value": _NUM, "sigma": {"type": "number", "minimum": 0}}},
        "coefficients": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["order", "shift", "value", "sigma"],
            "properties": {"order": {"type": "integer", "minimum": 1},
                           "shift": {"type": "integer", "minimum": 0},
                           "value": _NUM, "sigma": {"type": "number", "minimum": 0}}}},
        "measured_orders": {"oneOf": [{"type": "null"}, {
            "type": "array", "items": {"type": "integer", "minimum": 1}}]},
        "provenance": _PROVENANCE,
    },
}

WALSH_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["format", "duration_us", "order", "coefficients", "provenance"],
    "properties": {
        "format": {"const": "walsh_spectrum"},
        "duration_us": _POS,
        "order": {"type": "integer", "minimum": 0},
        "coefficients": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["index", "value", "sigma"],
            "properties": {"index": {"type": "integer", "minimum": 0}, "value": _NUM,
                           "sigma": {"type": "number", "minimum": 0}}}},
        "provenance": _PROVENANCE,
    },
}

BUDGET_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["format", "protocol", "order", "repetitions", "overhead_us",
                 "run_overhead_us", "signal_runs_per_sweep", "total_runs",
                 "wall_estimate_s"],
    "properties": {
        "format": {"const": "run_budget"},
        "protocol": {"enum": ["haar", "walsh", "ramsey"]},
        "order": {"type": "integer", "minimum": 0},
        "repetitions": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
        "overhead_us": {"type": "number", "minimum": 0},
        "run_overhead_us": {"type": "number", "minimum": 0},
        "signal_runs_per_sweep": {"type": "integer", "minimum": 1},
        "total_runs": {"type": "integer", "minimum": 1},
        "wall_estimate_s": {"type": "number", "minimum": 0},
    },
}

EVENTS_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["format", "order", "orders", "threshold_sigma", "floor_uT",
                 "merge_gap", "events"],
    "properties": {
        "format": {"const": "events"},
        "order": {"type": "integer", "minimum": 0},
        "orders": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "threshold_sigma": {"type": "number", "minimum": 0},
        "floor_uT": {"type": "number", "minimum": 0},
        "merge_gap": {"type": "integer", "minimum": 0},
        "events": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["bin", "t_us", "polarity", "magnitude_uT"],
            "properties": {"bin": {"type": "integer", "minimum": 0}, "t_us": _NUM,
                           "polarity": {"enum": [-1, 1]},
                           "magnitude_uT": {"type": "number", "minimum": 0}}}},
    },
}


# --- (de)serialization ----------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write_json(doc: dict, path: Path, schema: dict) -> None:
    doc = _jsonable(doc)
    jsonschema.validate(doc, schema)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def coefficients_to_json(coeffs: HaarCoefficients, duration: float) -> dict:
    measured = coeffs.measured_orders
    return {
        "format": "haar_coefficients",
        "duration_us": float(duration),
        "max_order": coeffs.max_order,
        "mean": {"value": coeffs.mean, "sigma": coeffs.mean_sigma},
        "coefficients": [{"order": i, "shift": j, "value": v, "sigma": s}
                         for i, j, v, s in coeffs.items()],
        "measured_orders": None if measured is None else sorted(measured),
        "provenance": dict(coeffs.provenance),
    }


def coefficients_from_json(doc: dict) -> tuple[HaarCoefficients, float]:
    jsonschema.validate(doc, COEFFICIENTS_SCHEMA)
    n = doc["max_order"]
    levels = [np.full(2 ** (i - 1), np.nan) for i in range(1, n + 1)]
    sigmas = [np.zeros(2 ** (i - 1)) for i in range(1, n + 1)]
    for c in doc["coefficients"]:
        i, j = c["order"], c["shift"]
        if i > n or j >= 2 ** (i - 1):
            raise SignalFormatError(f"coefficient ({i}, {j}) outside order {n}")
        levels[i - 1][j], sigmas[i - 1][j] = c["value"], c["sigma"]
    if any(np.isnan(v).any() for v in levels):
        raise SignalFormatError("coefficient list is incomplete")
    coeffs = HaarCoefficients(doc["mean"]["value"], tuple(levels), tuple(sigmas),
                              doc["mean"]["sigma"], doc["measured_orders"],
                              doc["provenance"])
    return coeffs, float(doc["duration_us"])


def spectrum_to_json(spectrum: WalshSpectrum, duration: float) -> dict:
    return {
        "format": "walsh_spectrum",
        "duration_us": float(duration),
        "order": spectrum.order,
        "coefficients": [{"index": m, "value": float(v), "sigma": float(s)}
                         for m, (v, s) in enumerate(zip(spectrum.coefficients,
                                                        spectrum.sigmas))],
        "provenance": dict(spectrum.provenance),
    }


def spectrum_from_json(doc: dict) -> tuple[WalshSpectrum, float]:
    jsonschema.validate(doc, WALSH_SCHEMA)
    items = sorted(doc["coefficients"], key=lambda c: c["index"])
    if [c["index"] for c in items] != list(range(2 ** doc["order"])):
        raise SignalFormatError("Walsh indices must cover 0 .. 2**order - 1")
    spectrum = WalshSpectrum(np.array([c["value"] for c in items]), doc["order"],
                             np.array([c["sigma"] for c in items]), doc["provenance"])
    return spectrum, float(doc["duration_us"])


def write_reconstruction(recon: Reconstruction, duration: float, path: Path) -> None:
    t = recon.bin_centers * duration
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(RECON_HEADER) + "\n")
        for row in zip(t, recon.points, recon.sigmas):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_reconstruction(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(t_us, b_uT, sigma_uT)`` columns of a reconstruction CSV."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != RECON_HEADER:
            raise SignalFormatError(f"{path}: expected header {','.join(RECON_HEADER)}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SignalFormatError(f"{path}: invalid JSON ({exc})") from None


def _load_result(path):
    """A Haar coefficient or Walsh spectrum document, with its duration."""
    doc = _read_json(path)
    fmt = doc.get("format") if isinstance(doc, dict) else None
    try:
        if fmt == "walsh_spectrum":
            return spectrum_from_json(doc)
        return coefficients_from_json(doc)
    except jsonschema.ValidationError as exc:
        raise SignalFormatError(f"{path}: {exc.message}") from None


# --- config ---------------------------------------------------------------------

def load_config(path) -> dict:
    doc = _read_json(path)
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None
    doc["_base"] = str(Path(path).resolve().parent)
    return doc


def build_signal(cfg: dict, seed: int):
    spec = cfg["signal"]
    T = cfg["duration_us"]
    count = cfg.get("sample_count", 4096)
    kind = spec["type"]
    if kind == "sinusoid":
        s = Sinusoid(spec["amplitude"], spec["period"], spec.get("phase", 0.0))
    elif kind == "waveform":
        path = spec.get("path")
        if path is not None:
            path = str(Path(cfg.get("_base", ".")) / path)
        s = Waveform(tuple(spec["values"]) if "values" in spec else None, path)
    elif kind == "impulse_train":
        s = ImpulseTrain(tuple(Impulse(e["center"], e.get("polarity", 1),
                                       e.get("amplitude", 1.0), e.get("width", 1.0))
                               for e in spec["events"]))
    else:
        s = random_impulse_train(spec.get("seed", seed), spec["count"], T,
                                 amplitude=spec["amplitude"], width=spec["width"],
                                 min_separation=spec.get("min_separation"))
    return generate(s, T, count)


def _c0_from_config(c0):
    if isinstance(c0, dict):
        return (c0["value"], c0["sigma"])
    return c0


def simulate(cfg: dict, seed: int | None = None, convention: str | None = None,
             out_dir: Path | None = None) -> dict:
    """Run one configured protocol and write its outputs; returns written paths."""
    seed = cfg.get("seed", 0) if seed is None else seed
    convention = convention or cfg.get("convention", "integral")
    out_dir = Path(out_dir or ".")
    outputs = cfg.get("outputs", {})
    proto = cfg["protocol"]
    kind, n = proto["kind"], proto["order"]
    M = cfg.get("repetitions", None)
    overhead = proto.get("overhead_us", 0.0)
    workers = proto.get("workers", 1)
    max_runs = proto.get("max_runs")
    c0 = _c0_from_config(proto.get("c0", "ramsey"))
    try:
        params = SensorParams(**cfg.get("sensor", {}))
    except ValueError as exc:
        raise ConfigError(f"sensor: {exc}") from None
    if kind != "haar" and "orders" in proto:
        raise ConfigError("protocol.orders only applies to the haar protocol")
    if kind == "haar" and n < 1:
        raise ConfigError("haar protocol needs order >= 1")

    signal = build_signal(cfg, seed)
    T = signal.duration
    written = {}
    recon = None

    if kind == "haar":
        orders = proto.get("orders")
        coeffs = run_haar_protocol(signal, params, n, M, seed, convention=convention,
                                   c0=c0, overhead=overhead, orders=orders,
                                   workers=workers, max_runs=max_runs)
        plan = plan_haar(n, T, M, overhead, orders=orders,
                         include_mean=(c0 == "ramsey"), max_runs=max_runs)
        doc, schema = coefficients_to_json(coeffs, T), COEFFICIENTS_SCHEMA
        recon = haar_reconstruct_points(coeffs, n)
    elif kind == "walsh":
        spectrum, _ = run_walsh_protocol(signal, params, n, M, seed, c0=c0,
                                         overhead=overhead, workers=workers,
                                         max_runs=max_runs)
        plan = plan_walsh(n, T, M, overhead, max_runs=max_runs)
        doc, schema = spectrum_to_json(spectrum, T), WALSH_SCHEMA
        recon = walsh_reconstruct_points(spectrum)
    else:
        plan = plan_ramsey(2 ** n, T, M, overhead, max_runs=max_runs)
        recon = run_ramsey_protocol(signal, params, 2 ** n, M, seed,
                                    overhead=overhead, workers=workers)
        doc = schema = None

    budget_doc = {"format": "run_budget", "protocol": kind, "order": n,
                  "repetitions": M, "overhead_us": float(overhead),
                  "run_overhead_us": float(plan.run_overhead),
                  **run_budget(plan).as_dict()}

    if doc is not None:
        p = out_dir / outputs.get("coefficients", f"{kind}_coefficients.json")
        _write_json(doc, p, schema)
        written["coefficients"] = p
    p = out_dir / outputs.get("budget", f"{kind}_budget.json")
    _write_json(budget_doc, p, BUDGET_SCHEMA)
    written["budget"] = p
    if "reconstruction" in outputs or doc is None:
        p = out_dir / outputs.get("reconstruction", f"{kind}_reconstruction.csv")
        write_reconstruction(recon, T, p)
        written["reconstruction"] = p
    if "signal" in outputs:
        p = out_dir / outputs["signal"]
        p.parent.mkdir(parents=True, exist_ok=True)
        save_csv(signal, p)
        written["signal"] = p
    written["_recon"] = (recon, T)
    return written


# --- plotting -------------------------------------------------------------------

def plot_reconstruction(recon: Reconstruction, duration: float, path, title: str = "",
                        events=None) -> None:
    """Step plot of the reconstruction with a 1-sigma band, as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "haarsense"
    edges = np.linspace(0.0, duration, recon.points.size + 1)
    y = np.append(recon.points, recon.points[-1])
    s = np.append(recon.sigmas, recon.sigmas[-1])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.fill_between(edges, y - s, y + s, step="post", alpha=0.3, linewidth=0)
    ax.step(edges, y, where="post")
    if events:
        for t, pol in events:
            ax.axvline(t, color="r" if pol > 0 else "b", linestyle=":", linewidth=1)
    ax.set_xlabel("t (us)")
    ax.set_ylabel("b (uT)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- commands -------------------------------------------------------------------

def _parse_orders(text: str) -> list[int]:
    try:
        orders = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError:
        raise ConfigError(f"bad order list {text!r}") from None
    if not orders or orders[0] < 1:
        raise ConfigError("orders must be positive integers")
    return orders


def cmd_transform(args) -> int:
    signal = load_csv(args.input)
    coeffs = haar_transform(signal, args.order)
    _write_json(coefficients_to_json(coeffs, signal.duration), Path(args.output),
                COEFFICIENTS_SCHEMA)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    written = simulate(cfg, args.seed, args.convention, args.out_dir)
    recon, T = written.pop("_recon")
    if args.plot:
        plot_reconstruction(recon, T, args.plot, title=cfg["protocol"]["kind"])
    for name, p in written.items():
        print(f"{name}: {p}")
    return EXIT_OK


def _reconstruction_at(result, n: int) -> Reconstruction:
    if isinstance(result, WalshSpectrum):
        if n != result.order:
            raise ConfigError(f"Walsh spectrum has order {result.order}, not {n}")
        return walsh_reconstruct_points(result)
    return haar_reconstruct_points(result, n)


def cmd_reconstruct(args) -> int:
    result, T = _load_result(args.coefficients)
    top = args.order if args.order is not None else (
        result.order if isinstance(result, WalshSpectrum) else result.max_order)
    out = Path(args.output)
    if args.all_orders:
        if isinstance(result, WalshSpectrum):
            raise ConfigError("--all-orders needs Haar coefficients")
        for n in range(1, top + 1):
            p = out.with_name(f"{out.stem}_n{n}{out.suffix}")
            write_reconstruction(haar_reconstruct_points(result, n), T, p)
            print(p)
    else:
        write_reconstruction(_reconstruction_at(result, top), T, out)
    if args.plot:
        plot_reconstruction(_reconstruction_at(result, top), T, args.plot,
                            title=f"order {top}")
    return EXIT_OK


def cmd_detect(args) -> int:
    coeffs, T = _load_result(args.coefficients)
    if isinstance(coeffs, WalshSpectrum):
        raise ConfigError("detect needs Haar coefficients")
    orders = _parse_orders(args.orders) if args.orders else list(range(1, coeffs.max_order + 1))
    if orders[-1] > coeffs.max_order:
        raise ConfigError(f"order {orders[-1]} exceeds stored order {coeffs.max_order}")
    n = args.order if args.order is not None else orders[-1]
    recon = haar_reconstruct_points(coeffs.restricted(orders), n)
    det = detect_events(recon, args.threshold, args.floor, args.merge_gap)
    times = det.bin_times(T)
    doc = {"format": "events", "order": n, "orders": orders,
           "threshold_sigma": float(args.threshold), "floor_uT": float(args.floor),
           "merge_gap": args.merge_gap,
           "events": [{"bin": e.bin, "t_us": t, "polarity": e.polarity,
                       "magnitude_uT": e.magnitude}
                      for e, t in zip(det.events, times)]}
    _write_json(doc, Path(args.output), EVENTS_SCHEMA)
    if args.plot:
        plot_reconstruction(recon, T, args.plot, title=f"orders {orders}",
                            events=[(t, e.polarity) for e, t in zip(det.events, times)])
    print(f"{len(det.events)} events")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    if not 1 <= args.n_max <= MAX_TABLE_ORDER:
        raise ConfigError(f"--n-max must lie in 1..{MAX_TABLE_ORDER}")
    kw = {} if args.gamma is None else {"gamma": args.gamma}
    try:
        rows = compare_protocols(args.t2, args.t2_star, args.M, args.T, args.n_max, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(rows, out)
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as a phase wrap
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags sit before or after the subcommand without the
    # subparser's default overwriting a value given earlier
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int,
                        help="root seed for all random streams (overrides config)")
    common.add_argument("--convention", choices=sorted(CONVENTIONS),
                        help="phase-to-coefficient constant (overrides config)")
    common.add_argument("--plot", metavar="PATH",
                        help="also write an SVG step plot of the reconstruction")

    p = _Parser(prog="haarsense", parents=[common],
                description="Haar-wavelet spin-echo sensing of temporal magnetic fields.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("transform", parents=[common], help="direct Haar transform of a CSV")
    t.add_argument("input")
    t.add_argument("--order", "-n", type=int, required=True)
    t.add_argument("--output", "-o", required=True)
    t.set_defaults(func=cmd_transform)

    s = sub.add_parser("simulate", parents=[common], help="run a configured protocol")
    s.add_argument("config")
    s.add_argument("--out-dir", default=".", help="directory for relative output paths")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", parents=[common], help="coefficients to bin values")
    r.add_argument("coefficients")
    r.add_argument("--order", "-n", type=int, default=None)
    r.add_argument("--output", "-o", required=True)
    r.add_argument("--all-orders", action="store_true",
                   help="write OUT_n1.csv .. OUT_nN.csv, one per order")
    r.set_defaults(func=cmd_reconstruct)

    d = sub.add_parser("detect", parents=[common], help="find events in a reconstruction")
    d.add_argument("coefficients")
    d.add_argument("--orders", default=None, help="comma-separated orders to keep")
    d.add_argument("--order", "-n", type=int, default=None,
                   help="reconstruction order (default: highest kept order)")
    d.add_argument("--threshold", type=float, default=5.0, help="in units of sigma")
    d.add_argument("--floor", type=float, default=0.0, help="absolute floor in uT")
    d.add_argument("--merge-gap", type=int, default=2)
    d.add_argument("--output", "-o", required=True)
    d.set_defaults(func=cmd_detect)

    q = sub.add_parser("sensitivity", parents=[common], help="protocol comparison table")
    q.add_argument("--t2", type=float, default=300.0)
    q.add_argument("--t2-star", type=float, default=3.0)
    q.add_argument("-M", type=float, default=1e6)
    q.add_argument("-T", type=float, default=64.0, help="signal window in us")
    q.add_argument("--n-max", type=int, default=10)
    q.add_argument("--gamma", type=float, default=None, help="rad/s/T")
    q.add_argument("--output", "-o", required=True)
    q.set_defaults(func=cmd_sensitivity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("seed", "convention", "plot"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        return args.func(args)
    except PhaseWrapError as exc:
        print(f"phase wrap: {exc}", file=sys.stderr)
        return EXIT_WRAP
    except PackingError as exc:
        print(f"packing: {exc}", file=sys.stderr)
        return EXIT_PACKING
    except (OSError, SignalFormatError) as exc:
        print(f"i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
