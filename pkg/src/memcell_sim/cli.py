"""Command-line interface.

    memcell-sim simulate   --vin 1.0 [--config cfg.json]
    memcell-sim calibrate  [--data gain.csv] [--out fit.json]
    memcell-sim tables     --which gain|error [--leak fit.json]
    memcell-sim device     iv-sweep|params|noise [...]
    memcell-sim image      --in pic.pgm --out stored.pgm [--stats s.csv]

Every subcommand accepts ``--config`` (JSON over bundled defaults).
Exit codes: 0 success, 1 usage error, 2 runtime failure. Commands
compute everything before writing, and file writes are atomic, so a
failed run leaves no partial outputs. Report commands render a PNG
figure next to the delimited output unless ``--no-figure`` is given.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import calib, image as image_mod, pgm
from .config import RunConfig, load_config
from .device import (MosBias, MosParams, NoiseParams, ProcessDoping,
                     drain_current, noise, process_parameters)
from .leak import LeakModel
from .memcell import (CANONICAL_VIN_MAX, ConfigError, ScheduleError,
                      behavioral_store, pass_gate_limit, simulate_cell)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _atomic_write(path, writer):
    """Write via a sibling temp file and rename, so failures leave
    nothing behind."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _save_figure(render, path):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".png")
    os.close(fd)
    try:
        render(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_path(args, cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _floats(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    run = load_config(args.config)
    vin = args.vin
    limit = pass_gate_limit(run.cell.switch_params, run.cell.control_high)
    if vin > limit:
        print(f"warning: vin={vin:g} V exceeds the write-switch limit "
              f"{limit:.4f} V; the stored value will clip", file=sys.stderr)
    cell_trace = simulate_cell(run.cell, vin, run.policy)

    trace_csv = args.trace_csv or _out_path(args, run, "simulate_trace.csv")
    readout_csv = args.readout_csv or _out_path(args, run, "simulate_readouts.csv")
    _atomic_write(trace_csv, cell_trace.trace.to_csv)
    _atomic_write(readout_csv, cell_trace.readouts_to_csv)
    written = [trace_csv, readout_csv]
    if not args.no_figure:
        from .report import save_trace_figure
        fig = args.figure or _out_path(args, run, "simulate_trace.png")
        _save_figure(lambda p: save_trace_figure(cell_trace, p, vin=vin), fig)
        written.append(fig)

    final = cell_trace.final_readout
    if vin > 0:
        dev = 100.0 * abs(final - vin) / vin
        print(f"final readout: {final:.6f} V (deviation from vin: {dev:.3f} %)")
    else:
        print(f"final readout: {final:.6f} V")
    print("wrote:", ", ".join(written))
    return 0


# ---------------------------------------------------------------------------
# calibrate

def cmd_calibrate(args) -> int:
    run = load_config(args.config)
    gain_rows = (calib.read_gain_csv(args.data) if args.data
                 else calib.bundled_gain_rows())
    mode = args.mode
    if mode == "auto":
        # centered calibration needs the paired storage table; plain
        # least squares for user-supplied gain data alone
        mode = "centered" if (args.storage_data or not args.data) else "lsq"
    if mode == "centered":
        error_rows = (calib.read_error_csv(args.storage_data)
                      if args.storage_data else calib.bundled_error_rows())
        report = calib.calibrate_reproduction(gain_rows, error_rows, run.cell)
    else:
        report = calib.fit_retention(gain_rows, run.cell.c_primary,
                                     run.cell.refresh_period)
    out = args.out or _out_path(args, run, "calibration.json")
    _atomic_write(out, lambda fh: fh.write(report.to_json() + "\n"))
    written = [out]
    if not args.no_figure:
        from .report import save_fit_figure
        fig = args.figure or _out_path(args, run, "calibration.png")
        _save_figure(lambda p: save_fit_figure(report, gain_rows, run.cell, p),
                     fig)
        written.append(fig)
    print(f"max abs residual: {report.max_abs_residual * 1e3:.3f} mV "
          f"({report.method})")
    print("wrote:", ", ".join(written))
    return 0


# ---------------------------------------------------------------------------
# tables

def cmd_tables(args) -> int:
    run = load_config(args.config)
    if args.leak:
        if not os.path.exists(args.leak):
            raise FileNotFoundError(f"calibration file {args.leak!r} not found")
        with open(args.leak) as fh:
            leak = calib.FitReport.from_json(fh.read()).leak
    else:
        leak = run.cell.leak
    if args.which == "gain":
        reference = calib.bundled_gain_rows()
        rows = calib.gain_table(leak, run.cell,
                                [r.v_target for r in reference])
        out = args.out or _out_path(args, run, "gain_table.csv")
        _atomic_write(out, lambda fh: calib.write_gain_csv(rows, fh, reference))
        render = None
        if not args.no_figure:
            from .report import save_gain_table_figure
            render = lambda p: save_gain_table_figure(rows, reference, p)
        worst = max(abs(m.gain / r.gain - 1) * 100
                    for m, r in zip(rows, reference))
        summary = f"worst gain deviation: {worst:.3f} %"
    else:
        reference = calib.bundled_error_rows()
        rows = calib.error_table(leak, run.cell, [r.v_in for r in reference])
        out = args.out or _out_path(args, run, "error_table.csv")
        _atomic_write(out, lambda fh: calib.write_error_csv(rows, fh, reference))
        render = None
        if not args.no_figure:
            from .report import save_error_table_figure
            render = lambda p: save_error_table_figure(rows, reference, p)
        worst = max(abs(m.error_pct - r.error_pct)
                    for m, r in zip(rows, reference))
        summary = f"worst error deviation: {worst:.3f} points"
    written = [out]
    if render is not None:
        fig = args.figure or out.rsplit(".", 1)[0] + ".png"
        _save_figure(render, fig)
        written.append(fig)
    print(f"{len(rows)} rows; {summary}")
    print("wrote:", ", ".join(written))
    return 0


# ---------------------------------------------------------------------------
# device

def _switch_from_args(args) -> MosParams:
    return MosParams.from_beta(args.beta, vt0=args.vt0, gamma=args.gamma,
                               phi_f_abs2=args.phi2, lam=args.lam)


def cmd_device_iv(args) -> int:
    p = _switch_from_args(args)
    lines = ["vgs,vds,id"]
    for vgs in _floats(args.vgs):
        for vds in _floats(args.vds):
            i = drain_current(p, MosBias(vgs=vgs, vds=vds, vsb=args.vsb))
            lines.append(f"{vgs:.6g},{vds:.6g},{i:.9g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(args.out, lambda fh: fh.write(text))
        print(f"wrote: {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_device_params(args) -> int:
    doping = ProcessDoping(n_sub=args.n_sub, n_gate=args.n_gate,
                           n_ss=args.n_ss, temperature=args.temperature)
    pp = process_parameters(doping, args.tox)
    for name in ("phi_f_substrate", "phi_f_gate", "phi_ms", "q_ss", "v_fb",
                 "gamma", "vt0"):
        print(f"{name} = {getattr(pp, name):.6g}")
    return 0


def cmd_device_noise(args) -> int:
    p = _switch_from_args(args)
    n = NoiseParams(kf=args.kf, eta=args.eta, delta_f=args.delta_f,
                    freq=args.freq)
    r = noise(args.gm, args.id, p, n, temperature=args.temperature)
    print(f"in_sq = {r.in_sq:.6g} A^2")
    print(f"veq_sq = {r.veq_sq:.6g} V^2")
    return 0


# ---------------------------------------------------------------------------
# image

def cmd_image(args) -> int:
    run = load_config(args.config)
    img = pgm.read_pgm(args.infile)
    if args.transient:
        print("warning: full transient per grey level; this is orders of "
              "magnitude slower than the behavioral path", file=sys.stderr)
    job = image_mod.ImageJob(cell=run.cell)
    recon, stats = image_mod.store_image(img, job, transient=args.transient)
    pgm.write_pgm(recon, args.outfile, binary=not args.ascii)
    written = [args.outfile]
    stats_csv = args.stats or _out_path(args, run, "image_stats.csv")
    _atomic_write(stats_csv, stats.to_csv)
    written.append(stats_csv)
    if not args.no_figure:
        from .report import save_image_figure
        fig = args.figure or _out_path(args, run, "image_report.png")
        _save_figure(lambda p: save_image_figure(img, recon, stats, p), fig)
        written.append(fig)
    print(f"digital vs analog capacitors: {stats.comparison_line()}")
    print(f"mean pixel error: {stats.mean_error_pct:.3f} % of full scale "
          f"({stats.mean_error_pct_above_0v4:.3f} % above 0.4 V)")
    print("wrote:", ", ".join(written))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="memcell-sim",
                     description="Switched-capacitor analog memory cell "
                                 "simulator and calibration toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add_common(p):
        p.add_argument("--config", help="JSON config merged over defaults")
        p.add_argument("--figure", help="figure output path")
        p.add_argument("--no-figure", action="store_true",
                       help="skip figure rendering")

    p = sub.add_parser("simulate", help="full transient of one stored voltage")
    add_common(p)
    p.add_argument("--vin", type=float, required=True,
                   help=f"voltage to store (canonical 0..{CANONICAL_VIN_MAX} V)")
    p.add_argument("--trace-csv", help="waveform CSV path")
    p.add_argument("--readout-csv", help="readout-events CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit the leakage model to "
                                         "reference measurements")
    add_common(p)
    p.add_argument("--data", help="gain-reference CSV (default: bundled)")
    p.add_argument("--storage-data",
                   help="storage-quality CSV (default: bundled)")
    p.add_argument("--mode", choices=("auto", "lsq", "centered"),
                   default="auto",
                   help="auto: centered on bundled/paired data, plain "
                        "least squares for standalone gain data")
    p.add_argument("--out", help="fit-report JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("tables", help="reproduce the reference tables")
    add_common(p)
    p.add_argument("--which", choices=("gain", "error"), required=True)
    p.add_argument("--leak", help="calibration JSON (default: config leak)")
    p.add_argument("--out", help="table CSV path")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("device", help="transistor-model characterization")
    dsub = p.add_subparsers(dest="device_command", required=True,
                            parser_class=_Parser)

    def add_mos(q):
        q.add_argument("--beta", type=float, default=1e-3)
        q.add_argument("--vt0", type=float, default=0.5)
        q.add_argument("--gamma", type=float, default=0.0)
        q.add_argument("--phi2", type=float, default=0.7,
                       help="2|phi_F| in volts")
        q.add_argument("--lam", type=float, default=0.0,
                       help="channel-length modulation, 1/V")

    q = dsub.add_parser("iv-sweep", help="drain current over a bias grid")
    add_mos(q)
    q.add_argument("--vgs", required=True, help="comma list of vgs values")
    q.add_argument("--vds", required=True, help="comma list of vds values")
    q.add_argument("--vsb", type=float, default=0.0)
    q.add_argument("--out", help="CSV path (default: stdout)")
    q.set_defaults(func=cmd_device_iv)

    q = dsub.add_parser("params", help="doping to threshold chain")
    q.add_argument("--n-sub", type=float, required=True, dest="n_sub")
    q.add_argument("--n-gate", type=float, default=1e20, dest="n_gate")
    q.add_argument("--n-ss", type=float, default=0.0, dest="n_ss")
    q.add_argument("--temperature", type=float, default=300.0)
    q.add_argument("--tox", type=float, default=5e-7, help="oxide, cm")
    q.set_defaults(func=cmd_device_params)

    q = dsub.add_parser("noise", help="channel noise at an operating point")
    add_mos(q)
    q.add_argument("--gm", type=float, required=True)
    q.add_argument("--id", type=float, default=0.0)
    q.add_argument("--kf", type=float, default=0.0)
    q.add_argument("--eta", type=float, default=0.0)
    q.add_argument("--freq", type=float, default=1.0)
    q.add_argument("--delta-f", type=float, default=1.0, dest="delta_f")
    q.add_argument("--temperature", type=float, default=300.0)
    q.set_defaults(func=cmd_device_noise)

    p = sub.add_parser("image", help="store a greyscale image pixel by pixel")
    add_common(p)
    p.add_argument("--in", dest="infile", required=True, help="input PGM")
    p.add_argument("--out", dest="outfile", required=True,
                   help="reconstructed PGM")
    p.add_argument("--stats", help="per-pixel error summary CSV")
    p.add_argument("--ascii", action="store_true", help="write P2 output")
    p.add_argument("--transient", action="store_true",
                   help="full transient per grey level (slow)")
    p.set_defaults(func=cmd_image)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScheduleError, calib.SchemaError,
            calib.DegenerateFitError, pgm.PgmFormatError, ValueError,
            FileNotFoundError) as exc:
        print(f"memcell-sim: error: {exc}", file=sys.stderr)
        return 2
    except (calib.FitConvergenceError, calib.CalibrationError,
            RuntimeError) as exc:
        print(f"memcell-sim: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
