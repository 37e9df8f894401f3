"""Figure rendering for CLI reports.

Every report-producing command drops a PNG next to its delimited output:
transient waveform panels for simulation runs, model-vs-reference
comparisons for the tables, the fitted retention curve for calibration,
and a before/after panel for the image demo.
"""

from __future__ import annotations

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .leak import retention
from .memcell import CellTrace


def save_trace_figure(cell_trace: CellTrace, path, vin: float | None = None) -> None:
    """Storage-node and output waveforms over the full run."""
    t = cell_trace.times * 1e3
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    axes[0].plot(t, cell_trace.v_primary, lw=0.9, color="tab:blue")
    axes[0].set_ylabel("v_primary (V)")
    axes[1].plot(t, cell_trace.v_secondary, lw=0.9, color="tab:orange")
    axes[1].set_ylabel("v_secondary (V)")
    axes[2].plot(t, cell_trace.v_out, lw=0.9, color="tab:green")
    axes[2].set_ylabel("v_out (V)")
    axes[2].set_xlabel("time (ms)")
    for tr, vr in cell_trace.readouts:
        axes[2].plot(tr * 1e3, vr, "k.", ms=8)
    if vin is not None:
        axes[0].axhline(vin, color="grey", ls="--", lw=0.7)
        title = f"stored {vin:g} V, final readout {cell_trace.final_readout:.4f} V"
    else:
        title = "memory-cell transient"
    axes[0].set_title(title)
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fit_figure(report, gain_rows, cfg, path) -> None:
    """Measured op-amp inputs vs the calibrated retention curve, with
    per-row residuals."""
    v = np.array([r.v_target for r in gain_rows])
    s = np.array([r.v_secondary for r in gain_rows])
    vv = np.linspace(min(v.min(), 0.1), v.max(), 200)
    share = cfg.c_primary / (cfg.c_primary + cfg.c_secondary)
    pred = retention(report.leak, cfg.c_primary, vv, cfg.refresh_period) * share
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True,
                                   height_ratios=[3, 1])
    ax0.plot(v, s, "o", label="reference", color="tab:blue")
    ax0.plot(vv, pred, "-", label=f"model ({report.method})", color="tab:red")
    ax0.set_ylabel("shared voltage after hold (V)")
    ax0.legend()
    ax0.grid(alpha=0.3)
    ax1.stem(v, np.array(report.residuals) * 1e3)
    ax1.set_ylabel("residual (mV)")
    ax1.set_xlabel("stored target (V)")
    ax1.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_gain_table_figure(rows, reference, path) -> None:
    v = [r.v_target for r in rows]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.plot(v, [r.gain for r in reference], "o", label="reference")
    ax0.plot(v, [r.gain for r in rows], "x-", label="model")
    ax0.set_xlabel("stored target (V)")
    ax0.set_ylabel("required gain")
    ax0.legend()
    ax0.grid(alpha=0.3)
    diff = [100 * (m.gain / r.gain - 1) for m, r in zip(rows, reference)]
    ax1.bar(v, diff, width=0.06)
    ax1.axhline(0, color="k", lw=0.7)
    ax1.set_xlabel("stored target (V)")
    ax1.set_ylabel("gain difference (%)")
    ax1.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_table_figure(rows, reference, path) -> None:
    v = [r.v_in for r in rows]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.plot(v, [r.error_pct for r in reference], "o", label="reference")
    ax0.plot(v, [r.error_pct for r in rows], "x-", label="model")
    ax0.set_xlabel("input (V)")
    ax0.set_ylabel("storage error (%)")
    ax0.legend()
    ax0.grid(alpha=0.3)
    diff = [m.error_pct - r.error_pct for m, r in zip(rows, reference)]
    ax1.bar(v, diff, width=0.06)
    ax1.axhline(0, color="k", lw=0.7)
    ax1.set_xlabel("input (V)")
    ax1.set_ylabel("error difference (points)")
    ax1.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_image_figure(original, reconstructed, stats, path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    axes[0].imshow(original, cmap="gray", vmin=0, vmax=255)
    axes[0].set_title("input")
    axes[1].imshow(reconstructed, cmap="gray", vmin=0, vmax=255)
    axes[1].set_title(f"stored ({stats.comparison_line()} capacitors)")
    for ax in axes[:2]:
        ax.set_xticks([])
        ax.set_yticks([])
    err = np.abs(reconstructed.astype(float) - original.astype(float)) / 255 * 100
    axes[2].hist(err.ravel(), bins=40)
    axes[2].set_xlabel("pixel error (% full scale)")
    axes[2].set_ylabel("pixels")
    axes[2].set_title(f"mean {stats.mean_error_pct:.2f} %")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
