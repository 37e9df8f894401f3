"""Image-storage demonstration: one analog cell per pixel.

Each grey level maps linearly onto the cell's usable voltage range
(grey 0 -> 0.2 V, grey 255 -> 2.0 V), is stored through the refresh
cycles via the behavioral path, and maps back to grey. Storing a w x h
8-bit image digitally costs w*h*8 capacitors; the analog scheme uses
w*h.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .memcell import CellConfig, _store_map, simulate_cell

V_BLACK = 0.2      # V, grey 0
V_WHITE = 2.0      # V, grey 255
BITS_PER_PIXEL = 8


@dataclass(frozen=True)
class ImageJob:
    """One image-storage run over the usable 0.2-2.0 V range."""

    cell: CellConfig = field(default_factory=CellConfig)
    n_cycles: int | None = None    # default: the cell's refresh count

    @property
    def cycles(self) -> int:
        return self.n_cycles if self.n_cycles is not None else \
            self.cell.n_refresh_cycles


@dataclass(frozen=True)
class ImageStats:
    """Per-pixel storage-error summary, in percent of the voltage span."""

    mean_error_pct: float
    max_error_pct: float
    mean_error_pct_above_0v4: float
    histogram_edges_pct: tuple
    histogram_counts: tuple
    digital_capacitors: int
    analog_capacitors: int

    def comparison_line(self) -> str:
        return f"{self.digital_capacitors} vs {self.analog_capacitors}"

    def to_csv(self, path) -> None:
        lines = ["metric,value",
                 f"mean_error_pct,{self.mean_error_pct:.6g}",
                 f"max_error_pct,{self.max_error_pct:.6g}",
                 f"mean_error_pct_above_0v4,{self.mean_error_pct_above_0v4:.6g}",
                 f"digital_capacitors,{self.digital_capacitors}",
                 f"analog_capacitors,{self.analog_capacitors}"]
        for lo, hi, n in zip(self.histogram_edges_pct[:-1],
                             self.histogram_edges_pct[1:],
                             self.histogram_counts):
            lines.append(f"hist_{lo:g}_to_{hi:g}_pct,{n}")
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)


def grey_to_volts(grey) -> np.ndarray:
    """Linear map grey 0..255 -> 0.2..2.0 V."""
    g = np.asarray(grey, dtype=float)
    return V_BLACK + (V_WHITE - V_BLACK) * g / 255.0


def volts_to_grey(volts) -> np.ndarray:
    """Inverse map, clipped to the valid range and rounded."""
    v = np.asarray(volts, dtype=float)
    g = (v - V_BLACK) / (V_WHITE - V_BLACK) * 255.0
    return np.clip(np.rint(g), 0, 255).astype(np.uint8)


def store_image(img: np.ndarray, job: ImageJob | None = None,
                transient: bool = False):
    """Store every pixel through the refresh cycles and read it back.

    Returns (reconstructed image, ImageStats). The default behavioral
    path evaluates the closed-form map over the whole pixel array;
    ``transient=True`` runs the full solver per distinct grey level and
    is orders of magnitude slower.
    """
    job = job or ImageJob()
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("image must be 2-D greyscale")
    volts = grey_to_volts(img)
    if transient:
        # one transient per distinct level; pixels share the readout
        levels = np.unique(img)
        readout = {}
        for g in levels:
            ct = simulate_cell(job.cell, float(grey_to_volts(g)))
            readout[int(g)] = ct.final_readout
        stored = np.vectorize(lambda g: readout[int(g)])(img)
    else:
        stored = _store_map(job.cell.leak, job.cell, volts, job.cycles)
    recon = volts_to_grey(stored)

    span = V_WHITE - V_BLACK
    err_pct = 100.0 * np.abs(stored - volts) / span
    above = err_pct[volts >= 0.4]
    counts, edges = np.histogram(err_pct, bins=(0, 1, 2, 5, 10, 20, 50, 100))
    h, w = img.shape
    stats = ImageStats(
        mean_error_pct=float(err_pct.mean()),
        max_error_pct=float(err_pct.max()),
        mean_error_pct_above_0v4=float(above.mean()) if above.size else 0.0,
        histogram_edges_pct=tuple(float(e) for e in edges),
        histogram_counts=tuple(int(n) for n in counts),
        digital_capacitors=w * h * BITS_PER_PIXEL,
        analog_capacitors=w * h)
    return recon, stats
