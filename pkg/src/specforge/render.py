"""Raster heatmaps of 2D spectra (convenience export; CSV is the contract)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RenderError
from .spectra import Spectrum2D, select_quadrant

COMPONENTS = ("real", "imag", "abs")


@dataclass(frozen=True)
class RenderOptions:
    component: str = "abs"
    scale: str = "linear"  # or "log"
    center: bool = False  # shift so zero sits mid-colormap
    quadrant: str | None = None  # "rephasing" / "nonrephasing"
    invert_y: bool = False
    diagonal: bool = False
    antidiagonal: bool = False
    cmap: str = "viridis"
    dpi: int = 100
    title: str | None = None
    window: tuple[float, float] | None = None  # shared f1/f2 range in the spectrum unit
    crop: float | None = 0.05  # auto window around |values| above this fraction of the max


def _component(values: np.ndarray, which: str) -> np.ndarray:
    if which == "real":
        return values.real
    if which == "imag":
        return values.imag
    if which == "abs":
        return np.abs(values)
    raise RenderError(f"component must be one of {COMPONENTS}, got {which!r}")


def _crop(view: Spectrum2D, opts: RenderOptions) -> Spectrum2D:
    if opts.window is not None:
        lo, hi = opts.window
    elif opts.crop and view.values.size:
        mag = np.abs(view.values)
        if not np.any(np.isfinite(mag)) or np.nanmax(mag) == 0:
            return view
        i, j = np.nonzero(mag >= opts.crop * np.nanmax(mag))
        lo = min(view.f1[i].min(), view.f2[j].min())
        hi = max(view.f1[i].max(), view.f2[j].max())
        step = abs(view.f1[1] - view.f1[0]) if len(view.f1) > 1 else 0.0
        margin = max(0.25 * (hi - lo), 10 * step)
        lo, hi = lo - margin, hi + margin
    else:
        return view
    m1 = (view.f1 >= lo) & (view.f1 <= hi)
    m2 = (view.f2 >= lo) & (view.f2 <= hi)
    return Spectrum2D(view.values[np.ix_(m1, m2)], view.f1[m1], view.f2[m2], view.unit, view.meta)


def image_data(spectrum: Spectrum2D, opts: RenderOptions = RenderOptions()) -> tuple[np.ndarray, Spectrum2D]:
    """The array that would be drawn (rows f2, columns f1) and the view it came from."""
    view = select_quadrant(spectrum, opts.quadrant) if opts.quadrant else spectrum
    view = _crop(view, opts)
    if view.values.size == 0:
        raise RenderError("nothing to draw: the selected view is empty")
    data = _component(view.values, opts.component).T.astype(float)
    if not np.any(np.isfinite(data)):
        raise RenderError("spectrum has no finite values")
    if opts.scale == "log":
        mag = np.abs(data)
        floor = np.nanmax(mag) * 1e-12 if np.nanmax(mag) > 0 else 1e-300
        data = np.log10(np.maximum(mag, floor))
    elif opts.scale != "linear":
        raise RenderError(f"scale must be 'linear' or 'log', got {opts.scale!r}")
    if opts.center:
        data = data - np.nanmean(data)
    return data, view


def render_heatmap(spectrum: Spectrum2D, path, opts: RenderOptions = RenderOptions()) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import Normalize, TwoSlopeNorm

    data, view = image_data(spectrum, opts)
    f1, f2 = view.f1, view.f2
    lo, hi = float(np.nanmin(data)), float(np.nanmax(data))
    if opts.center and lo < 0 < hi:
        norm = TwoSlopeNorm(0.0, lo, hi)
    else:
        norm = Normalize(lo, hi if hi > lo else lo + 1.0)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    try:
        im = ax.imshow(data, origin="lower", aspect="auto", cmap=opts.cmap, norm=norm,
                       extent=[f1[0], f1[-1], f2[0], f2[-1]], interpolation="nearest")
        lims = [max(f1[0], f2[0]), min(f1[-1], f2[-1])]
        if opts.diagonal:
            ax.plot(lims, lims, "w--", lw=0.8)
        if opts.antidiagonal:
            mid = 0.5 * (lims[0] + lims[1])
            ax.plot(lims, [2 * mid - lims[0], 2 * mid - lims[1]], "w:", lw=0.8)
        if opts.invert_y:
            ax.invert_yaxis()
        unit = view.unit
        ax.set_xlabel(f"f1 ({unit})")
        ax.set_ylabel(f"f2 ({unit})")
        label = opts.component + (" (log10)" if opts.scale == "log" else "")
        fig.colorbar(im, ax=ax, label=label)
        if opts.title:
            ax.set_title(opts.title)
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=opts.dpi, bbox_inches="tight")
    finally:
        plt.close(fig)
    return out
