"""Fourier transforms of response grids into calibrated spectra.

Forward, unnormalized FFTs (kernel e^{-i w t}) with zero frequency centred.
Under this convention a signal e^{+i w0 t1} e^{-i w0 t3} peaks at
(f1, f2) = (+E0, -E0), the fourth quadrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .diagrams import Diagram
from .dynamics import DEFAULT_RESOLUTION, HBAR
from .errors import DimensionError, FormatError, ValidationError
from .response import ResponseGrid, metadata

PARTS = ("complex", "real", "imag")
UNITS = ("eV", "rad/fs")
REPHASING = "rephasing"
NONREPHASING = "nonrephasing"


@dataclass(eq=False)
class Spectrum2D:
    values: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    unit: str = "eV"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.f1), len(self.f2)):
            raise DimensionError(
                f"values shape {self.values.shape} does not match axes ({len(self.f1)}, {len(self.f2)})")

    @property
    def extent(self) -> list[float]:
        return [float(self.f1[0]), float(self.f1[-1]), float(self.f2[0]), float(self.f2[-1])]

    def __neg__(self) -> "Spectrum2D":
        return replace(self, values=-self.values)


def frequency_axis(n: int, dt: float, unit: str = "eV") -> np.ndarray:
    """Centred FFT frequencies for n samples spaced dt fs apart."""
    if unit not in UNITS:
        raise ValidationError(f"unit must be one of {UNITS}, got {unit!r}")
    w = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(n, dt))
    return w * HBAR if unit == "eV" else w


def bin_width(n: int, dt: float, unit: str = "eV") -> float:
    w = 2 * np.pi / (n * dt)
    return w * HBAR if unit == "eV" else w


def _select(values: np.ndarray, part: str) -> np.ndarray:
    if part not in PARTS:
        raise ValidationError(f"part must be one of {PARTS}, got {part!r}")
    if part == "real":
        return values.real.astype(complex)
    if part == "imag":
        return values.imag.astype(complex)
    return np.asarray(values, dtype=complex)


def _step(axis: np.ndarray, fallback: float) -> float:
    axis = np.asarray(axis, dtype=float)
    if len(axis) < 2:
        return fallback
    d = np.diff(axis)
    if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1.0):
        raise FormatError("time axis is not uniformly spaced")
    return float(d[0])


def _pad_shape(pad, shape: tuple[int, ...]) -> tuple[int, ...]:
    if pad is None:
        return shape
    pads = (pad,) * len(shape) if np.isscalar(pad) else tuple(pad)
    if len(pads) != len(shape):
        raise ValidationError(f"pad needs {len(shape)} lengths")
    out = tuple(int(p) for p in pads)
    if any(p < n for p, n in zip(out, shape)):
        raise ValidationError(f"padded length {out} shorter than data {shape}")
    return out


def _window(n: int, dt: float, tau: float | None) -> np.ndarray:
    if tau is None:
        return np.ones(n)
    if tau <= 0:
        raise ValidationError("apodization time constant must be positive")
    return np.exp(-np.arange(n) * dt / tau)


def grid_from_array(values, resolution: int = DEFAULT_RESOLUTION) -> ResponseGrid:
    """Wrap a bare 2D array sampled every 1/resolution fs as a ResponseGrid."""
    values = np.asarray(values, dtype=complex)
    if values.ndim != 2:
        raise DimensionError("expected a 2D array")
    n1, n2 = values.shape
    return ResponseGrid(np.arange(n1) / resolution, np.arange(n2) / resolution, values,
                        Diagram(()), ((n1 - 1) / resolution, (n2 - 1) / resolution), (0, 1), resolution)


def transform2d(grid: ResponseGrid, part: str = "complex", *, apodize: float | None = None,
                pad=None, unit: str = "eV") -> Spectrum2D:
    """2D spectrum of ``grid``: axis1 maps to f1, axis2 to f2.

    ``apodize`` is an optional exponential window time constant in fs;
    ``pad`` zero-pads each axis (or both, if scalar) to the given length.
    """
    fallback = 1.0 / grid.resolution
    dt1, dt2 = _step(grid.axis1, fallback), _step(grid.axis2, fallback)
    data = _select(grid.values, part)
    data = data * np.outer(_window(data.shape[0], dt1, apodize), _window(data.shape[1], dt2, apodize))
    shape = _pad_shape(pad, data.shape)
    values = np.fft.fftshift(np.fft.fft2(data, s=shape))
    meta = {
        "part": part,
        "unit": unit,
        "fft": "forward, unnormalized, kernel exp(-i w t), zero frequency centred",
        "axis_map": "axis1 -> f1, axis2 -> f2",
        "apodize_fs": apodize,
        "padded_shape": list(shape),
    }
    if len(grid.diagram) or grid.detection:
        meta["source"] = metadata(grid)
    return Spectrum2D(values, frequency_axis(shape[0], dt1, unit), frequency_axis(shape[1], dt2, unit), unit, meta)


def transform1d(series, r: int = DEFAULT_RESOLUTION, *, part: str = "complex", pad: int | None = None,
                apodize: float | None = None, unit: str = "eV") -> tuple[np.ndarray, np.ndarray]:
    """Centred spectrum of a uniformly sampled series; returns (frequencies, values)."""
    data = _select(np.asarray(series), part)
    if data.ndim != 1:
        raise DimensionError("expected a 1D series")
    dt = 1.0 / r
    data = data * _window(len(data), dt, apodize)
    (n,) = _pad_shape(pad, data.shape)
    return frequency_axis(n, dt, unit), np.fft.fftshift(np.fft.fft(data, n))


def quadrant(s: Spectrum2D, q: int) -> Spectrum2D:
    """Quadrant q in 1..4 without axis flips.

    Q1: f1 >= 0, f2 >= 0; Q2: f1 < 0, f2 >= 0; Q3: f1 < 0, f2 < 0;
    Q4: f1 >= 0, f2 < 0. The four tile the spectrum exactly.
    """
    if q not in (1, 2, 3, 4):
        raise ValidationError("quadrant must be 1, 2, 3 or 4")
    m1 = s.f1 >= 0 if q in (1, 4) else s.f1 < 0
    m2 = s.f2 >= 0 if q in (1, 2) else s.f2 < 0
    return Spectrum2D(s.values[np.ix_(m1, m2)], s.f1[m1], s.f2[m2], s.unit, dict(s.meta, quadrant=q))


def select_quadrant(s: Spectrum2D, kind: str) -> Spectrum2D:
    """Display view: nonrephasing keeps f1, f2 >= 0; rephasing keeps f1 >= 0,
    f2 <= 0 and flips f2 so it reads positive (ascending)."""
    m1 = s.f1 >= 0
    if kind == NONREPHASING:
        m2 = s.f2 >= 0
        return Spectrum2D(s.values[np.ix_(m1, m2)], s.f1[m1], s.f2[m2], s.unit, dict(s.meta, view=kind))
    if kind == REPHASING:
        m2 = np.flatnonzero(s.f2 <= 0)[::-1]
        return Spectrum2D(s.values[np.ix_(m1, m2)], s.f1[m1], -s.f2[m2], s.unit,
                          dict(s.meta, view=kind, f2_inverted=True))
    raise ValidationError(f"kind must be {REPHASING!r} or {NONREPHASING!r}, got {kind!r}")


def combine(spectra: Sequence[Spectrum2D], weights: Sequence[float] | None = None) -> Spectrum2D:
    """Weighted elementwise sum of spectra sharing identical axes."""
    spectra = list(spectra)
    if not spectra:
        raise ValidationError("nothing to combine")
    weights = [1.0] * len(spectra) if weights is None else [float(w) for w in weights]
    if len(weights) != len(spectra):
        raise ValidationError(f"{len(spectra)} spectra but {len(weights)} weights")
    first = spectra[0]
    total = np.zeros_like(first.values)
    for s, w in zip(spectra, weights):
        if s.unit != first.unit or not (np.array_equal(s.f1, first.f1) and np.array_equal(s.f2, first.f2)):
            raise DimensionError("spectra do not share frequency axes")
        total = total + w * s.values
    meta = {k: v for k, v in first.meta.items() if k != "source"}
    meta["combined"] = {"count": len(spectra), "weights": weights}
    return Spectrum2D(total, first.f1.copy(), first.f2.copy(), first.unit, meta)


def local_maxima(values: np.ndarray, threshold: float = 0.0) -> list[tuple[int, ...]]:
    """Indices of strict-neighbourhood local maxima above ``threshold``
    (8-neighbourhood in 2D, nearest neighbours in 1D)."""
    a = np.asarray(values, dtype=float)
    padded = np.pad(a, 1, constant_values=-np.inf)
    is_max = np.ones(a.shape, dtype=bool)
    for shift in np.ndindex(*(3,) * a.ndim):
        if all(s == 1 for s in shift):
            continue
        sl = tuple(slice(s, s + n) for s, n in zip(shift, a.shape))
        is_max &= a >= padded[sl]
    is_max &= a > threshold
    return [tuple(int(i) for i in idx) for idx in np.argwhere(is_max)]


def peak(s: Spectrum2D) -> tuple[float, float]:
    """(f1, f2) of the largest |value|."""
    i, j = np.unravel_index(np.argmax(np.abs(s.values)), s.values.shape)
    return float(s.f1[i]), float(s.f2[j])
