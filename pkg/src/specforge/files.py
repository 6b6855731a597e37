"""On-disk layout for response grids and spectra.

Each object is a directory holding ``metadata.json`` plus ``real.csv`` and
``imag.csv`` (row i is axis1[i]). Spectra add ``f1.csv`` and ``f2.csv``.
Floats are written with 17 significant digits so a save/load cycle is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diagrams import parse
from .errors import FormatError
from .response import ResponseGrid, metadata
from .spectra import Spectrum2D

FMT = "%.17g"


def _write_matrix(path: Path, values: np.ndarray):
    np.savetxt(path, np.atleast_2d(values), fmt=FMT, delimiter=",")


def _read_matrix(path: Path, shape: tuple[int, int]) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if data.shape != shape:
        raise FormatError(f"{path.name} has shape {data.shape}, metadata says {shape}")
    return data


def _read_meta(directory: Path) -> dict:
    try:
        return json.loads((directory / "metadata.json").read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{directory} has no metadata.json") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad metadata.json in {directory}: {exc}") from exc


def save_grid(directory, grid: ResponseGrid) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metadata.json").write_text(json.dumps(metadata(grid), indent=2) + "\n")
    _write_matrix(out / "real.csv", grid.values.real)
    _write_matrix(out / "imag.csv", grid.values.imag)
    return out


def load_grid(directory) -> ResponseGrid:
    src = Path(directory)
    meta = _read_meta(src)
    try:
        n1, n2, r = int(meta["axis1_len"]), int(meta["axis2_len"]), int(meta["resolution"])
        diagram = parse(meta["diagram"], meta["detection_kind"], strict=bool(meta.get("strict", True)))
        delays, scan = tuple(meta["delays_fs"]), tuple(meta["scan_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"incomplete grid metadata in {src}: {exc}") from exc
    values = _read_matrix(src / "real.csv", (n1, n2)) + 1j * _read_matrix(src / "imag.csv", (n1, n2))
    return ResponseGrid(np.arange(n1) / r, np.arange(n2) / r, values, diagram, delays, scan, r,
                        dict(meta.get("detection", {})))


def save_spectrum(directory, spectrum: Spectrum2D) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = dict(spectrum.meta, unit=spectrum.unit, shape=list(spectrum.values.shape),
                extent=spectrum.extent)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")
    _write_matrix(out / "real.csv", spectrum.values.real)
    _write_matrix(out / "imag.csv", spectrum.values.imag)
    np.savetxt(out / "f1.csv", spectrum.f1, fmt=FMT)
    np.savetxt(out / "f2.csv", spectrum.f2, fmt=FMT)
    return out


def load_spectrum(directory) -> Spectrum2D:
    src = Path(directory)
    meta = _read_meta(src)
    try:
        f1 = np.atleast_1d(np.loadtxt(src / "f1.csv"))
        f2 = np.atleast_1d(np.loadtxt(src / "f2.csv"))
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read frequency axes in {src}: {exc}") from exc
    shape = (len(f1), len(f2))
    values = _read_matrix(src / "real.csv", shape) + 1j * _read_matrix(src / "imag.csv", shape)
    unit = meta.pop("unit", "eV")
    for key in ("shape", "extent"):
        meta.pop(key, None)
    return Spectrum2D(values, f1, f2, unit, meta)
