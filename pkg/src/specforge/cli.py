"""``specforge`` command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric divergence,
4 I/O error, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import DiagramGroup, RunConfig, load_config
from .diagrams import PhaseSpec, generate, render_ascii, to_dsl
from .errors import (ConfigError, DiagramParseError, DimensionError, DivergenceError, FormatError,
                     SpecforgeError, ValidationError)
from .files import load_grid, load_spectrum, save_spectrum
from .pipeline import StageError, run_pipeline
from .render import RenderOptions, render_heatmap
from .spectra import transform2d

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3, 4
BUNDLED = ("example1", "example2")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code(exc.cause)
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (ConfigError, ValidationError, DiagramParseError, DimensionError)):
        return EXIT_CONFIG
    if isinstance(exc, (OSError, FormatError)):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_OTHER


def resolve_config_path(name: str) -> Path:
    """A file path, or the name of a bundled example (example1 / example2)."""
    path = Path(name)
    if path.exists():
        return path
    stem = path.stem if path.suffix == ".cfg" else name
    if stem in BUNDLED:
        return Path(str(resources.files("specforge") / "data" / f"{stem}.cfg"))
    raise FileNotFoundError(f"no config file {name!r} (bundled examples: {', '.join(BUNDLED)})")


def bundled_config_text(name: str) -> str:
    return (resources.files("specforge") / "data" / f"{name}.cfg").read_text()


def _jobs(args) -> int | None:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("SPECFORGE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SPECFORGE_JOBS must be an integer, got {env!r}")
    return None


def _load(args) -> RunConfig:
    cfg = load_config(resolve_config_path(args.config))
    if getattr(args, "resolution", None):
        cfg.resolution = args.resolution
    if getattr(args, "serial", False):
        cfg.parallel = False
    if getattr(args, "no_images", False):
        cfg.images = False
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_pipeline(cfg, jobs=_jobs(args), output_dir=args.out)
    print(f"wrote {len(result.files)} files to {result.output_dir}")
    return EXIT_OK


def cmd_linear(args) -> int:
    cfg = _load(args)
    scan_time = args.scan_time or cfg.scan_time or 200.0
    groups = [DiagramGroup("linear", dsl=[args.diagram])] if args.diagram else []
    cfg = dataclasses.replace(cfg, mode="linear", scan_time=scan_time, groups=groups,
                              trajectory_times=[])
    result = run_pipeline(cfg, jobs=_jobs(args), output_dir=args.out)
    print(f"wrote {len(result.files)} files to {result.output_dir}")
    return EXIT_OK


def cmd_diagrams(args) -> int:
    phase = PhaseSpec.parse(args.phase)
    times = [float(t) for t in args.times.replace(",", " ").split()]
    diagrams = generate(phase, times, args.manifold)
    for d in diagrams:
        if args.format == "ascii":
            print(to_dsl(d))
            print(render_ascii(d))
            print()
        else:
            print(to_dsl(d))
    if not diagrams:
        print("no diagrams", file=sys.stderr)
    return EXIT_OK


def cmd_spectra(args) -> int:
    grid = load_grid(args.grid)
    spec = transform2d(grid, args.part, apodize=args.apodize, pad=args.pad, unit=args.unit)
    out = Path(args.out) if args.out else Path(args.grid).with_name(Path(args.grid).name + "_spectrum")
    save_spectrum(out, spec)
    print(f"wrote spectrum to {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    spec = load_spectrum(args.spectrum)
    quadrant = args.quadrant
    if quadrant == "auto":
        view = spec.meta.get("view", "none")
        quadrant = None if view in (None, "none") else view
    elif quadrant == "none":
        quadrant = None
    opts = RenderOptions(component=args.component, scale=args.scale, center=args.center,
                         quadrant=quadrant, invert_y=args.invert_y, diagonal=args.diagonal,
                         antidiagonal=args.antidiagonal, title=args.title)
    out = Path(args.out) if args.out else Path(args.spectrum) / "heatmap.png"
    render_heatmap(spec, out, opts)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specforge",
                                description="Nonlinear optical response from double-sided diagrams.")
    p.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    sub = p.add_subparsers(dest="command", required=True)

    def scan_flags(sp):
        sp.add_argument("config", help="config file, or example1 / example2 for the bundled runs")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--jobs", type=int, help="scan workers (default: SPECFORGE_JOBS or all cores)")
        sp.add_argument("--resolution", type=int, help="time steps per fs (overrides the config)")
        sp.add_argument("--serial", action="store_true", help="disable the scan worker pool")
        sp.add_argument("--no-images", action="store_true", help="skip heatmap rendering")

    sp = sub.add_parser("run", help="run a configured pipeline")
    scan_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("linear", help="linear response of a configured system")
    scan_flags(sp)
    sp.add_argument("--scan-time", type=float, help="observation window in fs (default 200)")
    sp.add_argument("--diagram", help="interactions applied at t=0 (default: a single Bu)")
    sp.set_defaults(func=cmd_linear)

    sp = sub.add_parser("diagrams", help="enumerate diagrams for a phase-matching condition")
    sp.add_argument("--phase", required=True, help='per-pulse (n_minus,n_plus), e.g. "(1,0),(0,1),(0,1)"')
    sp.add_argument("--times", required=True, help='pulse arrival times in fs, e.g. "0,100,200,200"')
    sp.add_argument("--manifold", type=int, default=1, help="highest excitation manifold (default 1)")
    sp.add_argument("--format", choices=("dsl", "ascii"), default="dsl")
    sp.set_defaults(func=cmd_diagrams)

    sp = sub.add_parser("spectra", help="Fourier transform a saved response grid")
    sp.add_argument("grid", help="grid directory")
    sp.add_argument("--out", help="spectrum directory (default: <grid>_spectrum)")
    sp.add_argument("--part", choices=("complex", "real", "imag"), default="complex")
    sp.add_argument("--pad", type=int, help="zero-pad both axes to this length")
    sp.add_argument("--apodize", type=float, help="exponential window time constant in fs")
    sp.add_argument("--unit", choices=("eV", "rad/fs"), default="eV")
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("render", help="draw a saved spectrum as a heatmap")
    sp.add_argument("spectrum", help="spectrum directory")
    sp.add_argument("--out", help="image path (default: <spectrum>/heatmap.png)")
    sp.add_argument("--component", choices=("abs", "real", "imag"), default="abs")
    sp.add_argument("--scale", choices=("linear", "log"), default="linear")
    sp.add_argument("--center", action="store_true", help="zero-centred colour scale")
    sp.add_argument("--quadrant", choices=("auto", "none", "rephasing", "nonrephasing"), default="auto")
    sp.add_argument("--invert-y", action="store_true")
    sp.add_argument("--diagonal", action="store_true", help="draw the diagonal")
    sp.add_argument("--antidiagonal", action="store_true", help="draw the anti-diagonal")
    sp.add_argument("--title")
    sp.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except (SpecforgeError, OSError, ValueError) as exc:
        print(f"specforge: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
