"""Config-driven orchestration: build, resolve diagrams, scan, transform, export."""

from __future__ import annotations

import json
import logging
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import models
from .config import RunConfig
from .diagrams import POPULATION, Diagram, PhaseSpec, generate, parse, to_dsl
from .dynamics import write_trajectory_csv
from .errors import SpecforgeError
from .files import save_grid, save_spectrum
from .render import RenderOptions, render_heatmap
from .response import QuantumSystem, coherence2d, diagram_donkey, linear_response, pop_study
from .spectra import combine, transform1d, transform2d

log = logging.getLogger(__name__)


class StageError(SpecforgeError):
    """A pipeline stage failed; ``cause`` holds the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is reported with its stage
        raise StageError(name, exc) from exc


@dataclass
class PipelineResult:
    output_dir: Path
    files: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def build_system(cfg: RunConfig) -> QuantumSystem:
    p = dict(cfg.system)
    if cfg.kind == "two_level":
        return models.build_two_level(p["E"], p["mu"], decay=p["decay"], dephasing=p["dephasing"])
    if cfg.kind == "coupled_oscillators":
        return models.build_coupled_oscillators(
            p["w1"], p["w2"], p["J"], p["mu_a"], p["mu_b"], n_levels=p["n_levels"],
            gamma=p["gamma"], n_th=p["n_th"], diagonalize=p["diagonalize"])
    if cfg.kind == "dicke":
        return models.build_dicke(
            p["omega_c"], p["omega"], p["g"], p["n_spins"], p["n_cav"], kappa=p["kappa"],
            n_th=p["n_th"], dephasing=p["dephasing"], diagonalize=p["diagonalize"])
    c_ops = [c.strip() for c in p["c_ops"].split(",") if c.strip()]
    return models.build_custom(p["hamiltonian"], mu=p["dipole"], lowering=p["lowering"], c_ops=c_ops,
                               rho=p["rho"], diagonalize=p["diagonalize"])


def resolve_diagrams(cfg: RunConfig) -> dict[str, list[Diagram]]:
    detection = POPULATION if cfg.detection == "population" else None
    out = {}
    for g in cfg.groups:
        if g.phase is not None:
            out[g.name] = generate(PhaseSpec.parse(g.phase), g.times, g.manifold)
        else:
            out[g.name] = [parse(d, detection, strict=cfg.mode != "linear") for d in g.dsl]
    return out


def _slug(diagram: Diagram) -> str:
    return re.sub(r"[^A-Za-z0-9_]+", "", to_dsl(diagram).replace("),(", "_"))


def _render(spec, path: Path, cfg: RunConfig, view: str, title: str) -> Path:
    opts = RenderOptions(component="abs", scale=cfg.scale, quadrant=None if view == "none" else view,
                         diagonal=cfg.diagonal, antidiagonal=cfg.antidiagonal, title=title)
    return render_heatmap(spec, path, opts)


def run_pipeline(cfg: RunConfig, jobs: int | None = None, output_dir=None) -> PipelineResult:
    out = Path(output_dir or cfg.output_dir)
    result = PipelineResult(out)
    jobs = jobs or cfg.jobs
    with stage("output"):
        out.mkdir(parents=True, exist_ok=True)
        echo = out / "config.ini"
        echo.write_text(cfg.to_ini())
        result.files.append(echo)
    with stage("system"):
        sys = build_system(cfg)
        result.summary["dimension"] = sys.dim
    with stage("diagrams"):
        groups = resolve_diagrams(cfg)
        result.summary["diagrams"] = {k: [to_dsl(d) for d in v] for k, v in groups.items()}
    kw = {"full_dipole": cfg.full_dipole, "element": cfg.element}

    if cfg.trajectory_times:
        with stage("trajectory"):
            elements = cfg.trajectory_elements or [(i, j) for i in range(sys.dim) for j in range(sys.dim)]
            for name, diagrams in groups.items():
                for k, trace in enumerate(diagram_donkey(sys, cfg.trajectory_times, diagrams, cfg.resolution)):
                    path = out / "trajectories" / f"{name}_{k}_{_slug(trace.diagram)}.csv"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    write_trajectory_csv(path, trace.times, trace.states, elements)
                    result.files.append(path)

    if cfg.mode == "linear":
        with stage("linear"):
            result.files += _linear(sys, cfg, groups, out)
        (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n")
        return result

    with stage("scan"):
        runs: dict[str, list[tuple[str, list]]] = {}
        for name, diagrams in groups.items():
            entries = []
            for d in diagrams:
                if cfg.mode == "pop_study":
                    grids = pop_study(sys, cfg.pop_times, cfg.pop_index, cfg.delays, d, cfg.scan_id,
                                      cfg.resolution, cfg.parallel, jobs=jobs, **kw)
                else:
                    grids = [coherence2d(sys, cfg.delays, d, cfg.scan_id, cfg.resolution, cfg.parallel,
                                         jobs=jobs, **kw)]
                entries.append((_slug(d), grids))
            runs[name] = entries
    labels = ([f"t{cfg.pop_index}_{t:g}" for t in cfg.pop_times] if cfg.mode == "pop_study" else [""])
    with stage("spectra"):
        views = {g.name: g.view for g in cfg.groups}
        for name, entries in runs.items():
            for p, label in enumerate(labels):
                base = out / label if label else out
                specs = []
                for k, (slug, grids) in enumerate(entries):
                    grid = grids[p]
                    result.files.append(save_grid(base / "grids" / name / f"{k}_{slug}", grid))
                    spec = transform2d(grid, cfg.part)
                    result.files.append(save_spectrum(base / "spectra" / name / f"{k}_{slug}", spec))
                    specs.append(spec)
                if not specs:
                    continue
                total = combine(specs)
                total.meta["view"] = views[name]
                result.files.append(save_spectrum(base / "spectra" / f"{name}_sum", total))
                if cfg.images:
                    with stage("render"):
                        result.files.append(_render(total, base / "images" / f"{name}_sum.png", cfg,
                                                    views[name], f"{name} {label}".strip()))
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n")
    return result


def _linear(sys: QuantumSystem, cfg: RunConfig, groups, out: Path) -> list[Path]:
    files = []
    diagrams = [d for ds in groups.values() for d in ds] or [None]
    for k, d in enumerate(diagrams):
        times, series = linear_response(sys, cfg.scan_time, d, cfg.resolution)
        freqs, spec = transform1d(series, cfg.resolution, part=cfg.part)
        base = out / "linear" / (f"{k}_{_slug(d)}" if d is not None else "default")
        base.mkdir(parents=True, exist_ok=True)
        np.savetxt(base / "series.csv", np.column_stack([times, series.real, series.imag]),
                   fmt="%.17g", delimiter=",", header="t_fs,re,im", comments="")
        np.savetxt(base / "spectrum.csv", np.column_stack([freqs, spec.real, spec.imag]),
                   fmt="%.17g", delimiter=",", header="f_eV,re,im", comments="")
        files += [base / "series.csv", base / "spectrum.csv"]
    return files
