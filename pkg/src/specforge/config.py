"""INI run configuration: parsing, completeness checks and normalized echo.

Sections: [system], [diagrams], [scan], [detection], [output] and an
optional [trajectory]. Diagram groups are declared with
``groups = name1, name2`` and keys prefixed ``name.``; each group is either
generated (``name.phase``, ``name.times``, ``name.manifold``) or listed
(``name.dsl``, semicolon separated). Groups are summed into one spectrum and
shown in the quadrant named by ``name.view``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .diagrams import PhaseSpec
from .dynamics import DEFAULT_RESOLUTION
from .errors import ConfigError

# kind -> (required, optional-with-default)
SYSTEM_PARAMS: dict[str, tuple[tuple[str, ...], dict]] = {
    "two_level": (("E",), {"mu": 1.0, "decay": 0.0, "dephasing": 0.0}),
    "coupled_oscillators": (("w1", "w2", "J"), {
        "mu_a": 1.0, "mu_b": 0.0, "n_levels": 2, "gamma": 0.05, "n_th": 0.0, "diagonalize": True}),
    "dicke": (("omega_c", "omega", "g", "n_spins", "n_cav"), {
        "kappa": 0.05, "n_th": 0.1, "dephasing": 0.15, "diagonalize": True}),
    "custom": (("hamiltonian",), {"dipole": None, "lowering": None, "c_ops": "", "rho": None,
                                  "diagonalize": True}),
}
INT_PARAMS = {"n_levels", "n_spins", "n_cav"}
BOOL_PARAMS = {"diagonalize"}
PATH_PARAMS = {"hamiltonian", "dipole", "lowering", "rho"}
SCAN_MODES = ("coherence2d", "pop_study", "linear")
VIEWS = ("rephasing", "nonrephasing", "none")
PARTS = ("complex", "real", "imag")


def _floats(text: str) -> list[float]:
    text = text.strip().strip("[]")
    return [float(x) for x in text.replace(",", " ").split()] if text else []


def _ints(text: str) -> list[int]:
    return [int(x) for x in _floats(text)]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class DiagramGroup:
    name: str
    dsl: list[str] = field(default_factory=list)
    phase: str | None = None
    times: list[float] = field(default_factory=list)
    manifold: int = 1
    view: str = "none"

    def items(self) -> dict:
        out = {}
        if self.phase is not None:
            out.update(phase=self.phase, times=self.times, manifold=self.manifold)
        else:
            out["dsl"] = "; ".join(self.dsl)
        out["view"] = self.view
        return out


@dataclass
class RunConfig:
    kind: str
    system: dict
    groups: list[DiagramGroup]
    mode: str = "coherence2d"
    delays: list[float] = field(default_factory=list)
    scan_id: list[int] = field(default_factory=lambda: [0, 2])
    resolution: int = DEFAULT_RESOLUTION
    pop_index: int | None = None
    pop_times: list[float] = field(default_factory=list)
    scan_time: float | None = None
    parallel: bool = True
    jobs: int | None = None
    detection: str = "polarization"
    element: int | None = None
    full_dipole: bool = False
    part: str = "complex"
    output_dir: str = "specforge-out"
    images: bool = True
    scale: str = "linear"
    diagonal: bool = True
    antidiagonal: bool = False
    trajectory_times: list[float] = field(default_factory=list)
    trajectory_elements: list[tuple[int, int]] = field(default_factory=list)
    base_dir: Path = field(default=Path("."), compare=False)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        system = {"kind": self.kind}
        for k, v in self.system.items():
            if v is None or v == "":
                continue
            system[k] = _fmt(v)
        cp["system"] = system
        diagrams = {"groups": ", ".join(g.name for g in self.groups)}
        for g in self.groups:
            for k, v in g.items().items():
                diagrams[f"{g.name}.{k}"] = _fmt(v)
        cp["diagrams"] = diagrams
        scan = {"mode": self.mode, "resolution": str(self.resolution), "parallel": _fmt(self.parallel)}
        if self.mode in ("coherence2d", "pop_study"):
            scan.update(delays=_fmt(self.delays), scan_id=_fmt(self.scan_id))
        if self.mode == "pop_study":
            scan.update(pop_index=str(self.pop_index), pop_times=_fmt(self.pop_times))
        if self.scan_time is not None:
            scan["scan_time"] = _fmt(self.scan_time)
        if self.jobs is not None:
            scan["jobs"] = str(self.jobs)
        cp["scan"] = scan
        det = {"mode": self.detection, "full_dipole": _fmt(self.full_dipole), "part": self.part}
        if self.element is not None:
            det["element"] = str(self.element)
        cp["detection"] = det
        cp["output"] = {"directory": self.output_dir, "images": _fmt(self.images), "scale": self.scale,
                        "diagonal": _fmt(self.diagonal), "antidiagonal": _fmt(self.antidiagonal)}
        if self.trajectory_times:
            cp["trajectory"] = {"times": _fmt(self.trajectory_times),
                                "elements": ", ".join(f"{i}:{j}" for i, j in self.trajectory_elements)}
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in cp[name].items()]
            lines.append("")
        return "\n".join(lines)


def _section(cp, name: str, required: bool = True) -> dict:
    if not cp.has_section(name):
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    return dict(cp[name])


def _system(sec: dict) -> tuple[str, dict]:
    kind = sec.pop("kind", None)
    if kind is None:
        raise ConfigError("[system] needs a kind")
    if kind not in SYSTEM_PARAMS:
        raise ConfigError(f"unknown system kind {kind!r}; expected one of {sorted(SYSTEM_PARAMS)}")
    required, optional = SYSTEM_PARAMS[kind]
    unknown = set(sec) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown [system] keys for {kind}: {sorted(unknown)}")
    missing = [k for k in required if k not in sec]
    if missing:
        raise ConfigError(f"system kind {kind} is missing {missing}")
    params = dict(optional)
    for k, v in sec.items():
        try:
            if k in BOOL_PARAMS:
                params[k] = _bool(v)
            elif k in INT_PARAMS:
                params[k] = int(v)
            elif k in PATH_PARAMS or k == "c_ops":
                params[k] = v.strip()
            else:
                params[k] = float(v)
        except ValueError as exc:
            raise ConfigError(f"[system] {k}: {exc}") from exc
    if kind == "custom" and not (params["dipole"] or params["lowering"]):
        raise ConfigError("custom system needs a dipole or a lowering operator file")
    return kind, params


def _groups(sec: dict) -> list[DiagramGroup]:
    names = [n.strip() for n in sec.pop("groups", "").split(",") if n.strip()]
    if not names:
        raise ConfigError("[diagrams] needs groups = name, ...")
    groups = []
    for name in names:
        keys = {k[len(name) + 1:]: v for k, v in sec.items() if k.startswith(name + ".")}
        for k in keys:
            sec.pop(f"{name}.{k}")
        g = DiagramGroup(name)
        try:
            if "phase" in keys:
                g.phase = ", ".join(f"({m},{p})" for m, p in PhaseSpec.parse(keys.pop("phase")).pairs)
                g.times = _floats(keys.pop("times", ""))
                g.manifold = int(keys.pop("manifold", 1))
                if len(g.times) < len(PhaseSpec.parse(g.phase).pairs):
                    raise ConfigError(f"group {name}: need one arrival time per pulse")
            elif "dsl" in keys:
                g.dsl = [d.strip() for d in keys.pop("dsl").split(";") if d.strip()]
            else:
                raise ConfigError(f"group {name} needs either phase or dsl")
            g.view = keys.pop("view", "none").strip()
        except ValueError as exc:
            raise ConfigError(f"group {name}: {exc}") from exc
        if g.view not in VIEWS:
            raise ConfigError(f"group {name}: view must be one of {VIEWS}")
        if keys:
            raise ConfigError(f"group {name}: unknown keys {sorted(keys)}")
        groups.append(g)
    if sec:
        raise ConfigError(f"[diagrams] keys not tied to a declared group: {sorted(sec)}")
    return groups


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    kind, params = _system(_section(cp, "system"))
    groups = _groups(_section(cp, "diagrams"))
    base = Path(base_dir)
    if kind == "custom":
        for k in PATH_PARAMS:
            if params.get(k):
                params[k] = str((base / params[k]).resolve())
        if params["c_ops"]:
            params["c_ops"] = ", ".join(str((base / c.strip()).resolve())
                                        for c in params["c_ops"].split(",") if c.strip())
    cfg = RunConfig(kind, params, groups, base_dir=base)
    scan = _section(cp, "scan")
    det = _section(cp, "detection", False)
    out = _section(cp, "output", False)
    traj = _section(cp, "trajectory", False)
    try:
        cfg.mode = scan.pop("mode", "coherence2d").strip()
        cfg.resolution = int(scan.pop("resolution", DEFAULT_RESOLUTION))
        cfg.parallel = _bool(scan.pop("parallel", "true"))
        if "jobs" in scan:
            cfg.jobs = int(scan.pop("jobs"))
        if "scan_time" in scan:
            cfg.scan_time = float(scan.pop("scan_time"))
        cfg.delays = _floats(scan.pop("delays", ""))
        cfg.scan_id = _ints(scan.pop("scan_id", "0, 2"))
        if "pop_index" in scan:
            cfg.pop_index = int(scan.pop("pop_index"))
        cfg.pop_times = _floats(scan.pop("pop_times", ""))
        cfg.detection = det.pop("mode", "polarization").strip()
        if "element" in det:
            cfg.element = int(det.pop("element"))
        cfg.full_dipole = _bool(det.pop("full_dipole", "false"))
        cfg.part = det.pop("part", "complex").strip()
        cfg.output_dir = out.pop("directory", cfg.output_dir).strip()
        cfg.images = _bool(out.pop("images", "true"))
        cfg.scale = out.pop("scale", "linear").strip()
        cfg.diagonal = _bool(out.pop("diagonal", "true"))
        cfg.antidiagonal = _bool(out.pop("antidiagonal", "false"))
        cfg.trajectory_times = _floats(traj.pop("times", ""))
        cfg.trajectory_elements = [tuple(int(x) for x in item.split(":"))
                                   for item in traj.pop("elements", "").replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from exc
    for name, rest in (("scan", scan), ("detection", det), ("output", out), ("trajectory", traj)):
        if rest:
            raise ConfigError(f"unknown [{name}] keys: {sorted(rest)}")
    for name in set(cp.sections()) - {"system", "diagrams", "scan", "detection", "output", "trajectory"}:
        raise ConfigError(f"unknown section [{name}]")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.mode not in SCAN_MODES:
        raise ConfigError(f"scan mode must be one of {SCAN_MODES}, got {cfg.mode!r}")
    if cfg.resolution < 1:
        raise ConfigError("resolution must be a positive integer")
    if cfg.mode in ("coherence2d", "pop_study"):
        if not cfg.delays:
            raise ConfigError(f"scan mode {cfg.mode} needs delays")
        if len(cfg.scan_id) != 2 or cfg.scan_id[0] == cfg.scan_id[1]:
            raise ConfigError("scan_id needs two distinct indices")
        if any(not 0 <= i < len(cfg.delays) for i in cfg.scan_id):
            raise ConfigError("scan_id indices outside the delay list")
    if cfg.mode == "pop_study":
        if cfg.pop_index is None or not 0 <= cfg.pop_index < len(cfg.delays) or cfg.pop_index in cfg.scan_id:
            raise ConfigError("pop_study needs a pop_index that is a fixed delay")
    if cfg.mode == "linear" and not (cfg.scan_time and cfg.scan_time > 0):
        raise ConfigError("linear mode needs a positive scan_time")
    if cfg.jobs is not None and cfg.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if cfg.detection not in ("polarization", "population"):
        raise ConfigError("detection mode must be polarization or population")
    if cfg.part not in PARTS:
        raise ConfigError(f"part must be one of {PARTS}")
    if cfg.scale not in ("linear", "log"):
        raise ConfigError("scale must be linear or log")
    if any(len(e) != 2 for e in cfg.trajectory_elements):
        raise ConfigError("trajectory elements are row:col pairs")


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
