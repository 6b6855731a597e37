"""Execute diagrams as alternating project / propagate sequences.

A branch starts from the stationary initial density matrix, receives the
first interaction at t = 0 and is then propagated for each delay in turn.
Branches are single Liouville pathways, not physical states, so they are
plain complex arrays here.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .algebra import (DensityMatrix, EigenbasisTransform, Operator, diagonalize, split_dipole)
from .diagrams import POLARIZATION, POPULATION, Diagram, parse, to_dsl
from .dynamics import (DEFAULT_RESOLUTION, HBAR, LindbladModel, Propagator, asymptotic_state, steady_state,
                       steps_for)
from .errors import DegenerateSteadyStateError, DimensionError, ValidationError

CHUNK = 64  # axis-1 columns per scan work unit


@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """Model, dipole and interaction ladder, all in one operator space.

    ``mu`` is the detected dipole observable; ``mu_plus`` / ``mu_minus`` are
    the parts applied by excitations and de-excitations respectively.
    """

    model: LindbladModel
    mu: Operator
    mu_plus: Operator
    mu_minus: Operator
    rho_init: DensityMatrix
    basis: EigenbasisTransform | None = None

    def __post_init__(self):
        space = self.model.H.space
        for name in ("mu", "mu_plus", "mu_minus", "rho_init"):
            op = getattr(self, name)
            if op.space != space:
                raise DimensionError(f"{name} lives on {op.space}, model on {space}")

    @property
    def dim(self) -> int:
        return self.model.dim

    @classmethod
    def build(cls, H: Operator, *, mu: Operator | None = None, lowering: Operator | None = None,
              c_ops: Sequence[Operator] = (), rho: Operator | None = None,
              diagonalize_H: bool = True, hbar: float = HBAR) -> "QuantumSystem":
        """Assemble a system, optionally rotating everything into H's eigenbasis.

        With ``lowering`` given, the interaction ladder is (lowering^dag,
        lowering) and ``mu`` defaults to lowering + lowering^dag. Without it,
        ``mu`` is split into its energy-raising and -lowering parts, which
        requires the energy-ordered eigenbasis. ``rho`` defaults to the steady
        state when there is dissipation and to the ground state otherwise.
        """
        if mu is None and lowering is None:
            raise ValidationError("need a dipole operator or a lowering operator")
        if mu is None:
            mu = lowering + lowering.dag()
        basis = None
        c_ops = list(c_ops)
        if diagonalize_H:
            extra = [mu] + ([lowering] if lowering is not None else []) + c_ops
            if rho is not None:
                extra.append(rho)
            basis, mapped = diagonalize(H, extra)
            H = Operator(np.diag(basis.eigenvalues), H.space)
            mu = mapped[0]
            k = 1
            if lowering is not None:
                lowering = mapped[1]
                k = 2
            c_ops = mapped[k:k + len(c_ops)]
            if rho is not None:
                rho = mapped[-1]
        elif lowering is None:
            diag = np.real(np.diag(H.data))
            if np.any(np.diff(diag) < -1e-12) or np.max(np.abs(H.data - np.diag(np.diag(H.data)))) > 1e-10:
                raise ValidationError("splitting mu needs H diagonal with ascending energies")
        if lowering is not None:
            mu_minus, mu_plus = lowering, lowering.dag()
        else:
            mu_plus, mu_minus = split_dipole(mu, basis)
        model = LindbladModel(H, tuple(c_ops), hbar)
        if rho is None:
            ground = int(np.argmin(np.real(np.diag(H.data))))
            data = np.zeros((H.dim, H.dim))
            data[ground, ground] = 1.0
            rho = DensityMatrix(data, H.space)
            if any(np.any(op.data) for op in c_ops):
                try:
                    rho = steady_state(model)
                except DegenerateSteadyStateError:
                    # conserved quantities: take the state the ground state relaxes into
                    rho = asymptotic_state(model, rho)
        elif not isinstance(rho, DensityMatrix):
            rho = DensityMatrix(rho.data, rho.space)
        return cls(model, mu, mu_plus, mu_minus, rho, basis)


@dataclass(frozen=True)
class DiagramRun:
    diagram: Diagram
    delays: tuple[float, ...]
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        delays = tuple(float(t) for t in self.delays)
        object.__setattr__(self, "delays", delays)
        if len(delays) != len(self.diagram):
            raise ValidationError(
                f"{len(self.diagram)} interactions need {len(self.diagram)} delays, got {len(delays)}")
        if any(t < 0 for t in delays):
            raise ValidationError("delays must be nonnegative")


@dataclass(frozen=True)
class Execution:
    final: np.ndarray
    value: complex
    times: np.ndarray | None = None
    states: np.ndarray | None = None


@dataclass(eq=False)
class ResponseGrid:
    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    diagram: Diagram
    delays: tuple[float, ...]
    scan_id: tuple[int, int]
    resolution: int
    detection: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.axis1), len(self.axis2)):
            raise DimensionError(
                f"values shape {self.values.shape} does not match axes ({len(self.axis1)}, {len(self.axis2)})")

    @property
    def fixed_delays(self) -> dict[int, float]:
        return {i: t for i, t in enumerate(self.delays) if i not in self.scan_id}


# -- projector algebra on stacks ---------------------------------------------


def _apply(tag: str, x: np.ndarray, mp: np.ndarray, mm: np.ndarray) -> np.ndarray:
    if tag == "Ku":
        return mp @ x
    if tag == "Kd":
        return mm @ x
    if tag == "Bu":
        return x @ mm
    return x @ mp


def _apply_adjoint(tag: str, o: np.ndarray, mp: np.ndarray, mm: np.ndarray) -> np.ndarray:
    # Tr(O A x) = Tr((O A) x) and Tr(O x B) = Tr((B O) x)
    if tag == "Ku":
        return o @ mp
    if tag == "Kd":
        return o @ mm
    if tag == "Bu":
        return mm @ o
    return mp @ o


@lru_cache(maxsize=8)
def _propagator(model: LindbladModel, resolution: int) -> Propagator:
    return Propagator(model, resolution)


def population_element(sys: QuantumSystem, diagram: Diagram) -> int:
    """Default readout level for a population diagram.

    The lowest eigenstate carrying weight in the instantaneous (all delays
    zero) branch.
    """
    x = sys.rho_init.data
    mp, mm = sys.mu_plus.data, sys.mu_minus.data
    for it in diagram.interactions:
        x = _apply(it.tag, x, mp, mm)
    diag = np.abs(np.diag(x))
    scale = np.abs(x).max(initial=0.0)
    hits = np.flatnonzero(diag > 1e-12 * scale) if scale > 0 else []
    return int(hits[0]) if len(hits) else 0


def detector(sys: QuantumSystem, diagram: Diagram, *, full_dipole: bool = False,
             element: int | None = None) -> tuple[np.ndarray, dict]:
    """Observable O with detected value sign * Tr(O rho_final), plus metadata."""
    if diagram.detection == POPULATION:
        n = population_element(sys, diagram) if element is None else int(element)
        if not 0 <= n < sys.dim:
            raise ValidationError(f"population element {n} outside 0..{sys.dim - 1}")
        obs = np.zeros((sys.dim, sys.dim), dtype=complex)
        obs[n, n] = 1.0
        return obs, {"mode": POPULATION, "element": n, "sign": diagram.sign}
    obs = sys.mu.data if full_dipole else sys.mu_minus.data
    return np.array(obs, dtype=complex), {
        "mode": POLARIZATION, "observable": "mu" if full_dipole else "mu_minus", "sign": diagram.sign}


def _as_diagram(diagram) -> Diagram:
    return parse(diagram) if isinstance(diagram, str) else diagram


def execute(sys: QuantumSystem, run: DiagramRun, record: bool = False, *,
            full_dipole: bool = False, element: int | None = None) -> Execution:
    """Run one diagram at fixed delays and return the final branch and signal."""
    diagram = run.diagram
    prop = _propagator(sys.model, run.resolution)
    mp, mm = sys.mu_plus.data, sys.mu_minus.data
    x = np.array(sys.rho_init.data, dtype=complex)
    times, states = [], []
    t0 = 0.0
    for it, delay in zip(diagram.interactions, run.delays):
        x = _apply(it.tag, x, mp, mm)
        n = steps_for(delay, run.resolution)
        if record:
            seg = prop.trajectory(x, n)
            times.append(t0 + np.arange(n + 1) / run.resolution)
            states.append(seg)
            x = seg[-1]
        else:
            x = prop.forward(x, n)
        t0 += n / run.resolution
    obs, _ = detector(sys, diagram, full_dipole=full_dipole, element=element)
    value = diagram.sign * complex(np.sum(obs.T * x))
    if record:
        if states:
            return Execution(x, value, np.concatenate(times), np.concatenate(states))
        return Execution(x, value, np.zeros(1), x[None].copy())
    return Execution(x, value)


@dataclass(frozen=True)
class Trace:
    diagram: Diagram
    times: np.ndarray
    states: np.ndarray


def diagram_donkey(sys: QuantumSystem, interaction_times: Sequence[float],
                   diagrams: Sequence[Diagram], r: int = DEFAULT_RESOLUTION) -> list[Trace]:
    """Full branch trajectories for inspection.

    ``interaction_times`` are arrival times of each interaction with the
    first at t = 0; the final entry closes the observation window.
    """
    times = [float(t) for t in interaction_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValidationError("interaction times must be nondecreasing")
    delays = tuple(b - a for a, b in zip(times, times[1:]))
    out = []
    for d in diagrams:
        d = _as_diagram(d)
        ex = execute(sys, DiagramRun(d, delays, r), record=True)
        out.append(Trace(d, ex.times + (times[0] if times else 0.0), ex.states))
    return out


def _scan_worker(ys: np.ndarray, middle, prop: Propagator, w_flat: np.ndarray,
                 mp: np.ndarray, mm: np.ndarray) -> np.ndarray:
    for tag, n in middle:
        if tag is None:
            ys = prop.forward(ys, n)
        else:
            ys = _apply(tag, ys, mp, mm)
    n1, d, _ = ys.shape
    # Tr(W_j Y_i) = sum_kl W_j[k, l] Y_i[l, k]
    return ys.transpose(0, 2, 1).reshape(n1, d * d) @ w_flat.T


def default_jobs() -> int:
    env = os.environ.get("SPECFORGE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def coherence2d(sys: QuantumSystem, time_delays: Sequence[float], diagram, scan_id: Sequence[int],
                r: int = DEFAULT_RESOLUTION, parallel: bool = False, *, jobs: int | None = None,
                full_dipole: bool = False, element: int | None = None) -> ResponseGrid:
    """Response over two scanned delays with all others fixed.

    Scanned delays are maxima; each is sampled on 0, 1/r, ..., max. The
    branch is propagated once along the first scanned delay and the state at
    every grid point is kept as a checkpoint. The detector is propagated
    backwards (Heisenberg picture) once along the second scanned delay, and
    each grid value is the pairing of a checkpoint, carried through the fixed
    middle segment, with a back-propagated detector. No (t_a, t_b) pair is
    ever propagated from scratch.
    """
    diagram = _as_diagram(diagram)
    delays = tuple(float(t) for t in time_delays)
    DiagramRun(diagram, delays, r)
    scan = tuple(int(i) for i in scan_id)
    if len(scan) != 2 or scan[0] == scan[1]:
        raise ValidationError(f"scan_id needs two distinct indices, got {scan_id}")
    if any(not 0 <= i < len(delays) for i in scan):
        raise ValidationError(f"scan indices {scan} outside 0..{len(delays) - 1}")
    a, b = sorted(scan)
    prop = _propagator(sys.model, r)
    mp, mm = sys.mu_plus.data, sys.mu_minus.data
    tags = diagram.tags
    steps = [steps_for(t, r) for t in delays]

    x = np.array(sys.rho_init.data, dtype=complex)
    for i in range(a):
        x = prop.forward(_apply(tags[i], x, mp, mm), steps[i])
    x = _apply(tags[a], x, mp, mm)
    checkpoints = prop.trajectory(x, steps[a])

    obs, meta = detector(sys, diagram, full_dipole=full_dipole, element=element)
    o = obs
    for i in range(len(tags) - 1, b, -1):
        o = _apply_adjoint(tags[i], prop.forward(o, steps[i], adjoint=True), mp, mm)
    w = prop.trajectory(o, steps[b], adjoint=True)
    w_flat = w.reshape(w.shape[0], -1)

    middle = []
    for i in range(a + 1, b):
        middle += [(tags[i], 0), (None, steps[i])]
    middle.append((tags[b], 0))

    n1 = checkpoints.shape[0]
    chunks = [slice(s, min(s + CHUNK, n1)) for s in range(0, n1, CHUNK)]
    values = np.empty((n1, w.shape[0]), dtype=complex)
    if parallel and len(chunks) > 1:
        jobs = jobs or default_jobs()
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_scan_worker, checkpoints[c], middle, prop, w_flat, mp, mm) for c in chunks]
            for c, fut in zip(chunks, futures):
                values[c] = fut.result()
    else:
        for c in chunks:
            values[c] = _scan_worker(checkpoints[c], middle, prop, w_flat, mp, mm)
    values *= diagram.sign
    if scan[0] > scan[1]:
        values = values.T.copy()
    axis1 = np.arange(steps[scan[0]] + 1) / r
    axis2 = np.arange(steps[scan[1]] + 1) / r
    meta = dict(meta, scan_order="axis1 <-> delay %d, axis2 <-> delay %d" % scan)
    return ResponseGrid(axis1, axis2, values, diagram, delays, scan, int(r), meta)


def naive_coherence2d(sys: QuantumSystem, time_delays: Sequence[float], diagram, scan_id: Sequence[int],
                      r: int = DEFAULT_RESOLUTION, **kw) -> np.ndarray:
    """Reference scan: one independent :func:`execute` per grid point."""
    diagram = _as_diagram(diagram)
    delays = list(float(t) for t in time_delays)
    i, j = scan_id
    n1, n2 = steps_for(delays[i], r) + 1, steps_for(delays[j], r) + 1
    out = np.empty((n1, n2), dtype=complex)
    for p in range(n1):
        for q in range(n2):
            cur = list(delays)
            cur[i], cur[j] = p / r, q / r
            out[p, q] = execute(sys, DiagramRun(diagram, tuple(cur), r), **kw).value
    return out


def pop_study(sys: QuantumSystem, pop_time_list: Sequence[float], pop_index: int,
              time_delays: Sequence[float], diagram, scan_id: Sequence[int],
              r: int = DEFAULT_RESOLUTION, parallel: bool = False, **kw) -> list[ResponseGrid]:
    """coherence2d repeated for each population time."""
    if pop_index in tuple(scan_id):
        raise ValidationError("population index cannot be a scanned delay")
    if not 0 <= pop_index < len(time_delays):
        raise ValidationError(f"population index {pop_index} out of range")
    grids = []
    for t in pop_time_list:
        delays = list(time_delays)
        delays[pop_index] = float(t)
        grids.append(coherence2d(sys, delays, diagram, scan_id, r, parallel, **kw))
    return grids


def linear_response(sys: QuantumSystem, scan_time: float, diagram=None,
                    r: int = DEFAULT_RESOLUTION) -> tuple[np.ndarray, np.ndarray]:
    """<mu>(t) after applying every interaction of ``diagram`` at t = 0.

    The default diagram is a single bra excitation.
    """
    if scan_time <= 0:
        raise ValidationError("scan_time must be positive")
    if diagram is None:
        diagram = "((Bu,0))"
    if isinstance(diagram, str):
        diagram = parse(diagram, strict=False)
    x = np.array(sys.rho_init.data, dtype=complex)
    for it in diagram.interactions:
        x = _apply(it.tag, x, sys.mu_plus.data, sys.mu_minus.data)
    n = steps_for(scan_time, r)
    states = _propagator(sys.model, r).trajectory(x, n)
    values = np.einsum("kl,tlk->t", sys.mu.data, states)
    return np.arange(n + 1) / r, values


def metadata(grid: ResponseGrid) -> dict:
    return {
        "diagram": to_dsl(grid.diagram),
        "detection_kind": grid.diagram.detection,
        "sign": grid.diagram.sign,
        "sign_applied": True,
        "delays_fs": list(grid.delays),
        "scan_id": list(grid.scan_id),
        "resolution": grid.resolution,
        "axis1_len": len(grid.axis1),
        "axis2_len": len(grid.axis2),
        "detection": grid.detection,
        "prefactor": "(-i/hbar)^n omitted; unit-area impulsive pulses",
    }
