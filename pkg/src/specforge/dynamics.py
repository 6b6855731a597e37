"""Lindblad evolution of density matrices and steady states.

Units: energies in eV, times in fs, collapse operators carry sqrt(rate) with
rates in 1/fs. ``hbar`` converts between the two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .algebra import DensityMatrix, Operator, HERMITIAN_TOL
from .errors import DegenerateSteadyStateError, DimensionError, DivergenceError, ValidationError

HBAR = 0.658211951  # eV fs

DEFAULT_RESOLUTION = 10  # steps per fs


@dataclass(frozen=True, eq=False)
class LindbladModel:
    H: Operator
    c_ops: tuple[Operator, ...] = ()
    hbar: float = HBAR

    def __post_init__(self):
        object.__setattr__(self, "c_ops", tuple(self.c_ops))
        for op in self.c_ops:
            if op.space != self.H.space:
                raise DimensionError(f"collapse operator on {op.space}, Hamiltonian on {self.H.space}")
        if not self.H.is_hermitian(HERMITIAN_TOL):
            raise ValidationError("Hamiltonian is not hermitian")
        if self.hbar <= 0:
            raise ValidationError("hbar must be positive")

    @property
    def dim(self) -> int:
        return self.H.dim

    @cached_property
    def _generator(self):
        # rhs = -i(K rho - rho K^dag) + sum L rho L^dag, K = H/hbar - (i/2) sum L^dag L
        d = self.dim
        k = self.H.data / self.hbar
        jumps = [op.data for op in self.c_ops if np.any(op.data)]
        if jumps:
            k = k - 0.5j * sum(L.conj().T @ L for L in jumps)
        ls = np.array(jumps).reshape(-1, d, d)
        return np.ascontiguousarray(k), ls, ls.conj().transpose(0, 2, 1)


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValidationError(f"t_end {self.t_end} precedes t_start {self.t_start}")
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValidationError(f"resolution must be a positive integer, got {self.resolution}")

    @property
    def step(self) -> float:
        return 1.0 / self.resolution

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) * self.resolution))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_steps + 1) * self.step


def steps_for(duration: float, resolution: int) -> int:
    """Number of fixed steps covering ``duration`` fs."""
    if duration < 0:
        raise ValidationError(f"negative duration {duration}")
    return int(round(duration * resolution))


def _matrix(rho) -> np.ndarray:
    return rho.data if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)


def _rhs(k: np.ndarray, ls: np.ndarray, lds: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # works on a single matrix or a stack (..., d, d)
    out = -1j * (k @ rho - rho @ k.conj().T)
    for L, Ld in zip(ls, lds):
        out += L @ rho @ Ld
    return out


def _adjoint_rhs(k: np.ndarray, ls: np.ndarray, lds: np.ndarray, obs: np.ndarray) -> np.ndarray:
    # dual generator under the pairing Tr(O rho)
    out = 1j * (k.conj().T @ obs - obs @ k)
    for L, Ld in zip(ls, lds):
        out += Ld @ obs @ L
    return out


def lindblad_rhs(model: LindbladModel, rho) -> np.ndarray:
    """d(rho)/dt for the Lindblad master equation, rates absorbed in c_ops."""
    data = _matrix(rho)
    if isinstance(rho, Operator) and rho.space != model.H.space:
        raise DimensionError(f"state on {rho.space}, model on {model.H.space}")
    if data.shape[-2:] != (model.dim, model.dim):
        raise DimensionError(f"state shape {data.shape} does not match model dimension {model.dim}")
    return _rhs(*model._generator, data)


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(model: LindbladModel, rho0, grid: TimeGrid, record: bool = False):
    """Classical fixed-step RK4 integration of the master equation.

    Non-hermitian inputs (single Liouville pathways) are accepted. Returns
    ``(final, trajectory)``; ``trajectory`` is None unless ``record`` is set,
    in which case it holds the matrix at every step including the start.
    """
    y = np.array(_matrix(rho0), dtype=complex)
    if y.shape != (model.dim, model.dim):
        raise DimensionError(f"state shape {y.shape} does not match model dimension {model.dim}")
    k, ls, lds = model._generator
    f = lambda r: _rhs(k, ls, lds, r)  # noqa: E731
    h = grid.step
    n = grid.n_steps
    traj = np.empty((n + 1,) + y.shape, dtype=complex) if record else None
    if record:
        traj[0] = y
    for i in range(n):
        with np.errstate(over="ignore", invalid="ignore"):  # reported below as DivergenceError
            y = _rk4_step(f, y, h)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite density matrix at step {i + 1} of {n}", step=i + 1)
        if record:
            traj[i + 1] = y
    return y, traj


def liouvillian(model: LindbladModel) -> np.ndarray:
    """The d^2 x d^2 generator acting on column-stacked density matrices.

    vec(A rho B) = (B^T kron A) vec(rho) with vec stacking columns.
    """
    d = model.dim
    eye = np.eye(d)
    k, ls, lds = model._generator
    sup = -1j * (np.kron(eye, k) - np.kron(k.conj(), eye))
    for L in ls:
        sup += np.kron(L.conj(), L)
    return sup


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def steady_state(model: LindbladModel, *, relax: bool = False, null_tol: float = 1e-9,
                 relax_time: float = 5000.0, resolution: int = DEFAULT_RESOLUTION) -> DensityMatrix:
    """Unique stationary state of the master equation.

    The kernel of the vectorised Liouvillian is found by SVD. Singular values
    below ``null_tol`` times the largest count toward the kernel; anything but
    exactly one such vector raises :class:`DegenerateSteadyStateError`.
    With ``relax`` the state is instead obtained by evolving the maximally
    mixed state for ``relax_time`` fs.
    """
    if not model.c_ops:
        raise ValidationError("steady state needs at least one collapse operator")
    d = model.dim
    if relax:
        rho = np.eye(d, dtype=complex) / d
        rho, _ = propagate(model, rho, TimeGrid(0.0, relax_time, resolution))
    else:
        sup = liouvillian(model)
        _, s, vh = np.linalg.svd(sup)
        kernel = int(np.count_nonzero(s <= null_tol * max(s[0], 1.0)))
        if kernel != 1:
            raise DegenerateSteadyStateError(kernel)
        rho = unvec(vh[-1].conj(), d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, model.H.space)


def asymptotic_state(model: LindbladModel, rho0, *, null_tol: float = 1e-9) -> DensityMatrix:
    """Long-time limit of the evolution started from ``rho0``.

    Projects vec(rho0) onto the kernel of the Liouvillian along its range,
    P = R (L^dag R)^-1 L^dag with R and L the right and left null vectors.
    Unlike :func:`steady_state` this is well defined when the kernel is
    degenerate (conserved quantities); the zero eigenvalue of a Lindblad
    generator is semisimple, so P is the spectral projector.
    """
    d = model.dim
    u, s, vh = np.linalg.svd(liouvillian(model))
    k = int(np.count_nonzero(s <= null_tol * max(s[0], 1.0)))
    if k == 0:
        raise DegenerateSteadyStateError(0)
    right = vh[-k:].conj().T
    left = u[:, -k:]
    coeff = np.linalg.solve(left.conj().T @ right, left.conj().T @ vec(_matrix(rho0)))
    rho = unvec(right @ coeff, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, model.H.space)


class Propagator:
    """Repeated fixed-step RK4 maps for a fixed model and resolution.

    For a time-independent generator the classical RK4 step is the polynomial
    T = 1 + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24. Small systems use T as an
    explicit superoperator matrix; larger ones apply the four RK4 stages to
    stacks of matrices. Both act on stacks of shape (n, d, d) and both have an
    adjoint (Heisenberg) counterpart under the pairing Tr(O rho).
    """

    SUPEROPERATOR_MAX_DIM = 48

    def __init__(self, model: LindbladModel, resolution: int = DEFAULT_RESOLUTION,
                 backend: str | None = None):
        if int(resolution) != resolution or resolution < 1:
            raise ValidationError(f"resolution must be a positive integer, got {resolution}")
        self.model = model
        self.resolution = int(resolution)
        self.h = 1.0 / self.resolution
        self.d = model.dim
        if backend is None:
            backend = "superoperator" if self.d <= self.SUPEROPERATOR_MAX_DIM else "matrix"
        if backend not in ("superoperator", "matrix"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self._powers: dict[int, np.ndarray] = {}

    @cached_property
    def step_matrix(self) -> np.ndarray:
        hl = self.h * liouvillian(self.model)
        eye = np.eye(hl.shape[0], dtype=complex)
        t = eye + hl / 4.0
        t = eye + (hl / 3.0) @ t
        t = eye + (hl / 2.0) @ t
        return eye + hl @ t

    # stacks (n, d, d) <-> column blocks (d^2, n), column-stacking per matrix
    def _to_cols(self, stack):
        n = stack.shape[0]
        return np.ascontiguousarray(stack.transpose(2, 1, 0).reshape(self.d * self.d, n))

    def _from_cols(self, cols):
        n = cols.shape[1]
        return np.ascontiguousarray(cols.reshape(self.d, self.d, n).transpose(2, 1, 0))

    def power(self, n: int) -> np.ndarray:
        """T^n as a superoperator matrix (binary powering, cached)."""
        if n not in self._powers:
            self._powers[n] = np.linalg.matrix_power(self.step_matrix, n)
        return self._powers[n]

    def _check(self, arr, n_steps):
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(f"non-finite branch after {n_steps} steps", step=n_steps)

    def forward(self, stack, n_steps: int, *, adjoint: bool = False, use_power: bool | None = None):
        """Apply ``n_steps`` steps to every matrix in ``stack`` (shape (n, d, d))."""
        stack = np.asarray(stack, dtype=complex)
        single = stack.ndim == 2
        if single:
            stack = stack[None]
        if n_steps == 0:
            out = stack.copy()
        elif self.backend == "superoperator":
            if use_power is None:
                # binary powering pays off once the batch is wide
                use_power = stack.shape[0] * n_steps > 4 * self.d * self.d * max(1, math.log2(n_steps))
            t = self.power(n_steps) if use_power else self.step_matrix
            if adjoint:
                # Tr(O rho) = vec(O^T) . vec(rho): evolve vec(O^T) with T^T
                t = t.T
                stack = stack.transpose(0, 2, 1)
            cols = self._to_cols(stack)
            if use_power:
                cols = t @ cols
            else:
                for _ in range(n_steps):
                    cols = t @ cols
            out = self._from_cols(cols)
            if adjoint:
                out = np.ascontiguousarray(out.transpose(0, 2, 1))
        else:
            k, ls, lds = self.model._generator
            rhs = _adjoint_rhs if adjoint else _rhs
            f = lambda r: rhs(k, ls, lds, r)  # noqa: E731
            out = stack
            for _ in range(n_steps):
                out = _rk4_step(f, out, self.h)
        self._check(out, n_steps)
        return out[0] if single else out

    def trajectory(self, rho, n_steps: int, *, adjoint: bool = False) -> np.ndarray:
        """States after 0, 1, ..., n_steps steps, shape (n_steps + 1, d, d)."""
        rho = np.asarray(rho, dtype=complex)
        out = np.empty((n_steps + 1, self.d, self.d), dtype=complex)
        out[0] = rho
        if self.backend == "superoperator":
            t = self.step_matrix.T if adjoint else self.step_matrix
            v = vec(rho.T if adjoint else rho)
            for i in range(n_steps):
                v = t @ v
                m = unvec(v, self.d)
                out[i + 1] = m.T if adjoint else m
        else:
            k, ls, lds = self.model._generator
            rhs = _adjoint_rhs if adjoint else _rhs
            f = lambda r: rhs(k, ls, lds, r)  # noqa: E731
            y = rho
            for i in range(n_steps):
                y = _rk4_step(f, y, self.h)
                out[i + 1] = y
        self._check(out[-1], n_steps)
        return out


def write_trajectory_csv(path, times: Sequence[float], states: np.ndarray,
                         elements: Sequence[tuple[int, int]]) -> None:
    """One row per step: t_fs, then re,im of each selected element."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t_fs"]
        for i, j in elements:
            header += [f"re_{i}_{j}", f"im_{i}_{j}"]
        w.writerow(header)
        for t, rho in zip(times, states):
            row = [repr(float(t))]
            for i, j in elements:
                z = rho[i, j]
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)
