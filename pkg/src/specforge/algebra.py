"""Dense operator algebra on finite tensor-product Fock spaces.

Everything here is immutable: the arrays held by :class:`Operator`,
:class:`DensityMatrix` and :class:`EigenbasisTransform` are read-only copies,
so instances can be shared freely between threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, FormatError, ValidationError

HERMITIAN_TOL = 1e-10


def _frozen(data, dtype=complex) -> np.ndarray:
    arr = np.array(data, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SpaceSignature:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a space needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.dims)


def _as_space(space) -> SpaceSignature:
    if isinstance(space, SpaceSignature):
        return space
    if isinstance(space, int):
        return SpaceSignature((space,))
    return SpaceSignature(tuple(space))


class Operator:
    """A square complex matrix tagged with the tensor space it acts on."""

    __slots__ = ("space", "data")

    def __init__(self, data, space=None):
        arr = _frozen(data)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"operator data must be square, got shape {arr.shape}")
        space = _as_space(space if space is not None else arr.shape[0])
        if space.total_dim != arr.shape[0]:
            raise DimensionError(
                f"space {space} has dimension {space.total_dim} but matrix side is {arr.shape[0]}"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def __repr__(self) -> str:
        return f"Operator(space={self.space}, data=\n{self.data!r})"

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.space)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise DimensionError(f"space mismatch: {self.space} vs {other.space}")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data + other.data, self.space)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data - other.data, self.space)
        return NotImplemented

    def __neg__(self):
        return Operator(-self.data, self.space)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, complex, np.number)):
            return Operator(self.data * scalar, self.space)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.data / scalar, self.space)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data @ other.data, self.space)
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.data, other.data)

    __hash__ = None


class DensityMatrix(Operator):
    """A physical density matrix: hermitian, unit trace, positive semidefinite.

    Perturbative diagram branches are *not* density matrices in this sense and
    are carried around as plain arrays instead.
    """

    __slots__ = ()

    def __init__(self, data, space=None, *, check: bool = True):
        super().__init__(data, space)
        if check:
            self.validate()

    def validate(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10, eig_tol: float = 1e-10):
        d = self.data
        herm = np.max(np.abs(d - d.conj().T), initial=0.0)
        if herm > herm_tol:
            raise ValidationError(f"density matrix is not hermitian (defect {herm:.3e})")
        tr = np.trace(d)
        if abs(tr - 1.0) > trace_tol:
            raise ValidationError(f"density matrix trace is {tr:.12g}, expected 1")
        low = np.linalg.eigvalsh(0.5 * (d + d.conj().T)).min()
        if low < -eig_tol:
            raise ValidationError(f"density matrix has negative eigenvalue {low:.3e}")


@dataclass(frozen=True, eq=False)
class EigenbasisTransform:
    """Eigenvalues (ascending) and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    unitary: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues, float))
        object.__setattr__(self, "unitary", _frozen(self.unitary))

    def to_eigenbasis(self, op: Operator) -> Operator:
        u = self.unitary
        return Operator(u.conj().T @ op.data @ u, op.space)

    def from_eigenbasis(self, op: Operator) -> Operator:
        u = self.unitary
        return Operator(u @ op.data @ u.conj().T, op.space)


# -- constructors -----------------------------------------------------------


def identity(dims) -> Operator:
    space = _as_space(dims)
    return Operator(np.eye(space.total_dim), space)


def zeros(dims) -> Operator:
    space = _as_space(dims)
    return Operator(np.zeros((space.total_dim, space.total_dim)), space)


def destroy(n: int) -> Operator:
    """Truncated bosonic lowering operator on ``n`` levels."""
    if n < 2:
        raise DimensionError(f"destroy needs at least 2 levels, got {n}")
    return Operator(np.diag(np.sqrt(np.arange(1, n)), k=1), n)


def create(n: int) -> Operator:
    return destroy(n).dag()


def number(n: int) -> Operator:
    return Operator(np.diag(np.arange(n, dtype=float)), n)


def spin_ops(n_spins: int) -> tuple[Operator, Operator, Operator]:
    """Collective angular-momentum matrices for total spin S = n_spins / 2.

    The basis is ordered by descending S_z, so Sz = diag(S, S-1, ..., -S).
    """
    if n_spins < 1:
        raise DimensionError(f"need at least one spin, got {n_spins}")
    s = n_spins / 2.0
    m = s - np.arange(n_spins + 1)
    # <m+1| S+ |m> = sqrt(s(s+1) - m(m+1)), superdiagonal in this ordering
    raise_amp = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(raise_amp, k=1)
    sminus = splus.T
    sx = 0.5 * (splus + sminus)
    sy = -0.5j * (splus - sminus)
    sz = np.diag(m)
    dim = n_spins + 1
    return Operator(sx, dim), Operator(sy, dim), Operator(sz, dim)


def sigma_x() -> Operator:
    return Operator([[0, 1], [1, 0]])


def sigma_y() -> Operator:
    return Operator([[0, -1j], [1j, 0]])


def sigma_z() -> Operator:
    return Operator([[1, 0], [0, -1]])


def tensor(ops: Sequence[Operator]) -> Operator:
    """Kronecker product in list order."""
    ops = list(ops)
    if not ops:
        raise ValueError("tensor needs at least one operator")
    data = reduce(np.kron, (op.data for op in ops))
    dims = tuple(d for op in ops for d in op.space.dims)
    return Operator(data, SpaceSignature(dims))


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def projector(dims, index: int) -> Operator:
    space = _as_space(dims)
    data = np.zeros((space.total_dim, space.total_dim))
    data[index, index] = 1.0
    return Operator(data, space)


# -- eigenbasis -------------------------------------------------------------


def _fix_phases(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size:
            first = col[nz[0]]
            vecs[:, k] = col * (abs(first) / first)
    return vecs


def diagonalize(H: Operator, ops: Iterable[Operator] = ()) -> tuple[EigenbasisTransform, list[Operator]]:
    """Diagonalize ``H`` and map each operator in ``ops`` into its eigenbasis.

    Eigenvalues come out ascending. Each eigenvector is rephased so that its
    first non-negligible component is real and positive, which keeps the
    raising/lowering split of the dipole reproducible between runs.
    """
    if not H.is_hermitian(HERMITIAN_TOL):
        raise ValidationError("Hamiltonian is not hermitian")
    herm = 0.5 * (H.data + H.data.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    basis = EigenbasisTransform(evals, _fix_phases(evecs))
    out = []
    for op in ops:
        if op.space != H.space:
            raise DimensionError(f"space mismatch: {op.space} vs {H.space}")
        out.append(basis.to_eigenbasis(op))
    return basis, out


def split_dipole(mu: Operator, basis: EigenbasisTransform | None = None) -> tuple[Operator, Operator]:
    """Split an eigenbasis dipole into energy-raising and energy-lowering parts.

    ``mu`` must already be expressed in the ascending-energy eigenbasis. The
    raising part keeps ``<i|mu|j>`` for i > j (strictly lower triangle), the
    lowering part the strictly upper triangle. Diagonal (permanent) dipole
    elements drive no transitions and are dropped from both.
    """
    if basis is not None and len(basis.eigenvalues) != mu.dim:
        raise DimensionError("basis and dipole dimensions differ")
    plus = np.tril(mu.data, k=-1)
    minus = np.triu(mu.data, k=1)
    return Operator(plus, mu.space), Operator(minus, mu.space)


def expectation(A: Operator, rho) -> complex:
    """Tr(A rho). ``rho`` may be an Operator or a bare array."""
    data = rho.data if isinstance(rho, Operator) else np.asarray(rho)
    if isinstance(rho, Operator) and rho.space != A.space:
        raise DimensionError(f"space mismatch: {A.space} vs {rho.space}")
    if data.shape != A.data.shape:
        raise DimensionError(f"shape mismatch: {A.data.shape} vs {data.shape}")
    # Tr(AB) without forming the product
    return complex(np.sum(A.data.T * data))


# -- matrix text format -----------------------------------------------------

_COMPLEX_RE = re.compile(r"\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)|([^\s()]+)")


def parse_matrix_text(text: str) -> Operator:
    """Read the plain-text matrix format.

    Line 1 is ``dims d1 d2 ...``; then one row per line, entries either
    ``(re,im)`` or a bare real.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise FormatError("empty matrix file")
    head = lines[0].split()
    if not head or head[0] != "dims" or len(head) < 2:
        raise FormatError("first line must be 'dims d1 d2 ...'")
    try:
        space = SpaceSignature(tuple(int(x) for x in head[1:]))
    except ValueError as exc:
        raise FormatError(f"bad dims line: {lines[0]!r}") from exc
    n = space.total_dim
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"expected {n} matrix rows, found {len(rows)}")
    data = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        entries = []
        for m in _COMPLEX_RE.finditer(row):
            try:
                if m.group(3) is not None:
                    entries.append(complex(float(m.group(3)), 0.0))
                else:
                    entries.append(complex(float(m.group(1)), float(m.group(2))))
            except ValueError as exc:
                raise FormatError(f"row {i + 1}: cannot parse entry {m.group(0)!r}") from exc
        if len(entries) != n:
            raise FormatError(f"row {i + 1}: expected {n} entries, found {len(entries)}")
        data[i] = entries
    return Operator(data, space)


def format_matrix_text(op: Operator) -> str:
    lines = ["dims " + " ".join(str(d) for d in op.space.dims)]
    for row in op.data:
        lines.append(" ".join(f"({float(z.real)!r},{float(z.imag)!r})" for z in row))
    return "\n".join(lines) + "\n"
