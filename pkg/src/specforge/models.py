"""Built-in model systems: two-level, coupled oscillators, Dicke cavity."""

from __future__ import annotations

import math
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .algebra import DensityMatrix, Operator, destroy, identity, parse_matrix_text, spin_ops, tensor
from .dynamics import HBAR
from .errors import DimensionError, ValidationError
from .response import QuantumSystem


def _rate(name: str, value: float) -> float:
    value = float(value)
    if value < 0 or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite nonnegative rate, got {value}")
    return value


def thermal_ops(a: Operator, gamma: float, n_th: float) -> list[Operator]:
    """Relaxation toward a thermal occupation n_th at rate gamma (1/fs)."""
    gamma, n_th = _rate("gamma", gamma), _rate("n_th", n_th)
    ops = []
    if gamma > 0:
        ops.append(a * math.sqrt(gamma * (n_th + 1)))
        if n_th > 0:
            ops.append(a.dag() * math.sqrt(gamma * n_th))
    return ops


def build_two_level(E: float = 2.0, mu: float = 1.0, *, decay: float = 0.0,
                    dephasing: float = 0.0, hbar: float = HBAR) -> QuantumSystem:
    """Ground |0> at 0, excited |1> at E eV.

    ``decay`` is the population relaxation rate and ``dephasing`` the
    coherence dephasing rate (L = sqrt(dephasing/2) sigma_z), both in 1/fs.
    """
    H = Operator(np.diag([0.0, float(E)]))
    sm = destroy(2)
    sz = Operator(np.diag([-1.0, 1.0]))
    c_ops = []
    if _rate("decay", decay) > 0:
        c_ops.append(sm * math.sqrt(decay))
    if _rate("dephasing", dephasing) > 0:
        c_ops.append(sz * math.sqrt(dephasing / 2))
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    return QuantumSystem.build(H, lowering=sm * float(mu), c_ops=c_ops, rho=rho, hbar=hbar)


def coupled_oscillator_hamiltonian(w1: float, w2: float, J: float, n_levels: int = 2):
    if n_levels < 2:
        raise DimensionError(f"each oscillator needs at least 2 levels, got {n_levels}")
    a = tensor([destroy(n_levels), identity(n_levels)])
    b = tensor([identity(n_levels), destroy(n_levels)])
    H = a.dag() @ a * w1 + b.dag() @ b * w2 + (a.dag() @ b + b.dag() @ a) * J
    return H, a, b


def build_coupled_oscillators(w1: float = 2.0, w2: float = 2.0, J: float = 0.1, mu_a: float = 1.0,
                              mu_b: float = 0.0, *, n_levels: int = 2, gamma: float = 0.05,
                              n_th: float = 0.0, diagonalize: bool = True,
                              hbar: float = HBAR) -> QuantumSystem:
    """Two exchange-coupled oscillators, energies in eV.

    H = w1 a^dag a + w2 b^dag b + J (a^dag b + b^dag a) and
    mu = mu_a (a + a^dag) + mu_b (b + b^dag). Each oscillator relaxes to a
    thermal occupation n_th at rate gamma. The interaction ladder is the
    energy-ordered split of mu in the eigenbasis.
    """
    H, a, b = coupled_oscillator_hamiltonian(w1, w2, J, int(n_levels))
    mu = (a + a.dag()) * float(mu_a) + (b + b.dag()) * float(mu_b)
    c_ops = thermal_ops(a, gamma, n_th) + thermal_ops(b, gamma, n_th)
    return QuantumSystem.build(H, mu=mu, c_ops=c_ops, diagonalize_H=diagonalize, hbar=hbar)


def dicke_hamiltonian(omega_c: float, omega: float, g: float, n_spins: int, n_cav: int):
    if n_cav < 2:
        raise DimensionError(f"cavity needs at least 2 levels, got {n_cav}")
    if n_spins < 1:
        raise DimensionError(f"need at least one spin, got {n_spins}")
    sx, _, sz = spin_ops(n_spins)
    n_spin = sz.dim
    a = tensor([destroy(n_cav), identity(n_spin)])
    Sx = tensor([identity(n_cav), sx])
    Sz = tensor([identity(n_cav), sz])
    H = a.dag() @ a * omega_c + Sz * omega + (a + a.dag()) @ Sx * g
    return H, a, Sz


def critical_coupling(omega_c: float, omega: float) -> float:
    return math.sqrt(omega_c * omega) / 2


def build_dicke(omega_c: float = 1.0, omega: float = 1.0, g: float = 0.25, n_spins: int = 6,
                n_cav: int = 6, *, kappa: float = 0.05, n_th: float = 0.1, dephasing: float = 0.15,
                diagonalize: bool = True, hbar: float = HBAR) -> QuantumSystem:
    """Cavity mode (first factor) coupled to a collective spin S = N/2.

    H = omega_c a^dag a + omega S_z + g (a + a^dag) S_x in eV. Collapse
    operators sqrt(kappa (n_th+1)) a, sqrt(kappa n_th) a^dag and
    sqrt(dephasing) S_z. Probe pulses couple to the cavity: mu_minus = a.
    Starts from the steady state.
    """
    H, a, Sz = dicke_hamiltonian(float(omega_c), float(omega), float(g), int(n_spins), int(n_cav))
    c_ops = thermal_ops(a, kappa, n_th)
    if _rate("dephasing", dephasing) > 0:
        c_ops.append(Sz * math.sqrt(dephasing))
    if not c_ops:
        raise ValidationError("the Dicke model needs kappa > 0 or dephasing > 0 for a steady state")
    sys = QuantumSystem.build(H, lowering=a, c_ops=c_ops, diagonalize_H=diagonalize, hbar=hbar)
    n_op = a.dag() @ a
    if sys.basis is not None:
        n_op = sys.basis.to_eigenbasis(n_op)
    occupation = float(np.real(np.sum(n_op.data.T * sys.rho_init.data)))
    if occupation >= n_cav - 3:
        warnings.warn(
            f"steady-state cavity occupation {occupation:.3g} is within 2 levels of the {n_cav}-level cutoff",
            RuntimeWarning, stacklevel=2)
    return sys


def one_excitation_gap(omega_c: float = 1.0, omega: float = 1.0, g: float = 0.25,
                       n_spins: int = 6, n_cav: int = 6) -> tuple[float, float]:
    """(E_LP, E_UP) transition energies from the ground state, in eV.

    The two excited eigenstates with the largest cavity-absorption weight
    |<e|a^dag|g>|^2, which are the lower and upper polaritons.
    """
    H, a, _ = dicke_hamiltonian(omega_c, omega, g, n_spins, n_cav)
    evals, vecs = np.linalg.eigh(H.data)
    ground = vecs[:, 0]
    weights = np.abs(vecs.conj().T @ a.dag().data @ ground) ** 2
    top = sorted(np.argsort(weights)[-2:])
    return float(evals[top[0]] - evals[0]), float(evals[top[1]] - evals[0])


def _read_matrix(path) -> Operator:
    return parse_matrix_text(Path(path).read_text())


def build_custom(H, *, mu=None, lowering=None, c_ops: Sequence = (), rho=None,
                 diagonalize: bool = True, hbar: float = HBAR) -> QuantumSystem:
    """System from operators or matrix text files (paths)."""
    load = lambda x: _read_matrix(x) if isinstance(x, (str, Path)) else x
    rho_op = load(rho) if rho is not None else None
    return QuantumSystem.build(load(H), mu=load(mu) if mu is not None else None,
                               lowering=load(lowering) if lowering is not None else None,
                               c_ops=[load(c) for c in c_ops], rho=rho_op,
                               diagonalize_H=diagonalize, hbar=hbar)
