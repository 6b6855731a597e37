import numpy as np
import pytest
from hypothesis import given, strategies as st

from specforge.algebra import (DensityMatrix, Operator, SpaceSignature, commutator, create, destroy,
                               diagonalize, expectation, format_matrix_text, identity, number,
                               parse_matrix_text, projector, sigma_x, sigma_y, sigma_z, spin_ops,
                               split_dipole, tensor, zeros)
from specforge.errors import DimensionError, FormatError, ValidationError

from conftest import random_density, random_hermitian


def test_space_signature_product():
    assert SpaceSignature((2, 3, 2)).total_dim == 12
    with pytest.raises(DimensionError):
        SpaceSignature((2, 0))


def test_operator_is_immutable():
    op = destroy(3)
    with pytest.raises(AttributeError):
        op.data = np.eye(3)
    with pytest.raises(ValueError):
        op.data[0, 0] = 1.0


def test_operator_arithmetic_checks_spaces():
    with pytest.raises(DimensionError):
        destroy(2) + destroy(3)
    with pytest.raises(DimensionError):
        tensor([identity(2), identity(3)]) @ tensor([identity(3), identity(2)])


def test_destroy_small():
    assert np.array_equal(destroy(2).data, [[0, 1], [0, 0]])
    assert destroy(3).data[1, 2] == pytest.approx(np.sqrt(2))
    with pytest.raises(DimensionError):
        destroy(1)


def test_ladder_commutator_truncation_artifact():
    a = destroy(8)
    c = commutator(a, a.dag()).data
    expected = np.eye(8)
    expected[7, 7] = -7
    assert np.allclose(c, expected, atol=1e-12)


@pytest.mark.parametrize("n", range(2, 9))
def test_ladder_commutator_identity_block(n):
    c = commutator(destroy(n), create(n)).data
    assert np.allclose(c[: n - 1, : n - 1], np.eye(n - 1), atol=1e-12)


def test_number_operator():
    assert np.allclose(number(4).data, np.diag([0, 1, 2, 3]))


def test_spin_half_is_pauli_halves():
    sx, sy, sz = spin_ops(1)
    assert np.allclose(sx.data, sigma_x().data / 2)
    assert np.allclose(sy.data, sigma_y().data / 2)
    assert np.allclose(sz.data, sigma_z().data / 2)


def test_spin_one_sz():
    assert np.allclose(spin_ops(2)[2].data, np.diag([1, 0, -1]))


def test_spin_six_commutator():
    sx, sy, sz = spin_ops(6)
    assert np.max(np.abs(commutator(sx, sy).data - 1j * sz.data)) < 1e-12


@pytest.mark.parametrize("n", range(1, 11))
def test_spin_cyclic_commutators(n):
    sx, sy, sz = spin_ops(n)
    for a, b, c in ((sx, sy, sz), (sy, sz, sx), (sz, sx, sy)):
        assert np.max(np.abs(commutator(a, b).data - 1j * c.data)) < 1e-12


def test_spin_ops_rejects_zero():
    with pytest.raises(DimensionError):
        spin_ops(0)


def test_tensor_identity_and_dims():
    assert tensor([identity(2), identity(3)]) == identity((2, 3))
    op = tensor([identity(2), destroy(3), identity(2)])
    assert op.space.dims == (2, 3, 2) and op.space.total_dim == 12
    with pytest.raises(ValueError):
        tensor([])


def test_tensor_kronecker_block():
    # (a x 1)|1,j> = |0,j>: ones at rows 0,1 / cols 2,3
    d = tensor([destroy(2), identity(2)]).data
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[1, 3] = 1
    assert np.array_equal(d, expected)


@given(st.integers(0, 2**32 - 1))
def test_tensor_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (Operator(rng.normal(size=(n, n))) for n in (2, 3, 2))
    left = tensor([a, tensor([b, c])])
    right = tensor([tensor([a, b]), c])
    # regrouping a product of three floats can move the last bit
    assert np.allclose(left.data, right.data, rtol=1e-14, atol=0)


def test_diagonalize_fixed_point():
    H = Operator(np.diag([0.0, 1.0, 3.0]))
    mu = Operator(np.ones((3, 3)))
    basis, (mu2,) = diagonalize(H, [mu])
    assert np.allclose(basis.unitary, np.eye(3))
    assert np.allclose(mu2.data, mu.data)


def test_diagonalize_dimer_single_excitation():
    w, J = 2.0, 0.1
    basis, _ = diagonalize(Operator([[w, J], [J, w]]))
    assert np.allclose(basis.eigenvalues, [w - J, w + J], atol=1e-12)


def test_diagonalize_pauli():
    basis, _ = diagonalize(sigma_x())
    assert np.allclose(basis.eigenvalues, [-1, 1])


def test_diagonalize_rejects_nonhermitian():
    with pytest.raises(ValidationError):
        diagonalize(destroy(3))


@given(st.integers(0, 2**32 - 1), st.integers(2, 7))
def test_diagonalize_reconstructs(seed, n):
    H = random_hermitian(np.random.default_rng(seed), n)
    basis, _ = diagonalize(H)
    u = basis.unitary
    assert np.allclose(u.conj().T @ u, np.eye(n), atol=1e-10)
    assert np.allclose(u @ np.diag(basis.eigenvalues) @ u.conj().T, H.data, atol=1e-10)
    assert np.all(np.diff(basis.eigenvalues) >= 0)


def test_diagonalize_phase_convention(rng):
    basis, _ = diagonalize(random_hermitian(rng, 5))
    for col in basis.unitary.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_split_dipole_two_level():
    plus, minus = split_dipole(sigma_x())
    assert np.array_equal(plus.data, [[0, 0], [1, 0]])
    assert np.array_equal(minus.data, [[0, 1], [0, 0]])


def test_split_dipole_oscillator():
    a = destroy(3)
    plus, minus = split_dipole(a + a.dag())
    assert np.allclose(plus.data, a.dag().data)
    assert np.allclose(minus.data, a.data)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_split_dipole_partition(seed, n):
    mu = random_hermitian(np.random.default_rng(seed), n)
    plus, minus = split_dipole(mu)
    assert np.array_equal(plus.data + minus.data + np.diag(np.diag(mu.data)), mu.data)
    assert np.max(np.abs(plus.dag().data - minus.data)) < 1e-12


def test_expectation_examples():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    assert expectation(identity(2), rho) == pytest.approx(1)
    assert expectation(sigma_z(), rho) == pytest.approx(1)
    psi = np.array([1, 1]) / np.sqrt(2)
    a = destroy(2)
    assert expectation(a + a.dag(), DensityMatrix(np.outer(psi, psi))) == pytest.approx(1)
    with pytest.raises(DimensionError):
        expectation(identity(3), rho)


def test_expectation_matches_trace(rng):
    A = random_hermitian(rng, 4)
    rho = random_density(rng, 4)
    assert expectation(A, rho) == pytest.approx(np.trace(A.data @ rho))


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityMatrix([[0.5, 0.5], [0.0, 0.5]])
    DensityMatrix(projector(3, 1).data)


def test_zeros():
    assert not np.any(zeros((2, 2)).data)


def test_matrix_text_round_trip(rng):
    op = Operator(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)), (2, 3))
    back = parse_matrix_text(format_matrix_text(op))
    assert back == op and back.space.dims == (2, 3)


def test_matrix_text_bare_reals():
    op = parse_matrix_text("dims 2\n1.0 (0.5,-0.25)\n0 2\n")
    assert np.array_equal(op.data, [[1, 0.5 - 0.25j], [0, 2]])


@pytest.mark.parametrize("text", ["", "size 2\n1 0\n0 1", "dims 2\n1 0\n", "dims 2\n1 0\n0 x\n",
                                  "dims 2\n1 0 0\n0 1\n"])
def test_matrix_text_errors(text):
    with pytest.raises(FormatError):
        parse_matrix_text(text)
