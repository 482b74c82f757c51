import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obscoherence.basis import (DisplacedObservable, diagonal_residual, displace_observable, fourier_matrix,
                                fourier_mub_basis, is_nontrivial, preferred_basis, zero_diagonal_basis)
from obscoherence.linalg import ValidationError, hermitian_eig
from obscoherence.models import SIGMA_X, SIGMA_Z, random_observable


def test_displace_examples():
    triv = displace_observable(np.eye(3))
    assert np.all(triv.m_prime == 0) and triv.normalization_nm == 0
    z = displace_observable(SIGMA_Z)
    assert np.allclose(z.m_prime, SIGMA_Z) and z.displacement == 0 and z.normalization_nm == pytest.approx(1)
    d = displace_observable(np.diag([5.0, 1.0]))
    assert np.allclose(d.m_prime, np.diag([2, -2])) and d.displacement == 3 and d.normalization_nm == pytest.approx(2)
    with pytest.raises(ValidationError):
        displace_observable(np.array([[0, 1], [0, 0]]))


def test_is_nontrivial():
    assert not is_nontrivial(np.eye(4))
    assert is_nontrivial(SIGMA_X)
    assert not is_nontrivial(3.7 * np.eye(4))


@given(st.integers(1, 10), st.integers(0, 10_000), st.floats(-5, 5))
def test_displaced_invariants(d, seed, shift):
    m = random_observable(d, seed) + shift * np.eye(d)
    disp = displace_observable(m)
    assert abs(np.trace(disp.m_prime)) <= 1e-10 * d * (1 + np.max(np.abs(m)))
    assert disp.normalization_nm >= 0
    assert (disp.normalization_nm > 0) == is_nontrivial(m)


def test_schur_horn_sigma_z():
    u = zero_diagonal_basis(displace_observable(SIGMA_Z))
    assert diagonal_residual(u.transform(SIGMA_Z)) <= 1e-10
    assert u.rotations == 1


def test_schur_horn_already_zero_diagonal():
    u = zero_diagonal_basis(displace_observable(SIGMA_X))
    assert np.array_equal(u.unitary, np.eye(2)) and u.rotations == 0


def test_schur_horn_gue_five():
    m = random_observable(5, 11, traceless=True)
    u = zero_diagonal_basis(displace_observable(m))
    assert diagonal_residual(u.transform(m)) <= 1e-10
    assert u.rotations <= 4


@given(st.integers(2, 16), st.integers(0, 10_000))
def test_schur_horn_property(d, seed):
    m = random_observable(d, seed, traceless=True)
    u = zero_diagonal_basis(displace_observable(m))
    assert diagonal_residual(u.transform(m)) <= 1e-10 * (1 + np.max(np.abs(m)))
    assert u.unitarity_residual() <= 1e-12
    assert u.rotations <= d - 1


def test_schur_horn_degenerate_diagonal():
    # ties and entries already zero
    m = np.diag([1.0, 1.0, 0.0, -1.0, -1.0])
    u = zero_diagonal_basis(displace_observable(m))
    assert diagonal_residual(u.transform(m)) <= 1e-12
    assert u.rotations <= 4


def test_schur_horn_requires_traceless():
    bad = DisplacedObservable(np.diag([1.0, 0.0]), 0.0, 0.0)
    with pytest.raises(ValidationError, match="traceless"):
        zero_diagonal_basis(bad)


def test_fourier_sigma_z():
    u = fourier_mub_basis(hermitian_eig(SIGMA_Z)).unitary
    assert np.allclose(np.abs(u) ** 2, 0.5)
    plus, minus = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    found = sorted(round(abs(np.vdot(v, u[:, i])), 12) for v in (plus, minus) for i in range(2))
    assert found == [0.0, 0.0, 1.0, 1.0]


def test_fourier_matrix_unitary():
    f = fourier_matrix(7)
    assert np.max(np.abs(f.conj().T @ f - np.eye(7))) <= 1e-12


def test_fourier_diagonal_d3():
    eig = hermitian_eig(np.diag([1.0, 2.0, 4.0]))
    u = fourier_mub_basis(eig).unitary
    assert np.max(np.abs(np.abs(eig.eigenvectors.conj().T @ u) ** 2 - 1 / 3)) <= 1e-15


@given(st.integers(2, 8), st.integers(0, 10_000))
def test_fourier_mub_property(d, seed):
    m = random_observable(d, seed)
    eig = hermitian_eig(m)
    u = fourier_mub_basis(eig).unitary
    assert np.max(np.abs(np.abs(eig.eigenvectors.conj().T @ u) ** 2 - 1 / d)) <= 1e-10
    diag = np.diag(u.conj().T @ m @ u).real
    assert np.max(np.abs(diag - np.trace(m).real / d)) <= 1e-10 * (1 + np.max(np.abs(m)))


def test_preferred_basis_dispatch():
    m = random_observable(4, 2)
    for method in ("schur_horn", "fourier_mub"):
        u = preferred_basis(m, method)
        mp = displace_observable(m).m_prime
        assert diagonal_residual(u.transform(mp)) <= 1e-10
    with pytest.raises(ValueError):
        preferred_basis(m, "random")
