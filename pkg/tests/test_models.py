import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obscoherence.coherence import l1_norm, normalization_nm, robustness
from obscoherence.linalg import ValidationError, is_density_matrix
from obscoherence.models import (MAX_SITES, SIGMA_X, max_coherent_state, parse_model, product_theta_state,
                                 random_observable, random_pure_state, random_state, spin_x, superradiant_op,
                                 w_mixture, w_state)


def test_spin_x_single_site():
    assert np.allclose(spin_x(1), SIGMA_X / 2)
    assert np.allclose(np.linalg.eigvalsh(spin_x(1)), [-0.5, 0.5])


def test_spin_x_three_sites():
    w = np.linalg.eigvalsh(spin_x(3))
    assert w[0] == pytest.approx(-1.5) and w[-1] == pytest.approx(1.5)
    assert normalization_nm(spin_x(3)) == pytest.approx(1.5)


@pytest.mark.parametrize("n", range(1, 7))
def test_spin_x_structure(n):
    s = spin_x(n)
    assert np.all(np.diag(s) == 0)
    assert abs(np.trace(s)) == 0
    assert normalization_nm(s) == pytest.approx(n / 2)


def test_site_budget():
    with pytest.raises(ValidationError, match="budget"):
        spin_x(MAX_SITES + 1)
    with pytest.raises(ValidationError):
        superradiant_op(1)


def test_superradiant_two_sites():
    s = superradiant_op(2)
    # only |01> <-> |10> is coupled
    expected = np.zeros((4, 4))
    expected[1, 2] = expected[2, 1] = 1
    assert np.array_equal(s.real, expected) and np.all(s.imag == 0)
    assert np.allclose(np.linalg.eigvalsh(s[1:3, 1:3]), [-1, 1])


def test_superradiant_w_expectation():
    w = w_state(3)
    assert np.vdot(w, superradiant_op(3) @ w).real == pytest.approx(2)
    vals = np.linalg.eigvalsh(superradiant_op(3))
    assert vals[0] == pytest.approx(-1) and vals[-1] == pytest.approx(2)


@pytest.mark.parametrize("n", range(2, 6))
def test_superradiant_structure(n):
    s = superradiant_op(n)
    assert np.max(np.abs(s - s.conj().T)) == 0
    assert np.all(np.diag(s) == 0)


def test_w_state_labels():
    # site 1 slowest: |001>, |010>, |100> are indices 1, 2, 4
    assert np.flatnonzero(w_state(3)).tolist() == [1, 2, 4]


def test_w_mixture_endpoints():
    assert np.allclose(w_mixture(0), np.eye(8) / 8)
    assert l1_norm(w_mixture(1)) == pytest.approx(2 / 7, abs=1e-15)
    with pytest.raises(ValidationError):
        w_mixture(1.2)


@pytest.mark.parametrize("p", np.linspace(0, 1, 21))
def test_w_mixture_grid(p):
    rho = w_mixture(p)
    assert np.linalg.eigvalsh(rho)[0] >= -1e-12
    w = w_state(3)
    off = ~np.eye(8, dtype=bool)
    support = np.abs(np.outer(w, w)) > 0
    if p > 0:
        assert np.array_equal((np.abs(rho) > 0) & off, support & off)
    # brute-force sum of off-diagonal moduli
    total = sum(abs(rho[i, j]) for i in range(8) for j in range(8) if i != j)
    assert total == pytest.approx(2 * p / 7, abs=1e-15)


def test_product_state_examples():
    rho = product_theta_state(0.0)
    assert rho[0, 0] == 1 and l1_norm(rho) == 0
    assert l1_norm(product_theta_state(math.pi / 4)) == pytest.approx(7, abs=1e-12)
    assert product_theta_state(0.3, 3, 2).shape == (32, 32)


@given(st.floats(0, math.pi / 2), st.integers(1, 3), st.integers(0, 2))
def test_product_state_pure(theta, na, npad):
    rho = product_theta_state(theta, na, npad)
    assert abs(np.trace(rho @ rho).real - 1) <= 1e-12
    assert l1_norm(rho) == pytest.approx((1 + math.sin(2 * theta)) ** na - 1, abs=1e-10)


def test_max_coherent():
    assert np.allclose(max_coherent_state(2), np.full((2, 2), 0.5))
    for d in (2, 3, 5):
        rho = max_coherent_state(d)
        assert l1_norm(rho) == pytest.approx(d - 1)
        assert robustness(rho) == pytest.approx(d - 1, abs=1e-6)
    with pytest.raises(ValidationError):
        max_coherent_state(1)


@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_random_generators(d, seed):
    assert is_density_matrix(random_state(d, seed))
    m = random_observable(d, seed)
    assert np.max(np.abs(m - m.conj().T)) <= 1e-14
    assert np.array_equal(random_state(d, seed), random_state(d, seed))
    assert np.array_equal(random_observable(d, seed), random_observable(d, seed))
    assert abs(np.trace(random_observable(d, seed, traceless=True))) <= 1e-12
    z = random_observable(d, seed, zero_diagonal=True)
    assert np.max(np.abs(np.diag(z) - np.trace(z).real / d)) <= 1e-12


@given(st.integers(0, 10_000))
def test_l1_multiplicativity(seed):
    a, b = random_state(2, seed), random_state(3, seed + 1)
    lhs = l1_norm(np.kron(a, b))
    assert abs(lhs - ((1 + l1_norm(a)) * (1 + l1_norm(b)) - 1)) <= 1e-10


def test_random_pure_state_rank():
    rho = random_pure_state(4, 1)
    assert abs(np.trace(rho @ rho).real - 1) <= 1e-12


def test_parse_model():
    kind, name, m = parse_model("spin_x:3")
    assert (kind, name) == ("observable", "spin_x") and m.shape == (8, 8)
    assert parse_model("w_mixture:0.5")[0] == "state"
    assert parse_model("product:0.785,2,1")[2].shape == (8, 8)
    assert parse_model("max_coherent:4")[2].shape == (4, 4)
    assert parse_model("superradiance:2")[0] == "observable"
    for bad in ("spin_x", "spin_x:", "spin_x:a", "w_mixture:2", "foo:1"):
        with pytest.raises(ValidationError):
            parse_model(bad)
