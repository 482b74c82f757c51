import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import unitary
from obscoherence.channels import (ChoiChannel, KrausSet, apply_choi, channel_from_doc, channel_to_doc,
                                   completeness_residual, compose, dephasing_channel, dumps_channel,
                                   identity_channel, is_incoherent_kraus, is_mio_choi, kraus_to_choi,
                                   loads_channel, mio_residual, random_io_instrument, validate_cptp)
from obscoherence.linalg import MatrixParseError, ValidationError, partial_trace
from obscoherence.models import random_diagonal_state, random_state

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_identity_choi_is_maximally_entangled_projector():
    d = 3
    phi = np.eye(d).reshape(-1)  # Σ_i |i>|i>
    assert np.allclose(identity_channel(d).choi, np.outer(phi, phi))


def test_amplitude_damping_choi():
    ks = KrausSet([np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])])
    ch = kraus_to_choi(ks)
    assert np.allclose(partial_trace(ch.choi, [2, 2], keep=[1]), np.eye(2))
    for i in range(2):
        basis = np.zeros((2, 2))
        basis[i, i] = 1
        assert np.allclose(apply_choi(ch, basis), np.diag([1, 0]))


def test_incomplete_kraus_rejected():
    with pytest.raises(ValidationError, match="incomplete"):
        KrausSet([np.diag([1, 0])])
    with pytest.raises(ValidationError):
        KrausSet([np.eye(2), np.eye(3)])


def test_choi_convention_choi_block_is_image_of_unit():
    # J[(a,i),(a',j)] = Φ(|i><j|)[a, a']
    u = unitary(3, 4)
    ch = kraus_to_choi(KrausSet([u]))
    j4 = ch.choi.reshape(3, 3, 3, 3)
    for i in range(3):
        for j in range(3):
            unit = np.zeros((3, 3))
            unit[i, j] = 1
            assert np.allclose(j4[:, i, :, j], u @ unit @ u.conj().T)


@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_choi_matches_kraus_application(d, k, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(k * d, d)) + 1j * rng.normal(size=(k * d, d))
    q, _ = np.linalg.qr(g)  # isometry -> complete Kraus set
    ks = KrausSet([q[i * d:(i + 1) * d] for i in range(k)])
    rho = random_state(d, seed + 1)
    ch = kraus_to_choi(ks)
    assert np.max(np.abs(apply_choi(ch, rho) - ks.apply(rho))) <= 1e-10
    assert ch.is_cptp


def test_identity_and_dephasing_application():
    rho = random_state(3, 1)
    assert np.max(np.abs(apply_choi(identity_channel(3), rho) - rho)) <= 1e-12
    plus = np.full((2, 2), 0.5)
    assert np.allclose(apply_choi(dephasing_channel(2), plus), np.eye(2) / 2)


def test_apply_dim_mismatch():
    with pytest.raises(ValidationError, match="dim"):
        apply_choi(identity_channel(2), np.eye(3) / 3)


def test_validate_cptp():
    diag = validate_cptp(identity_channel(3))
    assert diag.is_cptp and diag.tp_residual <= 1e-12 and diag.psd_min_eig >= -1e-12
    scaled = ChoiChannel(1.1 * identity_channel(3).choi, 3)
    bad = validate_cptp(scaled)
    assert not bad.is_cptp
    assert bad.tp_residual == pytest.approx(0.1)
    assert not scaled.is_cptp


def test_is_mio():
    assert is_mio_choi(dephasing_channel(2))
    had = kraus_to_choi(KrausSet([HADAMARD]))
    assert not is_mio_choi(had)
    assert mio_residual(had) == pytest.approx(0.5)
    assert identity_channel(2).flags() == {"is_cptp": True, "is_mio": True, "is_io": True}
    assert kraus_to_choi(KrausSet([HADAMARD])).flags()["is_io"] == "unknown"


def test_random_instrument_single_branch_is_incoherent_unitary():
    u = random_io_instrument(2, 1, seed=3).operators[0]
    assert np.allclose(u.conj().T @ u, np.eye(2))
    assert np.count_nonzero(np.abs(u) > 1e-14) == 2
    assert is_incoherent_kraus([u])


def test_random_instrument_completeness_seed7():
    ks = random_io_instrument(3, 3, seed=7)
    assert completeness_residual(ks.operators) <= 1e-14


@given(st.integers(2, 5), st.integers(1, 5), st.integers(0, 10_000), st.sampled_from([0.0, 0.5]))
def test_random_instrument_properties(d, k, seed, sparsity):
    ks = random_io_instrument(d, k, seed, sparsity)
    assert is_incoherent_kraus(ks.operators)
    assert completeness_residual(ks.operators) <= 1e-12
    sigma = random_diagonal_state(d, seed)
    for op in ks.operators:
        out = op @ sigma @ op.conj().T
        assert np.max(np.abs(out - np.diag(np.diag(out)))) <= 1e-15
    assert kraus_to_choi(ks).is_mio
    # determinism
    again = random_io_instrument(d, k, seed, sparsity)
    assert all(np.array_equal(a, b) for a, b in zip(ks.operators, again.operators))


@given(st.integers(0, 10_000))
def test_compose_matches_sequential_application(seed):
    a = kraus_to_choi(KrausSet([unitary(3, seed)]))
    b = kraus_to_choi(random_io_instrument(3, 2, seed + 1))
    rho = random_state(3, seed + 2)
    both = compose(b, a)
    assert np.max(np.abs(apply_choi(both, rho) - apply_choi(b, apply_choi(a, rho)))) <= 1e-9


def test_channel_documents_roundtrip():
    ks = random_io_instrument(3, 2, 1)
    back = loads_channel(dumps_channel(ks))
    assert all(np.array_equal(x, y) for x, y in zip(ks.operators, back.operators))
    ch = identity_channel(2)
    doc = channel_to_doc(ch)
    assert doc["kind"] == "choi" and doc["input_dim"] == 2
    assert np.array_equal(channel_from_doc(doc).choi, ch.choi)


def test_channel_document_errors():
    with pytest.raises(MatrixParseError):
        channel_from_doc({"kind": "unitary"})
    with pytest.raises(MatrixParseError, match="input_dim"):
        channel_from_doc({"kind": "kraus", "input_dim": 3, "matrices": channel_to_doc(KrausSet([np.eye(2)]))["matrices"]})
