from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsteer.hermat import (X, Y, Z, DimensionError, as_hermitian, ghz, is_psd, min_eig, partial_trace,
                           partial_transpose, phi_plus, proj, random_density, tensor, w_state, werner)


def test_tensor_identity():
    assert np.allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_diagonal():
    assert np.allclose(tensor(Z, np.eye(2)), np.diag([1, 1, -1, -1]))


def test_xx_on_phi_plus():
    rho = phi_plus()
    # explicit 4x4 expansion of |phi+><phi+|
    ref = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            ref[i, j] = 0.5
    XX = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]])
    assert np.allclose(rho, ref)
    assert np.isclose(np.trace(tensor(X, X) @ rho).real, np.trace(XX @ ref))
    assert np.isclose(np.trace(tensor(X, X) @ rho).real, 1.0)


def test_tensor_associative(rng):
    a, b, c = (random_density(2, rng) for _ in range(3))
    assert np.allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))


def test_partial_trace_product(rng):
    a = 0.7 * random_density(2, rng)
    b = random_density(3, rng)
    assert np.allclose(partial_trace(tensor(a, b), (2, 3), keep=1), np.trace(a) * b)
    assert np.allclose(partial_trace(tensor(a, b), (2, 3), keep=0), a)


def test_partial_trace_phi_plus():
    assert np.allclose(partial_trace(phi_plus(), (2, 2), keep=1), np.eye(2) / 2)


@pytest.mark.parametrize("w", [0.0, 0.3, 1 / np.sqrt(2), 1.0])
def test_werner_marginal(w):
    rho = werner(w)
    assert np.allclose(partial_trace(rho, (2, 2), keep=1), np.eye(2) / 2)
    assert np.allclose(partial_trace(rho, (2, 2), keep=0), np.eye(2) / 2)


def test_partial_trace_three_parties(rng):
    rho = random_density(8, rng)
    bc = partial_trace(rho, (2, 2, 2), keep=[1, 2])
    c = partial_trace(bc, (2, 2), keep=1)
    assert np.allclose(c, partial_trace(rho, (2, 2, 2), keep=2))
    assert np.isclose(np.trace(bc), 1)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), (2, 3), keep=0)


def test_partial_transpose_product_is_psd(rng):
    rho = tensor(random_density(2, rng), random_density(2, rng))
    assert is_psd(partial_transpose(rho, (2, 2), on=1))


def test_partial_transpose_phi_plus():
    # oracle: eigenvalues of the swap operator / 2
    assert np.isclose(min_eig(partial_transpose(phi_plus(), (2, 2), on=1)), -0.5)
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]) / 2
    assert np.allclose(partial_transpose(phi_plus(), (2, 2), on=0), swap)


def test_partial_transpose_involution_and_full(rng):
    rho = random_density(6, rng)
    pt = partial_transpose(rho, (2, 3), on=0)
    assert np.allclose(partial_transpose(pt, (2, 3), on=0), rho)
    assert np.allclose(partial_transpose(pt, (2, 3), on=1), rho.T)
    assert np.isclose(np.trace(pt), np.trace(rho))


@pytest.mark.parametrize("op,val", [(np.eye(3), 1.0), (Z, -1.0), (Y, -1.0)])
def test_min_eig(op, val):
    assert np.isclose(min_eig(op), val, atol=1e-12)


def test_min_eig_gram(rng):
    A = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    assert min_eig(A @ A.conj().T) >= -1e-12


def test_as_hermitian_rejects_and_symmetrizes():
    with pytest.raises(ValueError):
        as_hermitian(np.array([[0, 1], [0, 0]]))
    H = as_hermitian(np.array([[1, 1 + 1e-12], [1, 0]]))
    assert np.allclose(H, H.conj().T, atol=0)


def test_multipartite_states():
    assert np.isclose(np.trace(ghz(3)).real, 1) and np.isclose(np.trace(w_state(3)).real, 1)
    assert np.allclose(partial_trace(ghz(3), (2, 2, 2), keep=0), np.eye(2) / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_hermiticity_preserved(da, db, seed):
    rng = np.random.default_rng(seed)
    rho = random_density(da * db, rng)
    for out in (partial_trace(rho, (da, db), keep=0), partial_trace(rho, (da, db), keep=1),
                partial_transpose(rho, (da, db), on=0)):
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12
