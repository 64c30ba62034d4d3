from __future__ import annotations

import json

import numpy as np
import pytest

from qsteer.assemblage import (Assemblage, InvalidAssemblage, InvalidMeasurement, MeasurementSet,
                               enumerate_strategies, generate, ghjw_realise, lift_efficiency,
                               pauli_measurements, random_assemblage, random_povm, random_projective)
from qsteer.hermat import X, Y, Z, partial_trace, random_density, tensor, werner

import oracles


@pytest.mark.parametrize("w", [0.0, 0.5, 0.8, 1.0])
def test_werner_xz_closed_form(w):
    a = generate(werner(w), (2, 2), pauli_measurements("XZ"))
    for x, n in enumerate((X, Z)):
        for k in range(2):
            ref = w * (np.eye(2) + (-1) ** k * n.T) / 4 + (1 - w) * np.eye(2) / 4
            assert np.allclose(a.members[x, k], ref)
    a.validate()


def test_product_state_factorizes(rng):
    ra, rb = random_density(2, rng), random_density(3, rng)
    meas = random_povm(2, 2, 3, rng)
    a = generate(tensor(ra, rb), (2, 3), meas)
    for x in range(2):
        for k in range(3):
            assert np.allclose(a.members[x, k], np.trace(meas.elements[x, k] @ ra).real * rb)


def test_generate_fuzz_valid(rng):
    for _ in range(30):
        dA, dB = rng.integers(2, 4, size=2)
        a = random_assemblage(int(dB), int(rng.integers(1, 4)), int(rng.integers(2, 4)), rng, d_A=int(dA))
        a.validate()
        assert np.isclose(np.trace(a.members.sum(axis=1)[0]).real, 1)


def test_generate_errors(rng):
    with pytest.raises(ValueError):
        generate(werner(1), (2, 3), pauli_measurements())
    bad = pauli_measurements().elements.copy()
    bad[0, 0] *= 1.1
    with pytest.raises(InvalidMeasurement):
        generate(werner(1), (2, 2), MeasurementSet(bad))


@pytest.mark.parametrize("m,o,d", [(2, 2, 4), (1, 3, 3), (3, 2, 8)])
def test_strategy_counts(m, o, d):
    st = enumerate_strategies(m, o)
    assert st.d == d
    assert np.allclose(st.table.sum(axis=1), 1)


def test_strategy_order_matches_oracle():
    st = enumerate_strategies(2, 2)
    assert st.outcomes.tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]
    assert np.array_equal(st.table, oracles.strategies(2, 2))
    assert np.array_equal(enumerate_strategies(3, 3).table, oracles.strategies(3, 3))


def test_strategy_cap():
    with pytest.raises(ValueError):
        enumerate_strategies(13, 2)


def test_lift_efficiency_edges():
    a = generate(werner(0.9), (2, 2), pauli_measurements("XZ"))
    one = lift_efficiency(a, 1.0)
    assert np.allclose(one.members[:, :2], a.members) and np.allclose(one.members[:, 2], 0)
    zero = lift_efficiency(a, 0.0)
    assert np.allclose(zero.members[:, :2], 0) and np.allclose(zero.members[:, 2], a.rho_B)
    for eta in np.linspace(0, 1, 7):
        lifted = lift_efficiency(a, eta).validate()
        assert np.allclose(np.trace(lifted.members[:, 2], axis1=1, axis2=2).real, 1 - eta)
    with pytest.raises(ValueError):
        lift_efficiency(a, 1.2)


def test_ghjw_maximally_entangled():
    a = generate(werner(1.0), (2, 2), pauli_measurements("XZ"))
    state, meas = ghjw_realise(a)
    assert np.allclose(partial_trace(state, (2, 2), keep=0), np.eye(2) / 2)
    assert np.allclose(generate(state, (2, 2), meas).members, a.members, atol=1e-8)


def test_ghjw_single_member():
    rho = random_density(2, np.random.default_rng(0))
    a = Assemblage(rho[None, None])
    state, meas = ghjw_realise(a)
    assert np.allclose(meas.elements[0, 0], np.eye(meas.dim))
    assert np.allclose(generate(state, (meas.dim, 2), meas).members, a.members)


def test_ghjw_roundtrip_fuzz(rng):
    for _ in range(50):
        dB = int(rng.integers(2, 4))
        a = random_assemblage(dB, int(rng.integers(1, 4)), int(rng.integers(2, 4)), rng)
        state, meas = ghjw_realise(a)
        assert np.allclose(generate(state, (meas.dim, dB), meas).members, a.members, atol=1e-8)


def test_ghjw_rank_deficient():
    # Bob's reduced state has rank one
    a = generate(tensor(random_density(2, np.random.default_rng(1)), np.diag([1.0, 0, 0])), (2, 3),
                 pauli_measurements("XZ"))
    state, meas = ghjw_realise(a)
    assert meas.dim == 1
    assert np.allclose(generate(state, (1, 3), meas).members, a.members, atol=1e-10)


def test_validate_rejects():
    a = generate(werner(0.8), (2, 2), pauli_measurements("XZ"))
    s = a.members.copy()
    s[0, 0] += 0.01 * np.eye(2)
    with pytest.raises(InvalidAssemblage, match="no-signalling"):
        Assemblage(s).validate()
    with pytest.raises(InvalidAssemblage, match="normalized"):
        Assemblage(2 * a.members).validate()
    s = a.members.copy()
    s[:, 0] -= np.diag([0.3, 0.0])
    s[:, 1] += np.diag([0.3, 0.0])
    with pytest.raises(InvalidAssemblage, match="positive"):
        Assemblage(s).validate()


def test_json_roundtrip(rng):
    a = random_assemblage(3, 2, 3, rng)
    b = Assemblage.from_json(json.loads(json.dumps(a.to_json())))
    assert np.max(np.abs(a.members - b.members)) <= 1e-15
    meas = random_projective(3, 2, rng)
    m2 = MeasurementSet.from_json(json.loads(json.dumps(meas.to_json())))
    assert np.max(np.abs(meas.elements - m2.elements)) <= 1e-15
