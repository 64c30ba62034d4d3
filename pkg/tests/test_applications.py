from __future__ import annotations

import numpy as np
import pytest

from qsteer.applications import (BellFunctional, bell_seesaw, bell_value, chsh, global_guessing, local_guessing,
                                 max_bell_violation, negativity, negativity_lower_bound)
from qsteer.assemblage import (Assemblage, generate, pauli_measurements, random_assemblage,
                               random_lhs_assemblage)
from qsteer.detect import check_lhs
from qsteer.hermat import phi_plus, werner

import oracles

ZB = np.array([np.diag([1.0, 0]), np.diag([0, 1.0])])


def werner_xz(w):
    return generate(werner(w), (2, 2), pauli_measurements("XZ"))


def test_lhs_guessing_is_one(rng):
    for _ in range(5):
        res = local_guessing(random_lhs_assemblage(2, 2, 2, rng))
        assert abs(res.p_guess - 1) <= 1e-7


@pytest.mark.parametrize("w", [1.0, 0.9])
def test_local_guessing_explicit_attack(w):
    a = werner_xz(w)
    res = local_guessing(a)
    sigma, p = oracles.explicit_attack(a.members, res.eve_strategy)
    assert np.max(np.abs(sigma - a.members)) <= 1e-6
    assert abs(p - res.p_guess) <= 1e-4
    _, p_ref = oracles.local_guessing_branches(a.members)
    assert abs(p_ref - res.p_guess) <= 1e-4


def test_local_guessing_werner_profile():
    ps = [local_guessing(werner_xz(w)).p_guess for w in np.linspace(0.5, 1, 11)]
    assert all(b <= a + 1e-7 for a, b in zip(ps, ps[1:]))
    for w in (0.5, 0.6, 0.7, 1 / np.sqrt(2)):
        assert abs(local_guessing(werner_xz(w)).p_guess - 1) <= 1e-6


def test_guessing_soundness(rng):
    for _ in range(5):
        a = random_assemblage(2, 2, 2, rng)
        res = local_guessing(a)
        assert np.allclose(res.eve_strategy.sum(axis=0), a.members, atol=1e-8)
        p = sum(np.trace(res.eve_strategy[e, 0, e]).real for e in range(a.o))
        assert abs(p - res.p_guess) <= 1e-8
        if res.p_guess < 1 - 1e-6:
            assert check_lhs(a).demonstrates_steering


def test_global_deterministic_single_member():
    a = Assemblage(np.diag([1.0, 0])[None, None])
    assert abs(global_guessing(a, 0, ZB).p_guess - 1) <= 1e-7


def test_global_pure_hidden_state_unbiased_bob():
    # Eve knows Alice's outcome, but Bob's Z outcome on |+> is intrinsically random
    plus = np.full((2, 2), 0.5)
    s = np.zeros((2, 2, 2, 2))
    s[0, 0] = s[1, 1] = plus
    assert abs(global_guessing(Assemblage(s), 0, ZB).p_guess - 0.5) <= 1e-7


def test_global_guessing_explicit_attack():
    a = werner_xz(1.0)
    res = global_guessing(a, 0, ZB)
    sigma, p = oracles.explicit_attack(a.members, res.eve_strategy, bob=ZB)
    assert np.max(np.abs(sigma - a.members)) <= 1e-6
    assert abs(p - res.p_guess) <= 1e-4
    assert abs(res.p_guess - 0.25) <= 1e-6


def test_guessing_rejects_bad_inputs():
    a = werner_xz(1.0)
    with pytest.raises(ValueError):
        local_guessing(a, x_star=5)
    with pytest.raises(ValueError):
        global_guessing(a, 0, np.eye(2))


def test_chsh_lhs_bound(rng):
    for _ in range(5):
        val, _ = max_bell_violation(random_lhs_assemblage(2, 2, 2, rng), chsh())
        assert val <= 2 + 1e-7


def test_chsh_maximal_violation():
    a = werner_xz(1.0)
    val, bob = max_bell_violation(a, chsh())
    assert abs(val - 2 * np.sqrt(2)) <= 1e-6
    assert abs(val - oracles.bloch_grid_chsh(a.members)) <= 1e-6
    assert abs(bell_value(a, chsh(), bob) - val) <= 1e-9
    assert val <= chsh().algebraic_bound() == 4


def test_bell_seesaw_monotone(rng):
    out = bell_seesaw(random_assemblage(2, 2, 2, rng), chsh())
    h = out["history"]
    assert all(b >= a - 1e-7 for a, b in zip(h, h[1:]))
    assert h[-1] <= 2 * np.sqrt(2) + 1e-6


def test_bell_shape_mismatch():
    with pytest.raises(ValueError):
        max_bell_violation(random_assemblage(2, 3, 2, np.random.default_rng(0)), chsh())


def test_negativity_lhs_zero(rng):
    assert negativity_lower_bound(random_lhs_assemblage(2, 2, 2, rng)) <= 1e-6


def test_negativity_maximally_entangled():
    assert np.isclose(negativity(phi_plus(), (2, 2)), 0.5)
    nb = negativity_lower_bound(werner_xz(1.0), k=1)
    assert 1e-4 < nb <= 0.5 + 1e-6


def test_negativity_monotone_in_k(rng):
    for _ in range(3):
        a = random_assemblage(2, 2, 2, rng)
        assert negativity_lower_bound(a, 1) <= negativity_lower_bound(a, 2) + 1e-6
