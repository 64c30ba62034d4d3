from __future__ import annotations

import json

import numpy as np
import pytest

from qsteer.applications import chsh
from qsteer.assemblage import enumerate_strategies, pauli_measurements, random_projective
from qsteer.hermat import min_eig, partial_transpose, phi_plus, random_density, tensor
from qsteer.lhs_models import octahedron
from qsteer.assemblage import directions_measurements
from qsteer.multipartite import (MultiAssemblage1U, MultiAssemblage2U, generate_1u, generate_2u, ghz_state,
                                 gms_test_1u, gms_test_2u, kext_check, moment_matrix_spec, ms_test_1u, ms_test_2u,
                                 noisy_tripartite, npa_membership, ns_vertices, postquantum_search, pr_box,
                                 pr_box_assemblage, random_biseparable, random_fully_separable, random_functional,
                                 tsirelson_bound, w_state3, white_noise_threshold)

XZ = pauli_measurements("XZ")
XYZ = pauli_measurements("XYZ")


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kext_products_feasible(k, rng):
    members = [tensor(random_density(2, rng), random_density(2, rng)) for _ in range(2)]
    v = kext_check(np.array(members), (2, 2), k)
    assert v.feasible and v.info["certificate_verified"]


def test_kext_phi_plus_infeasible():
    assert not kext_check(phi_plus(), (2, 2), 1).feasible


def test_kext_k1_matches_ppt(rng):
    for _ in range(10):
        rho = random_density(4, rng, rank=int(rng.integers(1, 5)))
        ppt = min_eig(partial_transpose(rho, (2, 2), on=1)) >= 0
        assert kext_check(rho, (2, 2), 1).feasible == ppt


def test_ms_1u_separable_feasible(rng):
    for k in (1, 2):
        rho = random_fully_separable((2, 2, 2), rng)
        v = ms_test_1u(generate_1u(rho, (2, 2, 2), random_projective(2, 2, rng)), k)
        assert v.feasible and v.info["certificate_verified"]


def test_ms_1u_steering_from_ab_pair(rng):
    rho = tensor(phi_plus(), random_density(2, rng))
    assert not ms_test_1u(generate_1u(rho, (2, 2, 2), XZ)).feasible


def test_ms_2u_separable_feasible(rng):
    rho = random_fully_separable((2, 2, 2), rng)
    v = ms_test_2u(generate_2u(rho, (2, 2, 2), XZ, XZ))
    assert v.feasible and v.info["certificate_verified"]


def test_ms_2u_steering_from_bc_pair(rng):
    rho = tensor(random_density(2, rng), phi_plus())
    assert not ms_test_2u(generate_2u(rho, (2, 2, 2), XZ, XZ)).feasible


def test_gms_1u_biseparable_feasible(rng):
    for _ in range(3):
        rho = random_biseparable((2, 2, 2), rng)
        v = gms_test_1u(generate_1u(rho, (2, 2, 2), random_projective(2, 3, rng)))
        assert v.feasible and v.info["certificate_verified"]


def test_gms_2u_biseparable_feasible(rng):
    rho = random_biseparable((2, 2, 2), rng)
    v = gms_test_2u(generate_2u(rho, (2, 2, 2), random_projective(2, 2, rng), random_projective(2, 2, rng)))
    assert v.feasible and v.info["certificate_verified"]
    pa = v.certificate["pi_A"]
    assert min(np.linalg.eigvalsh(pa.reshape(-1, 2, 2)).min(), 0) >= -1e-6


def test_gms_2u_scenario_restricted(rng):
    a = generate_2u(random_biseparable((2, 2, 2), rng), (2, 2, 2), XYZ, XZ)
    with pytest.raises(ValueError):
        gms_test_2u(a)


def test_relaxation_monotone_in_k():
    for w in (0.3, 0.4, 0.5):
        a = generate_1u(noisy_tripartite(ghz_state(), w), (2, 2, 2), XYZ)
        # slack values are not comparable across levels; only the verdict is
        v1, v2 = ms_test_1u(a, 1), ms_test_1u(a, 2)
        if not v1.feasible:
            assert not v2.feasible


def test_threshold_ordering():
    for psi in (ghz_state(), w_state3()):
        assert white_noise_threshold(psi, "ms", 1) <= white_noise_threshold(psi, "gms", 1) + 1e-6
    # any GMS-infeasible point of the family lies above the MS threshold
    ms = white_noise_threshold(ghz_state(), "ms", 1)
    a = generate_1u(noisy_tripartite(ghz_state(), 0.6), (2, 2, 2), XYZ)
    assert not gms_test_1u(a).feasible and 0.6 > ms


def test_ns_vertices():
    t = ns_vertices()
    assert t.table.shape == (24, 2, 2, 2, 2)
    st = enumerate_strategies(2, 2)
    for lam, p in enumerate(t.table):
        sa = p.sum(axis=3)
        sb = p.sum(axis=1)
        assert np.array_equal(sa[:, :, 0], sa[:, :, 1])
        assert np.array_equal(sb[0], sb[1])
        assert np.all(p.sum(axis=(1, 3)) == 1)
        if t.local[lam]:
            mu, nu = divmod(lam, st.d)
            assert np.array_equal(p, np.einsum("xa,yb->xayb", st.table[:, :, mu], st.table[:, :, nu]))
    assert np.array_equal(t.table[16], pr_box())


def test_json_roundtrip(rng):
    rho = random_density(8, rng)
    a1 = generate_1u(rho, (2, 2, 2), XZ)
    b1 = MultiAssemblage1U.from_json(json.loads(json.dumps(a1.to_json())))
    assert np.allclose(a1.members, b1.members, atol=1e-15)
    a2 = generate_2u(rho, (2, 2, 2), XZ, XYZ)
    b2 = MultiAssemblage2U.from_json(json.loads(json.dumps(a2.to_json())))
    assert np.allclose(a2.members, b2.members, atol=1e-15)


def test_npa_quantum_feasible(rng):
    for _ in range(3):
        a = generate_2u(random_density(8, rng), (2, 2, 2), random_projective(2, 2, rng), random_projective(2, 2, rng))
        for k in (1, 2):
            v = npa_membership(a, k)
            assert v.feasible and v.info["certificate_verified"]


def test_npa_pr_box_rejected():
    v = npa_membership(pr_box_assemblage(), 2)
    assert not v.feasible
    F = v.certificate["separating_functional"]
    a = pr_box_assemblage()
    assert np.real(np.einsum("xaybij,xaybji->", F, a.members)) > tsirelson_bound(F, 2) - 1e-6


def test_npa_consistency_blocks(rng):
    a = generate_2u(random_density(8, rng), (2, 2, 2), XZ, XZ)
    v = npa_membership(a, 1)
    G, strings = v.certificate["moment_matrix"], v.certificate["strings"]
    d = a.d_C
    blk = lambda i, j: G[i * d:(i + 1) * d, j * d:(j + 1) * d]
    assert np.allclose(blk(0, 0), a.rho_C, atol=1e-6)
    for i, (wa, wb) in enumerate(strings):
        if len(wa) == 1 and not wb:
            (x, k), = wa
            assert np.allclose(blk(i, 0), a.marginal_A[x, k], atol=1e-6)
        if len(wb) == 1 and not wa:
            (y, k), = wb
            assert np.allclose(blk(i, 0), a.marginal_B[y, k], atol=1e-6)


def test_moment_matrix_sizes():
    sizes = [len(moment_matrix_spec(2, 2, 2, 2, k).strings) for k in range(4)]
    assert sizes[0] == 1 and sizes[1] == 5
    assert all(b >= a for a, b in zip(sizes, sizes[1:]))


def test_tsirelson_chsh():
    F = np.einsum("abxy,cd->xaybcd", chsh().coefficients, np.eye(2))
    b1, b2 = tsirelson_bound(F, 1), tsirelson_bound(F, 2)
    assert 2 * np.sqrt(2) - 1e-6 <= b2 <= b1 + 1e-6 <= 4 + 1e-6
    assert abs(b2 - 2 * np.sqrt(2)) <= 1e-3


def test_tsirelson_psd_functional(rng):
    G = rng.normal(size=(2, 2, 2, 2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2, 2, 2, 2))
    F = G @ np.conj(np.swapaxes(G, -1, -2))
    assert tsirelson_bound(F, 1) >= 0


def test_postquantum_trivial_and_sound(rng):
    charlie = directions_measurements(octahedron())
    res = postquantum_search(np.zeros((2, 2, 2, 2, 3, 3)), charlie, 1.0)
    assert abs(res.beta) <= 1e-6 and not res.post_quantum
    res = postquantum_search(random_functional(rng), charlie, 1 / np.sqrt(3))
    assert res.post_quantum == (res.beta > res.beta_Q + 1e-6)
    assert res.assemblage.members.shape == (2, 2, 2, 2, 3, 3)
