from __future__ import annotations

import json

import numpy as np
import pytest

from qsteer.cv_moment import (InconsistentData, MomentData, UnderspecifiedData, build_word_list,
                              classical_model_data, cv_steering_test, format_word, gaussian_moment_data,
                              lossy_single_photon, moment_matrix, parse_word, required_moments, tmsv_covariance,
                              wiseman_margin, wiseman_steerable)

import oracles


def test_level_one_words():
    words = build_word_list(2, 2, 1)
    assert [format_word(*w) for w in words] == ["1", "A0", "A1", "B0", "B1"]
    assert build_word_list(2, 2, 0) == [((), ())]


def test_word_count_monotone():
    sizes = [len(build_word_list(2, 2, k)) for k in range(3)]
    assert sizes == sorted(sizes) and sizes[2] == 16


def test_level_one_single_free_entry():
    counts = moment_matrix(2, 2, 1).classify()
    # <A0 A1> = <A1 A0> is the only unknown and it is pinned by Alice commutation
    assert counts == {"data": 13, "algebra": 1, "commutation": 1, "free": 0}


def test_word_format_roundtrip():
    for w in build_word_list(2, 2, 2):
        assert parse_word(format_word(*w)) == w


def test_product_state_feasible():
    V = np.diag([0.8, 0.7, 1.1, 0.5])
    assert cv_steering_test(gaussian_moment_data(V, 1), 1).feasible


def test_classical_models_feasible():
    rng = np.random.default_rng(5)
    for i in range(200):
        data = classical_model_data(rng, k=1 if i % 2 else 2)
        v = cv_steering_test(data, 1 if i % 2 else 2)
        assert v.feasible, i
        assert np.linalg.eigvalsh(v.completion).min() >= -1e-7


def test_pairing_violation_rejected():
    data = gaussian_moment_data(tmsv_covariance(0.3), 1)
    bob = dict(data.bob)
    bob[(0, 1)] = complex(bob[(0, 1)].real, 0.3)
    with pytest.raises(InconsistentData, match="pairing|algebra"):
        MomentData(2, 2, data.moments, bob).validate()
    with pytest.raises(InconsistentData):
        MomentData(2, 2, {(0, 1, 0, 1): 0.2 + 0.5j}, {}).validate()


def test_missing_moments_listed():
    data = gaussian_moment_data(tmsv_covariance(0.3), 1)
    with pytest.raises(UnderspecifiedData) as err:
        cv_steering_test(data, 2)
    assert err.value.missing and "A0 A0 A0" in str(err.value)
    need = required_moments(2, 2, 2)
    assert len(need) > len(required_moments(2, 2, 1))


def test_json_roundtrip():
    data = gaussian_moment_data(tmsv_covariance(0.4, 0.8), 1)
    back = MomentData.from_json(json.loads(json.dumps(data.to_json())))
    assert cv_steering_test(back, 1).mu_star == pytest.approx(cv_steering_test(data, 1).mu_star, abs=1e-9)


def test_wiseman_closed_form():
    for r, eta in [(0.3, 1.0), (0.5, 0.7), (0.8, 0.9)]:
        n = oracles.wiseman_boundary_noise(r, eta)
        assert abs(wiseman_margin(tmsv_covariance(r, eta, n))) <= 1e-12


def test_inequality_certificate():
    bad = gaussian_moment_data(tmsv_covariance(0.6), 1)
    v = cv_steering_test(bad, 1)
    assert v.demonstrates_steering and wiseman_steerable(tmsv_covariance(0.6))
    ineq = v.inequality
    assert ineq.evaluate(bad) < 0
    assert np.linalg.eigvalsh(ineq.Z).min() >= -1e-8
    rng = np.random.default_rng(9)
    for _ in range(20):
        r, eta = rng.uniform(0.05, 1.0), rng.uniform(0.3, 1.0)
        n = oracles.wiseman_boundary_noise(r, eta) + rng.uniform(0.0, 1.0)
        ok = gaussian_moment_data(tmsv_covariance(r, eta, n), 1)
        assert cv_steering_test(ok, 1).feasible
        assert ineq.evaluate(ok) >= -1e-8


def test_lossy_single_photon_boundary():
    assert cv_steering_test(lossy_single_photon(0.8), 2).demonstrates_steering
    assert cv_steering_test(lossy_single_photon(0.6), 2).feasible
    lo, hi = 0.6, 0.8
    while hi - lo > 1e-3:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if cv_steering_test(lossy_single_photon(mid), 2).demonstrates_steering else (mid, hi)
    assert abs((lo + hi) / 2 - 2 / 3) <= 5e-3


def test_level_validation():
    with pytest.raises(ValueError):
        cv_steering_test(gaussian_moment_data(tmsv_covariance(0.3), 1), 3)
